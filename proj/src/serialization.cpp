// Copyright 2026 The mielearn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mie/serialization.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstdio>

#include "mie/errors.hpp"

namespace mie {

Json to_json(const CircuitSpec &spec) {
    Json j;
    j["num_qubits"] = spec.num_qubits;
    j["geometry"] = geometry_name(spec.geometry);
    if (spec.geometry == Geometry::Square2D) {
        j["rows"] = spec.rows;
        j["cols"] = spec.cols;
    }
    j["depth"] = spec.depth;
    j["probe_a"] = spec.probe_a;
    j["probe_b"] = spec.probe_b;
    j["seed"] = seed_to_string(spec.seed);
    return j;
}

CircuitSpec circuit_from_json(const Json &j) {
    try {
        Geometry g = parse_geometry(j.value("geometry", std::string("all-to-all-1d")));
        double depth = j.at("depth").get<double>();
        uint64_t seed = j.contains("seed") ? seed_from_json(j.at("seed")) : 0;
        CircuitSpec spec;
        if (g == Geometry::Square2D) {
            spec = make_square_spec(j.at("rows").get<int>(), j.at("cols").get<int>(), depth, seed);
            if (j.contains("num_qubits") && j.at("num_qubits").get<int>() != spec.num_qubits) {
                throw ConfigError("num_qubits does not equal rows*cols");
            }
        } else {
            spec = make_all_to_all_spec(j.at("num_qubits").get<int>(), depth, seed);
        }
        spec.probe_a = j.value("probe_a", spec.probe_a);
        spec.probe_b = j.value("probe_b", spec.probe_b);
        return spec;
    } catch (const Json::exception &e) {
        throw ConfigError(std::string("invalid circuit spec: ") + e.what());
    }
}

Json to_json(const ModelConfig &c) {
    Json j;
    j["preset"] = c.preset;
    j["hidden_dim"] = c.hidden_dim;
    j["ffn_dim"] = c.ffn_dim;
    j["num_layers"] = c.num_layers;
    j["num_heads"] = c.num_heads;
    j["max_seq_len"] = c.max_seq_len;
    j["dropout_rate"] = c.dropout_rate;
    j["attn_dropout_rate"] = c.attn_dropout_rate;
    j["epsilon_mix"] = c.epsilon_mix;
    j["vocab_size"] = c.vocab_size;
    return j;
}

ModelConfig model_config_from_json(const Json &j) {
    try {
        ModelConfig c = j.contains("preset") && !j.at("preset").get<std::string>().empty()
                            ? ModelConfig::from_preset(j.at("preset").get<std::string>())
                            : ModelConfig{};
        c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
        c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
        c.num_layers = j.value("num_layers", c.num_layers);
        c.num_heads = j.value("num_heads", c.num_heads);
        c.max_seq_len = j.value("max_seq_len", c.max_seq_len);
        c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
        c.attn_dropout_rate = j.value("attn_dropout_rate", c.attn_dropout_rate);
        c.epsilon_mix = j.value("epsilon_mix", c.epsilon_mix);
        c.vocab_size = j.value("vocab_size", c.vocab_size);
        c.validate();
        return c;
    } catch (const Json::exception &e) {
        throw ConfigError(std::string("invalid model config: ") + e.what());
    }
}

Json to_json(const TrainConfig &c) {
    Json j;
    j["loss"] = loss_name(c.loss_kind);
    j["lr_init"] = c.lr_init;
    j["lr_min"] = c.lr_min;
    j["weight_decay"] = c.weight_decay;
    j["warmup_fraction"] = c.warmup_fraction;
    j["clip_norm"] = c.clip_norm;
    j["epochs"] = c.epochs;
    j["adam_beta1"] = c.adam_beta1;
    j["adam_beta2"] = c.adam_beta2;
    j["adam_eps"] = c.adam_eps;
    j["seed"] = seed_to_string(c.seed);
    j["chunk_size"] = c.chunk_size;
    return j;
}

TrainConfig train_config_from_json(const Json &j, TrainConfig c) {
    try {
        if (j.contains("loss")) {
            c.loss_kind = parse_loss(j.at("loss").get<std::string>());
        }
        c.lr_init = j.value("lr_init", c.lr_init);
        c.lr_min = j.value("lr_min", c.lr_min);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.warmup_fraction = j.value("warmup_fraction", c.warmup_fraction);
        c.clip_norm = j.value("clip_norm", c.clip_norm);
        c.epochs = j.value("epochs", c.epochs);
        c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
        c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
        c.adam_eps = j.value("adam_eps", c.adam_eps);
        if (j.contains("seed")) {
            c.seed = seed_from_json(j.at("seed"));
        }
        c.chunk_size = j.value("chunk_size", c.chunk_size);
        c.num_threads = j.value("threads", c.num_threads);
        c.validate();
        return c;
    } catch (const Json::exception &e) {
        throw ConfigError(std::string("invalid train config: ") + e.what());
    }
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; i++) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 15]);
    }
    return out;
}

std::string encode_doubles(std::span<const double> values) {
    std::string bytes(values.size() * 8, '\0');
    for (size_t i = 0; i < values.size(); i++) {
        uint64_t bits = std::bit_cast<uint64_t>(values[i]);
        for (int k = 0; k < 8; k++) {
            bytes[8 * i + k] = static_cast<char>((bits >> (8 * k)) & 0xFF);
        }
    }
    std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
    int n = EVP_EncodeBlock(reinterpret_cast<unsigned char *>(out.data()),
                            reinterpret_cast<const unsigned char *>(bytes.data()), static_cast<int>(bytes.size()));
    out.resize(n);
    return out;
}

std::vector<double> decode_doubles(std::string_view encoded) {
    if (encoded.size() % 4 != 0) {
        throw FormatError("base64 payload length is not a multiple of 4");
    }
    std::string bytes(encoded.size() / 4 * 3, '\0');
    int n = EVP_DecodeBlock(reinterpret_cast<unsigned char *>(bytes.data()),
                            reinterpret_cast<const unsigned char *>(encoded.data()), static_cast<int>(encoded.size()));
    if (n < 0) {
        throw FormatError("invalid base64 payload");
    }
    // EVP_DecodeBlock keeps the zero bytes that stand in for '=' padding.
    size_t padding = 0;
    if (!encoded.empty() && encoded.back() == '=') {
        padding = encoded.size() >= 2 && encoded[encoded.size() - 2] == '=' ? 2 : 1;
    }
    size_t len = static_cast<size_t>(n) - padding;
    if (len % 8 != 0) {
        throw FormatError("payload is not a whole number of float64 values");
    }
    std::vector<double> values(len / 8);
    for (size_t i = 0; i < values.size(); i++) {
        uint64_t bits = 0;
        for (int k = 0; k < 8; k++) {
            bits |= uint64_t(static_cast<unsigned char>(bytes[8 * i + k])) << (8 * k);
        }
        values[i] = std::bit_cast<double>(bits);
    }
    return values;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string seed_to_string(uint64_t seed) {
    return std::to_string(seed);
}

uint64_t seed_from_json(const Json &j) {
    try {
        if (j.is_string()) {
            return std::stoull(j.get<std::string>());
        }
        if (j.is_number_unsigned() || j.is_number_integer()) {
            return j.get<uint64_t>();
        }
    } catch (const std::exception &) {
    }
    throw ConfigError("seed must be an unsigned integer or a decimal string");
}

}  // namespace mie
