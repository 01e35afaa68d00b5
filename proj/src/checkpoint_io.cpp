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

#include <fstream>
#include <sstream>

#include "mie/checkpoint.hpp"
#include "mie/errors.hpp"

namespace mie {

Json checkpoint_to_json(const Checkpoint &c) {
    Json j;
    j["format_version"] = kCheckpointFormatVersion;
    j["kind"] = "mie-checkpoint";
    j["model_config"] = to_json(c.model_config);
    j["train_config"] = to_json(c.train_config);
    Json order = Json::array();
    for (const auto &b : c.params.layout.blocks()) {
        order.push_back({{"name", b.name}, {"rows", b.rows}, {"cols", b.cols}});
    }
    j["param_order"] = std::move(order);
    j["n_params"] = c.params.size();
    j["params"] = encode_doubles(c.params.values);
    j["final_loss"] = c.final_loss;
    j["last_train_loss"] = c.last_train_loss;
    j["train_seed"] = seed_to_string(c.train_seed);
    j["dataset_fingerprint"] = c.dataset_fingerprint;
    j["num_qubits"] = c.num_qubits;
    j["probe_a"] = c.probe_a;
    j["probe_b"] = c.probe_b;
    return j;
}

Checkpoint checkpoint_from_json(const Json &j) {
    try {
        if (j.value("kind", std::string()) != "mie-checkpoint") {
            throw FormatError("not a checkpoint file");
        }
        int version = j.at("format_version").get<int>();
        if (version != kCheckpointFormatVersion) {
            throw FormatError("unsupported checkpoint format_version " + std::to_string(version));
        }
        Checkpoint c;
        c.model_config = model_config_from_json(j.at("model_config"));
        c.train_config = train_config_from_json(j.at("train_config"));
        c.params = ModelParams::zeros(c.model_config);
        const auto &order = j.at("param_order");
        const auto &blocks = c.params.layout.blocks();
        if (order.size() != blocks.size()) {
            throw FormatError("param_order does not match the model config");
        }
        for (size_t i = 0; i < blocks.size(); i++) {
            if (order[i].at("name").get<std::string>() != blocks[i].name ||
                order[i].at("rows").get<size_t>() != blocks[i].rows ||
                order[i].at("cols").get<size_t>() != blocks[i].cols) {
                throw FormatError("param_order entry " + std::to_string(i) + " does not match block " +
                                  blocks[i].name);
            }
        }
        std::vector<double> values = decode_doubles(j.at("params").get<std::string>());
        if (values.size() != c.params.size()) {
            throw FormatError("payload holds " + std::to_string(values.size()) + " values, model needs " +
                              std::to_string(c.params.size()));
        }
        c.params.values.assign(values.begin(), values.end());
        c.final_loss = j.at("final_loss").get<double>();
        c.last_train_loss = j.value("last_train_loss", c.final_loss);
        c.train_seed = seed_from_json(j.at("train_seed"));
        c.dataset_fingerprint = j.value("dataset_fingerprint", std::string());
        c.num_qubits = j.at("num_qubits").get<int>();
        c.probe_a = j.at("probe_a").get<int>();
        c.probe_b = j.at("probe_b").get<int>();
        return c;
    } catch (const Json::exception &e) {
        throw FormatError(std::string("invalid checkpoint: ") + e.what());
    } catch (const ConfigError &e) {
        throw FormatError(std::string("invalid checkpoint: ") + e.what());
    }
}

void write_checkpoint(const Checkpoint &c, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    out << checkpoint_to_json(c).dump(1) << '\n';
    if (!out) {
        throw Error("write failed: " + path.string());
    }
}

Checkpoint read_checkpoint(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    try {
        return checkpoint_from_json(Json::parse(in));
    } catch (const Json::parse_error &e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string checkpoint_fingerprint(const Checkpoint &c) {
    return sha256_hex(encode_doubles(c.params.values));
}

Checkpoint maximally_mixed_checkpoint(const ModelConfig &config, int num_qubits, int probe_a, int probe_b) {
    Checkpoint c;
    c.model_config = config;
    c.params = ModelParams::zeros(config);
    auto gain = [&](const std::string &name) {
        for (double &g : c.params.block(name)) {
            g = 1.0;
        }
    };
    for (int l = 0; l < config.num_layers; l++) {
        gain("layers." + std::to_string(l) + ".ln1.gain");
        gain("layers." + std::to_string(l) + ".ln2.gain");
    }
    auto bias = c.params.block("head.bias");
    for (int k = 0; k < 4; k++) {
        bias[2 * (4 * k + k)] = 1.0;
    }
    c.num_qubits = num_qubits;
    c.probe_a = probe_a;
    c.probe_b = probe_b;
    c.final_loss = -0.25;
    c.last_train_loss = -0.25;
    return c;
}

void write_history_csv(const TrainReport &report, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    out << "epoch,loss,lr,grad_norm\n";
    for (size_t e = 0; e < report.loss_history.size(); e++) {
        out << e << ',' << format_double(report.loss_history[e]) << ',' << format_double(report.lr_trace[e]) << ','
            << format_double(report.grad_norm_trace[e]) << '\n';
    }
}

std::filesystem::path history_path_for(const std::filesystem::path &checkpoint_path) {
    std::filesystem::path p = checkpoint_path;
    p.replace_extension();
    return p.string() + ".history.csv";
}

}  // namespace mie
