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

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>

#include "mie/dataset.hpp"
#include "mie/errors.hpp"

namespace mie {

namespace {

std::string format_utc(std::time_t t) {
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

std::string timestamp_now(bool wall_clock) {
    if (const char *epoch = std::getenv("SOURCE_DATE_EPOCH")) {
        return format_utc(static_cast<std::time_t>(std::strtoll(epoch, nullptr, 10)));
    }
    if (wall_clock) {
        return format_utc(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now()));
    }
    return format_utc(0);
}

Dataset generate_dataset(const Statevector &state, const CircuitSpec &spec, size_t num_records, uint64_t seed,
                         bool wall_clock) {
    spec.validate();
    if (state.num_qubits() != spec.num_qubits) {
        throw ShapeMismatch("statevector does not match the circuit spec");
    }
    Dataset ds;
    ds.header.circuit = spec;
    ds.header.num_records = num_records;
    ds.header.seed = seed;
    ds.header.created = timestamp_now(wall_clock);
    RecordSampler sampler(state, spec.probe_a, spec.probe_b);
    ds.records.reserve(num_records);
    for (size_t i = 0; i < num_records; i++) {
        Rng rng(derive_seed(seed, "shot", {i}));
        ds.records.push_back(sampler.sample(rng));
    }
    return ds;
}

Dataset generate_dataset(const CircuitSpec &spec, size_t num_records, uint64_t seed, bool wall_clock) {
    return generate_dataset(prepare_state(spec), spec, num_records, seed, wall_clock);
}

Json header_to_json(const DatasetHeader &h) {
    Json j;
    j["format_version"] = h.format_version;
    j["kind"] = "mie-dataset";
    j["circuit"] = to_json(h.circuit);
    j["n_records"] = h.num_records;
    j["seed"] = seed_to_string(h.seed);
    j["probe_a"] = h.circuit.probe_a;
    j["probe_b"] = h.circuit.probe_b;
    j["created"] = h.created;
    return j;
}

DatasetHeader header_from_json(const Json &j) {
    try {
        if (j.value("kind", std::string()) != "mie-dataset") {
            throw FormatError("not a dataset file");
        }
        DatasetHeader h;
        h.format_version = j.at("format_version").get<int>();
        if (h.format_version != kDatasetFormatVersion) {
            throw FormatError("unsupported dataset format_version " + std::to_string(h.format_version));
        }
        h.circuit = circuit_from_json(j.at("circuit"));
        h.num_records = j.at("n_records").get<size_t>();
        h.seed = seed_from_json(j.at("seed"));
        if (j.at("probe_a").get<int>() != h.circuit.probe_a || j.at("probe_b").get<int>() != h.circuit.probe_b) {
            throw FormatError("header probe indices disagree with the circuit");
        }
        h.created = j.value("created", std::string());
        h.circuit.validate();
        return h;
    } catch (const Json::exception &e) {
        throw FormatError(std::string("invalid dataset header: ") + e.what());
    } catch (const ConfigError &e) {
        throw FormatError(std::string("invalid dataset header: ") + e.what());
    }
}

std::string dataset_fingerprint(const DatasetHeader &header) {
    Json j = header_to_json(header);
    j.erase("created");
    return sha256_hex(j.dump());
}

Json record_to_json(const MeasurementRecord &r) {
    Json j;
    Json env = Json::array();
    for (int8_t o : r.env_outcomes) {
        env.push_back(static_cast<int>(o));
    }
    j["env"] = std::move(env);
    j["basis_a"] = std::string(1, pauli_char(r.basis_a));
    j["basis_b"] = std::string(1, pauli_char(r.basis_b));
    j["out_a"] = static_cast<int>(r.outcome_a);
    j["out_b"] = static_cast<int>(r.outcome_b);
    return j;
}

namespace {

int8_t outcome_from_json(const Json &j) {
    int v = j.get<int>();
    if (v != 1 && v != -1) {
        throw UnknownSymbol("outcome must be +1 or -1, got " + std::to_string(v));
    }
    return static_cast<int8_t>(v);
}

Pauli basis_from_json(const Json &j) {
    std::string s = j.get<std::string>();
    if (s.size() != 1) {
        throw UnknownSymbol("basis must be one of X, Y, Z, got '" + s + "'");
    }
    return parse_pauli(s[0]);
}

}  // namespace

MeasurementRecord record_from_json(const Json &j) {
    try {
        MeasurementRecord r;
        for (const auto &o : j.at("env")) {
            r.env_outcomes.push_back(outcome_from_json(o));
        }
        r.basis_a = basis_from_json(j.at("basis_a"));
        r.basis_b = basis_from_json(j.at("basis_b"));
        r.outcome_a = outcome_from_json(j.at("out_a"));
        r.outcome_b = outcome_from_json(j.at("out_b"));
        return r;
    } catch (const Json::exception &e) {
        throw FormatError(std::string("invalid record: ") + e.what());
    }
}

void write_dataset(const Dataset &ds, const std::filesystem::path &path) {
    if (ds.header.num_records != ds.records.size()) {
        throw FormatError("header n_records does not match the record count");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open " + path.string() + " for writing");
    }
    out << header_to_json(ds.header).dump() << '\n';
    for (const auto &r : ds.records) {
        out << record_to_json(r).dump() << '\n';
    }
    if (!out) {
        throw Error("write failed: " + path.string());
    }
}

Dataset read_dataset(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    Dataset ds;
    std::string line;
    if (!std::getline(in, line)) {
        throw FormatError(path.string() + ": empty dataset file");
    }
    try {
        ds.header = header_from_json(Json::parse(line));
    } catch (const Json::parse_error &e) {
        throw FormatError(path.string() + ": header is not JSON: " + e.what());
    }
    int expected_env = ds.header.circuit.num_qubits - 2;
    ds.records.reserve(ds.header.num_records);
    size_t line_no = 1;
    while (std::getline(in, line)) {
        line_no++;
        if (line.empty()) {
            continue;
        }
        MeasurementRecord r;
        try {
            r = record_from_json(Json::parse(line));
            r.validate(expected_env);
        } catch (const Json::parse_error &e) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const Error &e) {
            throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        ds.records.push_back(std::move(r));
    }
    if (ds.records.size() != ds.header.num_records) {
        throw FormatError(path.string() + ": header declares " + std::to_string(ds.header.num_records) +
                          " records, file has " + std::to_string(ds.records.size()));
    }
    return ds;
}

std::vector<TrainingExample> training_examples(const Dataset &ds) {
    std::vector<TrainingExample> out;
    out.reserve(ds.records.size());
    for (const auto &r : ds.records) {
        out.push_back({tokenize(r.env_outcomes), snapshot(r).matrix});
    }
    return out;
}

}  // namespace mie
