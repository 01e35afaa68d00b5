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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mie/quantum_sim.hpp"
#include "mie/serialization.hpp"
#include "mie/shadows.hpp"
#include "mie/training.hpp"

namespace mie {

inline constexpr int kDatasetFormatVersion = 1;

struct DatasetHeader {
    int format_version = kDatasetFormatVersion;
    CircuitSpec circuit;
    size_t num_records = 0;
    uint64_t seed = 0;
    /// ISO-8601 UTC. Taken from SOURCE_DATE_EPOCH when set, so that
    /// regenerating a dataset gives a byte-identical file; the Unix epoch
    /// otherwise unless a wall-clock stamp is requested.
    std::string created;

    int probe_a() const { return circuit.probe_a; }
    int probe_b() const { return circuit.probe_b; }
};

struct Dataset {
    DatasetHeader header;
    std::vector<MeasurementRecord> records;
};

std::string timestamp_now(bool wall_clock);

/// Records from one prepared state. Shot i draws from its own stream
/// derive_seed(seed, "shot", {i}), so the file does not depend on how
/// generation is scheduled.
Dataset generate_dataset(const Statevector &state, const CircuitSpec &spec, size_t num_records, uint64_t seed,
                         bool wall_clock = false);
/// Builds the circuit and computes the statevector once.
Dataset generate_dataset(const CircuitSpec &spec, size_t num_records, uint64_t seed, bool wall_clock = false);

Json header_to_json(const DatasetHeader &header);
DatasetHeader header_from_json(const Json &j);
/// SHA-256 of the canonical header with the timestamp removed.
std::string dataset_fingerprint(const DatasetHeader &header);

Json record_to_json(const MeasurementRecord &record);
MeasurementRecord record_from_json(const Json &j);

/// Newline-delimited JSON: the header line, then one record per line.
void write_dataset(const Dataset &dataset, const std::filesystem::path &path);
/// Throws FormatError on version, count or length mismatches.
Dataset read_dataset(const std::filesystem::path &path);

std::vector<TrainingExample> training_examples(const Dataset &dataset);

}  // namespace mie
