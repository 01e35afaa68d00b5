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
#include <iosfwd>
#include <string>
#include <vector>

#include "mie/checkpoint.hpp"
#include "mie/dataset.hpp"
#include "mie/evaluation.hpp"
#include "mie/quantum_sim.hpp"
#include "mie/serialization.hpp"
#include "mie/training.hpp"

namespace mie {

inline constexpr int kResultsFormatVersion = 1;

struct SweepConfig {
    Geometry geometry = Geometry::AllToAll1D;
    int num_qubits = 0;
    int rows = 0;
    int cols = 0;
    /// Negative means the geometry default.
    int probe_a = -1;
    int probe_b = -1;
    std::vector<double> depths;
    std::vector<size_t> n_m;
    std::vector<std::string> presets;
    size_t n_e = 0;
    int realizations = 1;
    uint64_t master_seed = 0;
    std::filesystem::path out_dir;
    /// Its seed field is ignored; each cell derives its own.
    TrainConfig train;
    int workers = 1;

    void validate() const;
    static SweepConfig from_json(const Json &j);
    Json to_json() const;
};

struct CellKey {
    int realization = 0;
    int t_index = 0;
    int n_m_index = 0;
    int preset_index = 0;

    std::string name() const;
};

/// Circuit realization r at depth index ti; shared by every N_m and preset.
CircuitSpec cell_circuit(const SweepConfig &config, int realization, int t_index);

/// Seeds of one cell. Each depends only on the axes it varies with, so
/// adding entries to any sweep list leaves existing cells untouched.
struct CellSeeds {
    uint64_t circuit;
    uint64_t train_data;
    uint64_t eval_data;
    uint64_t train;
};
CellSeeds cell_seeds(uint64_t master_seed, const CellKey &key);

struct ResultRow {
    int realization = 0;
    double t = 0.0;
    size_t n_m = 0;
    std::string preset;
    size_t n_p = 0;
    double delta = 0.0;
    double delta_stderr = 0.0;
    double out_entropy = 0.0;
    double final_loss = 0.0;
    std::string dataset_fingerprint;
    std::string checkpoint_fingerprint;
    int format_version = kResultsFormatVersion;
    /// Exact outcome-averaged MIE of the realization, NaN when beyond the
    /// enumeration cap. Not part of the CSV.
    double exact_mie = 0.0;
};

struct AggregateRow {
    double t = 0.0;
    size_t n_m = 0;
    std::string preset;
    double delta_mean = 0.0;
    /// Sample standard deviation over realizations divided by √M; 0 for M = 1.
    double delta_se_over_m = 0.0;
    int m = 0;
};

/// Groups by (t, n_m, preset) in first-appearance order. Throws
/// IncompatibleInputs when rows carry different format versions.
std::vector<AggregateRow> aggregate_rows(const std::vector<ResultRow> &rows);

std::string results_csv_header();
std::string result_row_csv(const ResultRow &row);
std::string aggregate_csv_header();
std::string aggregate_row_csv(const AggregateRow &row);
void write_results_csv(const std::vector<ResultRow> &rows, const std::filesystem::path &path);
std::vector<ResultRow> read_results_csv(const std::filesystem::path &path);
void write_aggregate_csv(const std::vector<AggregateRow> &rows, const std::filesystem::path &path);
std::vector<AggregateRow> read_aggregate_csv(const std::filesystem::path &path);

Json result_row_to_json(const ResultRow &row);
ResultRow result_row_from_json(const Json &j);

struct SweepOutcome {
    std::vector<ResultRow> rows;
    std::vector<AggregateRow> aggregate;
    std::vector<std::string> computed;
    std::vector<std::string> skipped;
    std::vector<std::string> failed;
};

/// Runs (or resumes) a sweep. A cell counts as done when its report.json
/// parses; anything else in its directory is regenerated. Writes
/// results.csv and aggregate.csv under out_dir, rows in cell order.
SweepOutcome run_sweep(const SweepConfig &config, std::ostream *log = nullptr);

/// Paths of one cell's artifacts.
struct CellPaths {
    std::filesystem::path dir, train_data, eval_data, checkpoint, history, report;
};
CellPaths cell_paths(const SweepConfig &config, const CellKey &key);

}  // namespace mie
