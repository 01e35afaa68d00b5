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

#include "mie/sweep.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "mie/errors.hpp"

namespace mie {

namespace fs = std::filesystem;

void SweepConfig::validate() const {
    if (depths.empty() || n_m.empty() || presets.empty()) {
        throw ConfigError("sweep lists (depths, n_m, presets) must be nonempty");
    }
    if (realizations < 1) {
        throw ConfigError("realizations must be >= 1");
    }
    if (n_e == 0) {
        throw ConfigError("n_e must be positive");
    }
    for (size_t n : n_m) {
        if (n == 0) {
            throw ConfigError("every n_m must be positive");
        }
    }
    for (const auto &p : presets) {
        ModelConfig::from_preset(p);
    }
    if (out_dir.empty()) {
        throw ConfigError("out_dir is required");
    }
    if (workers < 1) {
        throw ConfigError("workers must be >= 1");
    }
    for (int ti = 0; ti < static_cast<int>(depths.size()); ti++) {
        cell_circuit(*this, 0, ti).validate();
    }
    train.validate();
}

SweepConfig SweepConfig::from_json(const Json &j) {
    try {
        SweepConfig c;
        c.geometry = parse_geometry(j.value("geometry", std::string("all-to-all-1d")));
        if (c.geometry == Geometry::Square2D) {
            c.rows = j.at("rows").get<int>();
            c.cols = j.at("cols").get<int>();
            c.num_qubits = c.rows * c.cols;
        } else {
            c.num_qubits = j.at("num_qubits").get<int>();
        }
        c.probe_a = j.value("probe_a", -1);
        c.probe_b = j.value("probe_b", -1);
        c.depths = j.at("depths").get<std::vector<double>>();
        c.n_m = j.at("n_m").get<std::vector<size_t>>();
        c.presets = j.at("presets").get<std::vector<std::string>>();
        c.n_e = j.at("n_e").get<size_t>();
        c.realizations = j.value("realizations", 1);
        c.master_seed = j.contains("master_seed") ? seed_from_json(j.at("master_seed")) : 0;
        c.out_dir = j.value("out_dir", std::string());
        if (j.contains("train")) {
            c.train = train_config_from_json(j.at("train"));
        }
        c.workers = j.value("workers", 1);
        c.validate();
        return c;
    } catch (const Json::exception &e) {
        throw ConfigError(std::string("invalid sweep config: ") + e.what());
    }
}

Json SweepConfig::to_json() const {
    Json j;
    j["geometry"] = geometry_name(geometry);
    if (geometry == Geometry::Square2D) {
        j["rows"] = rows;
        j["cols"] = cols;
    } else {
        j["num_qubits"] = num_qubits;
    }
    j["probe_a"] = probe_a;
    j["probe_b"] = probe_b;
    j["depths"] = depths;
    j["n_m"] = n_m;
    j["presets"] = presets;
    j["n_e"] = n_e;
    j["realizations"] = realizations;
    j["master_seed"] = seed_to_string(master_seed);
    j["out_dir"] = out_dir.string();
    j["train"] = mie::to_json(train);
    j["workers"] = workers;
    return j;
}

std::string CellKey::name() const {
    return "r" + std::to_string(realization) + "_t" + std::to_string(t_index) + "_nm" + std::to_string(n_m_index) +
           "_p" + std::to_string(preset_index);
}

CellSeeds cell_seeds(uint64_t master, const CellKey &k) {
    auto r = static_cast<uint64_t>(k.realization);
    auto t = static_cast<uint64_t>(k.t_index);
    auto n = static_cast<uint64_t>(k.n_m_index);
    auto p = static_cast<uint64_t>(k.preset_index);
    return {derive_seed(master, "circuit", {r, t}), derive_seed(master, "train-data", {r, t, n}),
            derive_seed(master, "eval-data", {r, t}), derive_seed(master, "train", {r, t, n, p})};
}

CircuitSpec cell_circuit(const SweepConfig &c, int realization, int t_index) {
    uint64_t seed = cell_seeds(c.master_seed, {realization, t_index, 0, 0}).circuit;
    double depth = c.depths.at(t_index);
    CircuitSpec spec = c.geometry == Geometry::Square2D ? make_square_spec(c.rows, c.cols, depth, seed)
                                                        : make_all_to_all_spec(c.num_qubits, depth, seed);
    if (c.probe_a >= 0) {
        spec.probe_a = c.probe_a;
    }
    if (c.probe_b >= 0) {
        spec.probe_b = c.probe_b;
    }
    return spec;
}

CellPaths cell_paths(const SweepConfig &c, const CellKey &k) {
    CellPaths p;
    p.dir = c.out_dir / "cells" / k.name();
    p.train_data = p.dir / "train.ndjson";
    p.eval_data = p.dir / "eval.ndjson";
    p.checkpoint = p.dir / "model.ckpt.json";
    p.history = history_path_for(p.checkpoint);
    p.report = p.dir / "report.json";
    return p;
}

// ---- CSV ----

std::string results_csv_header() {
    return "realization,t,n_m,preset,n_p,delta,delta_stderr,out_entropy,final_loss,dataset_fp,checkpoint_fp,"
           "format_version";
}

std::string result_row_csv(const ResultRow &r) {
    std::ostringstream s;
    s << r.realization << ',' << format_double(r.t) << ',' << r.n_m << ',' << r.preset << ',' << r.n_p << ','
      << format_double(r.delta) << ',' << format_double(r.delta_stderr) << ',' << format_double(r.out_entropy) << ','
      << format_double(r.final_loss) << ',' << r.dataset_fingerprint << ',' << r.checkpoint_fingerprint << ','
      << r.format_version;
    return s.str();
}

std::string aggregate_csv_header() {
    return "t,n_m,preset,delta_mean,delta_se_over_M,M";
}

std::string aggregate_row_csv(const AggregateRow &r) {
    std::ostringstream s;
    s << format_double(r.t) << ',' << r.n_m << ',' << r.preset << ',' << format_double(r.delta_mean) << ','
      << format_double(r.delta_se_over_m) << ',' << r.m;
    return s.str();
}

namespace {

std::vector<std::string> split_csv(const std::string &line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream s(line);
    while (std::getline(s, field, ',')) {
        out.push_back(field);
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path &path, const std::string &header) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::string line;
    if (!std::getline(in, line) || line != header) {
        throw FormatError(path.string() + ": unexpected CSV header");
    }
    std::vector<std::vector<std::string>> rows;
    size_t width = split_csv(header).size();
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        auto f = split_csv(line);
        if (f.size() != width) {
            throw FormatError(path.string() + ": row with " + std::to_string(f.size()) + " fields");
        }
        rows.push_back(std::move(f));
    }
    return rows;
}

void write_lines(const fs::path &path, const std::string &header, const std::vector<std::string> &lines) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) {
            throw Error("cannot open " + tmp.string() + " for writing");
        }
        out << header << '\n';
        for (const auto &l : lines) {
            out << l << '\n';
        }
        if (!out) {
            throw Error("write failed: " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

}  // namespace

void write_results_csv(const std::vector<ResultRow> &rows, const fs::path &path) {
    std::vector<std::string> lines;
    for (const auto &r : rows) {
        lines.push_back(result_row_csv(r));
    }
    write_lines(path, results_csv_header(), lines);
}

std::vector<ResultRow> read_results_csv(const fs::path &path) {
    std::vector<ResultRow> out;
    try {
        for (const auto &f : read_csv(path, results_csv_header())) {
            ResultRow r;
            r.realization = std::stoi(f[0]);
            r.t = std::stod(f[1]);
            r.n_m = std::stoull(f[2]);
            r.preset = f[3];
            r.n_p = std::stoull(f[4]);
            r.delta = std::stod(f[5]);
            r.delta_stderr = std::stod(f[6]);
            r.out_entropy = std::stod(f[7]);
            r.final_loss = std::stod(f[8]);
            r.dataset_fingerprint = f[9];
            r.checkpoint_fingerprint = f[10];
            r.format_version = std::stoi(f[11]);
            r.exact_mie = std::numeric_limits<double>::quiet_NaN();
            out.push_back(std::move(r));
        }
    } catch (const std::invalid_argument &) {
        throw FormatError(path.string() + ": non-numeric field");
    } catch (const std::out_of_range &) {
        throw FormatError(path.string() + ": numeric field out of range");
    }
    return out;
}

void write_aggregate_csv(const std::vector<AggregateRow> &rows, const fs::path &path) {
    std::vector<std::string> lines;
    for (const auto &r : rows) {
        lines.push_back(aggregate_row_csv(r));
    }
    write_lines(path, aggregate_csv_header(), lines);
}

std::vector<AggregateRow> read_aggregate_csv(const fs::path &path) {
    std::vector<AggregateRow> out;
    try {
        for (const auto &f : read_csv(path, aggregate_csv_header())) {
            out.push_back({std::stod(f[0]), std::stoull(f[1]), f[2], std::stod(f[3]), std::stod(f[4]),
                           std::stoi(f[5])});
        }
    } catch (const std::invalid_argument &) {
        throw FormatError(path.string() + ": non-numeric field");
    } catch (const std::out_of_range &) {
        throw FormatError(path.string() + ": numeric field out of range");
    }
    return out;
}

std::vector<AggregateRow> aggregate_rows(const std::vector<ResultRow> &rows) {
    for (const auto &r : rows) {
        if (r.format_version != rows.front().format_version) {
            throw IncompatibleInputs("refusing to aggregate rows with format versions " +
                                     std::to_string(rows.front().format_version) + " and " +
                                     std::to_string(r.format_version));
        }
    }
    std::vector<AggregateRow> out;
    std::vector<std::vector<double>> groups;
    for (const auto &r : rows) {
        size_t g = 0;
        while (g < out.size() && !(out[g].t == r.t && out[g].n_m == r.n_m && out[g].preset == r.preset)) {
            g++;
        }
        if (g == out.size()) {
            out.push_back({r.t, r.n_m, r.preset, 0.0, 0.0, 0});
            groups.emplace_back();
        }
        groups[g].push_back(r.delta);
    }
    for (size_t g = 0; g < out.size(); g++) {
        const auto &d = groups[g];
        double mean = 0.0;
        for (double x : d) {
            mean += x;
        }
        mean /= static_cast<double>(d.size());
        double se = 0.0;
        if (d.size() > 1) {
            double ss = 0.0;
            for (double x : d) {
                ss += (x - mean) * (x - mean);
            }
            se = std::sqrt(ss / static_cast<double>(d.size() - 1)) / std::sqrt(static_cast<double>(d.size()));
        }
        out[g].delta_mean = mean;
        out[g].delta_se_over_m = se;
        out[g].m = static_cast<int>(d.size());
    }
    return out;
}

Json result_row_to_json(const ResultRow &r) {
    Json j;
    j["format_version"] = r.format_version;
    j["realization"] = r.realization;
    j["t"] = r.t;
    j["n_m"] = r.n_m;
    j["preset"] = r.preset;
    j["n_p"] = r.n_p;
    j["delta"] = r.delta;
    j["delta_stderr"] = r.delta_stderr;
    j["out_entropy"] = r.out_entropy;
    j["final_loss"] = r.final_loss;
    j["dataset_fp"] = r.dataset_fingerprint;
    j["checkpoint_fp"] = r.checkpoint_fingerprint;
    if (std::isfinite(r.exact_mie)) {
        j["exact_mie"] = r.exact_mie;
    } else {
        j["exact_mie"] = nullptr;
    }
    return j;
}

ResultRow result_row_from_json(const Json &j) {
    try {
        ResultRow r;
        r.format_version = j.at("format_version").get<int>();
        r.realization = j.at("realization").get<int>();
        r.t = j.at("t").get<double>();
        r.n_m = j.at("n_m").get<size_t>();
        r.preset = j.at("preset").get<std::string>();
        r.n_p = j.at("n_p").get<size_t>();
        r.delta = j.at("delta").get<double>();
        r.delta_stderr = j.at("delta_stderr").get<double>();
        r.out_entropy = j.at("out_entropy").get<double>();
        r.final_loss = j.at("final_loss").get<double>();
        r.dataset_fingerprint = j.at("dataset_fp").get<std::string>();
        r.checkpoint_fingerprint = j.at("checkpoint_fp").get<std::string>();
        r.exact_mie = j.at("exact_mie").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                  : j.at("exact_mie").get<double>();
        return r;
    } catch (const Json::exception &e) {
        throw FormatError(std::string("invalid cell report: ") + e.what());
    }
}

// ---- sweep driver ----

namespace {

std::optional<ResultRow> load_report(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        return std::nullopt;
    }
    try {
        ResultRow r = result_row_from_json(Json::parse(in));
        if (r.format_version != kResultsFormatVersion) {
            return std::nullopt;
        }
        return r;
    } catch (const std::exception &) {
        return std::nullopt;
    }
}

ResultRow run_cell(const SweepConfig &c, const CellKey &k) {
    CellPaths paths = cell_paths(c, k);
    fs::create_directories(paths.dir);
    CellSeeds seeds = cell_seeds(c.master_seed, k);
    CircuitSpec spec = cell_circuit(c, k.realization, k.t_index);
    Statevector state = prepare_state(spec);

    Dataset train_ds = generate_dataset(state, spec, c.n_m[k.n_m_index], seeds.train_data);
    write_dataset(train_ds, paths.train_data);
    Dataset eval_ds = generate_dataset(state, spec, c.n_e, seeds.eval_data);
    write_dataset(eval_ds, paths.eval_data);

    ModelConfig mc = ModelConfig::from_preset(c.presets[k.preset_index]);
    TrainConfig tc = c.train;
    tc.seed = seeds.train;
    std::vector<TrainingExample> examples = training_examples(train_ds);
    Rng rng(tc.seed);
    TrainReport report = train(examples, mc, tc, rng);

    Checkpoint ckpt;
    ckpt.model_config = mc;
    ckpt.train_config = tc;
    ckpt.params = std::move(report.params);
    ckpt.train_seed = tc.seed;
    ckpt.dataset_fingerprint = dataset_fingerprint(train_ds.header);
    ckpt.num_qubits = spec.num_qubits;
    ckpt.probe_a = spec.probe_a;
    ckpt.probe_b = spec.probe_b;
    ckpt.last_train_loss = report.loss_history.empty() ? 0.0 : report.loss_history.back();
    Model model = ckpt.model();
    ckpt.final_loss = evaluate_loss(model, examples, tc.loss_kind);
    write_checkpoint(ckpt, paths.checkpoint);
    report.params = {};
    write_history_csv(report, paths.history);

    EvalReport ev = estimate_delta(model, eval_ds.records);

    ResultRow row;
    row.realization = k.realization;
    row.t = spec.depth;
    row.n_m = c.n_m[k.n_m_index];
    row.preset = mc.preset;
    row.n_p = ckpt.params.size();
    row.delta = ev.delta_mean;
    row.delta_stderr = ev.delta_stderr;
    row.out_entropy = ev.mean_output_entropy;
    row.final_loss = ckpt.final_loss;
    row.dataset_fingerprint = ckpt.dataset_fingerprint;
    row.checkpoint_fingerprint = checkpoint_fingerprint(ckpt);
    row.exact_mie = spec.num_qubits <= kDefaultEnumerationCap
                        ? exact_mie(state, spec.probe_a, spec.probe_b)
                        : std::numeric_limits<double>::quiet_NaN();

    // The report is written last: its presence marks the cell complete.
    fs::path tmp = paths.report;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        out << result_row_to_json(row).dump(1) << '\n';
        if (!out) {
            throw Error("write failed: " + tmp.string());
        }
    }
    fs::rename(tmp, paths.report);
    return row;
}

}  // namespace

SweepOutcome run_sweep(const SweepConfig &c, std::ostream *log) {
    c.validate();
    fs::create_directories(c.out_dir);
    std::vector<CellKey> keys;
    for (int r = 0; r < c.realizations; r++) {
        for (int ti = 0; ti < static_cast<int>(c.depths.size()); ti++) {
            for (int ni = 0; ni < static_cast<int>(c.n_m.size()); ni++) {
                for (int pi = 0; pi < static_cast<int>(c.presets.size()); pi++) {
                    keys.push_back({r, ti, ni, pi});
                }
            }
        }
    }

    enum class Status { Pending, Computed, Skipped, Failed };
    std::vector<Status> status(keys.size(), Status::Pending);
    std::vector<ResultRow> rows(keys.size());
    std::mutex log_mutex;
    auto say = [&](const std::string &msg) {
        if (log) {
            std::lock_guard<std::mutex> lock(log_mutex);
            *log << msg << std::endl;
        }
    };

    std::atomic<size_t> next{0};
    auto worker = [&]() {
        for (size_t i = next++; i < keys.size(); i = next++) {
            const CellKey &k = keys[i];
            if (auto done = load_report(cell_paths(c, k).report)) {
                rows[i] = *done;
                status[i] = Status::Skipped;
                say("skip " + k.name());
                continue;
            }
            try {
                rows[i] = run_cell(c, k);
                status[i] = Status::Computed;
                say("done " + k.name() + " delta=" + format_double(rows[i].delta));
            } catch (const std::exception &e) {
                status[i] = Status::Failed;
                say("FAILED " + k.name() + ": " + e.what());
            }
        }
    };
    int n_workers = std::min<int>(c.workers, static_cast<int>(keys.size()));
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n_workers; w++) {
            pool.emplace_back(worker);
        }
        for (auto &t : pool) {
            t.join();
        }
    }

    SweepOutcome out;
    for (size_t i = 0; i < keys.size(); i++) {
        switch (status[i]) {
            case Status::Computed:
                out.computed.push_back(keys[i].name());
                out.rows.push_back(rows[i]);
                break;
            case Status::Skipped:
                out.skipped.push_back(keys[i].name());
                out.rows.push_back(rows[i]);
                break;
            default:
                out.failed.push_back(keys[i].name());
        }
    }
    write_results_csv(out.rows, c.out_dir / "results.csv");
    if (!out.rows.empty()) {
        out.aggregate = aggregate_rows(out.rows);
    }
    write_aggregate_csv(out.aggregate, c.out_dir / "aggregate.csv");
    return out;
}

}  // namespace mie
