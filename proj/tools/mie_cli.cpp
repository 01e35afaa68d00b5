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

// Command-line driver: gen, train, eval, oracle, sweep.
//
// Each subcommand takes an optional JSON config file; flags override the
// values read from it. Exit status is 0 on success, 1 on runtime failures
// (including any failed sweep cell) and 2 on configuration errors.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "mie/checkpoint.hpp"
#include "mie/dataset.hpp"
#include "mie/errors.hpp"
#include "mie/evaluation.hpp"
#include "mie/sweep.hpp"

namespace fs = std::filesystem;
using namespace mie;

namespace {

constexpr const char *kVersion = "0.1.0";

Json load_config(const std::string &path) {
    if (path.empty()) {
        return Json::object();
    }
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file " + path);
    }
    try {
        Json j = Json::parse(in);
        if (!j.is_object()) {
            throw ConfigError(path + ": config must be a JSON object");
        }
        return j;
    } catch (const Json::parse_error &e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::string require_path(const Json &cfg, const std::string &key, const std::string &flag) {
    if (!flag.empty()) {
        return flag;
    }
    if (cfg.contains(key) && cfg.at(key).is_string()) {
        return cfg.at(key).get<std::string>();
    }
    throw ConfigError("missing '" + key + "' (config key or flag)");
}

void emit_json(const Json &j, const std::string &out_path) {
    if (out_path.empty()) {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
        throw Error("cannot open " + out_path + " for writing");
    }
    out << j.dump(2) << '\n';
}

struct Common {
    std::string config;
    std::string out;
    std::optional<uint64_t> seed;
    std::optional<int> epochs;
};

void add_common(CLI::App *cmd, Common &c, bool with_epochs) {
    cmd->add_option("config", c.config, "JSON config file");
    cmd->add_option("--out,-o", c.out, "Output path");
    cmd->add_option("--seed", c.seed, "Seed override");
    if (with_epochs) {
        cmd->add_option("--epochs", c.epochs, "Training epoch override");
    }
}

int cmd_gen(const Common &c, std::optional<size_t> records, bool wall_clock) {
    Json cfg = load_config(c.config);
    if (!cfg.contains("circuit")) {
        throw ConfigError("gen: config needs a 'circuit' object");
    }
    CircuitSpec spec = circuit_from_json(cfg.at("circuit"));
    spec.validate();
    size_t n = records ? *records : cfg.value("n_records", size_t{0});
    if (n == 0) {
        throw ConfigError("gen: n_records must be positive");
    }
    uint64_t seed = c.seed ? *c.seed : (cfg.contains("seed") ? seed_from_json(cfg.at("seed")) : 0);
    std::string out = require_path(cfg, "out", c.out);
    Dataset ds = generate_dataset(spec, n, seed, wall_clock);
    write_dataset(ds, out);
    std::cerr << "wrote " << n << " records to " << out << " (fingerprint " << dataset_fingerprint(ds.header)
              << ")\n";
    return 0;
}

int cmd_train(const Common &c, const std::string &dataset_flag, const std::string &preset_flag,
              std::optional<int> threads) {
    Json cfg = load_config(c.config);
    std::string dataset_path = require_path(cfg, "dataset", dataset_flag);
    std::string out = require_path(cfg, "out", c.out);
    Json model_json = cfg.value("model", Json::object());
    if (!preset_flag.empty()) {
        model_json = Json{{"preset", preset_flag}};
    }
    if (!model_json.contains("preset") && !model_json.contains("hidden_dim")) {
        model_json["preset"] = "20K";
    }
    ModelConfig mc = model_config_from_json(model_json);
    TrainConfig tc = train_config_from_json(cfg.value("train", Json::object()));
    if (c.seed) {
        tc.seed = *c.seed;
    }
    if (c.epochs) {
        tc.epochs = *c.epochs;
    }
    if (threads) {
        tc.num_threads = *threads;
    }
    tc.validate();

    Dataset ds = read_dataset(dataset_path);
    if (ds.header.circuit.num_qubits - 2 + 1 > mc.max_seq_len) {
        throw IncompatibleInputs("dataset sequences are longer than the model's max_seq_len");
    }
    std::vector<TrainingExample> examples = training_examples(ds);
    Rng rng(tc.seed);
    TrainReport report;
    try {
        report = train(examples, mc, tc, rng);
    } catch (const NumericalFailure &e) {
        throw NumericalFailure(std::string("training failed at ") + e.what());
    }

    Checkpoint ckpt;
    ckpt.model_config = mc;
    ckpt.train_config = tc;
    ckpt.params = std::move(report.params);
    ckpt.train_seed = tc.seed;
    ckpt.dataset_fingerprint = dataset_fingerprint(ds.header);
    ckpt.num_qubits = ds.header.circuit.num_qubits;
    ckpt.probe_a = ds.header.circuit.probe_a;
    ckpt.probe_b = ds.header.circuit.probe_b;
    ckpt.last_train_loss = report.loss_history.empty() ? 0.0 : report.loss_history.back();
    ckpt.final_loss = evaluate_loss(ckpt.model(), examples, tc.loss_kind);
    write_checkpoint(ckpt, out);
    write_history_csv(report, history_path_for(out));
    std::cerr << "final loss " << format_double(ckpt.final_loss) << ", checkpoint " << out << '\n';
    return 0;
}

void check_compatible(const Checkpoint &ckpt, const DatasetHeader &h) {
    std::vector<std::string> bad;
    if (ckpt.num_qubits != h.circuit.num_qubits) {
        bad.push_back("num_qubits (" + std::to_string(ckpt.num_qubits) + " vs " +
                      std::to_string(h.circuit.num_qubits) + ")");
    }
    if (ckpt.probe_a != h.circuit.probe_a) {
        bad.push_back("probe_a (" + std::to_string(ckpt.probe_a) + " vs " + std::to_string(h.circuit.probe_a) +
                      ")");
    }
    if (ckpt.probe_b != h.circuit.probe_b) {
        bad.push_back("probe_b (" + std::to_string(ckpt.probe_b) + " vs " + std::to_string(h.circuit.probe_b) +
                      ")");
    }
    if (!bad.empty()) {
        std::string msg = "checkpoint and dataset disagree on:";
        for (const auto &b : bad) {
            msg += " " + b;
        }
        throw IncompatibleInputs(msg);
    }
}

int cmd_eval(const Common &c, const std::string &ckpt_flag, const std::string &dataset_flag) {
    Json cfg = load_config(c.config);
    std::string ckpt_path = require_path(cfg, "checkpoint", ckpt_flag);
    std::string dataset_path = require_path(cfg, "dataset", dataset_flag);
    std::string out = c.out.empty() ? cfg.value("out", std::string()) : c.out;

    Checkpoint ckpt = read_checkpoint(ckpt_path);
    Dataset ds = read_dataset(dataset_path);
    check_compatible(ckpt, ds.header);
    std::string fp = dataset_fingerprint(ds.header);
    Json warnings = Json::array();
    if (!ckpt.dataset_fingerprint.empty() && fp == ckpt.dataset_fingerprint) {
        std::string w = "evaluation dataset has the same fingerprint as the training dataset";
        std::cerr << "warning: " << w << '\n';
        warnings.push_back(w);
    }
    EvalReport ev = estimate_delta(ckpt.model(), ds.records);

    Json j;
    j["format_version"] = kResultsFormatVersion;
    j["delta_mean"] = ev.delta_mean;
    j["delta_stderr"] = ev.delta_stderr;
    j["mean_output_entropy"] = ev.mean_output_entropy;
    j["mean_output_entropy_a"] = ev.mean_output_entropy_a;
    j["n_e"] = ds.header.num_records;
    j["circuit"] = to_json(ds.header.circuit);
    j["model_config"] = to_json(ckpt.model_config);
    j["n_params"] = ckpt.params.size();
    j["final_loss"] = ckpt.final_loss;
    j["dataset_fingerprint"] = fp;
    j["train_dataset_fingerprint"] = ckpt.dataset_fingerprint;
    j["checkpoint_fingerprint"] = checkpoint_fingerprint(ckpt);
    j["warnings"] = warnings;
    emit_json(j, out);
    return 0;
}

int cmd_oracle(const Common &c, const std::string &ckpt_flag, int cap) {
    Json cfg = load_config(c.config);
    if (!cfg.contains("circuit")) {
        throw ConfigError("oracle: config needs a 'circuit' object");
    }
    CircuitSpec spec = circuit_from_json(cfg.at("circuit"));
    if (c.seed) {
        spec.seed = *c.seed;
    }
    spec.validate();
    std::string ckpt_path = ckpt_flag.empty() ? cfg.value("checkpoint", std::string()) : ckpt_flag;
    std::string out = c.out.empty() ? cfg.value("out", std::string()) : c.out;
    if (spec.num_qubits > cap) {
        throw SystemTooLarge("oracle: " + std::to_string(spec.num_qubits) + " qubits exceed the enumeration cap " +
                             std::to_string(cap));
    }

    Statevector state = prepare_state(spec);
    Json j;
    j["format_version"] = kResultsFormatVersion;
    j["circuit"] = to_json(spec);
    if (ckpt_path.empty()) {
        j["exact_mie"] = exact_mie(state, spec.probe_a, spec.probe_b, cap);
    } else {
        Checkpoint ckpt = read_checkpoint(ckpt_path);
        if (ckpt.num_qubits != spec.num_qubits || ckpt.probe_a != spec.probe_a || ckpt.probe_b != spec.probe_b) {
            throw IncompatibleInputs("checkpoint was trained for a different qubit count or probe pair");
        }
        ExactBounds b = exact_bounds(ckpt.model(), state, spec.probe_a, spec.probe_b, cap);
        j["exact_mie"] = b.mie;
        j["exact_delta"] = b.delta;
        j["bounds"] = {{"upper", b.upper}, {"mie", b.mie}, {"lower", b.lower}, {"all_hold", b.all_hold}};
        j["num_outcomes"] = b.num_outcomes;
        j["checkpoint_fingerprint"] = checkpoint_fingerprint(ckpt);
    }
    emit_json(j, out);
    return 0;
}

int cmd_sweep(const Common &c, std::optional<int> workers, std::optional<int> threads) {
    if (c.config.empty()) {
        throw ConfigError("sweep: a config file is required");
    }
    Json cfg = load_config(c.config);
    if (c.seed) {
        cfg["master_seed"] = seed_to_string(*c.seed);
    }
    if (!c.out.empty()) {
        cfg["out_dir"] = c.out;
    }
    if (c.epochs) {
        cfg["train"]["epochs"] = *c.epochs;
    }
    if (threads) {
        cfg["train"]["threads"] = *threads;
    }
    if (workers) {
        cfg["workers"] = *workers;
    }
    SweepConfig sc = SweepConfig::from_json(cfg);
    SweepOutcome res = run_sweep(sc, &std::cerr);
    std::cerr << res.computed.size() << " computed, " << res.skipped.size() << " skipped, " << res.failed.size()
              << " failed\n";
    for (const auto &a : res.aggregate) {
        std::cerr << "  " << aggregate_row_csv(a) << '\n';
    }
    return res.failed.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Learned estimators of measurement-induced entanglement"};
    app.require_subcommand(0, 1);
    bool version = false;
    app.add_flag("--version", version, "Print version and file format versions");

    Common gen_c, train_c, eval_c, oracle_c, sweep_c;
    std::optional<size_t> records;
    bool wall_clock = false;
    auto *gen = app.add_subcommand("gen", "Simulate a circuit and write measurement records");
    add_common(gen, gen_c, false);
    gen->add_option("--records,-n", records, "Number of records");
    gen->add_flag("--wall-clock", wall_clock, "Stamp the header with the current time");

    std::string train_dataset, preset;
    std::optional<int> train_threads;
    auto *train_cmd = app.add_subcommand("train", "Train an estimator on a dataset");
    add_common(train_cmd, train_c, true);
    train_cmd->add_option("--dataset", train_dataset, "Training dataset");
    train_cmd->add_option("--preset", preset, "Model preset (20K, 70K, 270K, 540K)");
    train_cmd->add_option("--threads", train_threads, "Worker threads");

    std::string eval_ckpt, eval_dataset;
    auto *eval = app.add_subcommand("eval", "Estimate the uncertainty metric on held-out records");
    add_common(eval, eval_c, false);
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint file");
    eval->add_option("--dataset", eval_dataset, "Evaluation dataset");

    std::string oracle_ckpt;
    int cap = kDefaultEnumerationCap;
    auto *oracle = app.add_subcommand("oracle", "Exact MIE and bounds by outcome enumeration");
    add_common(oracle, oracle_c, false);
    oracle->add_option("--checkpoint", oracle_ckpt, "Optional checkpoint");
    oracle->add_option("--cap", cap, "Largest qubit count enumerated exactly");

    std::optional<int> workers, sweep_threads;
    auto *sweep = app.add_subcommand("sweep", "Run or resume a parameter sweep");
    add_common(sweep, sweep_c, true);
    sweep->add_option("--workers", workers, "Cells run in parallel");
    sweep->add_option("--threads", sweep_threads, "Training threads per cell");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    if (version) {
        std::cout << "mie " << kVersion << "\n"
                  << "dataset format_version " << kDatasetFormatVersion << "\n"
                  << "checkpoint format_version " << kCheckpointFormatVersion << "\n"
                  << "results format_version " << kResultsFormatVersion << "\n";
        return 0;
    }

    try {
        if (gen->parsed()) {
            return cmd_gen(gen_c, records, wall_clock);
        }
        if (train_cmd->parsed()) {
            return cmd_train(train_c, train_dataset, preset, train_threads);
        }
        if (eval->parsed()) {
            return cmd_eval(eval_c, eval_ckpt, eval_dataset);
        }
        if (oracle->parsed()) {
            return cmd_oracle(oracle_c, oracle_ckpt, cap);
        }
        if (sweep->parsed()) {
            return cmd_sweep(sweep_c, workers, sweep_threads);
        }
        std::cout << app.help();
        return 2;
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const InvalidCircuit &e) {
        // Circuits only come from configs, so a bad one is a config error.
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
