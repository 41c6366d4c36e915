#pragma once

// `chronos` command-line front end. Exit codes: 0 success, 1 domain or
// validation failure, 2 I/O or configuration failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "chronos/chronos.hpp"

namespace chronos::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kDomainFailure = 1, kIoFailure = 2 };

/// Settings shared by all subcommands. Built-in defaults, then the
/// --config document, then explicit flags.
struct RunConfig {
    ChronosConfig model;
    TrainConfig train;
    std::size_t k_stat = kDefaultKStat;
    std::string grid = "none";
    bool group_by_question = false;
    std::size_t k = 128;
    std::size_t repeats = 16;
    double eta = 0.1;
    std::size_t bins = 20;
    std::size_t batch = 30;
    SynthSpec synth;
    std::string input, output, checkpoint;
};

inline const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys{
        "l_tail", "n_proj", "n_conv", "kernel_lengths", "n_blocks", "mlp_hidden", "k_stat",
        "learning_rate", "max_epochs", "batch_size", "patience", "ensemble_size", "seed", "selection",
        "grid", "group_by_question", "k", "repeats", "eta", "bins", "batch", "synth",
        "input", "output", "checkpoint"};
    return keys;
}

inline const std::set<std::string>& known_synth_keys() {
    static const std::set<std::string> keys{
        "n_questions", "pool_size", "correct_fraction", "min_length", "max_length", "base_level", "sigma",
        "amplitude", "extent", "l_tail", "k", "n_distractors", "concentration", "seed"};
    return keys;
}

template <typename T>
void read_key(const nlohmann::json& j, const char* key, T& dst) {
    if (!j.contains(key)) return;
    try {
        dst = j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config key \"") + key + "\": " + e.what());
    }
}

inline SelectionSplit parse_selection(const std::string& s) {
    if (s == "test") return SelectionSplit::test;
    if (s == "validation") return SelectionSplit::validation;
    throw ConfigError("selection must be \"test\" or \"validation\", got \"" + s + "\"");
}

inline void apply_config_file(const fs::path& path, RunConfig& rc) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, v] : j.items())
        if (!known_config_keys().contains(key)) throw ConfigError("unknown config key \"" + key + "\"");

    read_key(j, "l_tail", rc.model.l_tail);
    read_key(j, "n_proj", rc.model.n_proj);
    read_key(j, "n_conv", rc.model.n_conv);
    read_key(j, "kernel_lengths", rc.model.kernel_lengths);
    read_key(j, "n_blocks", rc.model.n_blocks);
    read_key(j, "mlp_hidden", rc.model.mlp_hidden);
    read_key(j, "k_stat", rc.k_stat);
    read_key(j, "learning_rate", rc.train.learning_rate);
    read_key(j, "max_epochs", rc.train.max_epochs);
    read_key(j, "batch_size", rc.train.batch_size);
    read_key(j, "patience", rc.train.patience);
    read_key(j, "ensemble_size", rc.train.ensemble_size);
    read_key(j, "seed", rc.train.seed);
    if (j.contains("selection")) {
        std::string s;
        read_key(j, "selection", s);
        rc.train.selection = parse_selection(s);
    }
    read_key(j, "grid", rc.grid);
    read_key(j, "group_by_question", rc.group_by_question);
    read_key(j, "k", rc.k);
    read_key(j, "repeats", rc.repeats);
    read_key(j, "eta", rc.eta);
    read_key(j, "bins", rc.bins);
    read_key(j, "batch", rc.batch);
    read_key(j, "input", rc.input);
    read_key(j, "output", rc.output);
    read_key(j, "checkpoint", rc.checkpoint);
    if (j.contains("synth")) {
        const auto& s = j["synth"];
        if (!s.is_object()) throw ConfigError("\"synth\" must be an object");
        for (const auto& [key, v] : s.items())
            if (!known_synth_keys().contains(key)) throw ConfigError("unknown synth key \"" + key + "\"");
        auto& sp = rc.synth;
        read_key(s, "n_questions", sp.n_questions);
        read_key(s, "pool_size", sp.pool_size);
        read_key(s, "correct_fraction", sp.correct_fraction);
        read_key(s, "min_length", sp.min_length);
        read_key(s, "max_length", sp.max_length);
        read_key(s, "base_level", sp.base_level);
        read_key(s, "sigma", sp.sigma);
        read_key(s, "amplitude", sp.amplitude);
        read_key(s, "extent", sp.extent);
        read_key(s, "l_tail", sp.l_tail);
        read_key(s, "k", sp.k);
        read_key(s, "n_distractors", sp.n_distractors);
        read_key(s, "concentration", sp.concentration);
        read_key(s, "seed", sp.seed);
    }
}

/// Flag values; unset optionals leave the config/default value in place.
struct Flags {
    std::optional<std::string> input, output, checkpoint, config, grid, selection, log, csv, hist, gold, benchmark;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> k, repeats, ensemble_size, ltail, kstat, bins, batch, epochs, batch_size, patience;
    std::optional<double> eta, lr;
    bool group_by_question = false;
};

inline RunConfig resolve(const Flags& f) {
    RunConfig rc;
    if (f.config) apply_config_file(*f.config, rc);
    if (f.input) rc.input = *f.input;
    if (f.output) rc.output = *f.output;
    if (f.checkpoint) rc.checkpoint = *f.checkpoint;
    if (f.seed) {
        rc.train.seed = *f.seed;
        rc.synth.seed = *f.seed;
    }
    if (f.k) rc.k = *f.k;
    if (f.repeats) rc.repeats = *f.repeats;
    if (f.eta) rc.eta = *f.eta;
    if (f.grid) rc.grid = *f.grid;
    if (f.ensemble_size) rc.train.ensemble_size = *f.ensemble_size;
    if (f.ltail) {
        rc.model.l_tail = *f.ltail;
        rc.synth.l_tail = *f.ltail;
    }
    if (f.kstat) rc.k_stat = *f.kstat;
    if (f.bins) rc.bins = *f.bins;
    if (f.batch) rc.batch = *f.batch;
    if (f.epochs) rc.train.max_epochs = *f.epochs;
    if (f.batch_size) rc.train.batch_size = *f.batch_size;
    if (f.patience) rc.train.patience = *f.patience;
    if (f.lr) rc.train.learning_rate = *f.lr;
    if (f.selection) rc.train.selection = parse_selection(*f.selection);
    if (f.group_by_question) rc.group_by_question = true;
    rc.train.threads = default_thread_count();
    return rc;
}

inline void require_input(const std::string& path, const char* what) {
    if (path.empty()) throw ConfigError(std::string("missing --") + what);
    if (!fs::exists(path)) throw IoError(std::string(what) + " not found: " + path);
}

inline void require_output(const std::string& path, const char* what) {
    if (path.empty()) throw ConfigError(std::string("missing --") + what);
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty() && !fs::is_directory(parent))
        throw IoError(std::string(what) + " directory does not exist: " + parent.string());
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    return out;
}

// ---------------------------------------------------------------------------

inline int cmd_validate(const RunConfig& rc, std::ostream& out) {
    require_input(rc.input, "input");
    const auto rep = validate_jsonl(rc.input);
    for (const auto& d : rep.diagnostics) out << d.to_string() << '\n';
    out << rep.records << " records, " << rep.diagnostics.size() << " problems\n";
    return rep.ok() ? kOk : kDomainFailure;
}

inline int cmd_synth(const RunConfig& rc, std::ostream& out) {
    require_output(rc.output, "output");
    const Dataset ds = generate(rc.synth);
    save_jsonl(rc.output, ds);
    auto side = open_out(rc.output + ".spec.json");
    side << synth_spec_json(rc.synth).dump(2) << '\n';
    out << ds.trajectories.size() << " trajectories written to " << rc.output << '\n';
    return kOk;
}

inline int cmd_train(const RunConfig& rc, std::ostream& out, const std::optional<std::string>& log_path) {
    require_input(rc.input, "input");
    require_output(rc.checkpoint, "checkpoint");
    if (rc.grid != "none" && rc.grid != "default") throw ConfigError("--grid must be \"none\" or \"default\"");
    rc.model.validate();
    rc.train.validate();

    const Dataset ds = load_jsonl(rc.input);
    if (rc.k_stat > ds.k_stat)
        throw ValidationError("k_stat=" + std::to_string(rc.k_stat) + " exceeds stored k=" + std::to_string(ds.k_stat));
    const auto split = split_dataset(ds.trajectories, {}, rc.train.seed, rc.group_by_question);
    const auto data = prepare_split(ds.trajectories, split, rc.k_stat, rc.model.l_tail);

    std::vector<ChronosConfig> grid = rc.grid == "default" ? default_grid(rc.model) : std::vector{rc.model};
    for (const auto& c : grid) c.validate();
    GridResult gr = grid_search(data, grid, rc.train, rc.k_stat);

    ojson summary;
    summary["grid_size"] = grid.size();
    summary["best_index"] = gr.best_index;
    summary["best_config"] = config_json(gr.best_config);
    summary["selection"] = rc.train.selection == SelectionSplit::test ? "test" : "validation";
    summary["seed"] = rc.train.seed;
    summary["ensemble_size"] = rc.train.ensemble_size;
    summary["k_stat"] = rc.k_stat;
    summary["split_sizes"] = {split.train.size(), split.validation.size(), split.test.size()};
    summary["validation_auc"] = optional_json(gr.best.validation_auc);
    summary["test_auc"] = optional_json(gr.best.test_auc);
    auto metrics = ojson::array();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        ojson m;
        m["config"] = config_tag(grid[i]);
        m["selection_metric"] = gr.metrics[i];
        metrics.push_back(std::move(m));
    }
    summary["grid"] = std::move(metrics);

    ScorerEnsemble ens = std::move(gr.best.ensemble);
    ens.metadata = summary.dump();
    save_checkpoint(ens, rc.checkpoint);

    auto log = open_out(log_path.value_or(rc.checkpoint + ".log.jsonl"));
    for (std::size_t i = 0; i < grid.size(); ++i)
        for (std::size_t m = 0; m < gr.reports[i].size(); ++m) write_epoch_log(log, gr.reports[i][m], m, config_tag(grid[i]));

    if (!rc.output.empty()) {
        auto o = open_out(rc.output);
        o << summary.dump(2) << '\n';
    }
    out << summary.dump(2) << '\n';
    return kOk;
}

inline int cmd_score(const RunConfig& rc, std::ostream& out) {
    require_input(rc.checkpoint, "checkpoint");
    require_input(rc.input, "input");
    require_output(rc.output, "output");
    const ScorerEnsemble ens = load_ensemble(rc.checkpoint);
    if (ens.members.empty()) throw ValidationError("checkpoint holds no models");

    JsonlReader reader(rc.input);
    if (reader.k_stat() < ens.k_stat)
        throw ValidationError("checkpoint/data k mismatch: checkpoint uses k_stat=" + std::to_string(ens.k_stat) +
                              ", file stores k=" + std::to_string(reader.k_stat()));
    JsonlWriter writer(rc.output, reader.k_stat());
    const std::size_t threads = default_thread_count();
    constexpr std::size_t kBatch = 256;
    std::vector<Trajectory> batch;
    std::size_t rows = 0;
    auto flush = [&] {
        std::vector<double> scores(batch.size());
        parallel_for(batch.size(), threads, [&](std::size_t i) {
            scores[i] = ensemble_score(ens.members, trajectory_signal(batch[i], ens.k_stat, ens.members[0].config.l_tail));
        });
        for (std::size_t i = 0; i < batch.size(); ++i) {
            batch[i].score = scores[i];
            writer.write(batch[i]);
        }
        rows += batch.size();
        batch.clear();
    };
    Trajectory tr;
    while (reader.next(tr)) {
        batch.push_back(std::move(tr));
        if (batch.size() == kBatch) flush();
    }
    flush();
    out << rows << " trajectories scored\n";
    return kOk;
}

inline int cmd_vote(const RunConfig& rc, std::ostream& out) {
    require_input(rc.input, "input");
    require_output(rc.output, "output");
    const Dataset ds = load_jsonl(rc.input);
    std::map<std::string, std::vector<const Trajectory*>> by_q;
    for (const auto& t : ds.trajectories) by_q[t.question_id].push_back(&t);
    auto o = open_out(rc.output);
    for (const auto& [qid, members] : by_q) {
        std::vector<ScoredTrajectory> scored;
        std::vector<std::string> ids;
        for (const auto* t : members) {
            if (!t->score) throw ValidationError("unscored trajectory " + qid + "/" + t->trajectory_id);
            scored.push_back({t->trajectory_id, canonicalize_answer(t->answer), *t->score});
            ids.push_back(t->trajectory_id);
        }
        VoteOutcome v;
        const auto keep = top_eta_filter(scored, rc.eta);
        const bool any = std::any_of(keep.begin(), keep.end(), [&](auto i) { return scored[i].answer != kNoAnswer; });
        if (any) {
            v = filtered_vote(scored, rc.eta);
        } else {
            v.winner = kNoAnswer;
            v.retained = keep;
            v.eta = rc.eta;
            v.n_retained = keep.size();
        }
        o << vote_json(qid, v, ids).dump() << '\n';
    }
    out << by_q.size() << " questions voted\n";
    return kOk;
}

inline std::map<std::string, std::string> load_gold(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open gold file " + path);
    std::map<std::string, std::string> gold;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            gold[j.at("question_id").get<std::string>()] = j.at("gold_answer").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("gold file line " + std::to_string(n) + ": " + e.what());
        }
    }
    return gold;
}

inline int cmd_eval(const RunConfig& rc, const Flags& f, std::ostream& out) {
    require_input(rc.input, "input");
    if (!rc.output.empty()) require_output(rc.output, "output");
    const Dataset ds = load_jsonl(rc.input);
    const auto gold = f.gold ? load_gold(*f.gold) : std::map<std::string, std::string>{};
    const auto pools = build_pools(ds.trajectories, gold);
    const auto rep = compare_report(pools, rc.k, rc.repeats, rc.eta, rc.train.seed, default_thread_count());
    const auto j = report_json(rep);
    if (!rc.output.empty()) {
        auto o = open_out(rc.output);
        o << j.dump(2) << '\n';
    }
    if (f.csv) {
        auto o = open_out(*f.csv);
        write_question_csv(o, rep);
    }
    if (f.hist) {
        const std::string bench = f.benchmark.value_or(fs::path(rc.input).stem().string());
        auto o = open_out(*f.hist);
        write_histogram_csv(o, export_distribution(pools, rc.bins, bench));
    }
    out << j.dump(2) << '\n';
    return kOk;
}

inline int cmd_flops(const RunConfig& rc, std::ostream& out) {
    const double flops = count_flops(rc.model, rc.batch);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.0f", flops);
    out << buf << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Chronos trajectory scoring and score-weighted voting"};
    app.require_subcommand(1);
    Flags f;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", f.config, "JSON configuration document");
        sub->add_option("--seed", f.seed, "Random seed");
    };
    auto* validate = app.add_subcommand("validate", "Check a trajectory JSONL file");
    validate->add_option("--input", f.input, "Trajectory JSONL")->required();

    auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled trajectory file");
    common(synth);
    synth->add_option("--output", f.output, "Output JSONL");
    synth->add_option("--ltail", f.ltail, "Tail window the burst is placed in");

    auto* train = app.add_subcommand("train", "Train a scorer (optionally over the hyperparameter grid)");
    common(train);
    train->add_option("--input", f.input, "Labeled trajectory JSONL");
    train->add_option("--checkpoint", f.checkpoint, "Checkpoint to write");
    train->add_option("--output", f.output, "Optional training summary JSON");
    train->add_option("--log", f.log, "Epoch log (default <checkpoint>.log.jsonl)");
    train->add_option("--grid", f.grid, "none | default (18 configurations)");
    train->add_option("--ensemble-size", f.ensemble_size, "Models per ensemble");
    train->add_option("--ltail", f.ltail, "Tail window length");
    train->add_option("--kstat", f.kstat, "Top-k width of the confidence statistic");
    train->add_option("--epochs", f.epochs, "Maximum epochs");
    train->add_option("--batch-size", f.batch_size, "Minibatch size");
    train->add_option("--patience", f.patience, "Early-stopping patience (epochs)");
    train->add_option("--lr", f.lr, "Adam learning rate");
    train->add_option("--selection", f.selection, "Grid selection split: test | validation");
    train->add_flag("--group-by-question", f.group_by_question, "Split whole questions");

    auto* score = app.add_subcommand("score", "Append scores to a trajectory JSONL file");
    score->add_option("--config", f.config, "JSON configuration document");
    score->add_option("--checkpoint", f.checkpoint, "Checkpoint");
    score->add_option("--input", f.input, "Trajectory JSONL");
    score->add_option("--output", f.output, "Scored JSONL");

    auto* vote = app.add_subcommand("vote", "Top-eta score-weighted vote per question");
    vote->add_option("--config", f.config, "JSON configuration document");
    vote->add_option("--input", f.input, "Scored JSONL");
    vote->add_option("--output", f.output, "Vote JSONL (one object per question)");
    vote->add_option("--eta", f.eta, "Retention ratio");

    auto* eval = app.add_subcommand("eval", "Pass@1, Maj@K and Chronos@K over repeated subsamples");
    common(eval);
    eval->add_option("--input", f.input, "Scored, labeled pool JSONL");
    eval->add_option("--output", f.output, "Report JSON");
    eval->add_option("--k", f.k, "Subsample size K");
    eval->add_option("--repeats", f.repeats, "Number of subsample repeats");
    eval->add_option("--eta", f.eta, "Retention ratio");
    eval->add_option("--csv", f.csv, "Per-question CSV");
    eval->add_option("--hist", f.hist, "Score histogram CSV");
    eval->add_option("--bins", f.bins, "Histogram bins");
    eval->add_option("--benchmark", f.benchmark, "Benchmark name for the histogram");
    eval->add_option("--gold", f.gold, "JSONL of {question_id, gold_answer}");

    auto* flops = app.add_subcommand("flops", "Forward-pass FLOPs of a configuration");
    flops->add_option("--config", f.config, "JSON configuration document");
    flops->add_option("--batch", f.batch, "Batch size");
    flops->add_option("--ltail", f.ltail, "Tail window length");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kIoFailure;
    }

    try {
        const RunConfig rc = resolve(f);
        if (*validate) return cmd_validate(rc, out);
        if (*synth) return cmd_synth(rc, out);
        if (*train) return cmd_train(rc, out, f.log);
        if (*score) return cmd_score(rc, out);
        if (*vote) return cmd_vote(rc, out);
        if (*eval) return cmd_eval(rc, f, out);
        if (*flops) return cmd_flops(rc, out);
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kIoFailure;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kIoFailure;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kDomainFailure;
    }
    return kIoFailure;
}

}  // namespace chronos::cli
