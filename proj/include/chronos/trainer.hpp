#pragma once

// BCE training with Adam, validation-AUC early stopping, seed ensembles and
// hyperparameter grid search.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "chronos/adam.hpp"
#include "chronos/backprop.hpp"
#include "chronos/checkpoint.hpp"
#include "chronos/detail/seeding.hpp"
#include "chronos/error.hpp"
#include "chronos/metrics.hpp"
#include "chronos/parallel.hpp"
#include "chronos/scorer_net.hpp"
#include "chronos/signal.hpp"
#include "chronos/trajectory_store.hpp"

namespace chronos {

/// Which held-out split picks the winning grid configuration.
enum class SelectionSplit { test, validation };

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t max_epochs = 30;
    std::size_t batch_size = 32;
    std::size_t patience = 5;
    std::size_t ensemble_size = 5;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    SelectionSplit selection = SelectionSplit::test;

    void validate() const {
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (ensemble_size < 1) throw ConfigError("ensemble_size must be >= 1");
        if (max_epochs < 1) throw ConfigError("max_epochs must be >= 1");
    }
};

struct TrainReport {
    double initial_loss = 0.0;        // mean train BCE before the first update
    std::vector<double> train_loss;   // mean BCE per epoch
    std::vector<double> val_auc;      // NaN when the validation set is single-class
    std::size_t best_epoch = 0;       // 1-based
    std::optional<double> test_auc;
};

/// Labeled, standardized inputs for the three splits.
struct PreparedSplit {
    Standardizer standardizer;
    std::vector<ScorerInput> train, validation, test;
    std::vector<int> train_labels, validation_labels, test_labels;
};

/// Computes signals, fits the standardizer on the training part and
/// standardizes everything with it.
inline PreparedSplit prepare_split(std::span<const Trajectory> trajs, const DatasetSplit& split, std::size_t k_stat,
                                   std::size_t l_tail) {
    auto signals_of = [&](const std::vector<std::size_t>& idx, std::vector<TemporalSignal>& sig, std::vector<int>& y) {
        for (auto i : idx) {
            const auto& tr = trajs[i];
            if (!tr.label)
                throw ValidationError("unlabeled trajectory encountered: " + tr.question_id + "/" + tr.trajectory_id);
            sig.push_back(trajectory_signal(tr, k_stat, l_tail));
            y.push_back(*tr.label ? 1 : 0);
        }
    };
    std::vector<TemporalSignal> s_tr, s_va, s_te;
    PreparedSplit out;
    signals_of(split.train, s_tr, out.train_labels);
    signals_of(split.validation, s_va, out.validation_labels);
    signals_of(split.test, s_te, out.test_labels);
    if (s_tr.empty()) throw ValidationError("training set is empty");
    out.standardizer = fit_standardizer(s_tr);
    auto conv = [&](const std::vector<TemporalSignal>& s, std::vector<ScorerInput>& dst) {
        dst.reserve(s.size());
        for (const auto& x : s) dst.push_back(prepare_input(x, out.standardizer));
    };
    conv(s_tr, out.train);
    conv(s_va, out.validation);
    conv(s_te, out.test);
    return out;
}

namespace detail {

inline bool has_both_classes(std::span<const int> y) {
    bool pos = false, neg = false;
    for (int v : y) (v != 0 ? pos : neg) = true;
    return pos && neg;
}

inline std::vector<double> score_all(const ModelParams& p, std::span<const ScorerInput> xs, std::size_t threads) {
    return forward_batch(p, xs, threads);
}

// Higher is better: AUC when defined, otherwise negative mean BCE.
inline double selection_metric(std::span<const double> scores, std::span<const int> y) {
    if (has_both_classes(y)) return auc(scores, y);
    return -bce_mean(scores, y);
}

}  // namespace detail

/// Trains one scorer. Keeps the parameters of the epoch with the best
/// validation metric and stops once `patience` consecutive epochs fail to
/// improve it (patience 0 therefore runs exactly one epoch).
inline std::pair<ModelParams, TrainReport> train(const PreparedSplit& data, const ChronosConfig& cconf,
                                                 const TrainConfig& tconf) {
    cconf.validate();
    tconf.validate();
    if (data.train.empty() || data.validation.empty()) throw ValidationError("train and validation sets must be non-empty");
    if (!detail::has_both_classes(data.train_labels)) throw ValidationError("single-class training set");
    for (const auto& x : data.train)
        if (x.values.size() != cconf.l_tail) throw ShapeError("prepared inputs do not match L_tail");

    ModelParams params = init_params(cconf, tconf.seed);
    params.standardizer = data.standardizer;
    ModelParams best = params;

    TrainReport rep;
    {
        auto s0 = detail::score_all(params, data.train, tconf.threads);
        rep.initial_loss = bce_mean(s0, data.train_labels);
    }

    std::mt19937_64 rng(detail::mix_seed(tconf.seed, 0x5348554646ULL));
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    AdamState adam;
    const AdamConfig acfg{tconf.learning_rate};

    double best_metric = -std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    std::vector<ScorerInput> batch;
    std::vector<int> labels;
    for (std::size_t epoch = 1; epoch <= tconf.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += tconf.batch_size) {
            const std::size_t end = std::min(order.size(), start + tconf.batch_size);
            batch.clear();
            labels.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(data.train[order[i]]);
                labels.push_back(data.train_labels[order[i]]);
            }
            Gradients g = backward(params, batch, labels, tconf.threads);
            loss_sum += g.loss;
            adam_step(params.tensors, g.tensors, adam, acfg, 1.0 / static_cast<double>(batch.size()));
        }
        rep.train_loss.push_back(loss_sum / static_cast<double>(order.size()));

        auto vs = detail::score_all(params, data.validation, tconf.threads);
        rep.val_auc.push_back(detail::has_both_classes(data.validation_labels)
                                  ? auc(vs, data.validation_labels)
                                  : std::numeric_limits<double>::quiet_NaN());
        const double metric = detail::selection_metric(vs, data.validation_labels);
        if (metric > best_metric) {
            best_metric = metric;
            best = params;
            rep.best_epoch = epoch;
            since_best = 0;
        } else {
            ++since_best;
        }
        if (since_best >= tconf.patience) break;
    }

    if (!data.test.empty() && detail::has_both_classes(data.test_labels)) {
        auto ts = detail::score_all(best, data.test, tconf.threads);
        rep.test_auc = auc(ts, data.test_labels);
    }
    return {std::move(best), std::move(rep)};
}

namespace detail {
// Mean written as an offset from the first value, so n equal members
// reproduce that member bit for bit.
inline double mean_about_first(std::span<const double> v) {
    double off = 0.0;
    for (double x : v) off += x - v[0];
    return v[0] + off / static_cast<double>(v.size());
}
}  // namespace detail

/// Mean of member scores.
inline double ensemble_score(std::span<const ModelParams> models, const TemporalSignal& sig) {
    if (models.empty()) throw ValidationError("ensemble_score: empty ensemble");
    std::vector<double> s;
    for (const auto& m : models) {
        if (m.config.l_tail != models.front().config.l_tail)
            throw ShapeError("ensemble members disagree on L_tail");
        s.push_back(score_signal(m, sig));
    }
    return detail::mean_about_first(s);
}

/// Mean member score for already-standardized inputs (members share the
/// standardizer the inputs were prepared with).
inline std::vector<double> ensemble_scores(std::span<const ModelParams> models, std::span<const ScorerInput> xs,
                                           std::size_t threads = 1) {
    if (models.empty()) throw ValidationError("ensemble_score: empty ensemble");
    std::vector<std::vector<double>> per;
    for (const auto& m : models) per.push_back(forward_batch(m, xs, threads));
    std::vector<double> out(xs.size()), col(models.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (std::size_t m = 0; m < models.size(); ++m) col[m] = per[m][i];
        out[i] = detail::mean_about_first(col);
    }
    return out;
}

struct EnsembleResult {
    ScorerEnsemble ensemble;
    std::vector<TrainReport> reports;   // one per member
    std::optional<double> validation_auc;
    std::optional<double> test_auc;
    double selection_metric = 0.0;      // on the split chosen by TrainConfig::selection
};

/// Trains ensemble_size members with seeds seed, seed+1, ...
inline EnsembleResult train_ensemble(const PreparedSplit& data, const ChronosConfig& cconf, const TrainConfig& tconf,
                                     std::size_t k_stat) {
    EnsembleResult res;
    res.ensemble.k_stat = k_stat;
    for (std::size_t m = 0; m < tconf.ensemble_size; ++m) {
        TrainConfig t = tconf;
        t.seed = tconf.seed + m;
        auto [p, r] = train(data, cconf, t);
        res.ensemble.members.push_back(std::move(p));
        res.reports.push_back(std::move(r));
    }
    const auto& members = res.ensemble.members;
    auto vs = ensemble_scores(members, data.validation, tconf.threads);
    if (detail::has_both_classes(data.validation_labels)) res.validation_auc = auc(vs, data.validation_labels);
    std::vector<double> ts;
    if (!data.test.empty()) {
        ts = ensemble_scores(members, data.test, tconf.threads);
        if (detail::has_both_classes(data.test_labels)) res.test_auc = auc(ts, data.test_labels);
    }
    if (tconf.selection == SelectionSplit::test && !data.test.empty())
        res.selection_metric = detail::selection_metric(ts, data.test_labels);
    else
        res.selection_metric = detail::selection_metric(vs, data.validation_labels);
    return res;
}

/// N_Proj x N_Conv x kernel-set grid: 2 x 3 x 3 = 18 configurations. Other
/// fields are copied from `base`.
inline std::vector<ChronosConfig> default_grid(const ChronosConfig& base = {}) {
    std::vector<ChronosConfig> grid;
    for (std::size_t p : {8, 16})
        for (std::size_t nc : {4, 8, 16})
            for (const auto& ks : std::vector<std::vector<std::size_t>>{{10, 20, 40}, {20, 40, 80}, {40, 80, 160}}) {
                ChronosConfig c = base;
                c.n_proj = p;
                c.n_conv = nc;
                c.kernel_lengths = ks;
                grid.push_back(std::move(c));
            }
    return grid;
}

struct GridResult {
    std::size_t best_index = 0;
    ChronosConfig best_config;
    EnsembleResult best;
    std::vector<double> metrics;  // held-out selection metric per grid entry
    std::vector<std::vector<TrainReport>> reports;
};

/// Trains every configuration and keeps the one with the highest held-out
/// metric; ties go to the earlier grid entry. Configurations run
/// concurrently when tconf.threads > 1 (each trains single-threaded).
inline GridResult grid_search(const PreparedSplit& data, std::span<const ChronosConfig> grid, const TrainConfig& tconf,
                              std::size_t k_stat) {
    if (grid.empty()) throw ConfigError("grid_search: empty grid");
    std::vector<std::optional<EnsembleResult>> results(grid.size());
    TrainConfig inner = tconf;
    if (grid.size() > 1) inner.threads = 1;
    parallel_for(grid.size(), grid.size() > 1 ? tconf.threads : 1,
                 [&](std::size_t i) { results[i] = train_ensemble(data, grid[i], inner, k_stat); });

    GridResult out;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        out.metrics.push_back(results[i]->selection_metric);
        out.reports.push_back(results[i]->reports);
        if (results[i]->selection_metric > best) {
            best = results[i]->selection_metric;
            out.best_index = i;
        }
    }
    out.best_config = grid[out.best_index];
    out.best = std::move(*results[out.best_index]);
    return out;
}

}  // namespace chronos
