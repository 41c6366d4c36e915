#pragma once

// Evaluation protocol: Pass@1 over the full pool, Maj@K and Chronos@K over
// repeated K-of-P subsamples, AUC, and score histograms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "chronos/detail/seeding.hpp"
#include "chronos/error.hpp"
#include "chronos/metrics.hpp"
#include "chronos/parallel.hpp"
#include "chronos/trajectory_store.hpp"
#include "chronos/voter.hpp"

namespace chronos {

struct QuestionPool {
    std::string question_id;
    std::optional<std::string> gold_answer;  // nullopt: no trajectory can be correct
    std::vector<ScoredTrajectory> trajectories;

    bool is_correct(const std::string& answer) const { return gold_answer && answer == *gold_answer; }
};

/// Groups scored trajectories into per-question pools (ordered by
/// question_id). The gold answer comes from `gold` when given, otherwise
/// from the answers of label=true trajectories. Labels that disagree with
/// the gold answer are rejected.
inline std::vector<QuestionPool> build_pools(std::span<const Trajectory> trajs,
                                             const std::map<std::string, std::string>& gold = {}) {
    std::map<std::string, std::vector<const Trajectory*>> by_q;
    for (const auto& t : trajs) by_q[t.question_id].push_back(&t);

    std::vector<QuestionPool> pools;
    for (const auto& [qid, members] : by_q) {
        QuestionPool pool;
        pool.question_id = qid;
        bool any_label = false;
        if (auto it = gold.find(qid); it != gold.end()) {
            pool.gold_answer = canonicalize_answer(it->second);
        } else {
            for (const auto* t : members) {
                if (!t->label) continue;
                any_label = true;
                if (!*t->label) continue;
                const auto a = canonicalize_answer(t->answer);
                if (pool.gold_answer && *pool.gold_answer != a)
                    throw ValidationError("question " + qid + ": correct-labeled trajectories disagree on the answer");
                pool.gold_answer = a;
            }
            if (!any_label) throw ValidationError("missing gold answer for question " + qid);
        }
        for (const auto* t : members) {
            if (!t->score) throw ValidationError("unscored trajectory " + qid + "/" + t->trajectory_id);
            ScoredTrajectory st{t->trajectory_id, canonicalize_answer(t->answer), *t->score};
            if (t->label && *t->label != pool.is_correct(st.answer))
                throw ValidationError("label of " + qid + "/" + t->trajectory_id + " disagrees with the gold answer");
            pool.trajectories.push_back(std::move(st));
        }
        pools.push_back(std::move(pool));
    }
    return pools;
}

/// Fraction of all pooled trajectories whose answer matches the gold answer.
inline double pass_at_1(std::span<const QuestionPool> pools) {
    std::size_t n = 0, correct = 0;
    for (const auto& p : pools) {
        if (p.trajectories.empty()) throw ValidationError("pass_at_1: empty pool for " + p.question_id);
        for (const auto& t : p.trajectories) {
            ++n;
            if (p.is_correct(t.answer)) ++correct;
        }
    }
    if (n == 0) throw ValidationError("pass_at_1: no trajectories");
    return static_cast<double>(correct) / static_cast<double>(n);
}

enum class VoteMethod { majority, chronos };

struct MethodSpec {
    VoteMethod method = VoteMethod::majority;
    double eta = 0.1;  // chronos only
};

/// Winner of one subsample; NO_ANSWER when no retained trajectory answered.
inline std::string select_answer(std::span<const ScoredTrajectory> subsample, const MethodSpec& m) {
    if (m.method == VoteMethod::majority) {
        std::vector<std::string> answers;
        answers.reserve(subsample.size());
        for (const auto& t : subsample) answers.push_back(t.answer);
        return unweighted_majority(answers);
    }
    const auto keep = top_eta_filter(subsample, m.eta);
    std::vector<ScoredTrajectory> sub;
    for (auto i : keep) sub.push_back(subsample[i]);
    const bool any = std::any_of(sub.begin(), sub.end(), [](const auto& t) { return t.answer != kNoAnswer; });
    return any ? weighted_majority(sub).winner : kNoAnswer;
}

/// K distinct pool indices, ascending, drawn from an RNG keyed on
/// (seed, repeat, question_id).
inline std::vector<std::size_t> draw_subsample(std::size_t pool_size, std::size_t k, std::uint64_t seed,
                                               std::size_t repeat, const std::string& question_id) {
    if (k > pool_size)
        throw ValidationError("K=" + std::to_string(k) + " exceeds pool size " + std::to_string(pool_size));
    std::mt19937_64 rng(detail::mix_seed(detail::mix_seed(seed, repeat), detail::fnv1a(question_id)));
    std::vector<std::size_t> idx(pool_size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < k; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool_size - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

struct SubsampleResult {
    std::vector<double> per_repeat;                  // accuracy per repeat
    std::vector<std::vector<std::uint8_t>> correct;  // [repeat][question]
    double mean = 0.0;
    double std = 0.0;  // population std over repeats
};

inline SubsampleResult subsample_eval(std::span<const QuestionPool> pools, std::size_t k, std::size_t repeats,
                                      std::uint64_t seed, const MethodSpec& method, std::size_t threads = 1) {
    if (repeats < 1) throw ValidationError("repeats must be >= 1");
    if (pools.empty()) throw ValidationError("no question pools");
    if (k < 1) throw ValidationError("K must be >= 1");
    for (const auto& p : pools)
        if (k > p.trajectories.size())
            throw ValidationError("K=" + std::to_string(k) + " exceeds pool size " +
                                  std::to_string(p.trajectories.size()) + " for question " + p.question_id);

    SubsampleResult res;
    res.correct.assign(repeats, std::vector<std::uint8_t>(pools.size(), 0));
    parallel_for(repeats * pools.size(), threads, [&](std::size_t job) {
        const std::size_t r = job / pools.size(), q = job % pools.size();
        const auto& pool = pools[q];
        std::vector<ScoredTrajectory> sub;
        for (auto i : draw_subsample(pool.trajectories.size(), k, seed, r, pool.question_id))
            sub.push_back(pool.trajectories[i]);
        res.correct[r][q] = pool.is_correct(select_answer(sub, method)) ? 1 : 0;
    });
    for (const auto& row : res.correct)
        res.per_repeat.push_back(static_cast<double>(std::accumulate(row.begin(), row.end(), std::size_t{0})) /
                                 static_cast<double>(pools.size()));
    res.mean = std::accumulate(res.per_repeat.begin(), res.per_repeat.end(), 0.0) / static_cast<double>(repeats);
    double ss = 0.0;
    for (double a : res.per_repeat) ss += (a - res.mean) * (a - res.mean);
    res.std = std::sqrt(ss / static_cast<double>(repeats));
    return res;
}

/// AUC of the scores against gold-answer correctness, over all pools.
inline std::optional<double> pool_auc(std::span<const QuestionPool> pools) {
    std::vector<double> s;
    std::vector<int> y;
    for (const auto& p : pools)
        for (const auto& t : p.trajectories) {
            s.push_back(t.score);
            y.push_back(p.is_correct(t.answer) ? 1 : 0);
        }
    const bool pos = std::find(y.begin(), y.end(), 1) != y.end();
    const bool neg = std::find(y.begin(), y.end(), 0) != y.end();
    if (!pos || !neg) return std::nullopt;
    return auc(s, y);
}

struct QuestionBreakdown {
    std::string question_id;
    double pass_at_1 = 0.0;
    double majority = 0.0;  // fraction of repeats answered correctly
    double chronos = 0.0;
};

struct EvalReport {
    std::size_t k = 128;
    std::size_t repeats = 16;
    double eta = 0.1;
    std::uint64_t seed = 0;
    double pass_at_1 = 0.0;
    SubsampleResult majority;
    SubsampleResult chronos;
    std::optional<double> auc;
    std::vector<QuestionBreakdown> questions;
};

inline EvalReport compare_report(std::span<const QuestionPool> pools, std::size_t k, std::size_t repeats, double eta,
                                 std::uint64_t seed, std::size_t threads = 1) {
    EvalReport rep;
    rep.k = k;
    rep.repeats = repeats;
    rep.eta = eta;
    rep.seed = seed;
    rep.pass_at_1 = pass_at_1(pools);
    rep.majority = subsample_eval(pools, k, repeats, seed, {VoteMethod::majority, eta}, threads);
    rep.chronos = subsample_eval(pools, k, repeats, seed, {VoteMethod::chronos, eta}, threads);
    rep.auc = pool_auc(pools);
    for (std::size_t q = 0; q < pools.size(); ++q) {
        QuestionBreakdown b;
        b.question_id = pools[q].question_id;
        b.pass_at_1 = pass_at_1(pools.subspan(q, 1));
        double m = 0.0, c = 0.0;
        for (std::size_t r = 0; r < repeats; ++r) {
            m += rep.majority.correct[r][q];
            c += rep.chronos.correct[r][q];
        }
        b.majority = m / static_cast<double>(repeats);
        b.chronos = c / static_cast<double>(repeats);
        rep.questions.push_back(std::move(b));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Score histograms

struct HistogramRecord {
    double bin_lo = 0.0;
    double bin_hi = 0.0;
    std::string cls;  // "correct" or "incorrect"
    std::size_t count = 0;
};

struct Histogram {
    std::string benchmark;
    std::size_t bins = 0;
    bool degenerate = false;  // every score equal: a single bin holds everything
    double score_min = 0.0;
    double score_max = 0.0;
    std::vector<HistogramRecord> records;  // correct bins first, then incorrect
};

/// Per-class counts over scores min-max normalized across all given pools.
inline Histogram export_distribution(std::span<const QuestionPool> pools, std::size_t bins,
                                     const std::string& benchmark = "benchmark") {
    if (bins < 1) throw ValidationError("bins must be >= 1");
    std::vector<std::pair<double, bool>> pts;
    for (const auto& p : pools)
        for (const auto& t : p.trajectories) pts.emplace_back(t.score, p.is_correct(t.answer));
    if (pts.empty()) throw ValidationError("export_distribution: no trajectories");

    Histogram h;
    h.benchmark = benchmark;
    h.score_min = h.score_max = pts.front().first;
    for (const auto& [s, c] : pts) {
        h.score_min = std::min(h.score_min, s);
        h.score_max = std::max(h.score_max, s);
    }
    h.degenerate = !(h.score_max > h.score_min);
    h.bins = h.degenerate ? 1 : bins;
    std::vector<std::size_t> correct(h.bins, 0), incorrect(h.bins, 0);
    for (const auto& [s, c] : pts) {
        std::size_t b = 0;
        if (!h.degenerate) {
            const double u = (s - h.score_min) / (h.score_max - h.score_min);
            b = std::min(h.bins - 1, static_cast<std::size_t>(std::floor(u * static_cast<double>(h.bins))));
        }
        ++(c ? correct : incorrect)[b];
    }
    for (const auto& [name, counts] : {std::pair{"correct", &correct}, std::pair{"incorrect", &incorrect}})
        for (std::size_t b = 0; b < h.bins; ++b)
            h.records.push_back({static_cast<double>(b) / static_cast<double>(h.bins),
                                 static_cast<double>(b + 1) / static_cast<double>(h.bins), name, (*counts)[b]});
    return h;
}

}  // namespace chronos
