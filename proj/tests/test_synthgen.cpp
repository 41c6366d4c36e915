#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "chronos/synthgen.hpp"
#include "chronos/trainer.hpp"
#include "test_util.hpp"

using namespace chronos;

namespace {

SynthSpec small_spec() {
    SynthSpec s;
    s.n_questions = 6;
    s.pool_size = 20;
    s.min_length = 40;
    s.max_length = 300;
    s.l_tail = 128;
    s.extent = 48;
    s.k = 3;
    s.seed = 5;
    return s;
}

// mean signal over the last l_tail steps, the direct threshold statistic
double tail_mean(const Trajectory& t, std::size_t l_tail) {
    auto s = compute_signal(t, t.k);
    const std::size_t n = std::min(l_tail, s.size());
    return std::accumulate(s.end() - static_cast<std::ptrdiff_t>(n), s.end(), 0.0) / static_cast<double>(n);
}

}  // namespace

TEST(Synth, StructureAndAnswers) {
    auto spec = small_spec();
    auto ds = generate(spec);
    EXPECT_EQ(ds.k_stat, 3u);
    ASSERT_EQ(ds.trajectories.size(), 120u);
    const std::size_t want = synth_correct_count(spec);
    EXPECT_EQ(want, 10u);
    std::set<std::string> ids;
    for (std::size_t q = 0; q < 6; ++q) {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < 20; ++i) {
            const auto& t = ds.trajectories[q * 20 + i];
            EXPECT_EQ(t.question_id, "q" + std::to_string(q));
            ids.insert(t.question_id + "/" + t.trajectory_id);
            EXPECT_GE(t.num_steps(), spec.min_length);
            EXPECT_LE(t.num_steps(), spec.max_length);
            ASSERT_TRUE(t.label.has_value());
            EXPECT_EQ(*t.label, t.answer == synth_gold_answer(q));
            correct += *t.label;
            for (double lp : t.logprobs) EXPECT_LE(lp, 0.0);
        }
        EXPECT_EQ(correct, want);
    }
    EXPECT_EQ(ids.size(), 120u);
}

TEST(Synth, CorrectCountsFollowFraction) {
    auto spec = small_spec();
    spec.pool_size = 32;
    for (double f : {0.1, 0.3, 0.5, 0.9}) {
        spec.correct_fraction = f;
        auto ds = generate(spec);
        std::size_t c = 0;
        for (const auto& t : ds.trajectories) c += *t.label;
        EXPECT_EQ(c, 6 * static_cast<std::size_t>(std::floor(f * 32 + 0.5))) << f;
    }
}

TEST(Synth, SignalIsReproducedExactly) {
    auto spec = small_spec();
    for (std::size_t q = 0; q < spec.n_questions; ++q) {
        auto designed = synth_question(spec, q);
        for (std::size_t i = 0; i < designed.size(); ++i) {
            auto t = synth_to_trajectory(designed[i], spec, q, i);
            auto s = compute_signal(t, spec.k);
            ASSERT_EQ(s.size(), designed[i].signal.size());
            for (std::size_t j = 0; j < s.size(); ++j) {
                const double d = designed[i].signal[j];
                EXPECT_LE(std::abs(s[j] - d), 1e-12 * std::max(std::abs(d), 1e-300));
            }
        }
    }
}

TEST(Synth, DeterministicPerSeed) {
    auto spec = small_spec();
    EXPECT_EQ(generate(spec).trajectories, generate(spec).trajectories);
    auto other = spec;
    other.seed = 6;
    EXPECT_NE(generate(spec).trajectories, generate(other).trajectories);
}

TEST(Synth, InfeasibleSpecsRejected) {
    auto spec = small_spec();
    spec.amplitude = -0.5;
    try {
        generate(spec);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("positive log-probabilities"), std::string::npos);
    }
    spec = small_spec();
    spec.extent = spec.l_tail + 1;
    EXPECT_THROW(generate(spec), ValidationError);
    spec = small_spec();
    spec.correct_fraction = 1.0;
    EXPECT_THROW(generate(spec), ValidationError);
}

TEST(Synth, RoundTripThroughStore) {
    auto ds = generate(small_spec());
    auto dir = testutil::scratch_dir("synth_rt");
    save_jsonl(dir / "s.jsonl", ds);
    auto back = load_jsonl(dir / "s.jsonl");
    ASSERT_EQ(back.trajectories.size(), ds.trajectories.size());
    for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
        EXPECT_EQ(back.trajectories[i].label, ds.trajectories[i].label);
        EXPECT_EQ(compute_signal(back.trajectories[i], 3), compute_signal(ds.trajectories[i], 3));
    }
}

TEST(Synth, BurstStaysInsideTail) {
    auto spec = small_spec();
    spec.sigma = 0.0;
    for (std::size_t q = 0; q < spec.n_questions; ++q)
        for (const auto& tr : synth_question(spec, q)) {
            const std::size_t m = tr.signal.size(), window = std::min(m, spec.l_tail);
            std::size_t raised = 0;
            for (std::size_t t = 0; t < m; ++t) {
                if (tr.signal[t] == spec.base_level) continue;
                EXPECT_GE(t, m - window);
                EXPECT_EQ(tr.signal[t], spec.base_level + spec.amplitude);
                ++raised;
            }
            EXPECT_EQ(raised, tr.correct ? 0u : std::min(spec.extent, window));
        }
}

TEST(Synth, ThresholdOracleSeparatesAtThreeSigma) {
    SynthSpec spec;  // amplitude 0.6 = 3 sigma, extent 256
    spec.n_questions = 10;
    spec.k = 2;
    spec.seed = 2;
    auto ds = generate(spec);
    std::vector<double> stat;
    std::vector<int> y;
    for (const auto& t : ds.trajectories) {
        stat.push_back(tail_mean(t, spec.l_tail));
        y.push_back(*t.label ? 0 : 1);  // larger tail signal flags an incorrect trajectory
    }
    EXPECT_GE(auc(stat, y), 0.95);
}

TEST(Synth, ZeroAmplitudeGivesChanceAuc) {
    SynthSpec spec = small_spec();
    spec.amplitude = 0.0;
    spec.n_questions = 15;
    spec.min_length = 64;
    spec.max_length = 160;
    spec.l_tail = 64;
    spec.extent = 32;
    auto ds = generate(spec);
    auto split = split_dataset(ds.trajectories, {}, 1);
    auto data = prepare_split(ds.trajectories, split, spec.k, 64);

    ChronosConfig c;
    c.l_tail = 64;
    c.n_proj = 4;
    c.n_conv = 2;
    c.kernel_lengths = {3, 5, 9};
    c.n_blocks = 2;
    TrainConfig tc;
    tc.max_epochs = 4;
    tc.learning_rate = 1e-2;
    auto [model, rep] = train(data, c, tc);

    // fresh held-out draw, large enough for a tight AUC estimate
    auto fresh_spec = spec;
    fresh_spec.seed = 999;
    fresh_spec.n_questions = 100;
    auto fresh = generate(fresh_spec);
    std::vector<double> s;
    std::vector<int> y;
    for (const auto& t : fresh.trajectories) {
        s.push_back(score_signal(model, trajectory_signal(t, spec.k, 64)));
        y.push_back(*t.label);
    }
    EXPECT_NEAR(auc(s, y), 0.5, 0.05);
}
