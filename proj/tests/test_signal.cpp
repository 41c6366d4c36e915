#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "chronos/signal.hpp"
#include "test_util.hpp"

using namespace chronos;

namespace {
Trajectory one_step(std::vector<double> lp) {
    Trajectory t;
    t.k = lp.size();
    t.logprobs = std::move(lp);
    return t;
}
}  // namespace

TEST(Signal, CertainStepIsZero) {
    auto s = compute_signal(one_step({0.0, -3.0}), 1);
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0], 0.0);
    EXPECT_FALSE(std::signbit(s[0]));
}

TEST(Signal, MeanNegativeLogprob) {
    auto s = compute_signal(one_step({std::log(0.5), std::log(0.25)}), 2);
    EXPECT_NEAR(s[0], 1.039720771, 1e-9);
}

TEST(Signal, KStatBounds) {
    auto t = one_step({-0.1, -0.2, -0.3});
    EXPECT_THROW(compute_signal(t, 4), ValidationError);
    EXPECT_THROW(compute_signal(t, 0), ValidationError);
    EXPECT_EQ(kDefaultKStat, 20u);
}

TEST(Signal, NonNegativeAndMonotoneInProbability) {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 200; ++rep) {
        auto t = testutil::random_trajectory(rng, 6, 5, "q", "t");
        auto s = compute_signal(t, 1 + rep % 6);
        for (double v : s) EXPECT_GE(v, 0.0);
        // raise one logprob toward zero (keeping order) and check s_t does not increase
        auto u = t;
        const std::size_t step = rep % 5, i = rep % 6;
        const double upper = i == 0 ? 0.0 : u.logprobs[step * 6 + i - 1];
        u.logprobs[step * 6 + i] = 0.5 * (u.logprobs[step * 6 + i] + upper);
        auto s2 = compute_signal(u, 1 + rep % 6);
        EXPECT_LE(s2[step], s[step]);
    }
}

TEST(TailWindow, TakesLastPositions) {
    std::vector<double> raw(5000);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<double>(i);
    auto w = tail_window(raw, 2048);
    ASSERT_EQ(w.length(), 2048u);
    EXPECT_EQ(w.valid_len, 2048u);
    EXPECT_EQ(w.values.front(), 5000.0 - 2048.0);
    EXPECT_EQ(w.values.back(), 4999.0);
}

TEST(TailWindow, ExactLengthAndLeftPad) {
    std::vector<double> raw(2048, 1.5);
    auto w = tail_window(raw, 2048);
    EXPECT_EQ(w.values, raw);
    EXPECT_EQ(w.valid_len, 2048u);

    auto p = tail_window(std::vector<double>{1.0, 2.0}, 4);
    EXPECT_EQ(p.values, (std::vector<double>{0.0, 0.0, 1.0, 2.0}));
    EXPECT_EQ(p.valid_len, 2u);
    EXPECT_THROW(tail_window(std::vector<double>{}, 4), ValidationError);
}

TEST(TailWindow, OnlyTailStepsMatter) {
    std::mt19937_64 rng(11);
    auto a = testutil::random_trajectory(rng, 3, 40, "q", "a");
    auto b = a;
    for (std::size_t i = 0; i < 10 * 3; ++i) b.logprobs[i] = -5.0 - static_cast<double>(i);
    EXPECT_EQ(trajectory_signal(a, 3, 30).values, trajectory_signal(b, 3, 30).values);
}

TEST(Standardizer, Statistics) {
    auto c = fit_standardizer(std::vector<TemporalSignal>{tail_window(std::vector<double>{3.0, 3.0, 3.0}, 5)});
    EXPECT_EQ(c.mean, 3.0);
    EXPECT_EQ(c.std, 1e-8);

    auto two = fit_standardizer(std::vector<TemporalSignal>{tail_window(std::vector<double>{0.0, 2.0}, 4)});
    EXPECT_DOUBLE_EQ(two.mean, 1.0);
    EXPECT_DOUBLE_EQ(two.std, 1.0);

    EXPECT_THROW(fit_standardizer(std::vector<TemporalSignal>{}), ValidationError);
}

TEST(Standardizer, MapsValuesAndZeroesPads) {
    Standardizer z{1.0, 1.0};
    auto sig = tail_window(std::vector<double>{1.0, 3.0}, 4);
    auto out = standardize(sig, z);
    EXPECT_EQ(out, (std::vector<double>{0.0, 0.0, 0.0, 2.0}));
    Standardizer far{100.0, 2.0};
    EXPECT_EQ(standardize(sig, far)[0], 0.0);
}

TEST(Standardizer, StandardizedTrainingDataIsCentered) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n(2.0, 0.7);
    std::vector<TemporalSignal> sigs;
    for (int i = 0; i < 30; ++i) {
        std::vector<double> raw(10 + rng() % 50);
        for (auto& v : raw) v = std::abs(n(rng));
        sigs.push_back(tail_window(raw, 40));
    }
    auto z = fit_standardizer(sigs);
    double sum = 0, ss = 0, cnt = 0;
    for (const auto& s : sigs) {
        auto v = standardize(s, z);
        for (std::size_t t = s.pad_len(); t < s.length(); ++t) {
            sum += v[t];
            ss += v[t] * v[t];
            cnt += 1;
        }
    }
    EXPECT_LT(std::abs(sum / cnt), 1e-6);
    EXPECT_NEAR(std::sqrt(ss / cnt), 1.0, 1e-9);
}
