#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "chronos/trajectory_store.hpp"
#include "test_util.hpp"

using namespace chronos;

namespace {

const char* kHeader20 = R"({"format_version": 1, "k_stat": 20})";

std::string steps_json(std::size_t k, std::size_t n_steps, double first = -0.1) {
    std::string s = "[";
    for (std::size_t t = 0; t < n_steps; ++t) {
        s += t ? ",[" : "[";
        for (std::size_t i = 0; i < k; ++i) {
            if (i) s += ",";
            s += std::to_string(first - static_cast<double>(i));
        }
        s += "]";
    }
    return s + "]";
}

std::string record(const std::string& tid, const std::string& steps) {
    return R"({"question_id":"q1","trajectory_id":")" + tid + R"(","answer":"42","label":true,"steps":)" + steps +
           "}";
}

}  // namespace

TEST(TrajectoryStore, LoadsValidFile) {
    auto dir = testutil::scratch_dir("ts_valid");
    testutil::write_text(dir / "a.jsonl", std::string(kHeader20) + "\n" + record("t1", steps_json(20, 3)) + "\n" +
                                              record("t2", steps_json(20, 2)) + "\n");
    auto ds = load_jsonl(dir / "a.jsonl");
    EXPECT_EQ(ds.k_stat, 20u);
    ASSERT_EQ(ds.trajectories.size(), 2u);
    EXPECT_EQ(ds.trajectories[0].trajectory_id, "t1");
    EXPECT_EQ(ds.trajectories[0].num_steps(), 3u);
    EXPECT_EQ(ds.trajectories[1].num_steps(), 2u);
    EXPECT_EQ(ds.trajectories[0].label, std::optional<bool>(true));
}

TEST(TrajectoryStore, ShortStepNamesRecordAndStep) {
    auto dir = testutil::scratch_dir("ts_short");
    std::string steps = "[" + steps_json(20, 1).substr(1, steps_json(20, 1).size() - 2) + "," +
                        steps_json(19, 1).substr(1, steps_json(19, 1).size() - 2) + "]";
    testutil::write_text(dir / "a.jsonl", std::string(kHeader20) + "\n" + record("t7", steps) + "\n");
    try {
        load_jsonl(dir / "a.jsonl");
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("q1/t7"), std::string::npos) << msg;
        EXPECT_NE(msg.find("step 1"), std::string::npos) << msg;
        EXPECT_NE(msg.find("19"), std::string::npos) << msg;
        EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    }
}

TEST(TrajectoryStore, PositiveLogprobRejected) {
    auto dir = testutil::scratch_dir("ts_pos");
    testutil::write_text(dir / "a.jsonl", R"({"format_version":1,"k_stat":2})"
                                          "\n" +
                                              record("t1", "[[0.1,-1.0]]") + "\n");
    try {
        load_jsonl(dir / "a.jsonl");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("positive log-probability"), std::string::npos);
    }
}

TEST(TrajectoryStore, UnsortedMalformedAndDuplicateRejected) {
    auto dir = testutil::scratch_dir("ts_bad");
    const std::string h = R"({"format_version":1,"k_stat":2})";
    testutil::write_text(dir / "u.jsonl", h + "\n" + record("t1", "[[-1.0,-0.5]]") + "\n");
    EXPECT_THROW(load_jsonl(dir / "u.jsonl"), ValidationError);
    testutil::write_text(dir / "m.jsonl", h + "\n{not json\n");
    try {
        load_jsonl(dir / "m.jsonl");
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
    testutil::write_text(dir / "d.jsonl", h + "\n" + record("t1", "[[-0.5,-1.0]]") + "\n" +
                                              record("t1", "[[-0.5,-1.0]]") + "\n");
    EXPECT_THROW(load_jsonl(dir / "d.jsonl"), ValidationError);
    testutil::write_text(dir / "v.jsonl", R"({"format_version":2,"k_stat":2})"
                                          "\n");
    EXPECT_THROW(load_jsonl(dir / "v.jsonl"), ValidationError);
    EXPECT_THROW(load_jsonl(dir / "missing.jsonl"), IoError);
}

TEST(TrajectoryStore, ValidateCollectsEveryProblem) {
    auto dir = testutil::scratch_dir("ts_validate");
    const std::string h = R"({"format_version":1,"k_stat":2})";
    testutil::write_text(dir / "a.jsonl", h + "\n" + record("t1", "[[-0.5,-1.0]]") + "\n" +
                                              record("t2", "[[0.5,-1.0]]") + "\n" + record("t3", "[[-0.5]]") + "\n");
    auto rep = validate_jsonl(dir / "a.jsonl");
    EXPECT_EQ(rep.records, 3u);
    ASSERT_EQ(rep.diagnostics.size(), 2u);
    EXPECT_EQ(rep.diagnostics[0].line, 3u);
    EXPECT_EQ(rep.diagnostics[1].line, 4u);
}

TEST(TrajectoryStore, RoundTripIsBitExact) {
    std::mt19937_64 rng(7);
    Dataset ds;
    ds.k_stat = 5;
    for (int i = 0; i < 20; ++i) {
        auto t = testutil::random_trajectory(rng, 5, 1 + rng() % 30, "q" + std::to_string(i % 4), "t" + std::to_string(i));
        if (i % 3 == 0) t.label.reset();
        if (i % 5 == 0) t.score = std::ldexp(static_cast<double>(rng() >> 11), -53);
        ds.trajectories.push_back(std::move(t));
    }
    auto dir = testutil::scratch_dir("ts_roundtrip");
    save_jsonl(dir / "rt.jsonl", ds);
    auto back = load_jsonl(dir / "rt.jsonl");
    EXPECT_EQ(back.k_stat, ds.k_stat);
    ASSERT_EQ(back.trajectories.size(), ds.trajectories.size());
    for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
        EXPECT_EQ(back.trajectories[i], ds.trajectories[i]);
        for (std::size_t j = 0; j < ds.trajectories[i].logprobs.size(); ++j)
            ASSERT_EQ(std::bit_cast<std::uint64_t>(back.trajectories[i].logprobs[j]),
                      std::bit_cast<std::uint64_t>(ds.trajectories[i].logprobs[j]));
    }
}

namespace {
std::vector<Trajectory> n_trajectories(std::size_t n) {
    std::vector<Trajectory> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i].question_id = "q" + std::to_string(i / 4);
        v[i].trajectory_id = "t" + std::to_string(i);
    }
    return v;
}
}  // namespace

TEST(Split, SizesFollowRoundedRatios) {
    auto s32 = split_dataset(n_trajectories(32), {}, 1);
    EXPECT_EQ(s32.train.size(), 26u);
    EXPECT_EQ(s32.validation.size(), 3u);
    EXPECT_EQ(s32.test.size(), 3u);
    auto s10 = split_dataset(n_trajectories(10), {}, 1);
    EXPECT_EQ(s10.train.size(), 8u);
    EXPECT_EQ(s10.validation.size(), 1u);
    EXPECT_EQ(s10.test.size(), 1u);
    EXPECT_THROW(split_dataset(n_trajectories(9), {}, 1), ValidationError);
    EXPECT_THROW(split_dataset(n_trajectories(20), {0.5, 0.1, 0.1}, 1), ValidationError);
}

TEST(Split, DeterministicPartitionForAllSeeds) {
    auto trajs = n_trajectories(57);
    auto a = split_dataset(trajs, {}, 99);
    auto b = split_dataset(trajs, {}, 99);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.validation, b.validation);
    EXPECT_EQ(a.test, b.test);
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto s = split_dataset(trajs, {}, seed);
        EXPECT_EQ(s.train.size(), a.train.size());
        EXPECT_EQ(s.validation.size(), a.validation.size());
        EXPECT_EQ(s.test.size(), a.test.size());
        std::vector<std::size_t> all;
        all.insert(all.end(), s.train.begin(), s.train.end());
        all.insert(all.end(), s.validation.begin(), s.validation.end());
        all.insert(all.end(), s.test.begin(), s.test.end());
        std::sort(all.begin(), all.end());
        ASSERT_EQ(all.size(), trajs.size());
        for (std::size_t i = 0; i < all.size(); ++i) ASSERT_EQ(all[i], i);
    }
}

TEST(Split, GroupByQuestionKeepsQuestionsTogether) {
    auto trajs = n_trajectories(80);
    auto s = split_dataset(trajs, {}, 3, true);
    auto questions = [&](const std::vector<std::size_t>& idx) {
        std::set<std::string> q;
        for (auto i : idx) q.insert(trajs[i].question_id);
        return q;
    };
    auto tr = questions(s.train), va = questions(s.validation), te = questions(s.test);
    for (const auto& q : va) EXPECT_FALSE(tr.contains(q) || te.contains(q));
    for (const auto& q : te) EXPECT_FALSE(tr.contains(q));
    EXPECT_EQ(s.train.size() + s.validation.size() + s.test.size(), 80u);
}
