#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "chronos/trajectory_store.hpp"

namespace testutil {

/// Fresh per-test scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("chronos_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Random valid trajectory with sorted non-positive log-probabilities.
inline chronos::Trajectory random_trajectory(std::mt19937_64& rng, std::size_t k, std::size_t steps,
                                             const std::string& qid, const std::string& tid) {
    chronos::Trajectory t;
    t.question_id = qid;
    t.trajectory_id = tid;
    t.answer = std::to_string(rng() % 5);
    t.label = rng() % 2 == 0;
    t.k = k;
    std::exponential_distribution<double> ex(1.0);
    for (std::size_t s = 0; s < steps; ++s) {
        double v = -ex(rng) * 0.1;
        for (std::size_t i = 0; i < k; ++i) {
            t.logprobs.push_back(v);
            v -= ex(rng);
        }
    }
    return t;
}

}  // namespace testutil
