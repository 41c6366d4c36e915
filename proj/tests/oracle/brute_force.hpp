#pragma once

// Test-only brute-force references for voting and AUC.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace oracle {

// Exact integer image of a grid score: score * 2^60 must be an integer below
// 2^60, which holds for every double in [2^-8, 1).
inline std::uint64_t fixed_point(double s) {
    const double scaled = std::ldexp(s, 60);
    const auto v = static_cast<std::uint64_t>(scaled);
    if (static_cast<double>(v) != scaled) throw std::runtime_error("oracle: score not representable");
    return v;
}

/// Score-weighted argmax over candidate answers with exact integer sums;
/// equal sums resolve to the lexicographically smallest answer.
inline std::string brute_weighted_vote(const std::vector<std::string>& answers, const std::vector<double>& scores,
                                       const std::string& no_answer) {
    // each term is below 2^60, so up to 15 of them fit in 64 bits
    if (answers.size() > 15) throw std::runtime_error("oracle: too many trajectories");
    std::map<std::string, std::uint64_t> sums;
    for (std::size_t i = 0; i < answers.size(); ++i)
        if (answers[i] != no_answer) sums[answers[i]] += fixed_point(scores[i]);
    std::string best;
    bool first = true;
    // enumerate every candidate against every other
    for (const auto& [a, s] : sums) {
        bool beats_all = true;
        for (const auto& [b, t] : sums)
            if (t > s || (t == s && b < a)) beats_all = false;
        if (beats_all) {
            if (!first) throw std::runtime_error("oracle: two winners");
            best = a;
            first = false;
        }
    }
    return best;
}

/// AUC by counting every (positive, negative) pair.
inline double pair_count_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0, pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[i] != 1 || y[j] != 0) continue;
            pairs += 1;
            if (s[i] > s[j]) wins += 1;
            else if (s[i] == s[j]) wins += 0.5;
        }
    return wins / pairs;
}

}  // namespace oracle
