#pragma once

// Answer canonicalization, top-eta filtering and score-weighted voting.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chronos/detail/exact_sum.hpp"
#include "chronos/error.hpp"

namespace chronos {

/// Canonical token for a trajectory whose answer could not be extracted.
inline const std::string kNoAnswer = "<NO_ANSWER>";

namespace detail {

inline std::string_view trim(std::string_view s) {
    auto sp = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && sp(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && sp(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Contents of the last \boxed{...}, brace-balanced; unterminated groups run
// to the end of the text.
inline std::optional<std::string_view> last_boxed(std::string_view s) {
    constexpr std::string_view tag = "\\boxed{";
    const auto pos = s.rfind(tag);
    if (pos == std::string_view::npos) return std::nullopt;
    const std::size_t start = pos + tag.size();
    int depth = 1;
    for (std::size_t i = start; i < s.size(); ++i) {
        if (s[i] == '{') ++depth;
        if (s[i] == '}' && --depth == 0) return s.substr(start, i - start);
    }
    return s.substr(start);
}

inline bool is_integer_like(std::string_view s) {
    if (!s.empty() && (s.front() == '-' || s.front() == '+')) s.remove_prefix(1);
    return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
}

}  // namespace detail

inline std::string canonicalize_answer(std::string_view raw) {
    std::string_view s = raw;
    if (auto boxed = detail::last_boxed(raw)) s = *boxed;
    s = detail::trim(s);
    if (s.empty()) return kNoAnswer;
    if (detail::is_integer_like(s)) {
        std::string sign;
        if (s.front() == '-' || s.front() == '+') {
            if (s.front() == '-') sign = "-";
            s.remove_prefix(1);
        }
        const auto nz = s.find_first_not_of('0');
        std::string digits = nz == std::string_view::npos ? "0" : std::string(s.substr(nz));
        return digits == "0" ? digits : sign + digits;
    }
    return std::string(s);
}

struct ScoredTrajectory {
    std::string trajectory_id;
    std::string answer;  // canonical
    double score = 0.0;
};

struct VoteOutcome {
    std::string winner;
    std::vector<std::size_t> retained;       // input indices, best score first
    std::map<std::string, double> weights;   // answer -> summed score over retained
    double eta = 1.0;
    std::size_t n_retained = 0;
};

/// max(1, floor(eta * n)).
inline std::size_t retention_count(std::size_t n, double eta) {
    if (!(eta > 0.0 && eta <= 1.0)) throw ValidationError("eta must lie in (0, 1]");
    const auto k = static_cast<std::size_t>(std::floor(eta * static_cast<double>(n)));
    return std::max<std::size_t>(1, std::min(k, n));
}

/// Indices of the retention_count(n, eta) best-scored trajectories, ordered
/// by descending score with ties going to the lower index.
inline std::vector<std::size_t> top_eta_filter(std::span<const double> scores, double eta) {
    if (scores.empty()) throw ValidationError("top_eta_filter: empty input");
    const std::size_t keep = retention_count(scores.size(), eta);
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    idx.resize(keep);
    return idx;
}

inline std::vector<std::size_t> top_eta_filter(std::span<const ScoredTrajectory> scored, double eta) {
    std::vector<double> s;
    s.reserve(scored.size());
    for (const auto& x : scored) s.push_back(x.score);
    return top_eta_filter(s, eta);
}

/// argmax over answers of the summed score. NO_ANSWER never wins; equal
/// totals (compared exactly) go to the lexicographically smallest answer.
inline VoteOutcome weighted_majority(std::span<const ScoredTrajectory> retained) {
    if (retained.empty()) throw ValidationError("weighted_majority: empty retained set");
    std::map<std::string, detail::ExactSum> exact;
    VoteOutcome out;
    for (const auto& t : retained) {
        if (t.answer == kNoAnswer) continue;
        exact[t.answer].add(t.score);
        out.weights[t.answer] += t.score;
    }
    if (exact.empty()) throw ValidationError("all retained trajectories are NO_ANSWER");
    auto best = exact.begin();
    for (auto it = std::next(exact.begin()); it != exact.end(); ++it)
        if (it->second > best->second) best = it;
    out.winner = best->first;
    out.n_retained = retained.size();
    out.retained.resize(retained.size());
    std::iota(out.retained.begin(), out.retained.end(), std::size_t{0});
    return out;
}

/// Top-eta filter followed by the weighted vote over the survivors.
inline VoteOutcome filtered_vote(std::span<const ScoredTrajectory> scored, double eta) {
    auto keep = top_eta_filter(scored, eta);
    std::vector<ScoredTrajectory> sub;
    sub.reserve(keep.size());
    for (auto i : keep) sub.push_back(scored[i]);
    VoteOutcome out = weighted_majority(sub);
    out.retained = std::move(keep);
    out.eta = eta;
    out.n_retained = out.retained.size();
    return out;
}

/// Plurality vote; NO_ANSWER only wins when it is the sole answer.
inline std::string unweighted_majority(std::span<const std::string> answers) {
    if (answers.empty()) throw ValidationError("unweighted_majority: empty input");
    std::map<std::string, std::size_t> counts;
    for (const auto& a : answers)
        if (a != kNoAnswer) ++counts[a];
    if (counts.empty()) return kNoAnswer;
    auto best = counts.begin();
    for (auto it = std::next(counts.begin()); it != counts.end(); ++it)
        if (it->second > best->second) best = it;
    return best->first;
}

}  // namespace chronos
