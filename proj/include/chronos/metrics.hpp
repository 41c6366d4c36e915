#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "chronos/error.hpp"

namespace chronos {

inline constexpr double kBceEpsilon = 1e-12;

inline double clamp_prob(double p) { return std::clamp(p, kBceEpsilon, 1.0 - kBceEpsilon); }

/// Summed binary cross-entropy, predictions clamped to [eps, 1 - eps].
inline double bce_loss(std::span<const double> preds, std::span<const int> labels) {
    if (preds.size() != labels.size())
        throw ValidationError("bce_loss: " + std::to_string(preds.size()) + " predictions vs " +
                              std::to_string(labels.size()) + " labels");
    double loss = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double p = clamp_prob(preds[i]);
        loss -= labels[i] != 0 ? std::log(p) : std::log1p(-p);
    }
    return loss;
}

inline double bce_mean(std::span<const double> preds, std::span<const int> labels) {
    return preds.empty() ? 0.0 : bce_loss(preds, labels) / static_cast<double>(preds.size());
}

/// ROC AUC as the Mann-Whitney statistic: P(score_pos > score_neg) with ties
/// counted one half. Depends only on the ordering of scores.
inline double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw ValidationError("auc: length mismatch");
    std::uint64_t pos = 0, neg = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (std::isnan(scores[i])) throw ValidationError("auc: NaN score");
        (labels[i] != 0 ? pos : neg) += 1;
    }
    if (pos == 0 || neg == 0) throw ValidationError("auc: need both positive and negative labels");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // twice the (pos, neg) win count, kept integral so ties stay exact
    std::uint64_t twice_wins = 0, neg_below = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        std::uint64_t gp = 0, gn = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            (labels[order[j]] != 0 ? gp : gn) += 1;
            ++j;
        }
        twice_wins += 2 * gp * neg_below + gp * gn;
        neg_below += gn;
        i = j;
    }
    return static_cast<double>(twice_wins) / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
}

}  // namespace chronos
