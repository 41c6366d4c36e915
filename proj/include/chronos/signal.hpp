#pragma once

// Per-step confidence signal and its fixed-length tail window.
//
// s_t = -(1/k) * sum_{i<=k} logprob_t[i] over the k most likely tokens. The
// value is 0 when the top token has probability 1 and grows as the
// distribution flattens, so larger s_t means *lower* confidence.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "chronos/error.hpp"
#include "chronos/trajectory_store.hpp"

namespace chronos {

inline constexpr std::size_t kDefaultKStat = 20;
inline constexpr double kStdFloor = 1e-8;

struct TemporalSignal {
    std::vector<double> values;  // length L_tail, left-padded with 0.0
    std::size_t valid_len = 0;   // real positions, right-aligned

    std::size_t length() const { return values.size(); }
    std::size_t pad_len() const { return values.size() - valid_len; }
};

struct Standardizer {
    double mean = 0.0;
    double std = 1.0;

    friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

inline std::vector<double> compute_signal(const Trajectory& traj, std::size_t k_stat) {
    if (k_stat < 1 || k_stat > traj.k)
        throw ValidationError("k_stat=" + std::to_string(k_stat) + " exceeds stored k=" +
                              std::to_string(traj.k));
    const std::size_t m = traj.num_steps();
    std::vector<double> s(m);
    for (std::size_t t = 0; t < m; ++t) {
        auto lp = traj.step(t);
        double acc = 0.0;
        for (std::size_t i = 0; i < k_stat; ++i) acc += lp[i];
        // -0.0 when every logprob is 0; normalise to +0.0
        s[t] = acc == 0.0 ? 0.0 : -acc / static_cast<double>(k_stat);
    }
    return s;
}

inline TemporalSignal tail_window(std::span<const double> raw, std::size_t l_tail) {
    if (raw.empty()) throw ValidationError("tail_window: empty signal");
    if (l_tail < 1) throw ValidationError("tail_window: L_tail must be >= 1");
    TemporalSignal out;
    out.values.assign(l_tail, 0.0);
    if (raw.size() >= l_tail) {
        std::copy(raw.end() - static_cast<std::ptrdiff_t>(l_tail), raw.end(), out.values.begin());
        out.valid_len = l_tail;
    } else {
        std::copy(raw.begin(), raw.end(), out.values.end() - static_cast<std::ptrdiff_t>(raw.size()));
        out.valid_len = raw.size();
    }
    return out;
}

inline TemporalSignal trajectory_signal(const Trajectory& traj, std::size_t k_stat, std::size_t l_tail) {
    return tail_window(compute_signal(traj, k_stat), l_tail);
}

/// Population mean/std over non-padded positions of all signals.
inline Standardizer fit_standardizer(std::span<const TemporalSignal> signals) {
    double count = 0.0;
    double sum = 0.0;
    for (const auto& sig : signals)
        for (std::size_t t = sig.pad_len(); t < sig.length(); ++t) {
            sum += sig.values[t];
            count += 1.0;
        }
    if (count == 0.0) throw ValidationError("fit_standardizer: no non-padded values");
    const double mean = sum / count;
    double ss = 0.0;
    for (const auto& sig : signals)
        for (std::size_t t = sig.pad_len(); t < sig.length(); ++t) {
            const double d = sig.values[t] - mean;
            ss += d * d;
        }
    return {mean, std::max(std::sqrt(ss / count), kStdFloor)};
}

/// Maps real positions to (v - mean) / std; padded positions become 0.
inline std::vector<double> standardize(const TemporalSignal& sig, const Standardizer& z) {
    std::vector<double> out(sig.length(), 0.0);
    for (std::size_t t = sig.pad_len(); t < sig.length(); ++t)
        out[t] = (sig.values[t] - z.mean) / z.std;
    return out;
}

}  // namespace chronos
