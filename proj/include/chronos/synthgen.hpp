#pragma once

// Synthetic labeled trajectories with a controllable class difference.
//
// Every trajectory's signal is base_level + sigma * N(0,1) (clipped at 0).
// Incorrect trajectories additionally carry a burst of +amplitude over
// `extent` consecutive positions placed uniformly inside the final L_tail
// steps. Each step stores k identical log-probabilities equal to -s_t, so
// the confidence statistic recovers s_t.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "chronos/detail/seeding.hpp"
#include "chronos/error.hpp"
#include "chronos/trajectory_store.hpp"

namespace chronos {

struct SynthSpec {
    std::size_t n_questions = 20;
    std::size_t pool_size = 32;
    double correct_fraction = 0.5;
    std::size_t min_length = 256;
    std::size_t max_length = 1024;
    double base_level = 1.0;
    double sigma = 0.2;
    double amplitude = 0.6;
    std::size_t extent = 256;
    std::size_t l_tail = 2048;
    std::size_t k = 20;
    std::size_t n_distractors = 3;
    double concentration = 0.8;  // share of wrong answers on the first distractor
    std::uint64_t seed = 0;

    void validate() const {
        if (n_questions < 1 || pool_size < 1) throw ValidationError("synth: n_questions and pool_size must be >= 1");
        if (!(correct_fraction > 0.0 && correct_fraction < 1.0))
            throw ValidationError("synth: correct_fraction must lie in (0, 1)");
        if (min_length < 1 || max_length < min_length) throw ValidationError("synth: invalid length range");
        if (!(sigma >= 0.0) || !(base_level >= 0.0)) throw ValidationError("synth: base_level and sigma must be >= 0");
        if (!(amplitude >= 0.0))
            throw ValidationError("synth: negative amplitude would require positive log-probabilities");
        if (extent < 1 || extent > l_tail) throw ValidationError("synth: extent must lie in [1, L_tail]");
        if (k < 1) throw ValidationError("synth: k must be >= 1");
        if (n_distractors < 1) throw ValidationError("synth: need at least one distractor answer");
        if (!(concentration >= 0.0 && concentration <= 1.0))
            throw ValidationError("synth: concentration must lie in [0, 1]");
    }
};

inline std::size_t synth_correct_count(const SynthSpec& s) {
    return static_cast<std::size_t>(std::floor(s.correct_fraction * static_cast<double>(s.pool_size) + 0.5));
}

inline std::string synth_gold_answer(std::size_t q) { return std::to_string(100 + q); }

/// Designed signal and label for trajectory `i` of question `q`, before
/// conversion to log-probabilities.
struct SynthTrajectory {
    std::vector<double> signal;
    bool correct = false;
    std::string answer;
};

inline std::vector<SynthTrajectory> synth_question(const SynthSpec& spec, std::size_t q) {
    std::mt19937_64 rng(detail::mix_seed(spec.seed, q));
    const std::size_t n_correct = synth_correct_count(spec);
    std::vector<std::uint8_t> is_correct(spec.pool_size, 0);
    std::fill(is_correct.begin(), is_correct.begin() + static_cast<std::ptrdiff_t>(n_correct), 1);
    std::shuffle(is_correct.begin(), is_correct.end(), rng);

    std::uniform_int_distribution<std::size_t> len_dist(spec.min_length, spec.max_length);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::string gold = synth_gold_answer(q);

    std::vector<SynthTrajectory> out(spec.pool_size);
    for (std::size_t i = 0; i < spec.pool_size; ++i) {
        auto& tr = out[i];
        tr.correct = is_correct[i] != 0;
        const std::size_t m = len_dist(rng);
        tr.signal.resize(m);
        for (auto& v : tr.signal) v = std::max(0.0, spec.base_level + spec.sigma * noise(rng));
        if (!tr.correct && spec.amplitude > 0.0) {
            const std::size_t window = std::min(m, spec.l_tail);
            const std::size_t ext = std::min(spec.extent, window);
            std::uniform_int_distribution<std::size_t> start_dist(m - window, m - ext);
            const std::size_t start = start_dist(rng);
            for (std::size_t t = start; t < start + ext; ++t) tr.signal[t] += spec.amplitude;
        }
        if (tr.correct) {
            tr.answer = gold;
        } else {
            std::size_t d = 0;
            if (spec.n_distractors > 1 && unit(rng) >= spec.concentration) {
                std::uniform_int_distribution<std::size_t> other(1, spec.n_distractors - 1);
                d = other(rng);
            }
            tr.answer = std::to_string(100 + spec.n_questions + q * spec.n_distractors + d);
        }
    }
    return out;
}

inline Trajectory synth_to_trajectory(const SynthTrajectory& st, const SynthSpec& spec, std::size_t q,
                                      std::size_t i) {
    Trajectory tr;
    tr.question_id = "q" + std::to_string(q);
    tr.trajectory_id = "t" + std::to_string(i);
    tr.answer = st.answer;
    tr.label = st.correct;
    tr.k = spec.k;
    tr.logprobs.reserve(st.signal.size() * spec.k);
    for (double s : st.signal)
        for (std::size_t j = 0; j < spec.k; ++j) tr.logprobs.push_back(-s);
    return tr;
}

inline Dataset generate(const SynthSpec& spec) {
    spec.validate();
    Dataset ds;
    ds.k_stat = spec.k;
    for (std::size_t q = 0; q < spec.n_questions; ++q) {
        auto traj = synth_question(spec, q);
        for (std::size_t i = 0; i < traj.size(); ++i) ds.trajectories.push_back(synth_to_trajectory(traj[i], spec, q, i));
    }
    return ds;
}

inline nlohmann::ordered_json synth_spec_json(const SynthSpec& s) {
    nlohmann::ordered_json j;
    j["n_questions"] = s.n_questions;
    j["pool_size"] = s.pool_size;
    j["correct_fraction"] = s.correct_fraction;
    j["min_length"] = s.min_length;
    j["max_length"] = s.max_length;
    j["base_level"] = s.base_level;
    j["sigma"] = s.sigma;
    j["amplitude"] = s.amplitude;
    j["extent"] = s.extent;
    j["l_tail"] = s.l_tail;
    j["k"] = s.k;
    j["n_distractors"] = s.n_distractors;
    j["concentration"] = s.concentration;
    j["seed"] = s.seed;
    return j;
}

}  // namespace chronos
