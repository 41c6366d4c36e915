#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "chronos/error.hpp"
#include "chronos/scorer_net.hpp"

namespace chronos {

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<std::vector<double>> m, v;
    std::size_t step = 0;
};

/// One Adam update, `scale` multiplies the incoming gradient (e.g. 1/batch).
inline void adam_step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, AdamState& state,
                      const AdamConfig& cfg, double scale = 1.0) {
    if (params.size() != grads.size()) throw ShapeError("adam_step: tensor count mismatch");
    if (state.m.empty()) {
        for (const auto& t : params) {
            state.m.emplace_back(t.size(), 0.0);
            state.v.emplace_back(t.size(), 0.0);
        }
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (std::size_t ti = 0; ti < params.size(); ++ti) {
        auto& p = params[ti].data;
        const auto& g = grads[ti].data;
        if (p.size() != g.size()) throw ShapeError("adam_step: shape mismatch in " + params[ti].name);
        auto& m = state.m[ti];
        auto& v = state.v[ti];
        for (std::size_t k = 0; k < p.size(); ++k) {
            const double gk = g[k] * scale;
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
            const double mh = m[k] / bc1, vh = v[k] / bc2;
            p[k] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
        }
    }
}

}  // namespace chronos
