#pragma once

// Reverse-mode gradient of the summed BCE loss through the scorer.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "chronos/error.hpp"
#include "chronos/metrics.hpp"
#include "chronos/parallel.hpp"
#include "chronos/scorer_net.hpp"

namespace chronos {

struct Gradients {
    double loss = 0.0;             // summed BCE over the batch
    std::vector<Tensor> tensors;   // same layout as ModelParams::tensors
};

namespace detail {

// Adjoint of pointwise_conv: accumulates dW, db and (optionally) d_in.
inline void pointwise_conv_backward(const FeatureMap& in, std::span<const double> w, const FeatureMap& d_out,
                                    std::size_t out_offset, std::size_t out_channels, std::span<double> dw,
                                    std::span<double> db, FeatureMap* d_in) {
    const std::size_t C_in = in.channels, L = in.length;
    for (std::size_t o = 0; o < out_channels; ++o) {
        const double* g = d_out.row(out_offset + o);
        double gb = 0.0;
        for (std::size_t t = 0; t < L; ++t) gb += g[t];
        db[o] += gb;
        for (std::size_t i = 0; i < C_in; ++i) {
            const double* x = in.row(i);
            double acc = 0.0;
            for (std::size_t t = 0; t < L; ++t) acc += g[t] * x[t];
            dw[o * C_in + i] += acc;
            if (d_in) {
                const double wi = w[o * C_in + i];
                double* dx = d_in->row(i);
                for (std::size_t t = 0; t < L; ++t) dx[t] += wi * g[t];
            }
        }
    }
}

// Adjoint of same_conv given d(pre-activation) `da` (F x L).
inline void same_conv_backward(const FeatureMap& in, std::span<const double> w, std::size_t kernel,
                               const FeatureMap& da, std::span<double> dw, std::span<double> db, FeatureMap& d_in) {
    const std::size_t F = da.channels, C = in.channels;
    const long L = static_cast<long>(in.length);
    const long pad = static_cast<long>(left_pad(kernel));
    for (std::size_t f = 0; f < F; ++f) {
        const double* g = da.row(f);
        double gb = 0.0;
        for (long t = 0; t < L; ++t) gb += g[t];
        db[f] += gb;
        for (std::size_t c = 0; c < C; ++c) {
            const double* x = in.row(c);
            double* dx = d_in.row(c);
            const double* wk = w.data() + (f * C + c) * kernel;
            double* dwk = dw.data() + (f * C + c) * kernel;
            for (std::size_t u = 0; u < kernel; ++u) {
                const long off = static_cast<long>(u) - pad;
                const long lo = std::max(0L, -off), hi = std::min(L, L - off);
                double acc = 0.0;
                const double wu = wk[u];
                for (long t = lo; t < hi; ++t) {
                    acc += g[t] * x[t + off];
                    dx[t + off] += wu * g[t];
                }
                dwk[u] += acc;
            }
        }
    }
}

// Accumulates d(loss)/d(params) for one sample into `g`, given dL/dlogit.
inline void backward_sample(const ModelParams& params, const ParamLayout& lay, const ScorerInput& in,
                            const ForwardCache& fc, double dlogit, std::vector<Tensor>& g) {
    const auto& c = params.config;
    const auto& T = params.tensors;
    const std::size_t P = c.n_proj, W = c.width(), H = c.hidden(), L = c.l_tail, Nc = c.n_conv;

    // MLP head
    g[lay.mlp2_b].data[0] += dlogit;
    std::vector<double> d_feat(W, 0.0);
    for (std::size_t h = 0; h < H; ++h) {
        g[lay.mlp2_w].data[h] += dlogit * fc.hidden[h];
        if (fc.hidden_pre[h] <= 0.0) continue;
        const double du = dlogit * T[lay.mlp2_w].data[h];
        g[lay.mlp1_b].data[h] += du;
        for (std::size_t ch = 0; ch < W; ++ch) {
            g[lay.mlp1_w].data[h * W + ch] += du * fc.features[ch];
            d_feat[ch] += du * T[lay.mlp1_w].data[h * W + ch];
        }
    }

    // masked mean pooling: the gradient reaches only valid positions
    FeatureMap d_sum(W, L);
    const std::size_t first = L - in.valid_len;
    const double inv = 1.0 / static_cast<double>(in.valid_len);
    for (std::size_t ch = 0; ch < W; ++ch) {
        double* r = d_sum.row(ch);
        for (std::size_t t = first; t < L; ++t) r[t] = d_feat[ch] * inv;
    }

    // blocks, last to first; every o_i (i >= 1) feeds the running sum directly
    FeatureMap d_o = d_sum;
    for (std::size_t bi = c.n_blocks; bi-- > 0;) {
        const auto& bl = lay.blocks[bi];
        const auto& bc = fc.blocks[bi];
        const FeatureMap& x = bi == 0 ? fc.z : fc.outputs[bi - 1];
        FeatureMap d_x(x.channels, L);

        pointwise_conv_backward(x, T[bl.short_w].data, d_o, 0, W, g[bl.short_w].data, g[bl.short_b].data, &d_x);

        FeatureMap d_b(P, L);
        std::copy(d_o.data.begin(), d_o.data.begin() + static_cast<std::ptrdiff_t>(P * L), d_b.data.begin());
        for (std::size_t j = 0; j < c.n_kernels(); ++j) {
            FeatureMap da(Nc, L);
            const double* gh = d_o.row(P + j * Nc);
            const auto& pre = bc.preact[j].data;
            for (std::size_t k = 0; k < da.data.size(); ++k) da.data[k] = pre[k] > 0.0 ? gh[k] : 0.0;
            same_conv_backward(bc.bottleneck, T[bl.conv_w[j]].data, c.kernel_lengths[j], da, g[bl.conv_w[j]].data,
                               g[bl.conv_b[j]].data, d_b);
        }
        pointwise_conv_backward(x, T[bl.bott_w].data, d_b, 0, P, g[bl.bott_w].data, g[bl.bott_b].data, &d_x);

        if (bi > 0)
            for (std::size_t k = 0; k < d_x.data.size(); ++k) d_x.data[k] += d_sum.data[k];
        d_o = std::move(d_x);
    }

    // d_o now holds dL/dz from the block path; add the Short_0 path
    pointwise_conv_backward(fc.z, T[lay.short0_w].data, d_sum, 0, W, g[lay.short0_w].data, g[lay.short0_b].data,
                            &d_o);

    for (std::size_t ch = 0; ch < P; ++ch) {
        const double* dz = d_o.row(ch);
        double gw = 0.0, gb = 0.0;
        for (std::size_t t = 0; t < L; ++t) {
            gw += dz[t] * in.values[t];
            gb += dz[t];
        }
        g[lay.proj_w].data[ch] += gw;
        g[lay.proj_b].data[ch] += gb;
    }
}

}  // namespace detail

/// dL/dlogit for the clamped BCE term of one sample. Zero where the clamp
/// is active, matching the flat loss there.
inline double bce_logit_grad(double score, int label) {
    if (score < kBceEpsilon || score > 1.0 - kBceEpsilon) return 0.0;
    return score - (label != 0 ? 1.0 : 0.0);
}

/// Gradient of the summed BCE loss over the batch. Per-sample gradients are
/// reduced in index order, so results do not depend on `threads`.
inline Gradients backward(const ModelParams& params, std::span<const ScorerInput> batch, std::span<const int> labels,
                          std::size_t threads = 1) {
    if (batch.size() != labels.size()) throw ValidationError("backward: batch/label length mismatch");
    ParamLayout lay(params.config);

    std::vector<std::vector<Tensor>> per_sample(batch.size());
    std::vector<double> losses(batch.size());
    parallel_for(batch.size(), threads, [&](std::size_t i) {
        ForwardCache fc = forward_cached(params, batch[i]);
        const double p = clamp_prob(fc.score);
        losses[i] = labels[i] != 0 ? -std::log(p) : -std::log1p(-p);
        per_sample[i] = zero_tensors(params.config);
        detail::backward_sample(params, lay, batch[i], fc, bce_logit_grad(fc.score, labels[i]), per_sample[i]);
    });

    Gradients out;
    out.tensors = zero_tensors(params.config);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        out.loss += losses[i];
        for (std::size_t ti = 0; ti < out.tensors.size(); ++ti) {
            auto& dst = out.tensors[ti].data;
            const auto& src = per_sample[i][ti].data;
            for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
        }
    }
    for (const auto& t : out.tensors)
        for (double v : t.data)
            if (!std::isfinite(v)) throw NumericError("non-finite gradient in " + t.name);
    return out;
}

}  // namespace chronos
