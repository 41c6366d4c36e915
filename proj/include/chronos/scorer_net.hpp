#pragma once

// Multi-scale convolutional trajectory scorer.
//
//   z    = Proj(x)                          1x1 conv, 1 -> P channels
//   S    = Short_0(z)                       1x1 conv, P -> W
//   o_0  = z
//   o_i  = M_i(o_{i-1}) + Short_i(o_{i-1})  i = 1..N_Blk, W channels
//   S   += o_i
//   M(x) = Concat(b, ReLU(Conv_l1(b)), ..., ReLU(Conv_lk(b))),  b = Bott(x) (1x1 -> P)
//   f    = mean of S over the valid (non-pad) time positions
//   y    = sigmoid(w2 . ReLU(W1 f + b1) + b2)
//
// with W = P + k * N_Conv. All convolutions use zero "same" padding, so the
// time axis stays L_tail long throughout.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "chronos/error.hpp"
#include "chronos/parallel.hpp"
#include "chronos/signal.hpp"

namespace chronos {

struct ChronosConfig {
    std::size_t l_tail = 2048;
    std::size_t n_proj = 16;
    std::size_t n_conv = 8;
    std::vector<std::size_t> kernel_lengths{10, 20, 40};
    std::size_t n_blocks = 3;
    std::size_t mlp_hidden = 0;  // 0 selects width()
    std::uint64_t seed = 0;

    std::size_t n_kernels() const { return kernel_lengths.size(); }
    /// Channels after every block: N_Proj + k * N_Conv.
    std::size_t width() const { return n_proj + n_kernels() * n_conv; }
    std::size_t hidden() const { return mlp_hidden == 0 ? width() : mlp_hidden; }

    void validate() const {
        if (l_tail < 1 || n_proj < 1 || n_conv < 1 || n_blocks < 1 || kernel_lengths.empty())
            throw ConfigError("ChronosConfig: all dimensions must be >= 1");
        for (std::size_t i = 0; i < kernel_lengths.size(); ++i) {
            if (kernel_lengths[i] < 1 || kernel_lengths[i] > l_tail)
                throw ConfigError("ChronosConfig: kernel length " + std::to_string(kernel_lengths[i]) +
                                  " outside [1, L_tail]");
            if (i > 0 && kernel_lengths[i] <= kernel_lengths[i - 1])
                throw ConfigError("ChronosConfig: kernel lengths must be strictly increasing");
        }
    }

    friend bool operator==(const ChronosConfig&, const ChronosConfig&) = default;
};

struct Tensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> data;

    std::size_t size() const { return data.size(); }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Positions of each tensor inside ModelParams::tensors, in declaration order.
struct ParamLayout {
    struct Block {
        std::size_t in_channels = 0;
        std::size_t bott_w = 0, bott_b = 0;
        std::vector<std::size_t> conv_w, conv_b;
        std::size_t short_w = 0, short_b = 0;
    };
    std::size_t proj_w = 0, proj_b = 0;
    std::size_t short0_w = 0, short0_b = 0;
    std::vector<Block> blocks;
    std::size_t mlp1_w = 0, mlp1_b = 0, mlp2_w = 0, mlp2_b = 0;
    std::vector<std::pair<std::string, std::vector<std::size_t>>> shapes;

    explicit ParamLayout(const ChronosConfig& c) {
        const std::size_t P = c.n_proj, W = c.width(), H = c.hidden();
        auto add = [&](std::string name, std::vector<std::size_t> shape) {
            shapes.emplace_back(std::move(name), std::move(shape));
            return shapes.size() - 1;
        };
        proj_w = add("proj.w", {P});
        proj_b = add("proj.b", {P});
        short0_w = add("short0.w", {W, P});
        short0_b = add("short0.b", {W});
        for (std::size_t i = 0; i < c.n_blocks; ++i) {
            const std::string pre = "block" + std::to_string(i + 1) + ".";
            Block b;
            b.in_channels = i == 0 ? P : W;
            b.bott_w = add(pre + "bott.w", {P, b.in_channels});
            b.bott_b = add(pre + "bott.b", {P});
            for (std::size_t j = 0; j < c.n_kernels(); ++j) {
                const std::string cj = pre + "conv" + std::to_string(j);
                b.conv_w.push_back(add(cj + ".w", {c.n_conv, P, c.kernel_lengths[j]}));
                b.conv_b.push_back(add(cj + ".b", {c.n_conv}));
            }
            b.short_w = add(pre + "short.w", {W, b.in_channels});
            b.short_b = add(pre + "short.b", {W});
            blocks.push_back(std::move(b));
        }
        mlp1_w = add("mlp1.w", {H, W});
        mlp1_b = add("mlp1.b", {H});
        mlp2_w = add("mlp2.w", {H});
        mlp2_b = add("mlp2.b", {1});
    }
};

struct ModelParams {
    ChronosConfig config;
    Standardizer standardizer;
    std::uint64_t seed = 0;  // init seed provenance
    std::vector<Tensor> tensors;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

inline std::vector<Tensor> zero_tensors(const ChronosConfig& config) {
    ParamLayout lay(config);
    std::vector<Tensor> out;
    out.reserve(lay.shapes.size());
    for (const auto& [name, shape] : lay.shapes) {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        out.push_back(Tensor{name, shape, std::vector<double>(n, 0.0)});
    }
    return out;
}

/// Weights ~ U(-sqrt(3/fan_in), sqrt(3/fan_in)); biases zero.
inline ModelParams init_params(const ChronosConfig& config, std::uint64_t seed) {
    config.validate();
    ModelParams p;
    p.config = config;
    p.seed = seed;
    p.tensors = zero_tensors(config);
    std::mt19937_64 rng(seed);
    for (auto& t : p.tensors) {
        if (t.name.ends_with(".b")) continue;
        // fan-in: every dimension after the first, or 1 for the per-channel projection
        std::size_t fan_in = 1;
        for (std::size_t d = 1; d < t.shape.size(); ++d) fan_in *= t.shape[d];
        if (t.name == "mlp2.w") fan_in = t.shape[0];
        const double a = std::sqrt(3.0 / static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-a, a);
        for (auto& v : t.data) v = dist(rng);
    }
    return p;
}

inline void check_shapes(const ModelParams& p) {
    ParamLayout lay(p.config);
    if (p.tensors.size() != lay.shapes.size())
        throw ShapeError("parameter count " + std::to_string(p.tensors.size()) + " != expected " +
                         std::to_string(lay.shapes.size()));
    for (std::size_t i = 0; i < lay.shapes.size(); ++i) {
        const auto& t = p.tensors[i];
        std::size_t n = 1;
        for (auto d : lay.shapes[i].second) n *= d;
        if (t.shape != lay.shapes[i].second || t.data.size() != n)
            throw ShapeError("tensor " + lay.shapes[i].first + " has wrong shape");
    }
}

// ---------------------------------------------------------------------------
// Feature maps and layers

/// Channel-major C x L feature map.
struct FeatureMap {
    std::size_t channels = 0;
    std::size_t length = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(std::size_t c, std::size_t l) : channels(c), length(l), data(c * l, 0.0) {}

    double* row(std::size_t c) { return data.data() + c * length; }
    const double* row(std::size_t c) const { return data.data() + c * length; }
};

namespace detail {

// out[o] (+)= bias[o] + sum_i w[o][i] * in[i]
inline void pointwise_conv(const FeatureMap& in, std::span<const double> w, std::span<const double> bias,
                           FeatureMap& out, std::size_t out_offset = 0) {
    const std::size_t C_out = bias.size(), C_in = in.channels, L = in.length;
    for (std::size_t o = 0; o < C_out; ++o) {
        double* dst = out.row(out_offset + o);
        for (std::size_t t = 0; t < L; ++t) dst[t] += bias[o];
        for (std::size_t i = 0; i < C_in; ++i) {
            const double wi = w[o * C_in + i];
            const double* src = in.row(i);
            for (std::size_t t = 0; t < L; ++t) dst[t] += wi * src[t];
        }
    }
}

inline std::size_t left_pad(std::size_t kernel) { return (kernel - 1) / 2; }

// out[f][t] = bias[f] + sum_c sum_u w[f][c][u] * in[c][t + u - pad], zero outside [0, L).
inline void same_conv(const FeatureMap& in, std::span<const double> w, std::span<const double> bias,
                      std::size_t kernel, FeatureMap& out, std::size_t out_offset) {
    const std::size_t F = bias.size(), C = in.channels;
    const long L = static_cast<long>(in.length);
    const long pad = static_cast<long>(left_pad(kernel));
    for (std::size_t f = 0; f < F; ++f) {
        double* dst = out.row(out_offset + f);
        for (long t = 0; t < L; ++t) dst[t] = bias[f];
        for (std::size_t c = 0; c < C; ++c) {
            const double* src = in.row(c);
            const double* wk = w.data() + (f * C + c) * kernel;
            for (std::size_t u = 0; u < kernel; ++u) {
                const long off = static_cast<long>(u) - pad;
                const long lo = std::max(0L, -off), hi = std::min(L, L - off);
                const double wu = wk[u];
                for (long t = lo; t < hi; ++t) dst[t] += wu * src[t + off];
            }
        }
    }
}

inline void check_finite(const FeatureMap& m, const std::string& where) {
    for (double v : m.data)
        if (!std::isfinite(v)) throw NumericError("non-finite activation in " + where);
}

}  // namespace detail

/// 1x1 projection of a standardized length-L_tail signal to N_Proj channels.
inline FeatureMap project(std::span<const double> signal, const ModelParams& params) {
    const auto& c = params.config;
    if (signal.size() != c.l_tail)
        throw ShapeError("input length " + std::to_string(signal.size()) + " != L_tail " +
                         std::to_string(c.l_tail));
    ParamLayout lay(c);
    const auto& w = params.tensors[lay.proj_w].data;
    const auto& b = params.tensors[lay.proj_b].data;
    FeatureMap z(c.n_proj, c.l_tail);
    for (std::size_t ch = 0; ch < c.n_proj; ++ch) {
        double* dst = z.row(ch);
        for (std::size_t t = 0; t < c.l_tail; ++t) dst[t] = w[ch] * signal[t] + b[ch];
    }
    return z;
}

/// Intermediate results of one multi-scale block (kept for backprop).
struct BlockCache {
    FeatureMap bottleneck;               // P x L
    std::vector<FeatureMap> preact;      // per kernel, N_Conv x L before ReLU
    FeatureMap concat;                   // W x L, M(x)
};

/// M(x) = Concat(Bott(x), ReLU(Conv_l(Bott(x))) for each kernel length l).
/// `block` is 0-based.
inline BlockCache multiscale_block_cached(const FeatureMap& x, const ModelParams& params, std::size_t block) {
    const auto& c = params.config;
    ParamLayout lay(c);
    if (block >= lay.blocks.size()) throw ShapeError("block index out of range");
    const auto& bl = lay.blocks[block];
    if (x.channels != bl.in_channels)
        throw ShapeError("block " + std::to_string(block + 1) + " expects " + std::to_string(bl.in_channels) +
                         " input channels, got " + std::to_string(x.channels));
    const auto& T = params.tensors;
    const std::size_t P = c.n_proj, L = x.length;

    BlockCache bc;
    bc.bottleneck = FeatureMap(P, L);
    detail::pointwise_conv(x, T[bl.bott_w].data, T[bl.bott_b].data, bc.bottleneck);

    bc.concat = FeatureMap(c.width(), L);
    std::copy(bc.bottleneck.data.begin(), bc.bottleneck.data.end(), bc.concat.data.begin());
    for (std::size_t j = 0; j < c.n_kernels(); ++j) {
        FeatureMap a(c.n_conv, L);
        detail::same_conv(bc.bottleneck, T[bl.conv_w[j]].data, T[bl.conv_b[j]].data, c.kernel_lengths[j], a, 0);
        double* dst = bc.concat.row(P + j * c.n_conv);
        for (std::size_t i = 0; i < a.data.size(); ++i) dst[i] = std::max(0.0, a.data[i]);
        bc.preact.push_back(std::move(a));
    }
    return bc;
}

inline FeatureMap multiscale_block(const FeatureMap& x, const ModelParams& params, std::size_t block) {
    return multiscale_block_cached(x, params, block).concat;
}

/// A standardized scorer input: length L_tail, pads already zero.
struct ScorerInput {
    std::vector<double> values;
    std::size_t valid_len = 0;
};

inline ScorerInput prepare_input(const TemporalSignal& sig, const Standardizer& z) {
    return ScorerInput{standardize(sig, z), sig.valid_len};
}

struct ForwardCache {
    FeatureMap z;
    std::vector<FeatureMap> outputs;  // o_1..o_NBlk
    std::vector<BlockCache> blocks;
    std::vector<double> features;     // pooled, W
    std::vector<double> hidden_pre;   // H
    std::vector<double> hidden;       // H
    double logit = 0.0;
    double score = 0.5;
};

inline double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline ForwardCache forward_cached(const ModelParams& params, const ScorerInput& in) {
    const auto& c = params.config;
    if (in.values.size() != c.l_tail)
        throw ShapeError("input length " + std::to_string(in.values.size()) + " != L_tail " +
                         std::to_string(c.l_tail));
    if (in.valid_len < 1 || in.valid_len > c.l_tail) throw ShapeError("valid_len outside [1, L_tail]");
    ParamLayout lay(c);
    const auto& T = params.tensors;
    const std::size_t W = c.width(), H = c.hidden(), L = c.l_tail;

    ForwardCache fc;
    fc.z = project(in.values, params);
    detail::check_finite(fc.z, "projection");

    FeatureMap sum(W, L);
    detail::pointwise_conv(fc.z, T[lay.short0_w].data, T[lay.short0_b].data, sum);

    const FeatureMap* prev = &fc.z;
    for (std::size_t i = 0; i < c.n_blocks; ++i) {
        BlockCache bc = multiscale_block_cached(*prev, params, i);
        FeatureMap o = bc.concat;
        detail::pointwise_conv(*prev, T[lay.blocks[i].short_w].data, T[lay.blocks[i].short_b].data, o);
        detail::check_finite(o, "block " + std::to_string(i + 1));
        for (std::size_t k = 0; k < o.data.size(); ++k) sum.data[k] += o.data[k];
        fc.blocks.push_back(std::move(bc));
        fc.outputs.push_back(std::move(o));
        prev = &fc.outputs.back();
    }

    const std::size_t first = L - in.valid_len;
    fc.features.assign(W, 0.0);
    for (std::size_t ch = 0; ch < W; ++ch) {
        const double* r = sum.row(ch);
        double acc = 0.0;
        for (std::size_t t = first; t < L; ++t) acc += r[t];
        fc.features[ch] = acc / static_cast<double>(in.valid_len);
    }

    const auto& w1 = T[lay.mlp1_w].data;
    const auto& b1 = T[lay.mlp1_b].data;
    const auto& w2 = T[lay.mlp2_w].data;
    fc.hidden_pre.assign(H, 0.0);
    fc.hidden.assign(H, 0.0);
    double logit = T[lay.mlp2_b].data[0];
    for (std::size_t h = 0; h < H; ++h) {
        double acc = b1[h];
        for (std::size_t ch = 0; ch < W; ++ch) acc += w1[h * W + ch] * fc.features[ch];
        fc.hidden_pre[h] = acc;
        fc.hidden[h] = std::max(0.0, acc);
        logit += w2[h] * fc.hidden[h];
    }
    if (!std::isfinite(logit)) throw NumericError("non-finite activation in mlp head");
    fc.logit = logit;
    // sigmoid saturates to exactly 0 or 1 for |logit| beyond ~37/745
    fc.score = std::clamp(sigmoid(logit), std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
    return fc;
}

inline double forward(const ModelParams& params, const ScorerInput& in) {
    return forward_cached(params, in).score;
}

/// Scores a batch; items are independent, so the result does not depend on
/// batch composition or thread count.
inline std::vector<double> forward_batch(const ModelParams& params, std::span<const ScorerInput> batch,
                                         std::size_t threads = 1) {
    std::vector<double> out(batch.size());
    parallel_for(batch.size(), threads, [&](std::size_t i) { out[i] = forward(params, batch[i]); });
    return out;
}

/// Standardizes with the model's embedded standardizer, then scores.
inline double score_signal(const ModelParams& params, const TemporalSignal& sig) {
    return forward(params, prepare_input(sig, params.standardizer));
}

// ---------------------------------------------------------------------------

/// Floating-point operations for one forward pass over `batch_size` inputs:
/// 2 per multiply-add in every convolution and dense layer, plus one per
/// element for bias adds, residual adds, the running block sum and pooling.
inline double count_flops(const ChronosConfig& c, std::size_t batch_size) {
    c.validate();
    const double L = static_cast<double>(c.l_tail);
    const double P = static_cast<double>(c.n_proj), W = static_cast<double>(c.width());
    const double Nc = static_cast<double>(c.n_conv), H = static_cast<double>(c.hidden());
    double f = 0.0;
    f += 2.0 * P * L;                 // projection (mul + bias add)
    f += (2.0 * W * P + W) * L;       // short0
    for (std::size_t i = 0; i < c.n_blocks; ++i) {
        const double Cin = i == 0 ? P : W;
        f += (2.0 * P * Cin + P) * L;  // bottleneck
        for (auto l : c.kernel_lengths) f += (2.0 * Nc * P * static_cast<double>(l) + Nc) * L;
        f += (2.0 * W * Cin + W) * L;  // shortcut
        f += W * L;                    // residual add
        f += W * L;                    // running sum
    }
    f += W * L;                        // pooling
    f += 2.0 * H * W + H + 2.0 * H + 1.0;  // MLP
    return f * static_cast<double>(batch_size);
}

}  // namespace chronos
