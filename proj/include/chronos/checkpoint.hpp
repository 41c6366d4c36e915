#pragma once

// Binary checkpoint: "CHRS", u32 version, u32 member count, u64 k_stat,
// u64-length-prefixed metadata string, then per member: config, standardizer,
// init seed and every tensor (u32 rank, u64 dims, f64 data). All integers and
// floats are little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "chronos/error.hpp"
#include "chronos/scorer_net.hpp"

namespace chronos {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// One or more scorers trained on the same data; the ensemble score is the
/// mean of member scores.
struct ScorerEnsemble {
    std::size_t k_stat = kDefaultKStat;
    std::vector<ModelParams> members;
    std::string metadata;  // free-form JSON provenance

    friend bool operator==(const ScorerEnsemble&, const ScorerEnsemble&) = default;
};

namespace detail {

class ByteWriter {
public:
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
    void bytes(const std::string& s) {
        u64(s.size());
        buf_.append(s);
    }
    const std::string& str() const { return buf_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    }
    std::string buf_;
};

class ByteReader {
public:
    explicit ByteReader(std::string data) : data_(std::move(data)) {}
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    double f64() { return std::bit_cast<double>(get(8)); }
    std::string bytes() {
        const std::uint64_t n = u64();
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::string raw(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool at_end() const { return pos_ == data_.size(); }

private:
    void need(std::uint64_t n) const {
        if (n > data_.size() - pos_) throw ValidationError("checkpoint truncated");
    }
    std::uint64_t get(int n) {
        need(static_cast<std::uint64_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::string data_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string serialize_checkpoint(const ScorerEnsemble& ens) {
    detail::ByteWriter w;
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(ens.members.size()));
    w.u64(ens.k_stat);
    w.bytes(ens.metadata);
    for (const auto& m : ens.members) {
        check_shapes(m);
        const auto& c = m.config;
        w.u64(c.l_tail);
        w.u64(c.n_proj);
        w.u64(c.n_conv);
        w.u64(c.n_blocks);
        w.u64(c.mlp_hidden);
        w.u64(c.seed);
        w.u64(c.kernel_lengths.size());
        for (auto l : c.kernel_lengths) w.u64(l);
        w.f64(m.standardizer.mean);
        w.f64(m.standardizer.std);
        w.u64(m.seed);
        w.u32(static_cast<std::uint32_t>(m.tensors.size()));
        for (const auto& t : m.tensors) {
            w.u32(static_cast<std::uint32_t>(t.shape.size()));
            for (auto d : t.shape) w.u64(d);
            for (double v : t.data) w.f64(v);
        }
    }
    return "CHRS" + w.str();
}

inline ScorerEnsemble deserialize_checkpoint(std::string bytes) {
    if (bytes.size() < 4 || bytes.compare(0, 4, "CHRS") != 0)
        throw ValidationError("not a checkpoint (bad magic bytes)");
    detail::ByteReader r(std::move(bytes));
    r.raw(4);
    const auto version = r.u32();
    if (version != kCheckpointVersion)
        throw ValidationError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                              std::to_string(kCheckpointVersion) + ")");
    ScorerEnsemble ens;
    const auto count = r.u32();
    ens.k_stat = r.u64();
    ens.metadata = r.bytes();
    for (std::uint32_t mi = 0; mi < count; ++mi) {
        ModelParams m;
        auto& c = m.config;
        c.l_tail = r.u64();
        c.n_proj = r.u64();
        c.n_conv = r.u64();
        c.n_blocks = r.u64();
        c.mlp_hidden = r.u64();
        c.seed = r.u64();
        const auto nk = r.u64();
        if (nk > 1024) throw ValidationError("checkpoint: implausible kernel count");
        c.kernel_lengths.resize(nk);
        for (auto& l : c.kernel_lengths) l = r.u64();
        try {
            c.validate();
        } catch (const ConfigError& e) {
            throw ValidationError(std::string("checkpoint: ") + e.what());
        }
        m.standardizer.mean = r.f64();
        m.standardizer.std = r.f64();
        m.seed = r.u64();
        ParamLayout lay(c);
        const auto nt = r.u32();
        if (nt != lay.shapes.size())
            throw ShapeError("checkpoint has " + std::to_string(nt) + " tensors, config implies " +
                             std::to_string(lay.shapes.size()));
        for (std::uint32_t ti = 0; ti < nt; ++ti) {
            Tensor t;
            t.name = lay.shapes[ti].first;
            const auto rank = r.u32();
            if (rank > 8) throw ShapeError("checkpoint: implausible tensor rank");
            std::size_t n = 1;
            for (std::uint32_t d = 0; d < rank; ++d) {
                t.shape.push_back(r.u64());
                n *= t.shape.back();
            }
            if (t.shape != lay.shapes[ti].second)
                throw ShapeError("checkpoint tensor " + t.name + " shape does not match embedded config");
            t.data.resize(n);
            for (auto& v : t.data) v = r.f64();
            m.tensors.push_back(std::move(t));
        }
        ens.members.push_back(std::move(m));
    }
    if (!r.at_end()) throw ValidationError("checkpoint has trailing bytes");
    return ens;
}

inline void save_checkpoint(const ScorerEnsemble& ens, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    const std::string bytes = serialize_checkpoint(ens);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failure on " + path.string());
}

inline void save_checkpoint(const ModelParams& params, const std::filesystem::path& path,
                            std::size_t k_stat = kDefaultKStat) {
    save_checkpoint(ScorerEnsemble{k_stat, {params}, {}}, path);
}

inline ScorerEnsemble load_ensemble(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_checkpoint(ss.str());
}

/// Loads a checkpoint holding exactly one model.
inline ModelParams load_checkpoint(const std::filesystem::path& path) {
    auto ens = load_ensemble(path);
    if (ens.members.size() != 1)
        throw ValidationError("checkpoint holds " + std::to_string(ens.members.size()) + " models, expected 1");
    return std::move(ens.members.front());
}

}  // namespace chronos
