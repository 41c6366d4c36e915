#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <compare>
#include <cstdint>

#include "chronos/error.hpp"

namespace chronos::detail {

// Exact sum of non-negative finite doubles as a 2176-bit fixed-point integer
// with unit 2^-1074 (the smallest subnormal). Comparisons between sums are
// exact, so mathematically equal vote totals always tie.
class ExactSum {
public:
    static constexpr int kWords = 34;

    void add(double x) {
        if (!(x >= 0.0) || !std::isfinite(x)) throw ValidationError("ExactSum: value must be finite and >= 0");
        if (x == 0.0) return;
        const auto bits = std::bit_cast<std::uint64_t>(x);
        const auto biased = static_cast<int>((bits >> 52) & 0x7ff);
        std::uint64_t mant = bits & ((std::uint64_t{1} << 52) - 1);
        int shift = 0;  // position of mantissa bit 0, in units of 2^-1074
        if (biased != 0) {
            mant |= std::uint64_t{1} << 52;
            shift = biased - 1;
        }
        const int word = shift / 64, bit = shift % 64;
        add_at(word, mant << bit);
        if (bit != 0) add_at(word + 1, mant >> (64 - bit));
    }

    friend std::strong_ordering operator<=>(const ExactSum& a, const ExactSum& b) {
        for (int i = kWords - 1; i >= 0; --i)
            if (a.w_[i] != b.w_[i]) return a.w_[i] <=> b.w_[i];
        return std::strong_ordering::equal;
    }
    friend bool operator==(const ExactSum& a, const ExactSum& b) { return a.w_ == b.w_; }

private:
    void add_at(int i, std::uint64_t v) {
        while (v != 0 && i < kWords) {
            const std::uint64_t before = w_[i];
            w_[i] += v;
            v = w_[i] < before ? 1 : 0;
            ++i;
        }
        if (v != 0) throw ValidationError("ExactSum overflow");
    }

    std::array<std::uint64_t, kWords> w_{};
};

}  // namespace chronos::detail
