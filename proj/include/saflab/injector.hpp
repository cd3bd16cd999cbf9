#pragma once

#include <algorithm>
#include <cstdint>
#include <unordered_set>
#include <utility>
#include <vector>

#include "saflab/codec.hpp"
#include "saflab/errors.hpp"
#include "saflab/rng.hpp"

namespace saflab {

// One Monte Carlo fault draw: every stored weight bit flips independently
// with probability `ber`. The pattern is a pure function of (seed, round).
struct FaultConfig {
    double ber = 0.0;
    uint64_t seed = 0;
    uint64_t round = 0;
};

inline Rng fault_rng(const FaultConfig& cfg) { return Rng(cfg.seed).split(cfg.round); }

namespace detail {

// k distinct values in [0, n) via Floyd's sampling; exactly k draws.
inline std::vector<int64_t> sample_distinct(Rng& rng, int64_t n, int64_t k) {
    std::unordered_set<int64_t> chosen;
    chosen.reserve(static_cast<size_t>(k) * 2);
    for (int64_t i = n - k; i < n; ++i) {
        const auto j = static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(i + 1)));
        if (!chosen.insert(j).second) chosen.insert(i);
    }
    std::vector<int64_t> out(chosen.begin(), chosen.end());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace detail

// Sorted unique bit indices to flip. Sampling is binomial-count-then-choose:
// k ~ Binomial(bit_count, ber), then a uniform k-subset of positions, which
// matches independent per-bit Bernoulli flips in distribution at O(k) cost.
inline std::vector<int64_t> flip_positions(int64_t bit_count, const FaultConfig& cfg) {
    require(bit_count >= 0, ErrorCategory::input, "bit_count must be >= 0");
    require(cfg.ber >= 0.0 && cfg.ber <= 1.0, ErrorCategory::input, "ber must be in [0,1]");
    if (bit_count == 0 || cfg.ber == 0.0) return {};
    Rng rng = fault_rng(cfg);
    const int64_t k = binomial_draw(rng, bit_count, cfg.ber);
    if (k == 0) return {};
    if (k <= bit_count / 2) return detail::sample_distinct(rng, bit_count, k);
    // Dense patterns: sample the complement and emit everything else.
    const std::vector<int64_t> keep = detail::sample_distinct(rng, bit_count, bit_count - k);
    std::vector<int64_t> out;
    out.reserve(static_cast<size_t>(k));
    size_t ki = 0;
    for (int64_t i = 0; i < bit_count; ++i) {
        if (ki < keep.size() && keep[ki] == i) {
            ++ki;
        } else {
            out.push_back(i);
        }
    }
    return out;
}

// XOR the given bit positions into the buffer (LSB-first within each byte).
inline void apply_flips(BitBuffer& b, const std::vector<int64_t>& positions) {
    for (int64_t pos : positions) {
        require(pos >= 0 && pos < b.bit_size(), ErrorCategory::input,
                "flip position out of range");
        b.bytes[static_cast<size_t>(pos >> 3)] ^= static_cast<uint8_t>(1u << (pos & 7));
    }
}

// Returns the faulty copy and the exact number of flipped bits; the input
// buffer is untouched.
inline std::pair<BitBuffer, int64_t> inject(const BitBuffer& b, const FaultConfig& cfg) {
    const std::vector<int64_t> positions = flip_positions(b.bit_size(), cfg);
    BitBuffer out = b;
    apply_flips(out, positions);
    return {std::move(out), static_cast<int64_t>(positions.size())};
}

}  // namespace saflab
