#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

#include <omp.h>

namespace probcal::par {

// Fixed block width for all data-parallel kernels. Blocks are defined by the
// index range alone, never by the thread count, so block-ordered reductions
// give the same bits no matter how many threads run.
inline constexpr std::size_t kBlock = 4096;

inline std::size_t block_count(std::size_t n) { return (n + kBlock - 1) / kBlock; }

inline int max_threads() { return omp_get_max_threads(); }
inline void set_threads(int n) {
    if (n > 0) omp_set_num_threads(n);
}

// f(lo, hi, block_index) over fixed-width blocks of [0, n).
template <class F>
void for_blocks(std::size_t n, F&& f) {
    const auto nb = static_cast<std::ptrdiff_t>(block_count(n));
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t b = 0; b < nb; ++b) {
        const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
        const std::size_t hi = std::min(n, lo + kBlock);
        f(lo, hi, static_cast<std::size_t>(b));
    }
}

// Deterministic blocked reduction. fill(lo, hi, partial) accumulates one
// block into its own partial; partials are folded serially in block order.
template <class Partial, class Fill, class Combine>
Partial reduce_blocks(std::size_t n, Partial init, Fill&& fill, Combine&& combine) {
    std::vector<Partial> partials(block_count(n), init);
    for_blocks(n, [&](std::size_t lo, std::size_t hi, std::size_t b) { fill(lo, hi, partials[b]); });
    Partial out = std::move(init);
    for (auto& p : partials) combine(out, p);
    return out;
}

}  // namespace probcal::par
