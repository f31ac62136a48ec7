#pragma once

#include <array>
#include <cstdint>

namespace probcal::rng {

// One round of splitmix64; advances state. Used for seeding and key mixing.
std::uint64_t splitmix64(std::uint64_t& state);

// Hash a (seed, key) pair into a stream seed. Distinct keys give
// independent streams for the same base seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key_a, std::uint64_t key_b);

// Quantile of the standard normal distribution (Wichura's AS241, PPND16).
// Accurate to ~1e-15 for p in (0,1).
double norm_ppf(double p);

// xoshiro256++ generator (Blackman & Vigna). Seeded through splitmix64 so
// any 64-bit seed, including 0, yields a valid state.
class Xoshiro256pp {
public:
    explicit Xoshiro256pp(std::uint64_t seed);

    std::uint64_t next();

    // 53-bit uniform on the open interval (0, 1); never returns 0 or 1,
    // so it can feed norm_ppf directly.
    double uniform01();

    // Standard normal via inverse-CDF; consumes exactly one uniform.
    double normal();

private:
    std::array<std::uint64_t, 4> state_;
};

// Stream bound to (seed, row): every row of a data-parallel kernel draws
// from its own generator, so parallel output is bit-equal to serial output
// for any partition of the index range.
inline Xoshiro256pp row_stream(std::uint64_t seed, std::uint64_t row) {
    return Xoshiro256pp(derive_seed(seed, row));
}

}  // namespace probcal::rng
