#pragma once

#include <cstdint>
#include <random>

namespace tdsim {

/// splitmix64 step; used to derive independent stream seeds from a master
/// seed without correlations between consecutive integers.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Deterministic double generator on top of mt19937_64.
///
/// uniform_real_distribution is implementation-defined, so all draws go
/// through the explicit 53-bit mantissa construction below; outputs are
/// identical on every platform/stdlib for a given seed.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    /// uniform in [0, 1)
    double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    /// uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + unit() * (hi - lo); }

    std::uint64_t raw() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

/// Derive the i-th substream seed of a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t s = master ^ (0xD1B54A32D192ED03ull * (stream + 1));
    return splitmix64(s);
}

}  // namespace tdsim
