#pragma once

// Seeded randomness with a bit-exact definition on every platform.
// std::mt19937_64 output is fixed by the standard; the distributions in
// <random> are not, so the few we need are written out here.

#include <cstdint>
#include <random>
#include <string_view>

namespace entlink {

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

/// Named sub-seed: all randomness of a run flows from one base seed
/// through names such as "link", "protocol" or "sampling".
std::uint64_t derive_seed(std::uint64_t base, std::string_view name);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

/// Counter-based uniform in [0, 1): a pure function of its arguments.
double hashed_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b);

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// 53-bit uniform in [0, 1).
    double uniform();
    /// Uniform in (0, 1].
    double uniform_positive() { return 1.0 - uniform(); }
    double exponential(double rate);
    /// Standard normal by Box-Muller; |z| < 8.58 by construction.
    double normal();
    bool bernoulli(double p) { return uniform() < p; }
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::mt19937_64 engine_;
};

}  // namespace entlink
