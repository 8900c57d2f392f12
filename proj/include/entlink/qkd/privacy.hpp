#pragma once

// Privacy amplification by Toeplitz hashing and key confirmation by a
// polynomial hash over GF(2^64).

#include <cstdint>

#include "entlink/qkd/bits.hpp"

namespace entlink::qkd {

/// floor(n (1 - h2(qber)) - leakage - 2 log2(1/epsilon)), clamped at 0.
std::uint64_t final_key_length(std::uint64_t n, double qber, std::uint64_t leakage, double epsilon);

/// Fixed one-half margin: floor((n - leakage) / 2), clamped at 0.
std::uint64_t half_margin_length(std::uint64_t n, std::uint64_t leakage);

/// n + m - 1 pseudo-random bits from a 64-bit seed (splitmix64 stream).
Bits expand_seed(std::uint64_t seed, std::size_t nbits);

/// y = T x over GF(2) with the m x n Toeplitz matrix T[i][j] = s[i - j + n - 1],
/// where s = expand_seed(seed, n + m - 1).
Bits toeplitz_hash(const Bits& key, std::size_t m, std::uint64_t seed);

/// Polynomial hash in GF(2^64) modulo x^64 + x^4 + x^3 + x + 1, keyed by
/// `seed`. The key is packed MSB-first into 64-bit words and its bit length
/// is hashed first. Two different keys of w words collide for at most
/// (w + 1) of the 2^64 seeds.
std::uint64_t confirmation_hash(const Bits& key, std::uint64_t seed);

/// Carry-less product reduced modulo the field polynomial.
std::uint64_t gf64_multiply(std::uint64_t a, std::uint64_t b);

}  // namespace entlink::qkd
