#include "entlink/qkd/privacy.hpp"

#include <algorithm>
#include <cmath>

#include "entlink/errors.hpp"
#include "entlink/random.hpp"

namespace entlink::qkd {

std::uint64_t final_key_length(std::uint64_t n, double qber, std::uint64_t leakage, double epsilon) {
    if (!(epsilon > 0.0 && epsilon <= 1.0)) {
        throw ValidationError("epsilon must lie in (0, 1]");
    }
    if (!(qber >= 0.0 && qber <= 1.0)) {
        throw ValidationError("qber must lie in [0, 1]");
    }
    const double m = static_cast<double>(n) * (1.0 - binary_entropy(std::min(qber, 0.5))) -
                     static_cast<double>(leakage) - 2.0 * std::log2(1.0 / epsilon);
    // Tiny slack so exact integers are not lost to rounding in log2.
    return m > 0.0 ? static_cast<std::uint64_t>(std::floor(m + 1e-9)) : 0;
}

std::uint64_t half_margin_length(std::uint64_t n, std::uint64_t leakage) {
    return n > leakage ? (n - leakage) / 2 : 0;
}

Bits expand_seed(std::uint64_t seed, std::size_t nbits) {
    Bits out(nbits);
    std::uint64_t state = seed;
    std::uint64_t word = 0;
    for (std::size_t i = 0; i < nbits; ++i) {
        if (i % 64 == 0) {
            state += 0x9e3779b97f4a7c15ULL;
            word = mix64(state);
        }
        out[i] = static_cast<std::uint8_t>((word >> (63 - i % 64)) & 1);
    }
    return out;
}

Bits toeplitz_hash(const Bits& key, std::size_t m, std::uint64_t seed) {
    const std::size_t n = key.size();
    Bits out(m, 0);
    if (m == 0 || n == 0) {
        return out;
    }
    const Bits s = expand_seed(seed, n + m - 1);
    // Row i reads s[i + n - 1 - j]; walk the key's set bits only.
    std::vector<std::size_t> ones;
    for (std::size_t j = 0; j < n; ++j) {
        if (key[j]) ones.push_back(j);
    }
    for (std::size_t i = 0; i < m; ++i) {
        std::uint8_t acc = 0;
        const std::size_t base = i + n - 1;
        for (std::size_t j : ones) acc ^= s[base - j];
        out[i] = acc;
    }
    return out;
}

std::uint64_t gf64_multiply(std::uint64_t a, std::uint64_t b) {
    constexpr std::uint64_t kReduction = 0x1BULL;  // x^4 + x^3 + x + 1
    std::uint64_t result = 0;
    for (int i = 63; i >= 0; --i) {
        const bool carry = (result >> 63) & 1;
        result <<= 1;
        if (carry) result ^= kReduction;
        if ((b >> i) & 1) result ^= a;
    }
    return result;
}

std::uint64_t confirmation_hash(const Bits& key, std::uint64_t seed) {
    const std::uint64_t x = mix64(seed);
    std::uint64_t h = gf64_multiply(static_cast<std::uint64_t>(key.size()), x);
    for (std::size_t i = 0; i < key.size(); i += 64) {
        std::uint64_t word = 0;
        for (std::size_t k = 0; k < 64; ++k) {
            word <<= 1;
            if (i + k < key.size()) word |= key[i + k] & 1;
        }
        h = gf64_multiply(h ^ word, x);
    }
    return h;
}

}  // namespace entlink::qkd
