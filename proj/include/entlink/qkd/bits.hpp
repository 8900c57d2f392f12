#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace entlink::qkd {

/// One bit per byte, values 0 or 1.
using Bits = std::vector<std::uint8_t>;

enum class KeyStage { raw, sifted, reconciled, final };

std::string_view stage_name(KeyStage stage);

struct KeyBlock {
    Bits bits;
    KeyStage stage = KeyStage::raw;
    std::uint64_t leaked_bits = 0;  // cumulative classical-channel disclosure
    std::optional<double> qber_estimate;

    [[nodiscard]] std::size_t size() const { return bits.size(); }
};

/// h2(x) = -x log2 x - (1-x) log2(1-x), with h2(0) = h2(1) = 0.
double binary_entropy(double x);

/// Lowercase hex, first bit is the most significant bit of the first
/// nibble; a trailing partial nibble is zero-padded.
std::string to_hex(const Bits& bits);
Bits from_hex(std::string_view hex, std::size_t nbits);

/// "0110..." text form used on the wire.
std::string to_bitstring(const Bits& bits);
Bits from_bitstring(std::string_view text);

std::uint8_t parity(const Bits& bits, std::size_t begin, std::size_t end);
std::size_t hamming_distance(const Bits& a, const Bits& b);

}  // namespace entlink::qkd
