#include "entlink/qkd/bits.hpp"

#include <cmath>
#include <stdexcept>

#include "entlink/errors.hpp"

namespace entlink::qkd {

std::string_view stage_name(KeyStage stage) {
    switch (stage) {
        case KeyStage::raw: return "raw";
        case KeyStage::sifted: return "sifted";
        case KeyStage::reconciled: return "reconciled";
        case KeyStage::final: return "final";
    }
    return "unknown";
}

double binary_entropy(double x) {
    if (x <= 0.0 || x >= 1.0) {
        return 0.0;
    }
    return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

std::string to_hex(const Bits& bits) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve((bits.size() + 3) / 4);
    for (std::size_t i = 0; i < bits.size(); i += 4) {
        int nibble = 0;
        for (std::size_t k = 0; k < 4; ++k) {
            nibble <<= 1;
            if (i + k < bits.size()) nibble |= bits[i + k] & 1;
        }
        out.push_back(digits[nibble]);
    }
    return out;
}

Bits from_hex(std::string_view hex, std::size_t nbits) {
    if (hex.size() * 4 < nbits) {
        throw ValidationError("from_hex: not enough digits");
    }
    Bits out;
    out.reserve(nbits);
    for (char c : hex) {
        int v = 0;
        if (c >= '0' && c <= '9') v = c - '0';
        else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
        else throw ValidationError("from_hex: bad digit");
        for (int k = 3; k >= 0 && out.size() < nbits; --k) {
            out.push_back(static_cast<std::uint8_t>((v >> k) & 1));
        }
    }
    return out;
}

std::string to_bitstring(const Bits& bits) {
    std::string out(bits.size(), '0');
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i]) out[i] = '1';
    }
    return out;
}

Bits from_bitstring(std::string_view text) {
    Bits out(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '0' && text[i] != '1') {
            throw ValidationError("bit string may only contain 0 and 1");
        }
        out[i] = text[i] == '1';
    }
    return out;
}

std::uint8_t parity(const Bits& bits, std::size_t begin, std::size_t end) {
    std::uint8_t p = 0;
    for (std::size_t i = begin; i < end; ++i) p ^= bits[i];
    return p;
}

std::size_t hamming_distance(const Bits& a, const Bits& b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("hamming_distance: length mismatch");
    }
    std::size_t d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += a[i] != b[i];
    return d;
}

}  // namespace entlink::qkd
