#pragma once

// Cascade interactive reconciliation. Bob corrects his key towards Alice's
// by asking for parities of blocks of shuffled key positions; Alice's key is
// never changed.

#include <cstdint>
#include <functional>
#include <vector>

#include "entlink/qkd/bits.hpp"

namespace entlink::qkd {

struct CascadeParams {
    int passes = 4;
    /// First-pass block size; 0 selects ceil(0.73 / qber).
    std::size_t first_block = 0;
    /// Safety stop for runaway correction loops (tampered parities).
    std::size_t max_rounds = 100000;
};

/// Half-open range [begin, end) of positions in a pass's shuffled order.
struct ParityRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    friend bool operator==(const ParityRange&, const ParityRange&) = default;
};

struct ParityQuery {
    int pass = 0;  // 0-based
    std::uint64_t seed = 0;
    std::vector<ParityRange> ranges;
};

/// Answers a query with Alice's parities, one per range.
using ParityOracle = std::function<Bits(const ParityQuery&)>;

struct CascadeStats {
    std::size_t leaked_bits = 0;  // parities disclosed by Alice
    std::size_t corrections = 0;  // bits flipped in Bob's key
    std::size_t queries = 0;      // round trips
    std::size_t first_block = 0;
    bool stopped_early = false;  // max_rounds reached or parities contradicted each other
};

std::size_t cascade_first_block(double qber, std::size_t n);

/// Shuffled order of key positions for a pass; pass 0 is the identity.
std::vector<std::size_t> cascade_permutation(std::size_t n, int pass, std::uint64_t seed);

/// Alice's side: parities of her key over the query's ranges.
Bits answer_parity_query(const Bits& alice_key, const ParityQuery& query);

/// Bob's side: runs the full correction, flipping bits of `bob_key` in place.
CascadeStats cascade_correct(Bits& bob_key, double qber, std::uint64_t seed,
                             const CascadeParams& params, const ParityOracle& oracle);

}  // namespace entlink::qkd
