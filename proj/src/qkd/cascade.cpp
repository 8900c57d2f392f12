#include "entlink/qkd/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "entlink/errors.hpp"
#include "entlink/random.hpp"

namespace entlink::qkd {
namespace {

struct Pass {
    std::size_t block = 0;
    std::vector<std::size_t> order;     // shuffled position -> key index
    std::vector<std::size_t> position;  // key index -> shuffled position
    std::vector<std::uint8_t> odd;      // per block: Alice and Bob parities differ
    std::set<std::size_t> odd_blocks;

    void toggle(std::size_t blk) {
        odd[blk] ^= 1;
        if (odd[blk]) odd_blocks.insert(blk);
        else odd_blocks.erase(blk);
    }
};

std::uint8_t shuffled_parity(const Bits& key, const std::vector<std::size_t>& order, ParityRange r) {
    std::uint8_t p = 0;
    for (std::size_t i = r.begin; i < r.end; ++i) p ^= key[order[i]];
    return p;
}

}  // namespace

std::size_t cascade_first_block(double qber, std::size_t n) {
    if (n == 0) return 0;
    if (!(qber > 0.0)) return n;
    const auto k = static_cast<std::size_t>(std::ceil(0.73 / qber));
    return std::clamp<std::size_t>(k, 1, n);
}

std::vector<std::size_t> cascade_permutation(std::size_t n, int pass, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (pass == 0) {
        return order;
    }
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(pass)));
    for (std::size_t i = n; i > 1; --i) {
        std::swap(order[i - 1], order[rng.below(i)]);
    }
    return order;
}

Bits answer_parity_query(const Bits& alice_key, const ParityQuery& query) {
    const auto order = cascade_permutation(alice_key.size(), query.pass, query.seed);
    Bits out;
    out.reserve(query.ranges.size());
    for (const auto& r : query.ranges) {
        if (r.begin >= r.end || r.end > alice_key.size()) {
            throw ValidationError("parity query range out of bounds");
        }
        out.push_back(shuffled_parity(alice_key, order, r));
    }
    return out;
}

CascadeStats cascade_correct(Bits& bob_key, double qber, std::uint64_t seed,
                             const CascadeParams& params, const ParityOracle& oracle) {
    if (params.passes < 1) {
        throw ValidationError("cascade needs at least one pass");
    }
    const std::size_t n = bob_key.size();
    CascadeStats stats;
    stats.first_block = params.first_block > 0 ? std::min(params.first_block, n)
                                               : cascade_first_block(qber, n);
    if (n == 0) {
        return stats;
    }

    auto ask = [&](int pass, std::vector<ParityRange> ranges) {
        ParityQuery q{pass, seed, std::move(ranges)};
        Bits answer = oracle(q);
        if (answer.size() != q.ranges.size()) {
            throw std::runtime_error("cascade: parity answer has the wrong length");
        }
        stats.leaked_bits += answer.size();
        ++stats.queries;
        return answer;
    };

    std::vector<Pass> passes;
    // Honest parities never point at the same bit twice.
    std::vector<std::uint8_t> flipped(n, 0);
    bool inconsistent = false;
    auto flip = [&](std::size_t key_index) {
        if (flipped[key_index]) {
            inconsistent = true;
            return;
        }
        flipped[key_index] = 1;
        bob_key[key_index] ^= 1;
        ++stats.corrections;
        for (auto& p : passes) p.toggle(p.position[key_index] / p.block);
    };

    // Bisects every odd block of one pass in lock step, one query per level.
    auto bisect = [&](int pass_index) {
        Pass& p = passes[static_cast<std::size_t>(pass_index)];
        std::vector<ParityRange> open;
        for (std::size_t blk : p.odd_blocks) {
            open.push_back({blk * p.block, std::min((blk + 1) * p.block, n)});
        }
        std::vector<std::size_t> found;
        while (!open.empty()) {
            std::vector<ParityRange> halves;
            std::vector<ParityRange> next;
            for (const auto& r : open) {
                if (r.end - r.begin == 1) {
                    found.push_back(p.order[r.begin]);
                } else {
                    halves.push_back({r.begin, r.begin + (r.end - r.begin) / 2});
                }
            }
            if (!halves.empty()) {
                const Bits alice = ask(pass_index, halves);
                std::size_t h = 0;
                for (const auto& r : open) {
                    if (r.end - r.begin == 1) continue;
                    const ParityRange left = halves[h];
                    const bool left_odd = alice[h] != shuffled_parity(bob_key, p.order, left);
                    next.push_back(left_odd ? left : ParityRange{left.end, r.end});
                    ++h;
                }
            }
            open.swap(next);
        }
        for (std::size_t idx : found) flip(idx);
    };

    std::size_t block = stats.first_block;
    for (int pass = 0; pass < params.passes; ++pass) {
        Pass p;
        p.block = std::max<std::size_t>(1, std::min(block, n));
        p.order = cascade_permutation(n, pass, seed);
        p.position.resize(n);
        for (std::size_t i = 0; i < n; ++i) p.position[p.order[i]] = i;
        const std::size_t blocks = (n + p.block - 1) / p.block;
        p.odd.assign(blocks, 0);
        std::vector<ParityRange> top;
        for (std::size_t b = 0; b < blocks; ++b) top.push_back({b * p.block, std::min((b + 1) * p.block, n)});
        const Bits alice = ask(pass, top);
        for (std::size_t b = 0; b < blocks; ++b) {
            if (alice[b] != shuffled_parity(bob_key, p.order, top[b])) p.toggle(b);
        }
        passes.push_back(std::move(p));

        // Correct this pass, then chase errors exposed in earlier passes.
        std::size_t rounds = 0;
        for (;;) {
            int target = -1;
            for (std::size_t q = 0; q < passes.size(); ++q) {
                if (!passes[q].odd_blocks.empty()) {
                    target = static_cast<int>(q);
                    break;
                }
            }
            if (target < 0) break;
            if (++rounds > params.max_rounds) {
                stats.stopped_early = true;
                return stats;
            }
            bisect(target);
            if (inconsistent) {
                stats.stopped_early = true;
                return stats;
            }
        }
        block = std::min(n, block * 2);
    }
    return stats;
}

}  // namespace entlink::qkd
