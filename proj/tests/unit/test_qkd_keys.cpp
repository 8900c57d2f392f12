#include <doctest.h>

#include <cmath>
#include <set>

#include "entlink/errors.hpp"
#include "entlink/qkd/bits.hpp"
#include "entlink/qkd/cascade.hpp"
#include "entlink/qkd/parties.hpp"
#include "entlink/qkd/privacy.hpp"
#include "entlink/qkd/session.hpp"
#include "entlink/random.hpp"

using namespace entlink;
using namespace entlink::qkd;

namespace {

Bits random_bits(Rng& rng, std::size_t n) {
    Bits b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng.below(2));
    return b;
}

Bits with_errors(const Bits& key, double rate, Rng& rng) {
    Bits out = key;
    for (auto& x : out) {
        if (rng.uniform() < rate) x ^= 1;
    }
    return out;
}

ParityOracle oracle_for(const Bits& alice, std::size_t* calls = nullptr) {
    return [&alice, calls](const ParityQuery& q) {
        if (calls) ++*calls;
        return answer_parity_query(alice, q);
    };
}

// Reference GF(2) product with the m x n Toeplitz matrix, built row by row.
Bits toeplitz_oracle(const Bits& key, std::size_t m, std::uint64_t seed) {
    const std::size_t n = key.size();
    const Bits s = expand_seed(seed, n + m - 1);
    Bits y(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
        std::uint8_t acc = 0;
        for (std::size_t j = 0; j < n; ++j) acc ^= s[i + n - 1 - j] & key[j];
        y[i] = acc;
    }
    return y;
}

}  // namespace

TEST_SUITE("qkd_bits") {
    TEST_CASE("binary entropy") {
        CHECK(binary_entropy(0.0) == 0.0);
        CHECK(binary_entropy(1.0) == 0.0);
        CHECK(binary_entropy(0.5) == doctest::Approx(1.0));
        CHECK(binary_entropy(0.0583) == doctest::Approx(0.3208).epsilon(1e-3));
        CHECK(binary_entropy(0.11) == doctest::Approx(0.4999).epsilon(1e-3));
    }

    TEST_CASE("hex and bitstring round trips") {
        CHECK(to_hex(Bits{1, 0, 1, 0, 1, 1, 1, 1}) == "af");
        CHECK(to_hex(Bits{1}) == "8");
        CHECK(to_bitstring(Bits{0, 1, 1}) == "011");
        Rng rng(1);
        for (std::size_t n = 0; n < 70; ++n) {
            const auto b = random_bits(rng, n);
            CHECK(from_hex(to_hex(b), n) == b);
            CHECK(from_bitstring(to_bitstring(b)) == b);
        }
        CHECK_THROWS(from_bitstring("0120"));
    }

    TEST_CASE("parity and hamming distance") {
        const Bits b{1, 1, 0, 1};
        CHECK(parity(b, 0, 4) == 1);
        CHECK(parity(b, 0, 2) == 0);
        CHECK(hamming_distance(b, Bits{0, 1, 0, 0}) == 2);
    }

    TEST_CASE("stage names") {
        CHECK(stage_name(KeyStage::raw) == "raw");
        CHECK(stage_name(KeyStage::final) == "final");
    }
}

TEST_SUITE("qkd_sift") {
    TEST_CASE("sift keeps same-basis positions and inverts Bob") {
        const std::vector<LocalRecord> alice{{0, 0, Outcome::plus}, {1, 1, Outcome::minus},
                                             {2, 0, Outcome::minus}, {3, 1, Outcome::plus}};
        const std::vector<LocalRecord> bob{{0, 0, Outcome::minus}, {1, 0, Outcome::plus},
                                           {2, 1, Outcome::plus}, {3, 1, Outcome::minus}};
        const auto s = sift(alice, bob);
        CHECK(s.kept_ids == std::vector<std::uint64_t>{0, 3});
        CHECK(s.alice.bits == Bits{0, 0});
        CHECK(s.bob.bits == Bits{0, 0});
        CHECK(s.alice.stage == KeyStage::sifted);
    }

    TEST_CASE("identifier mismatch aborts") {
        const std::vector<LocalRecord> alice{{0, 0, Outcome::plus}, {1, 0, Outcome::plus}};
        const std::vector<LocalRecord> bob{{0, 0, Outcome::plus}, {2, 0, Outcome::plus}};
        CHECK_THROWS_AS(sift(alice, bob), ProtocolAbort);
        CHECK_THROWS_AS(sift(alice, std::vector<LocalRecord>{{0, 0, Outcome::plus}}), ProtocolAbort);
    }

    TEST_CASE("always the same basis keeps everything") {
        std::vector<LocalRecord> a, b;
        for (std::uint64_t i = 0; i < 50; ++i) {
            a.push_back({i, 1, Outcome::plus});
            b.push_back({i, 1, Outcome::minus});
        }
        const auto s = sift(a, b);
        CHECK(s.kept_ids.size() == 50);
        CHECK(s.alice.bits == s.bob.bits);
    }

    TEST_CASE("balancing subsamples to the least-populated detector") {
        std::vector<CoincidenceRecord> recs;
        const std::array<int, 4> counts{100, 50, 50, 50};
        for (std::uint8_t d = 0; d < 4; ++d) {
            for (int k = 0; k < counts[d]; ++k) {
                CoincidenceRecord r;
                r.alice.detector = d;
                r.bob.detector = static_cast<std::uint8_t>(recs.size() % 4);
                r.alice_index = recs.size();
                recs.push_back(r);
            }
        }
        const auto out = balance_and_count(recs, 5);
        CHECK(out.alice_before == DetectorCounts{100, 50, 50, 50});
        for (auto c : out.alice_after) CHECK(c <= 50);
        const auto floor_b = *std::min_element(out.bob_after.begin(), out.bob_after.end());
        for (auto c : out.bob_after) CHECK(c == floor_b);
        CHECK(out.records.size() >= 4 * floor_b);
        // original order preserved
        for (std::size_t i = 1; i < out.records.size(); ++i)
            CHECK(out.records[i - 1].alice_index < out.records[i].alice_index);
    }

    TEST_CASE("balanced input is left alone") {
        std::vector<CoincidenceRecord> recs;
        for (int k = 0; k < 64; ++k) {
            CoincidenceRecord r;
            r.alice.detector = static_cast<std::uint8_t>(k % 4);
            r.bob.detector = static_cast<std::uint8_t>((k / 4) % 4);
            recs.push_back(r);
        }
        CHECK(balance_and_count(recs, 1).records.size() == 64);
    }
}

TEST_SUITE("qkd_qber") {
    TEST_CASE("identical keys estimate zero") {
        Rng rng(2);
        KeyBlock a{random_bits(rng, 1000), KeyStage::sifted};
        KeyBlock b = a;
        const auto est = estimate_qber(a, b, 0.1, 9);
        CHECK(est.qber == 0.0);
        CHECK(est.sample == 100);
        CHECK(a.size() == 900);
        CHECK(a.leaked_bits == 100);
        CHECK(b.leaked_bits == 100);
        CHECK(a.bits == b.bits);
    }

    TEST_CASE("ten differing sample positions out of 100 give 0.10") {
        Rng rng(3);
        KeyBlock a{random_bits(rng, 1000), KeyStage::sifted};
        KeyBlock b = a;
        const auto pos = choose_sample(1000, 0.1, 77);
        for (int k = 0; k < 10; ++k) b.bits[pos[static_cast<std::size_t>(k) * 7]] ^= 1;
        const auto est = estimate_qber(a, b, 0.1, 77);
        CHECK(est.errors == 10);
        CHECK(est.qber == doctest::Approx(0.10));
        CHECK(a.bits == b.bits);  // all errors were in the sample
    }

    TEST_CASE("sample validation") {
        KeyBlock a{Bits(3, 0), KeyStage::sifted};
        KeyBlock b = a;
        CHECK_THROWS_AS(estimate_qber(a, b, 0.1, 1), ProtocolAbort);  // rounds to 0
        CHECK_THROWS_AS(estimate_qber(a, b, 0.0, 1), ValidationError);
        CHECK_THROWS_AS(estimate_qber(a, b, 1.0, 1), ValidationError);
        KeyBlock raw{Bits(10, 0), KeyStage::raw};
        CHECK_THROWS_AS(estimate_qber(raw, raw, 0.5, 1), ValidationError);
    }

    TEST_CASE("choose_sample draws distinct sorted positions") {
        Rng rng(4);
        for (int t = 0; t < 100; ++t) {
            const std::size_t n = 1 + rng.below(500);
            const auto s = choose_sample(n, 0.3, rng.next());
            CHECK(s.size() == static_cast<std::size_t>(std::llround(0.3 * n)));
            CHECK(std::is_sorted(s.begin(), s.end()));
            CHECK(std::set<std::uint64_t>(s.begin(), s.end()).size() == s.size());
            for (auto p : s) CHECK(p < n);
        }
    }
}

TEST_SUITE("qkd_cascade") {
    TEST_CASE("first block size") {
        CHECK(cascade_first_block(0.0583, 10000) == 13);
        CHECK(cascade_first_block(0.05, 10000) == 15);
        CHECK(cascade_first_block(0.0, 500) == 500);
        CHECK(cascade_first_block(0.9, 500) == 1);
    }

    TEST_CASE("permutations") {
        const auto id = cascade_permutation(100, 0, 5);
        for (std::size_t i = 0; i < 100; ++i) CHECK(id[i] == i);
        const auto p = cascade_permutation(100, 2, 5);
        CHECK(std::set<std::size_t>(p.begin(), p.end()).size() == 100);
        CHECK(p != id);
        CHECK(p == cascade_permutation(100, 2, 5));
        CHECK(p != cascade_permutation(100, 3, 5));
    }

    TEST_CASE("single flip in a 1024-bit block costs 11 parities") {
        Rng rng(6);
        const Bits alice = random_bits(rng, 1024);
        for (std::size_t pos : {0u, 511u, 777u, 1023u}) {
            Bits bob = alice;
            bob[pos] ^= 1;
            CascadeParams p;
            p.passes = 1;
            p.first_block = 1024;
            const auto stats = cascade_correct(bob, 0.001, 1, p, oracle_for(alice));
            CHECK(bob == alice);
            CHECK(stats.corrections == 1);
            CHECK(stats.leaked_bits == 11);
        }
    }

    TEST_CASE("error-free keys leak only the top-level parities") {
        Rng rng(7);
        const Bits alice = random_bits(rng, 1000);
        Bits bob = alice;
        const auto stats = cascade_correct(bob, 0.05, 3, {}, oracle_for(alice));
        CHECK(stats.corrections == 0);
        // blocks of 15, 30, 60, 120 over 1000 bits
        CHECK(stats.leaked_bits == 67 + 34 + 17 + 9);
    }

    TEST_CASE("Alice's key is never touched and Bob converges") {
        Rng rng(8);
        for (int trial = 0; trial < 30; ++trial) {
            const Bits alice = random_bits(rng, 2000);
            const Bits alice_copy = alice;
            Bits bob = with_errors(alice, 0.05, rng);
            const auto before = hamming_distance(alice, bob);
            std::size_t calls = 0;
            const auto stats = cascade_correct(bob, 0.05, rng.next(), {}, oracle_for(alice, &calls));
            CHECK(alice == alice_copy);
            CHECK(stats.queries == calls);
            CHECK(bob.size() == alice.size());
            CHECK(hamming_distance(alice, bob) <= 2);
            CHECK(stats.corrections >= before - hamming_distance(alice, bob));
        }
    }

    TEST_CASE("leakage of a 7,956-bit key at 5.83% stays within 1.1 to 1.6 n h2") {
        Rng rng(9);
        const std::size_t n = 7956;
        const double q = 0.0583;
        double total = 0.0;
        const int trials = 20;
        for (int t = 0; t < trials; ++t) {
            const Bits alice = random_bits(rng, n);
            Bits bob = with_errors(alice, q, rng);
            const auto stats = cascade_correct(bob, q, rng.next(), {}, oracle_for(alice));
            CHECK(bob == alice);
            total += static_cast<double>(stats.leaked_bits);
        }
        const double ratio = total / trials / (n * binary_entropy(q));
        CHECK(ratio >= 1.1);
        CHECK(ratio <= 1.6);
    }

    TEST_CASE("round cap stops a runaway correction") {
        Rng rng(10);
        const Bits alice = random_bits(rng, 500);
        Bits bob = with_errors(alice, 0.05, rng);
        CascadeParams p;
        p.max_rounds = 3;
        // a liar that flips every parity keeps Bob busy forever
        const ParityOracle liar = [&](const ParityQuery& q) {
            Bits b = answer_parity_query(alice, q);
            for (auto& x : b) x ^= 1;
            return b;
        };
        const auto stats = cascade_correct(bob, 0.05, 1, p, liar);
        CHECK(stats.stopped_early);
        // each round is one bisection sweep of a few queries
        CHECK(stats.queries < 100);
    }

    TEST_CASE("reconcile enforces the abort threshold") {
        KeyBlock a{Bits(100, 0), KeyStage::sifted};
        KeyBlock b = a;
        CHECK_THROWS_AS(reconcile(a, b, 0.12, 1), ProtocolAbort);
        CHECK_NOTHROW(reconcile(a, b, 0.08, 1));
        CHECK(b.stage == KeyStage::reconciled);
    }
}

TEST_SUITE("qkd_privacy") {
    TEST_CASE("final length examples") {
        CHECK(final_key_length(1000, 0.0, 0, 1.0) == 1000);
        const double h = binary_entropy(0.0583);
        const auto expected = static_cast<std::uint64_t>(std::floor(4869 * (1 - h) - 2 * std::log2(1e6)));
        CHECK(final_key_length(4869, 0.0583, 0, 1e-6) == expected);
        CHECK(final_key_length(4869, 0.0583, 0, 1e-6) == doctest::Approx(3267).epsilon(0.01));
        CHECK(final_key_length(100, 0.11, 80, 1e-6) == 0);
        CHECK(half_margin_length(4869, 0) == 2434);
        CHECK(half_margin_length(100, 200) == 0);
    }

    TEST_CASE("final length is nonincreasing in qber and leakage") {
        Rng rng(11);
        for (int t = 0; t < 2000; ++t) {
            const std::uint64_t n = 1 + rng.below(20000);
            const double q1 = rng.uniform() * 0.5;
            const double q2 = q1 + rng.uniform() * (0.5 - q1);
            const std::uint64_t l1 = rng.below(n);
            const std::uint64_t l2 = l1 + rng.below(n);
            CHECK(final_key_length(n, q2, l1, 1e-6) <= final_key_length(n, q1, l1, 1e-6));
            CHECK(final_key_length(n, q1, l2, 1e-6) <= final_key_length(n, q1, l1, 1e-6));
            CHECK(half_margin_length(n, l2) <= half_margin_length(n, l1));
        }
    }

    TEST_CASE("Toeplitz hash equals the matrix product") {
        Rng rng(12);
        for (int t = 0; t < 50; ++t) {
            const std::size_t n = 1 + rng.below(300);
            const std::size_t m = rng.below(n + 1);
            const Bits key = random_bits(rng, n);
            const std::uint64_t seed = rng.next();
            CHECK(toeplitz_hash(key, m, seed) == toeplitz_oracle(key, m, seed));
        }
        CHECK(toeplitz_hash(Bits(10, 1), 0, 1).empty());
    }

    TEST_CASE("Toeplitz hash is linear over GF(2)") {
        Rng rng(13);
        const Bits x = random_bits(rng, 257);
        const Bits y = random_bits(rng, 257);
        Bits xy(257);
        for (std::size_t i = 0; i < 257; ++i) xy[i] = x[i] ^ y[i];
        const auto hx = toeplitz_hash(x, 100, 5), hy = toeplitz_hash(y, 100, 5), hxy = toeplitz_hash(xy, 100, 5);
        for (std::size_t i = 0; i < 100; ++i) CHECK(hxy[i] == (hx[i] ^ hy[i]));
    }

    TEST_CASE("amplified keys pass the monobit bound") {
        Rng rng(14);
        for (int t = 0; t < 20; ++t) {
            KeyBlock k{random_bits(rng, 5000), KeyStage::reconciled};
            const auto out = privacy_amplify(k, 1000, 0.05, 1e-6, rng.next());
            const double m = static_cast<double>(out.size());
            REQUIRE(m >= 1);
            CHECK(out.stage == KeyStage::final);
            std::size_t ones = 0;
            for (auto b : out.bits) ones += b;
            CHECK(std::abs(ones / m - 0.5) <= 3.0 / (2.0 * std::sqrt(m)));
        }
        KeyBlock sifted{Bits(10, 0), KeyStage::sifted};
        CHECK_THROWS_AS(privacy_amplify(sifted, 0, 0, 1e-6, 1), ValidationError);
    }

    TEST_CASE("half margin mode") {
        KeyBlock k{Bits(4869, 1), KeyStage::reconciled};
        CHECK(privacy_amplify(k, 0, 0.0583, 1e-6, 3, MarginMode::half).size() == 2434);
    }

    TEST_CASE("GF(2^64) arithmetic") {
        CHECK(gf64_multiply(0, 12345) == 0);
        CHECK(gf64_multiply(1, 12345) == 12345);
        CHECK(gf64_multiply(2, 1ULL << 63) == 0x1B);  // x * x^63 = x^64 = x^4 + x^3 + x + 1
        Rng rng(15);
        for (int t = 0; t < 500; ++t) {
            const auto a = rng.next(), b = rng.next(), c = rng.next();
            CHECK(gf64_multiply(a, b) == gf64_multiply(b, a));
            CHECK(gf64_multiply(a, b ^ c) == (gf64_multiply(a, b) ^ gf64_multiply(a, c)));
            CHECK(gf64_multiply(gf64_multiply(a, b), c) == gf64_multiply(a, gf64_multiply(b, c)));
        }
    }

    TEST_CASE("confirmation hash separates different keys") {
        Rng rng(16);
        int collisions = 0;
        for (int t = 0; t < 2000; ++t) {
            const Bits a = random_bits(rng, 1 + rng.below(3000));
            Bits b = a;
            b[rng.below(b.size())] ^= 1;
            const auto seed = rng.next();
            CHECK(confirmation_hash(a, seed) == confirmation_hash(a, seed));
            collisions += confirmation_hash(a, seed) == confirmation_hash(b, seed);
        }
        CHECK(collisions == 0);
        // length is hashed, so trailing zero bits matter
        CHECK(confirmation_hash(Bits{1, 0}, 7) != confirmation_hash(Bits{1, 0, 0}, 7));
    }
}
