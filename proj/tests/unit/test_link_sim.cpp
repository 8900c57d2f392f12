#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "entlink/errors.hpp"
#include "entlink/link_sim.hpp"
#include "support.hpp"

using namespace entlink;
using entlink::testing::bell_config;
using entlink::testing::ideal_config;

namespace {

bool sorted_by_time(const std::vector<TimeTaggedEvent>& v) {
    return std::is_sorted(v.begin(), v.end(),
                          [](const auto& a, const auto& b) { return a.time_ps < b.time_ps; });
}

}  // namespace

TEST_SUITE("link_sim") {
    TEST_CASE("detector index layout") {
        CHECK(detector_index(0, Outcome::plus) == 0);
        CHECK(detector_index(0, Outcome::minus) == 1);
        CHECK(detector_index(1, Outcome::plus) == 2);
        CHECK(detector_index(1, Outcome::minus) == 3);
        for (std::uint8_t d = 0; d < 4; ++d) {
            CHECK(detector_index(basis_of(d), outcome_of(d)) == d);
        }
    }

    TEST_CASE("configuration validation") {
        auto c = ideal_config(1.0, 1);
        CHECK_NOTHROW(c.validate());
        auto bad = c;
        bad.duration = 0.0;
        CHECK_THROWS_AS(simulate_run(bad), ValidationError);
        bad = c;
        bad.pair_rate = -1.0;
        CHECK_THROWS_AS(bad.validate(), ValidationError);
        bad = c;
        bad.arm_efficiency_bob = 1.5;
        CHECK_THROWS_AS(bad.validate(), ValidationError);
        bad = c;
        bad.coupler_efficiencies_alice[2] = -0.1;
        CHECK_THROWS_AS(bad.validate(), ValidationError);
        bad = c;
        bad.settings_bob.splitter_ratio = 1.0;
        CHECK_THROWS_AS(bad.validate(), ValidationError);
        bad = c;
        bad.visibility.v_diag = 1.1;
        CHECK_THROWS_AS(bad.validate(), ValidationError);
        bad = c;
        bad.window = 0.0;
        CHECK_THROWS_AS(bad.validate(), ValidationError);
    }

    TEST_CASE("memory cap is enforced before simulating") {
        auto c = bell_config(10.0, 1);
        c.max_events = 1000;
        CHECK_THROWS_AS(simulate_run(c), ValidationError);
    }

    TEST_CASE("same seed gives identical runs, different seeds differ") {
        const auto a = simulate_run(bell_config(0.5, 42));
        const auto b = simulate_run(bell_config(0.5, 42));
        const auto c = simulate_run(bell_config(0.5, 43));
        CHECK(a.alice == b.alice);
        CHECK(a.bob == b.bob);
        CHECK(a.truth.size() == b.truth.size());
        CHECK(a.alice != c.alice);
    }

    TEST_CASE("streams are time-sorted and pulse fields are consistent") {
        auto c = bell_config(1.0, 7);
        const auto run = simulate_run(c);
        CHECK(sorted_by_time(run.alice));
        CHECK(sorted_by_time(run.bob));
        const std::int64_t period = c.sync_period_ps();
        const std::array<std::int64_t, 2> delay{std::llround(c.path_delay_alice * 1e12),
                                                std::llround(c.path_delay_bob * 1e12)};
        for (const auto* stream : {&run.alice, &run.bob}) {
            for (const auto& e : *stream) {
                const auto ri = static_cast<std::size_t>(e.receiver);
                REQUIRE(e.offset_ps >= 0);
                REQUIRE(e.offset_ps < period);
                REQUIRE(e.time_ps - delay[ri] ==
                        static_cast<std::int64_t>(e.pulse_index) * period + e.offset_ps);
            }
        }
        for (const auto& e : run.alice) CHECK(e.receiver == Receiver::alice);
        for (const auto& e : run.bob) CHECK(e.receiver == Receiver::bob);
    }

    TEST_CASE("chunked generation concatenates to the whole run") {
        const auto c = bell_config(2.0, 9);
        const auto whole = simulate_run(c);
        LinkSimulator sim(c, 0.3);
        SimulatedRun chunk;
        std::vector<TimeTaggedEvent> alice;
        std::vector<TimeTaggedEvent> bob;
        std::vector<TruthLink> truth;
        while (sim.next(chunk)) {
            CHECK(chunk.alice_base == alice.size());
            CHECK(chunk.bob_base == bob.size());
            alice.insert(alice.end(), chunk.alice.begin(), chunk.alice.end());
            bob.insert(bob.end(), chunk.bob.begin(), chunk.bob.end());
            truth.insert(truth.end(), chunk.truth.begin(), chunk.truth.end());
        }
        CHECK(alice == whole.alice);
        CHECK(bob == whole.bob);
        std::sort(truth.begin(), truth.end(),
                  [](const auto& a, const auto& b) { return a.alice_index < b.alice_index; });
        REQUIRE(truth.size() == whole.truth.size());
        for (std::size_t i = 0; i < truth.size(); ++i) {
            CHECK(truth[i].alice_index == whole.truth[i].alice_index);
            CHECK(truth[i].bob_index == whole.truth[i].bob_index);
        }
    }

    TEST_CASE("truth links point at distinct events of one pair") {
        const auto run = simulate_run(bell_config(1.0, 3));
        std::set<std::uint64_t> seen_a;
        std::set<std::uint64_t> seen_b;
        std::set<std::uint64_t> ids;
        for (const auto& t : run.truth) {
            REQUIRE(t.alice_index < run.alice.size());
            REQUIRE(t.bob_index < run.bob.size());
            CHECK(seen_a.insert(t.alice_index).second);
            CHECK(seen_b.insert(t.bob_index).second);
            CHECK(ids.insert(t.pair_id).second);
            // both photons leave the source together: only jitter separates them
            const auto& a = run.alice[t.alice_index];
            const auto& b = run.bob[t.bob_index];
            CHECK(a.pulse_index == b.pulse_index);
            CHECK(std::abs(a.offset_ps - b.offset_ps) < 60'000);
        }
        // expected true pairs: R * etaA * etaB * mean coupler survival on both sides
        const double mean_coupler = (1.0 + 0.8 + 0.9 + 0.7) / 4.0;
        const double expected = 1e4 * 0.12 * 0.2 * mean_coupler * mean_coupler;
        CHECK(std::abs(run.truth.size() - expected) < 4.0 * std::sqrt(expected));
    }

    TEST_CASE("same-angle pairs of the pure singlet are perfectly anti-correlated") {
        auto c = ideal_config(2.0, 5);
        c.settings_bob = c.settings_alice;
        const auto run = simulate_run(c);
        int same_basis = 0;
        for (const auto& t : run.truth) {
            const auto& a = run.alice[t.alice_index];
            const auto& b = run.bob[t.bob_index];
            if (a.basis() == b.basis()) {
                ++same_basis;
                CHECK(a.outcome() != b.outcome());
            }
        }
        CHECK(same_basis > 1000);
        CHECK(run.truth.size() == run.alice.size());
        CHECK(run.alice.size() == run.bob.size());
    }

    TEST_CASE("singles rates match their expectation within 4 sigma") {
        for (std::uint64_t seed : {1, 2, 3}) {
            const auto c = bell_config(1.0, seed);
            const auto run = simulate_run(c);
            const double mean_coupler = (1.0 + 0.8 + 0.9 + 0.7) / 4.0;
            const double exp_a = (c.pair_rate * c.arm_efficiency_alice + c.background_rate_alice) * mean_coupler;
            const double exp_b = (c.pair_rate * c.arm_efficiency_bob + c.background_rate_bob) * mean_coupler;
            CHECK(std::abs(run.alice.size() - exp_a) < 4.0 * std::sqrt(exp_a));
            CHECK(std::abs(run.bob.size() - exp_b) < 4.0 * std::sqrt(exp_b));
        }
    }

    TEST_CASE("each detector sees a quarter of unpolarized background") {
        LinkConfig c;
        c.pair_rate = 0.0;
        c.background_rate_alice = 40000;
        c.background_rate_bob = 0.0;
        c.duration = 1.0;
        c.seed = 77;
        const auto run = simulate_run(c);
        CHECK(run.bob.empty());
        CHECK(run.truth.empty());
        const auto singles = count_singles(run.alice);
        const double n = static_cast<double>(run.alice.size());
        for (auto s : singles) {
            CHECK(std::abs(s - n / 4) < 4.0 * std::sqrt(n * 0.25 * 0.75));
        }
    }

    TEST_CASE("coupler imbalance keeps a binomial fraction per detector") {
        std::vector<TimeTaggedEvent> events;
        for (std::uint64_t i = 0; i < 40000; ++i) {
            events.push_back(entlink::testing::event(Receiver::bob, static_cast<std::uint8_t>(i % 4), i, 1000));
        }
        const CouplerEfficiencies eff{1.0, 0.8, 0.55, 0.0};
        const auto kept = apply_coupler_imbalance(events, eff, 123);
        const auto counts = count_singles(kept);
        CHECK(counts[0] == 10000);
        CHECK(counts[3] == 0);
        for (int d : {1, 2}) {
            const double p = eff[static_cast<std::size_t>(d)];
            CHECK(std::abs(counts[static_cast<std::size_t>(d)] - 10000 * p) < 4.0 * std::sqrt(10000 * p * (1 - p)));
        }
        // decisions are a pure function of (seed, event)
        CHECK(apply_coupler_imbalance(events, eff, 123) == kept);
        for (const auto& e : kept) CHECK(keeps_event(e, eff, 123));
        CHECK_THROWS_AS(apply_coupler_imbalance(events, CouplerEfficiencies{1, 1, 1, 2}, 1), ValidationError);
    }
}
