#pragma once

#include <cstdint>
#include <vector>

#include "entlink/link_sim.hpp"

namespace entlink::testing {

inline TimeTaggedEvent event(Receiver r, std::uint8_t detector, std::uint64_t pulse, std::int64_t offset_ps,
                             std::int64_t period_ps = 100'000'000) {
    TimeTaggedEvent e;
    e.receiver = r;
    e.detector = detector;
    e.pulse_index = pulse;
    e.offset_ps = offset_ps;
    e.time_ps = static_cast<std::int64_t>(pulse) * period_ps + offset_ps;
    return e;
}

// Rates chosen so singles are about 18,000/s (Alice) and 40,000/s (Bob).
inline LinkConfig bell_config(double duration, std::uint64_t seed) {
    LinkConfig c;
    c.pair_rate = 1e4;
    c.arm_efficiency_alice = 0.12;
    c.arm_efficiency_bob = 0.2;
    c.background_rate_alice = 20000;
    c.background_rate_bob = 45000;
    c.coupler_efficiencies_alice = {1.0, 0.8, 0.9, 0.7};
    c.coupler_efficiencies_bob = {1.0, 0.8, 0.9, 0.7};
    c.path_delay_alice = 25.69e-6;
    c.path_delay_bob = 17.68e-6;
    c.visibility = {0.94, 0.89};
    c.duration = duration;
    c.seed = seed;
    return c;
}

inline LinkConfig ideal_config(double duration, std::uint64_t seed) {
    LinkConfig c;
    c.pair_rate = 2000;
    c.jitter_sigma = 0.0;
    c.duration = duration;
    c.seed = seed;
    return c;
}

}  // namespace entlink::testing
