#include "entlink/link_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "entlink/errors.hpp"

namespace entlink {
namespace {

constexpr std::uint64_t kNoPair = std::numeric_limits<std::uint64_t>::max();

void require(bool ok, const std::string& what) {
    if (!ok) {
        throw ValidationError("invalid link config: " + what);
    }
}

bool fraction(double x) { return x >= 0.0 && x <= 1.0; }
bool rate(double x) { return std::isfinite(x) && x >= 0.0; }

std::int64_t to_ps(double seconds) {
    return std::llround(seconds * static_cast<double>(kPicosecondsPerSecond));
}

std::uint64_t receiver_key(Receiver r) { return static_cast<std::uint64_t>(r) + 1; }

}  // namespace

double TimeTaggedEvent::time_seconds() const {
    return static_cast<double>(time_ps) / static_cast<double>(kPicosecondsPerSecond);
}

double TimeTaggedEvent::offset_seconds() const {
    return static_cast<double>(offset_ps) / static_cast<double>(kPicosecondsPerSecond);
}

void AnalyzerSetting::validate() const {
    require(splitter_ratio > 0.0 && splitter_ratio < 1.0, "splitter_ratio must lie in (0, 1)");
}

void LinkConfig::validate() const {
    require(rate(pair_rate), "pair_rate must be >= 0");
    require(fraction(arm_efficiency_alice) && fraction(arm_efficiency_bob),
            "arm efficiencies must lie in [0, 1]");
    require(rate(background_rate_alice) && rate(background_rate_bob),
            "background rates must be >= 0");
    for (double e : coupler_efficiencies_alice) require(fraction(e), "coupler efficiency outside [0, 1]");
    for (double e : coupler_efficiencies_bob) require(fraction(e), "coupler efficiency outside [0, 1]");
    require(std::isfinite(sync_pulse_rate) && sync_pulse_rate > 0.0, "sync_pulse_rate must be > 0");
    require(sync_period_ps() >= 1, "sync period below 1 ps");
    require(std::isfinite(jitter_sigma) && jitter_sigma >= 0.0, "jitter_sigma must be >= 0");
    require(std::isfinite(window) && window > 0.0, "window must be > 0");
    require(std::isfinite(path_delay_alice) && path_delay_alice >= 0.0 &&
                std::isfinite(path_delay_bob) && path_delay_bob >= 0.0,
            "path delays must be >= 0");
    require(std::isfinite(duration) && duration > 0.0, "duration must be > 0");
    visibility.validate();
    settings_alice.validate();
    settings_bob.validate();
}

double LinkConfig::expected_events() const {
    return duration * (pair_rate * (arm_efficiency_alice + arm_efficiency_bob) +
                       background_rate_alice + background_rate_bob);
}

std::int64_t LinkConfig::sync_period_ps() const {
    return std::llround(static_cast<double>(kPicosecondsPerSecond) / sync_pulse_rate);
}

bool keeps_event(const TimeTaggedEvent& event, const CouplerEfficiencies& efficiencies,
                 std::uint64_t seed) {
    const double eff = efficiencies.at(event.detector);
    if (eff >= 1.0) {
        return true;
    }
    const std::uint64_t key = (receiver_key(event.receiver) << 8) | event.detector;
    return hashed_uniform(seed, static_cast<std::uint64_t>(event.time_ps), key) < eff;
}

std::vector<TimeTaggedEvent> apply_coupler_imbalance(std::span<const TimeTaggedEvent> events,
                                                     const CouplerEfficiencies& efficiencies,
                                                     std::uint64_t seed) {
    for (double e : efficiencies) {
        if (!fraction(e)) {
            throw ValidationError("coupler efficiency outside [0, 1]");
        }
    }
    std::vector<TimeTaggedEvent> kept;
    kept.reserve(events.size());
    for (const auto& ev : events) {
        if (keeps_event(ev, efficiencies, seed)) {
            kept.push_back(ev);
        }
    }
    return kept;
}

std::array<std::uint64_t, kDetectorsPerReceiver> count_singles(
    std::span<const TimeTaggedEvent> events) {
    std::array<std::uint64_t, kDetectorsPerReceiver> counts{};
    for (const auto& ev : events) {
        ++counts.at(ev.detector);
    }
    return counts;
}

LinkSimulator::LinkSimulator(const LinkConfig& config, double chunk_seconds)
    : config_(config),
      period_ps_(0),
      duration_ps_(0),
      chunk_ps_(0),
      guard_ps_(0),
      delay_ps_{0, 0},
      pair_rng_(derive_seed(config.seed, "pairs")),
      background_rng_{Rng(derive_seed(config.seed, "background/alice")),
                      Rng(derive_seed(config.seed, "background/bob"))},
      coupler_seed_(derive_seed(config.seed, "couplers")) {
    config_.validate();
    period_ps_ = config_.sync_period_ps();
    duration_ps_ = to_ps(config_.duration);
    const std::int64_t pulses =
        std::max<std::int64_t>(1, std::llround(chunk_seconds * config_.sync_pulse_rate));
    chunk_ps_ = pulses * period_ps_;
    // Box-Muller never exceeds 8.58 sigma, so nine sigma bounds any jitter.
    guard_ps_ = static_cast<std::int64_t>(std::ceil(9.0 * config_.jitter_sigma * 1e12)) + 1;
    delay_ps_ = {to_ps(config_.path_delay_alice), to_ps(config_.path_delay_bob)};

    if (config_.pair_rate > 0.0) {
        next_pair_time_s_ = pair_rng_.exponential(config_.pair_rate);
    }
    const std::array<double, 2> bg{config_.background_rate_alice, config_.background_rate_bob};
    for (int r = 0; r < 2; ++r) {
        if (bg[r] > 0.0) {
            next_background_time_s_[r] = background_rng_[r].exponential(bg[r]);
        }
    }
}

void LinkSimulator::push(Receiver r, std::int64_t arrival_ps, std::uint8_t detector,
                         std::uint64_t pair_id, bool paired, bool depolarized) {
    const auto ri = static_cast<std::size_t>(r);
    const std::int64_t since_first_pulse = arrival_ps - delay_ps_[ri];
    if (since_first_pulse < 0) {
        return;  // before the first sync pulse reached this receiver
    }
    Pending p{};
    p.event.time_ps = arrival_ps;
    p.event.pulse_index = static_cast<std::uint64_t>(since_first_pulse / period_ps_);
    p.event.offset_ps = since_first_pulse % period_ps_;
    p.event.receiver = r;
    p.event.detector = detector;
    p.pair_id = pair_id;
    p.paired = paired;
    p.depolarized = depolarized;
    pending_[ri].push_back(p);
}

void LinkSimulator::generate_pairs(std::int64_t end_ps) {
    if (config_.pair_rate <= 0.0) {
        return;
    }
    const double sigma_ps = config_.jitter_sigma * 1e12;
    const auto& sa = config_.settings_alice;
    const auto& sb = config_.settings_bob;
    for (;;) {
        const std::int64_t t_ps = to_ps(next_pair_time_s_);
        if (t_ps >= end_ps) {
            break;
        }
        // Fixed draw order per pair keeps streams aligned when parameters change.
        const double u_survive_a = pair_rng_.uniform();
        const double u_survive_b = pair_rng_.uniform();
        const double u_basis_a = pair_rng_.uniform();
        const double u_basis_b = pair_rng_.uniform();
        const double u_mixture = pair_rng_.uniform();
        const double u_outcome_a = pair_rng_.uniform();
        const double u_outcome_b = pair_rng_.uniform();
        const double z_a = pair_rng_.normal();
        const double z_b = pair_rng_.normal();

        const bool survive_a = u_survive_a < config_.arm_efficiency_alice;
        const bool survive_b = u_survive_b < config_.arm_efficiency_bob;
        const int basis_a = u_basis_a < sa.splitter_ratio ? 0 : 1;
        const int basis_b = u_basis_b < sb.splitter_ratio ? 0 : 1;
        const Angle angle_a = sa.angle(basis_a);
        const Angle angle_b = sb.angle(basis_b);
        const double v = config_.visibility.effective(angle_a, angle_b);
        PairOutcome outcome =
            sample_pair_outcome(angle_a, angle_b, v, u_mixture, u_outcome_a, u_outcome_b);
        if (!survive_a) {
            // Partner lost: the surviving photon is unpolarized on its own.
            outcome.bob = u_outcome_b < 0.5 ? Outcome::plus : Outcome::minus;
        }

        const std::uint64_t id = next_pair_id_++;
        TimeTaggedEvent ea{};
        ea.receiver = Receiver::alice;
        ea.detector = detector_index(basis_a, outcome.alice);
        ea.time_ps = t_ps + delay_ps_[0] + std::llround(z_a * sigma_ps);
        TimeTaggedEvent eb{};
        eb.receiver = Receiver::bob;
        eb.detector = detector_index(basis_b, outcome.bob);
        eb.time_ps = t_ps + delay_ps_[1] + std::llround(z_b * sigma_ps);

        const bool keep_a =
            survive_a && keeps_event(ea, config_.coupler_efficiencies_alice, coupler_seed_);
        const bool keep_b =
            survive_b && keeps_event(eb, config_.coupler_efficiencies_bob, coupler_seed_);
        const bool paired = keep_a && keep_b;
        if (keep_a) push(Receiver::alice, ea.time_ps, ea.detector, id, paired, outcome.depolarized);
        if (keep_b) push(Receiver::bob, eb.time_ps, eb.detector, id, paired, outcome.depolarized);

        next_pair_time_s_ += pair_rng_.exponential(config_.pair_rate);
    }
}

void LinkSimulator::generate_background(Receiver r, std::int64_t end_ps) {
    const auto ri = static_cast<std::size_t>(r);
    const double bg = r == Receiver::alice ? config_.background_rate_alice
                                           : config_.background_rate_bob;
    if (bg <= 0.0) {
        return;
    }
    Rng& rng = background_rng_[ri];
    for (;;) {
        const std::int64_t t_ps = to_ps(next_background_time_s_[ri]);
        if (t_ps >= end_ps) {
            break;
        }
        TimeTaggedEvent ev{};
        ev.receiver = r;
        ev.detector = static_cast<std::uint8_t>(rng.below(kDetectorsPerReceiver));
        ev.time_ps = t_ps + delay_ps_[ri];
        if (keeps_event(ev, config_.couplers(r), coupler_seed_)) {
            push(r, ev.time_ps, ev.detector, kNoPair, false, false);
        }
        next_background_time_s_[ri] += rng.exponential(bg);
    }
}

void LinkSimulator::emit(Receiver r, std::int64_t watermark_ps, SimulatedRun& chunk) {
    const auto ri = static_cast<std::size_t>(r);
    auto& pending = pending_[ri];
    std::sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
        if (a.event.time_ps != b.event.time_ps) return a.event.time_ps < b.event.time_ps;
        if (a.event.detector != b.event.detector) return a.event.detector < b.event.detector;
        return a.pair_id < b.pair_id;
    });
    const auto split = std::partition_point(pending.begin(), pending.end(), [&](const Pending& p) {
        return p.event.time_ps < watermark_ps;
    });

    auto& out = r == Receiver::alice ? chunk.alice : chunk.bob;
    auto& mine = r == Receiver::alice ? half_seen_alice_ : half_seen_bob_;
    auto& theirs = r == Receiver::alice ? half_seen_bob_ : half_seen_alice_;
    for (auto it = pending.begin(); it != split; ++it) {
        const std::uint64_t index = emitted_[ri]++;
        out.push_back(it->event);
        if (!it->paired) {
            continue;
        }
        if (auto other = theirs.find(it->pair_id); other != theirs.end()) {
            TruthLink link{};
            link.pair_id = it->pair_id;
            link.depolarized = it->depolarized;
            link.alice_index = r == Receiver::alice ? index : other->second.first;
            link.bob_index = r == Receiver::bob ? index : other->second.first;
            chunk.truth.push_back(link);
            theirs.erase(other);
        } else {
            mine.emplace(it->pair_id, std::make_pair(index, it->depolarized));
        }
    }
    pending.erase(pending.begin(), split);
}

bool LinkSimulator::next(SimulatedRun& chunk) {
    chunk.alice.clear();
    chunk.bob.clear();
    chunk.truth.clear();
    chunk.alice_base = emitted_[0];
    chunk.bob_base = emitted_[1];
    if (done_) {
        return false;
    }
    const std::int64_t end_ps = std::min(generated_until_ps_ + chunk_ps_, duration_ps_);
    generate_pairs(end_ps);
    generate_background(Receiver::alice, end_ps);
    generate_background(Receiver::bob, end_ps);
    generated_until_ps_ = end_ps;

    const bool last = end_ps >= duration_ps_;
    for (Receiver r : {Receiver::alice, Receiver::bob}) {
        const auto ri = static_cast<std::size_t>(r);
        const std::int64_t watermark = last ? std::numeric_limits<std::int64_t>::max()
                                            : end_ps + delay_ps_[ri] - guard_ps_;
        emit(r, watermark, chunk);
    }
    if (last) {
        done_ = true;
        half_seen_alice_.clear();
        half_seen_bob_.clear();
    }
    return true;
}

SimulatedRun simulate_run(const LinkConfig& config) {
    config.validate();
    const double expected = config.expected_events();
    if (expected > static_cast<double>(config.max_events)) {
        throw ValidationError("expected event count " + std::to_string(expected) +
                              " exceeds the memory cap of " + std::to_string(config.max_events) +
                              " events");
    }
    LinkSimulator sim(config, 1.0);
    SimulatedRun run;
    SimulatedRun chunk;
    while (sim.next(chunk)) {
        run.alice.insert(run.alice.end(), chunk.alice.begin(), chunk.alice.end());
        run.bob.insert(run.bob.end(), chunk.bob.begin(), chunk.bob.end());
        run.truth.insert(run.truth.end(), chunk.truth.begin(), chunk.truth.end());
    }
    std::sort(run.truth.begin(), run.truth.end(),
              [](const TruthLink& a, const TruthLink& b) { return a.alice_index < b.alice_index; });
    return run;
}

}  // namespace entlink
