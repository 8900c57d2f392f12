#pragma once

// Seeded Monte-Carlo source of time-tagged detector clicks at the two
// receivers: Poissonian pair emission, per-arm loss, passive basis choice,
// unpolarized background, Gaussian timing jitter and sync-pulse referencing.

#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "entlink/polarization.hpp"
#include "entlink/random.hpp"

namespace entlink {

enum class Receiver : std::uint8_t { alice = 0, bob = 1 };

inline constexpr int kDetectorsPerReceiver = 4;
inline constexpr std::int64_t kPicosecondsPerSecond = 1'000'000'000'000;

/// Detector d = 2*basis + (outcome == minus).
constexpr std::uint8_t detector_index(int basis, Outcome o) {
    return static_cast<std::uint8_t>(2 * basis + outcome_index(o));
}
constexpr int basis_of(std::uint8_t detector) { return detector / 2; }
constexpr Outcome outcome_of(std::uint8_t detector) { return outcome_from_index(detector % 2); }

/// One detector click. Times are integer picoseconds so that pulse index
/// and offset are exactly recomputable from the absolute time.
struct TimeTaggedEvent {
    std::int64_t time_ps = 0;
    std::int64_t offset_ps = 0;
    std::uint64_t pulse_index = 0;
    Receiver receiver = Receiver::alice;
    std::uint8_t detector = 0;

    [[nodiscard]] double time_seconds() const;
    [[nodiscard]] double offset_seconds() const;
    [[nodiscard]] int basis() const { return basis_of(detector); }
    [[nodiscard]] Outcome outcome() const { return outcome_of(detector); }

    friend bool operator==(const TimeTaggedEvent&, const TimeTaggedEvent&) = default;
};

/// The two bases selectable by a receiver's passive beam splitter.
/// splitter_ratio is the probability of landing in basis 0.
struct AnalyzerSetting {
    std::array<Angle, 2> basis_angles{Angle::degrees(0.0), Angle::degrees(45.0)};
    double splitter_ratio = 0.5;

    [[nodiscard]] Angle angle(int basis) const { return basis_angles.at(basis); }
    void validate() const;
};

using CouplerEfficiencies = std::array<double, kDetectorsPerReceiver>;

struct LinkConfig {
    double pair_rate = 1.0e4;  // pairs/s at the source
    double arm_efficiency_alice = 1.0;
    double arm_efficiency_bob = 1.0;
    double background_rate_alice = 0.0;  // clicks/s, spread evenly over 4 detectors
    double background_rate_bob = 0.0;
    CouplerEfficiencies coupler_efficiencies_alice{1.0, 1.0, 1.0, 1.0};
    CouplerEfficiencies coupler_efficiencies_bob{1.0, 1.0, 1.0, 1.0};
    double sync_pulse_rate = 1.0e4;  // pulses/s
    double jitter_sigma = 3.0e-9;    // s, per receiver
    double window = 20.0e-9;         // s, full coincidence window width
    double path_delay_alice = 0.0;   // s, constant flight time sender -> receiver
    double path_delay_bob = 0.0;
    VisibilityModel visibility{};
    AnalyzerSetting settings_alice{};
    AnalyzerSetting settings_bob{{Angle::degrees(22.5), Angle::degrees(67.5)}, 0.5};
    double duration = 1.0;  // s
    std::uint64_t seed = 0;
    std::uint64_t max_events = 40'000'000;

    void validate() const;
    [[nodiscard]] double expected_events() const;
    [[nodiscard]] std::int64_t sync_period_ps() const;
    [[nodiscard]] const AnalyzerSetting& settings(Receiver r) const {
        return r == Receiver::alice ? settings_alice : settings_bob;
    }
    [[nodiscard]] const CouplerEfficiencies& couplers(Receiver r) const {
        return r == Receiver::alice ? coupler_efficiencies_alice : coupler_efficiencies_bob;
    }
};

/// Ground truth for a pair whose two photons were both recorded.
struct TruthLink {
    std::uint64_t alice_index = 0;  // position in the alice stream
    std::uint64_t bob_index = 0;
    std::uint64_t pair_id = 0;
    bool depolarized = false;  // drawn from the white-noise part of the state
};

struct SimulatedRun {
    std::vector<TimeTaggedEvent> alice;
    std::vector<TimeTaggedEvent> bob;
    std::vector<TruthLink> truth;
    /// Stream position of alice[0] / bob[0]; nonzero for streamed chunks.
    std::uint64_t alice_base = 0;
    std::uint64_t bob_base = 0;
};

/// Generates a run chunk by chunk. Chunks concatenate to exactly the run
/// simulate_run() returns; each stream is time-sorted across chunk borders.
/// Not shareable between threads while a run is in progress.
class LinkSimulator {
public:
    explicit LinkSimulator(const LinkConfig& config, double chunk_seconds = 1.0);

    /// Fills `chunk` with the next slice of both streams. Returns false once
    /// the run is exhausted (chunk is then empty).
    bool next(SimulatedRun& chunk);

private:
    struct Pending {
        TimeTaggedEvent event;
        std::uint64_t pair_id;
        bool paired;
        bool depolarized;
    };

    void generate_pairs(std::int64_t end_ps);
    void generate_background(Receiver r, std::int64_t end_ps);
    void push(Receiver r, std::int64_t arrival_ps, std::uint8_t detector, std::uint64_t pair_id,
              bool paired, bool depolarized);
    void emit(Receiver r, std::int64_t watermark_ps, SimulatedRun& chunk);

    LinkConfig config_;
    std::int64_t period_ps_;
    std::int64_t duration_ps_;
    std::int64_t chunk_ps_;
    std::int64_t guard_ps_;
    std::array<std::int64_t, 2> delay_ps_;
    std::int64_t generated_until_ps_ = 0;
    bool done_ = false;

    Rng pair_rng_;
    std::array<Rng, 2> background_rng_;
    std::uint64_t coupler_seed_;
    double next_pair_time_s_ = 0.0;
    std::array<double, 2> next_background_time_s_{0.0, 0.0};
    std::uint64_t next_pair_id_ = 0;

    std::array<std::vector<Pending>, 2> pending_;
    std::array<std::uint64_t, 2> emitted_{0, 0};
    std::unordered_map<std::uint64_t, std::pair<std::uint64_t, bool>> half_seen_alice_;
    std::unordered_map<std::uint64_t, std::pair<std::uint64_t, bool>> half_seen_bob_;
};

/// Whole run in memory. Throws ValidationError when the expected event count
/// exceeds config.max_events.
SimulatedRun simulate_run(const LinkConfig& config);

/// Keeps each event with probability equal to its detector's coupler
/// efficiency. The decision is a pure function of (seed, event), so the same
/// event is treated identically in every run that contains it.
std::vector<TimeTaggedEvent> apply_coupler_imbalance(std::span<const TimeTaggedEvent> events,
                                                     const CouplerEfficiencies& efficiencies,
                                                     std::uint64_t seed);

bool keeps_event(const TimeTaggedEvent& event, const CouplerEfficiencies& efficiencies,
                 std::uint64_t seed);

/// Per-detector click counts of one stream.
std::array<std::uint64_t, kDetectorsPerReceiver> count_singles(
    std::span<const TimeTaggedEvent> events);

}  // namespace entlink
