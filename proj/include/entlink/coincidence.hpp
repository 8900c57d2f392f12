#pragma once

// Sync-pulse referenced coincidence matching and count matrices.
//
// Each click carries its offset from the latest sync pulse seen by its own
// receiver. Because sync pulses travel the photons' optical path, a constant
// path-length skew between the arms drops out of offset differences.

#include <array>
#include <limits>
#include <cstdint>
#include <span>
#include <vector>

#include "entlink/link_sim.hpp"
#include "entlink/polarization.hpp"

namespace entlink {

/// How the configured window maps onto the match condition on |delta|.
///  - full_width: window is the total width; match when |delta| <= window/2.
///    The accidental rate of uncorrelated streams is then S_A * S_B * window.
///  - half_width: match when |delta| <= window.
enum class WindowConvention { full_width, half_width };

struct CoincidenceRecord {
    TimeTaggedEvent alice;
    TimeTaggedEvent bob;
    std::uint64_t alice_index = 0;  // stream positions
    std::uint64_t bob_index = 0;
    std::int64_t delta_ps = 0;  // alice offset minus bob offset

    [[nodiscard]] double delta_seconds() const;
    [[nodiscard]] int alice_basis() const { return alice.basis(); }
    [[nodiscard]] int bob_basis() const { return bob.basis(); }
    [[nodiscard]] Outcome alice_outcome() const { return alice.outcome(); }
    [[nodiscard]] Outcome bob_outcome() const { return bob.outcome(); }

    friend bool operator==(const CoincidenceRecord&, const CoincidenceRecord&) = default;
};

std::int64_t match_tolerance_ps(double window, WindowConvention convention);

/// Greedy earliest-first pairing of clicks with equal pulse index and offsets
/// within the window. Both streams are swept together in (pulse, offset)
/// order; each click pairs with the earliest still-unpaired click of the other
/// stream inside the window, so every click is used at most once. Output is
/// sorted by Alice time. `alice_base`/`bob_base` offset the reported indices.
/// Throws ValidationError if either stream is not time-sorted.
std::vector<CoincidenceRecord> match(std::span<const TimeTaggedEvent> alice,
                                     std::span<const TimeTaggedEvent> bob, double window,
                                     WindowConvention convention = WindowConvention::full_width,
                                     std::uint64_t alice_base = 0, std::uint64_t bob_base = 0);

/// Incremental form of match() for streams arriving in chunks. A pulse is
/// matched once both streams have moved past it, so results equal a single
/// match() call over the concatenated streams.
class StreamingMatcher {
public:
    explicit StreamingMatcher(double window,
                              WindowConvention convention = WindowConvention::full_width);

    /// Appends the next slices of both streams.
    void push(std::span<const TimeTaggedEvent> alice, std::span<const TimeTaggedEvent> bob);
    /// Matches everything still buffered. No pushes are allowed afterwards.
    void finish();
    /// Records completed so far, in Alice order; the internal list is cleared.
    std::vector<CoincidenceRecord> take();

private:
    void flush(std::uint64_t before_pulse);

    double window_;
    WindowConvention convention_;
    std::vector<TimeTaggedEvent> alice_;
    std::vector<TimeTaggedEvent> bob_;
    std::uint64_t alice_base_ = 0;
    std::uint64_t bob_base_ = 0;
    std::vector<CoincidenceRecord> ready_;
    bool finished_ = false;
};

/// Expected accidental coincidence rate S_A * S_B * window (counts/s).
double accidental_rate(double singles_alice, double singles_bob, double window);

using DetectorCounts = std::array<std::uint64_t, kDetectorsPerReceiver>;

/// Which basis each side used, with the corresponding analyzer angles.
struct SettingPair {
    int alice_basis = 0;
    int bob_basis = 0;
    Angle alice_angle;
    Angle bob_angle;

    friend bool operator==(const SettingPair&, const SettingPair&) = default;
};

SettingPair setting_pair(const LinkConfig& config, int alice_basis, int bob_basis);

/// N_ij for one setting pair, indexed [alice outcome][bob outcome] with
/// index 0 = +1 and 1 = -1, plus the singles needed for normalization.
struct CountMatrix {
    std::array<std::array<std::uint64_t, 2>, 2> n{};
    SettingPair settings;
    DetectorCounts singles_alice{};
    DetectorCounts singles_bob{};
    double duration = 0.0;

    [[nodiscard]] std::uint64_t total() const;
    /// Merges a matrix for the same setting pair built from another segment.
    CountMatrix& operator+=(const CountMatrix& other);
};

/// Real-valued counts after detector-efficiency normalization.
struct NormalizedCounts {
    std::array<std::array<double, 2>, 2> n{};
    SettingPair settings;

    [[nodiscard]] double total() const;
};

/// Records whose bases match the given setting pair.
std::vector<CoincidenceRecord> select_setting(std::span<const CoincidenceRecord> records,
                                              int alice_basis, int bob_basis);

/// Counts outcome pairs over records already filtered to `settings`.
CountMatrix accumulate_counts(std::span<const CoincidenceRecord> records,
                              const SettingPair& settings);

/// Divides N_ij by the singles shares of Alice's detector i and Bob's
/// detector j within the involved basis, then rescales to the raw total.
/// Throws ValidationError if an involved detector has zero singles.
NormalizedCounts normalize(const CountMatrix& matrix);

}  // namespace entlink
