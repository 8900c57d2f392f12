#pragma once

// Correlation and CHSH estimation from count matrices, simulated Bell tests
// and fringe-visibility scans.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "entlink/coincidence.hpp"
#include "entlink/fringe_fit.hpp"
#include "entlink/link_sim.hpp"

namespace entlink {

struct CorrelationEstimate {
    double e_value = 0.0;
    double sigma = 0.0;
    SettingPair settings;
    double total = 0.0;
};

/// Components are ordered (a,b), (a,b'), (a',b), (a',b') and combine as
/// S = |E1 - E2 + E3 + E4|.
struct ChshResult {
    double s_value = 0.0;
    double sigma = 0.0;
    std::array<CorrelationEstimate, 4> components;
};

/// E = (n_same - n_diff) / N with sigma = 2 sqrt(n_same * n_diff / N^3).
/// Throws ValidationError when the matrix is empty.
CorrelationEstimate estimate_correlation(const CountMatrix& matrix);
CorrelationEstimate estimate_correlation(const NormalizedCounts& matrix);

/// Throws ValidationError unless the components share angles as
/// (a,b), (a,b'), (a',b), (a',b').
ChshResult compute_chsh(const std::array<CorrelationEstimate, 4>& components);

/// (S - 2) / sigma. A zero sigma gives +inf above 2, -inf below, 0 at 2.
double violation_significance(const ChshResult& result);

/// The published measured correlations at (0, 45, 22.5, 67.5) degrees.
std::array<CorrelationEstimate, 4> published_table1();

/// Integer count matrices whose estimates reproduce the given E and sigma
/// up to rounding: N = round((1 - E^2) / sigma^2).
std::array<CountMatrix, 4> counts_for_estimates(const std::array<CorrelationEstimate, 4>& estimates);

struct BellTestOptions {
    WindowConvention convention = WindowConvention::full_width;
    bool normalize = true;  // correct for unequal detector efficiencies
    double chunk_seconds = 1.0;
};

struct BellTestResult {
    ChshResult chsh;
    std::array<CountMatrix, 4> matrices;  // CHSH component order
    DetectorCounts singles_alice{};
    DetectorCounts singles_bob{};
    std::uint64_t coincidences = 0;
    double duration = 0.0;
    double predicted_s = 0.0;

    [[nodiscard]] double coincidence_rate() const;
    [[nodiscard]] double singles_rate_alice() const;
    [[nodiscard]] double singles_rate_bob() const;
};

/// Simulates one run with Alice's two bases as (a, a') and Bob's as (b, b');
/// the passive splitters measure all four setting pairs at once.
BellTestResult run_bell_test(const LinkConfig& config, const BellTestOptions& options = {});

/// Expected coincidence rate from true pairs and from accidentals for one
/// setting pair, in counts/s.
struct RatePrediction {
    double true_pairs = 0.0;
    double accidentals = 0.0;
};
RatePrediction predicted_rates(const LinkConfig& config, int alice_basis, int bob_basis,
                               WindowConvention convention = WindowConvention::full_width);

/// Model S diluted by accidentals: each E is scaled by C / (C + A) of its
/// setting pair. Ignores coupler imbalance after normalization.
double predicted_chsh(const LinkConfig& config,
                      WindowConvention convention = WindowConvention::full_width);

struct ScanOptions {
    WindowConvention convention = WindowConvention::full_width;
    bool weighted = false;
};

struct ScanCurve {
    std::string label;
    double bob_angle_deg = 0.0;
    std::vector<FringePoint> points;
    std::optional<FringeFit> fit;
    std::string error;  // fit failure reason
};

/// Label used in report file names: H, V, D, A for 0/90/45/135, else b<deg>.
std::string curve_label(double bob_angle_deg);

/// For each Bob angle, sweeps Alice's analyzer through `alice_angles_deg`,
/// simulating config.duration seconds per point with both receivers fixed to
/// one angle, and counts (+,+) coincidences. Point k of curve c uses seed
/// derive_seed(derive_seed(config.seed, c), k). Needs at least 8 sweep points.
std::vector<ScanCurve> visibility_scan(const LinkConfig& config,
                                       std::span<const double> bob_angles_deg,
                                       std::span<const double> alice_angles_deg,
                                       const ScanOptions& options = {});

}  // namespace entlink
