#pragma once

// Closed-form measurement statistics of the polarization singlet
// |psi-> = (|H>|V> - |V>|H>)/sqrt(2) with a depolarizing (Werner) admixture.
// Everything downstream uses these functions as its analytic reference.

#include <array>
#include <cstdint>

namespace entlink {

/// Polarizer angle in degrees, always held in [0, 180).
class Angle {
public:
    constexpr Angle() = default;

    static Angle degrees(double value);

    [[nodiscard]] double degrees() const { return deg_; }
    [[nodiscard]] double radians() const;

    friend bool operator==(Angle, Angle) = default;

private:
    explicit constexpr Angle(double normalized) : deg_(normalized) {}
    double deg_ = 0.0;
};

/// Canonical H, V, +45 and -45 analyzer orientations.
namespace angles {
inline Angle horizontal() { return Angle::degrees(0.0); }
inline Angle vertical() { return Angle::degrees(90.0); }
inline Angle diagonal() { return Angle::degrees(45.0); }
inline Angle antidiagonal() { return Angle::degrees(135.0); }
}  // namespace angles

/// Port of the polarizing splitter: +1 transmitted, -1 reflected.
enum class Outcome : int { plus = 1, minus = -1 };

constexpr int sign(Outcome o) { return static_cast<int>(o); }
constexpr int outcome_index(Outcome o) { return o == Outcome::plus ? 0 : 1; }
constexpr Outcome outcome_from_index(int i) { return i == 0 ? Outcome::plus : Outcome::minus; }
constexpr Outcome flipped(Outcome o) { return o == Outcome::plus ? Outcome::minus : Outcome::plus; }

/// Basis-dependent two-photon visibility.
///
/// The effective visibility for analyzer pair (a, b) interpolates between
/// the H/V and diagonal values through the axial mean angle m of a and b:
///     v(a, b) = v_hv * cos^2(2m) + v_diag * sin^2(2m)
/// The axial mean is taken on the 180-degree circle, so (170, 0) has m = -5.
struct VisibilityModel {
    double v_hv = 1.0;
    double v_diag = 1.0;

    [[nodiscard]] double effective(Angle a, Angle b) const;
    void validate() const;
};

/// Axial mean of two polarizer angles (degrees, not normalized).
double axial_mean_degrees(Angle a, Angle b);

/// P(i, j | a, b) = 1/4 * (1 - i*j*v*cos 2(a - b)). Throws for v outside [0, 1].
double joint_probability(Outcome i, Outcome j, Angle a, Angle b, double visibility);

/// E(a, b) = sum_{ij} i*j*P(i, j | a, b), which equals -v*cos 2(a - b).
double correlation(Angle a, Angle b, double visibility);
double correlation(Angle a, Angle b, const VisibilityModel& model);

/// Analyzer settings (phi_A, phi_A', phi_B, phi_B') entering the CHSH sum.
struct ChshSettings {
    Angle alice;
    Angle alice_prime;
    Angle bob;
    Angle bob_prime;

    /// (0, 45, 22.5, 67.5): the settings reaching 2*sqrt(2) for the singlet.
    static ChshSettings canonical();
};

/// S = |E(a,b) - E(a,b') + E(a',b) + E(a',b')|.
double chsh_value(const ChshSettings& settings, double visibility);
double chsh_value(const ChshSettings& settings, const VisibilityModel& model);

/// QBER = (1 - v) / 2 for a Werner-type state.
double qber_from_visibility(double visibility);

/// Outcome pair drawn from the measurement model. `depolarized` records
/// whether the pair came from the maximally mixed part of the mixture.
struct PairOutcome {
    Outcome alice = Outcome::plus;
    Outcome bob = Outcome::minus;
    bool depolarized = false;
};

/// Samples (i, j) with probability joint_probability(i, j, a, b, v) from
/// three uniforms in [0, 1): one selects singlet vs mixed, one picks the
/// alice outcome, one picks the bob outcome conditioned on alice.
PairOutcome sample_pair_outcome(Angle a, Angle b, double visibility,
                                double u_mixture, double u_alice, double u_bob);

}  // namespace entlink
