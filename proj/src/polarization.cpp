#include "entlink/polarization.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "entlink/errors.hpp"

namespace entlink {
namespace {

void check_visibility(double v) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError("visibility must lie in [0, 1], got " + std::to_string(v));
    }
}

double cos2(double degrees) {
    return std::cos(2.0 * degrees * std::numbers::pi / 180.0);
}

}  // namespace

Angle Angle::degrees(double value) {
    if (!std::isfinite(value)) {
        throw ValidationError("angle must be finite");
    }
    double d = std::fmod(value, 180.0);
    if (d < 0.0) {
        d += 180.0;
    }
    if (d >= 180.0) {
        d = 0.0;
    }
    return Angle(d);
}

double Angle::radians() const { return deg_ * std::numbers::pi / 180.0; }

double axial_mean_degrees(Angle a, Angle b) {
    double delta = a.degrees() - b.degrees();
    if (delta >= 90.0) {
        delta -= 180.0;
    } else if (delta < -90.0) {
        delta += 180.0;
    }
    return b.degrees() + delta / 2.0;
}

double VisibilityModel::effective(Angle a, Angle b) const {
    const double c = cos2(axial_mean_degrees(a, b));
    const double c2 = c * c;
    return v_hv * c2 + v_diag * (1.0 - c2);
}

void VisibilityModel::validate() const {
    check_visibility(v_hv);
    check_visibility(v_diag);
}

double joint_probability(Outcome i, Outcome j, Angle a, Angle b, double visibility) {
    check_visibility(visibility);
    const double ij = static_cast<double>(sign(i) * sign(j));
    return 0.25 * (1.0 - ij * visibility * cos2(a.degrees() - b.degrees()));
}

double correlation(Angle a, Angle b, double visibility) {
    double e = 0.0;
    for (Outcome i : {Outcome::plus, Outcome::minus}) {
        for (Outcome j : {Outcome::plus, Outcome::minus}) {
            e += sign(i) * sign(j) * joint_probability(i, j, a, b, visibility);
        }
    }
    return e;
}

double correlation(Angle a, Angle b, const VisibilityModel& model) {
    return correlation(a, b, model.effective(a, b));
}

ChshSettings ChshSettings::canonical() {
    return {Angle::degrees(0.0), Angle::degrees(45.0), Angle::degrees(22.5), Angle::degrees(67.5)};
}

namespace {

template <typename CorrelationFn>
double chsh_sum(const ChshSettings& s, CorrelationFn&& e) {
    return std::abs(e(s.alice, s.bob) - e(s.alice, s.bob_prime) + e(s.alice_prime, s.bob) +
                    e(s.alice_prime, s.bob_prime));
}

}  // namespace

double chsh_value(const ChshSettings& settings, double visibility) {
    check_visibility(visibility);
    return chsh_sum(settings, [&](Angle a, Angle b) { return correlation(a, b, visibility); });
}

double chsh_value(const ChshSettings& settings, const VisibilityModel& model) {
    model.validate();
    return chsh_sum(settings, [&](Angle a, Angle b) { return correlation(a, b, model); });
}

double qber_from_visibility(double visibility) {
    check_visibility(visibility);
    return (1.0 - visibility) / 2.0;
}

PairOutcome sample_pair_outcome(Angle a, Angle b, double visibility, double u_mixture,
                                double u_alice, double u_bob) {
    // Werner decomposition: with probability v the singlet, otherwise white noise.
    // Both branches have uniform marginals, so alice is a fair coin either way.
    PairOutcome out;
    out.depolarized = u_mixture >= visibility;
    out.alice = u_alice < 0.5 ? Outcome::plus : Outcome::minus;
    double p_same = 0.5;
    if (!out.depolarized) {
        // P(j = i | i) for the pure singlet: 2 * P(i, i) = (1 - cos 2(a-b)) / 2.
        p_same = 0.5 * (1.0 - cos2(a.degrees() - b.degrees()));
    }
    out.bob = u_bob < p_same ? out.alice : flipped(out.alice);
    return out;
}

}  // namespace entlink
