#pragma once

// Least-squares fit of polarization fringes N(theta) = C * (1 - V cos 2(theta - theta0)).
//
// The model is linear in (c0, c1, c2) once written as
//     N(theta) = c0 + c1 cos 2theta + c2 sin 2theta,
// so the fit is a 3x3 normal-equation solve.

#include <optional>
#include <span>
#include <string>

namespace entlink {

struct FringePoint {
    double angle_deg = 0.0;
    double counts = 0.0;
};

struct FringeFit {
    double offset = 0.0;      // C
    double amplitude = 0.0;   // C * V
    double phase_deg = 0.0;   // theta0 in [0, 180), angle of minimum counts
    double visibility = 0.0;  // amplitude / offset
    double visibility_sigma = 0.0;
    double n_min = 0.0;  // fitted curve extremes
    double n_max = 0.0;
};

struct FringeFitOutcome {
    std::optional<FringeFit> fit;
    std::string error;  // set when the fit failed
};

/// `weighted` uses 1/N weights (Poisson variance); otherwise ordinary least
/// squares. Never throws on bad data: singular or degenerate inputs come back
/// as an outcome with `error` set.
FringeFitOutcome fit_fringe(std::span<const FringePoint> points, bool weighted = false);

}  // namespace entlink
