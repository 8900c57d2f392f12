#include "entlink/fringe_fit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace entlink {
namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

std::optional<Mat3> invert(const Mat3& m) {
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    double scale = 0.0;
    for (const auto& row : m)
        for (double x : row) scale = std::max(scale, std::abs(x));
    if (!(std::abs(det) > 1e-10 * scale * scale * scale)) {
        return std::nullopt;
    }
    Mat3 inv{};
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    return inv;
}

std::array<double, 3> basis(double angle_deg) {
    const double t = 2.0 * angle_deg * std::numbers::pi / 180.0;
    return {1.0, std::cos(t), std::sin(t)};
}

}  // namespace

FringeFitOutcome fit_fringe(std::span<const FringePoint> points, bool weighted) {
    FringeFitOutcome out;
    if (points.size() < 3) {
        out.error = "need at least 3 points";
        return out;
    }
    Mat3 xtwx{};
    std::array<double, 3> xtwy{};
    for (const auto& p : points) {
        if (!std::isfinite(p.counts) || p.counts < 0.0) {
            out.error = "counts must be finite and >= 0";
            return out;
        }
        const auto x = basis(p.angle_deg);
        const double w = weighted ? 1.0 / std::max(p.counts, 1.0) : 1.0;
        for (int i = 0; i < 3; ++i) {
            xtwy[i] += w * x[i] * p.counts;
            for (int j = 0; j < 3; ++j) xtwx[i][j] += w * x[i] * x[j];
        }
    }
    const auto inv = invert(xtwx);
    if (!inv) {
        out.error = "singular normal equations (angles do not span a fringe)";
        return out;
    }
    std::array<double, 3> c{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) c[i] += (*inv)[i][j] * xtwy[j];

    // Parameter covariance with Poisson variance taken from the data.
    Mat3 cov{};
    if (weighted) {
        cov = *inv;
    } else {
        Mat3 meat{};
        for (const auto& p : points) {
            const auto x = basis(p.angle_deg);
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) meat[i][j] += std::max(p.counts, 1.0) * x[i] * x[j];
        }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                for (int k = 0; k < 3; ++k)
                    for (int l = 0; l < 3; ++l) cov[i][j] += (*inv)[i][k] * meat[k][l] * (*inv)[l][j];
    }

    if (!(c[0] > 0.0)) {
        out.error = "fitted offset is not positive";
        return out;
    }
    FringeFit fit;
    const double r = std::hypot(c[1], c[2]);
    fit.offset = c[0];
    fit.amplitude = r;
    fit.visibility = r / c[0];
    double phase = std::atan2(-c[2], -c[1]) / 2.0 * 180.0 / std::numbers::pi;
    if (phase < 0.0) phase += 180.0;
    if (phase >= 180.0) phase -= 180.0;
    fit.phase_deg = phase;
    fit.n_min = c[0] - r;
    fit.n_max = c[0] + r;

    std::array<double, 3> grad{-fit.visibility / c[0], 0.0, 0.0};
    if (r > 0.0) {
        grad[1] = c[1] / (r * c[0]);
        grad[2] = c[2] / (r * c[0]);
    }
    double var = 0.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) var += grad[i] * cov[i][j] * grad[j];
    fit.visibility_sigma = std::sqrt(std::max(var, 0.0));
    out.fit = fit;
    return out;
}

}  // namespace entlink
