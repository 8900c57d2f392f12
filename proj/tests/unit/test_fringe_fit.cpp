#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "entlink/fringe_fit.hpp"
#include "entlink/random.hpp"

using namespace entlink;

namespace {

std::vector<FringePoint> fringe(double c, double v, double phase_deg, int n = 16) {
    std::vector<FringePoint> pts;
    for (int k = 0; k < n; ++k) {
        const double th = k * 180.0 / n;
        const double x = 2.0 * (th - phase_deg) * std::numbers::pi / 180.0;
        pts.push_back({th, c * (1.0 - v * std::cos(x))});
    }
    return pts;
}

// Poisson draw by inversion; fine for means below a few thousand.
double poisson(Rng& rng, double mean) {
    if (mean > 500) {
        return std::max(0.0, std::round(mean + std::sqrt(mean) * rng.normal()));
    }
    double p = std::exp(-mean), cdf = p, u = rng.uniform();
    int k = 0;
    while (u > cdf) {
        ++k;
        p *= mean / k;
        cdf += p;
    }
    return k;
}

}  // namespace

TEST_SUITE("fringe_fit") {
    TEST_CASE("noise-free fringes are recovered exactly") {
        Rng rng(2);
        for (int trial = 0; trial < 200; ++trial) {
            const double c = 10 + rng.uniform() * 5000;
            const double v = rng.uniform();
            const double ph = rng.uniform() * 180.0;
            for (bool weighted : {false, true}) {
                const auto out = fit_fringe(fringe(c, v, ph), weighted);
                REQUIRE(out.fit);
                CHECK(out.fit->offset == doctest::Approx(c).epsilon(1e-9));
                CHECK(out.fit->visibility == doctest::Approx(v).epsilon(1e-9));
                if (v > 1e-3) {
                    double dph = std::abs(out.fit->phase_deg - ph);
                    dph = std::min(dph, 180.0 - dph);
                    CHECK(dph < 1e-6);
                }
                CHECK(out.fit->n_min == doctest::Approx(c * (1 - v)).epsilon(1e-9));
                CHECK(out.fit->n_max == doctest::Approx(c * (1 + v)).epsilon(1e-9));
            }
        }
    }

    TEST_CASE("phase is the angle of minimum counts") {
        const auto out = fit_fringe(fringe(100, 1.0, 0.0));
        REQUIRE(out.fit);
        const double ph = out.fit->phase_deg;
        CHECK(std::min(ph, 180.0 - ph) < 1e-9);
        const auto out2 = fit_fringe(fringe(100, 0.5, 90.0));
        CHECK(out2.fit->phase_deg == doctest::Approx(90.0));
    }

    TEST_CASE("degenerate inputs fail without throwing") {
        std::vector<FringePoint> two{{0, 1}, {45, 2}};
        CHECK(fit_fringe(two).error == "need at least 3 points");
        std::vector<FringePoint> same{{10, 5}, {10, 6}, {10, 7}, {190, 8}};
        const auto s = fit_fringe(same);
        CHECK_FALSE(s.fit);
        CHECK_FALSE(s.error.empty());
        std::vector<FringePoint> neg{{0, 1}, {45, -2}, {90, 3}};
        CHECK_FALSE(fit_fringe(neg).fit);
        std::vector<FringePoint> zeros{{0, 0}, {45, 0}, {90, 0}, {135, 0}};
        CHECK_FALSE(fit_fringe(zeros).fit);
    }

    TEST_CASE("visibility sigma matches the Monte-Carlo spread") {
        Rng rng(17);
        const auto truth = fringe(400, 0.9, 20.0);
        for (bool weighted : {false, true}) {
            std::vector<double> vs;
            double mean_sigma = 0.0;
            const int reps = 1000;
            for (int r = 0; r < reps; ++r) {
                auto pts = truth;
                for (auto& p : pts) p.counts = poisson(rng, p.counts);
                const auto out = fit_fringe(pts, weighted);
                REQUIRE(out.fit);
                vs.push_back(out.fit->visibility);
                mean_sigma += out.fit->visibility_sigma / reps;
            }
            double m = 0, var = 0;
            for (double v : vs) m += v / reps;
            for (double v : vs) var += (v - m) * (v - m) / (reps - 1);
            CHECK(std::sqrt(var) == doctest::Approx(mean_sigma).epsilon(0.2));
            CHECK(std::abs(m - 0.9) < 0.01);
        }
    }
}
