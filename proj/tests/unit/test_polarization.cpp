#include <doctest.h>

#include <cmath>
#include <numbers>

#include "entlink/errors.hpp"
#include "entlink/polarization.hpp"
#include "entlink/random.hpp"

using namespace entlink;

namespace {
constexpr Outcome P = Outcome::plus;
constexpr Outcome M = Outcome::minus;

double cos2(double a_deg, double b_deg) { return std::cos(2.0 * (a_deg - b_deg) * std::numbers::pi / 180.0); }
}  // namespace

TEST_SUITE("polarization") {
    TEST_CASE("angles normalize into [0, 180)") {
        CHECK(Angle::degrees(180.0).degrees() == doctest::Approx(0.0));
        CHECK(Angle::degrees(-45.0).degrees() == doctest::Approx(135.0));
        CHECK(Angle::degrees(405.0).degrees() == doctest::Approx(45.0));
        CHECK(angles::vertical().degrees() == 90.0);
        CHECK(angles::antidiagonal().degrees() == 135.0);
        Rng rng(1);
        for (int i = 0; i < 1000; ++i) {
            const double x = (rng.uniform() - 0.5) * 4000.0;
            const Angle a = Angle::degrees(x);
            CHECK(a.degrees() >= 0.0);
            CHECK(a.degrees() < 180.0);
            CHECK(Angle::degrees(a.degrees()) == a);
        }
    }

    TEST_CASE("joint probability examples") {
        const Angle h = angles::horizontal();
        CHECK(joint_probability(P, P, h, h, 1.0) == doctest::Approx(0.0));
        CHECK(joint_probability(P, M, h, h, 1.0) == doctest::Approx(0.5));
        CHECK(joint_probability(P, P, h, Angle::degrees(22.5), 1.0) ==
              doctest::Approx(0.25 * (1.0 - std::cos(std::numbers::pi / 4))).epsilon(1e-12));
        CHECK(joint_probability(P, P, h, Angle::degrees(22.5), 1.0) == doctest::Approx(0.07322).epsilon(1e-4));
    }

    TEST_CASE("joint probability rejects visibility outside [0, 1]") {
        CHECK_THROWS_AS(joint_probability(P, P, Angle{}, Angle{}, 1.01), ValidationError);
        CHECK_THROWS_AS(joint_probability(P, P, Angle{}, Angle{}, -0.1), ValidationError);
        CHECK_THROWS_AS(correlation(Angle{}, Angle{}, 2.0), ValidationError);
    }

    TEST_CASE("probabilities sum to one with uniform marginals") {
        Rng rng(7);
        for (int i = 0; i < 1000; ++i) {
            const Angle a = Angle::degrees(rng.uniform() * 180.0);
            const Angle b = Angle::degrees(rng.uniform() * 180.0);
            const double v = rng.uniform();
            double total = 0.0;
            for (Outcome x : {P, M}) {
                double marg_a = 0.0;
                double marg_b = 0.0;
                for (Outcome y : {P, M}) {
                    const double p = joint_probability(x, y, a, b, v);
                    CHECK(p >= 0.0);
                    total += p;
                    marg_a += p;
                    marg_b += joint_probability(y, x, a, b, v);
                }
                CHECK(marg_a == doctest::Approx(0.5).epsilon(1e-12));
                CHECK(marg_b == doctest::Approx(0.5).epsilon(1e-12));
            }
            CHECK(std::abs(total - 1.0) < 1e-12);
        }
    }

    TEST_CASE("correlation matches -v cos 2(a - b)") {
        CHECK(correlation(Angle{}, Angle::degrees(22.5), 1.0) == doctest::Approx(-0.70711).epsilon(1e-5));
        CHECK(correlation(Angle{}, Angle::degrees(22.5), 0.91) == doctest::Approx(-0.64347).epsilon(1e-5));
        CHECK(correlation(Angle{}, Angle{}, 0.0) == doctest::Approx(0.0));
        Rng rng(11);
        for (int i = 0; i < 1000; ++i) {
            const double a = rng.uniform() * 360.0 - 90.0;
            const double b = rng.uniform() * 360.0 - 90.0;
            const double v = rng.uniform();
            const double e = correlation(Angle::degrees(a), Angle::degrees(b), v);
            CHECK(std::abs(e + v * cos2(a, b)) < 1e-12);
            CHECK(std::abs(e) <= v + 1e-15);
        }
    }

    TEST_CASE("CHSH values") {
        const auto canon = ChshSettings::canonical();
        CHECK(chsh_value(canon, 1.0) == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-12));
        CHECK(chsh_value(canon, 1.0) == doctest::Approx(2.82843).epsilon(1e-5));
        CHECK(chsh_value(canon, 0.91) == doctest::Approx(2.57387).epsilon(1e-5));
        const ChshSettings zero{Angle{}, Angle{}, Angle{}, Angle{}};
        CHECK(chsh_value(zero, 1.0) == doctest::Approx(2.0));
    }

    TEST_CASE("CHSH is invariant under adding 180 degrees to any angle") {
        Rng rng(5);
        for (int i = 0; i < 200; ++i) {
            const double a = rng.uniform() * 180, ap = rng.uniform() * 180, b = rng.uniform() * 180,
                         bp = rng.uniform() * 180;
            const double v = rng.uniform();
            const ChshSettings s{Angle::degrees(a), Angle::degrees(ap), Angle::degrees(b), Angle::degrees(bp)};
            const ChshSettings t{Angle::degrees(a + 180), Angle::degrees(ap - 180), Angle::degrees(b + 540),
                                 Angle::degrees(bp + 180)};
            CHECK(chsh_value(s, v) == doctest::Approx(chsh_value(t, v)).epsilon(1e-12));
        }
    }

    TEST_CASE("CHSH at canonical settings is increasing in v") {
        double last = -1.0;
        for (int k = 0; k <= 100; ++k) {
            const double s = chsh_value(ChshSettings::canonical(), k / 100.0);
            CHECK(s > last);
            last = s;
        }
    }

    TEST_CASE("QBER from visibility") {
        CHECK(qber_from_visibility(1.0) == 0.0);
        CHECK(qber_from_visibility(0.91) == doctest::Approx(0.045));
        CHECK(qber_from_visibility(0.8834) == doctest::Approx(0.0583));
        CHECK_THROWS_AS(qber_from_visibility(1.5), ValidationError);
    }

    TEST_CASE("visibility model interpolates between the basis values") {
        const VisibilityModel m{0.94, 0.89};
        CHECK(m.effective(Angle{}, Angle{}) == doctest::Approx(0.94));
        CHECK(m.effective(angles::vertical(), angles::vertical()) == doctest::Approx(0.94));
        CHECK(m.effective(angles::diagonal(), angles::diagonal()) == doctest::Approx(0.89));
        CHECK(m.effective(angles::antidiagonal(), angles::antidiagonal()) == doctest::Approx(0.89));
        // (170, 0) straddles the wrap: the axial mean is -5, not 85.
        CHECK(axial_mean_degrees(Angle::degrees(170), Angle{}) == doctest::Approx(-5.0));
        CHECK(m.effective(Angle::degrees(170), Angle{}) > 0.93);
        CHECK_THROWS_AS((VisibilityModel{1.2, 0.5}.validate()), ValidationError);
    }

    TEST_CASE("sampled outcomes reproduce the correlation (10^6 draws)") {
        Rng rng(2024);
        const Angle a = Angle::degrees(0);
        const Angle b = Angle::degrees(22.5);
        const double v = 0.91;
        const int n = 1'000'000;
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto o = sample_pair_outcome(a, b, v, rng.uniform(), rng.uniform(), rng.uniform());
            sum += sign(o.alice) * sign(o.bob);
        }
        const double e = sum / n;
        const double expected = correlation(a, b, v);
        const double se = std::sqrt((1.0 - expected * expected) / n);
        CHECK(std::abs(e - expected) < 4.0 * se);
    }

    TEST_CASE("sampled (+,+) frequency matches joint probability") {
        Rng rng(99);
        const Angle a = Angle::degrees(0);
        const Angle b = Angle::degrees(22.5);
        const int n = 1'000'000;
        int hits = 0;
        for (int i = 0; i < n; ++i) {
            const auto o = sample_pair_outcome(a, b, 1.0, rng.uniform(), rng.uniform(), rng.uniform());
            hits += o.alice == P && o.bob == P;
        }
        const double p = joint_probability(P, P, a, b, 1.0);
        CHECK(std::abs(hits / double(n) - p) < 4.0 * std::sqrt(p * (1 - p) / n));
    }
}
