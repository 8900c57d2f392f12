#include "entlink/bell.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "entlink/errors.hpp"

namespace entlink {
namespace {

constexpr std::array<std::array<int, 2>, 4> kRoles{{{0, 0}, {0, 1}, {1, 0}, {1, 1}}};
constexpr std::array<double, 4> kSigns{1.0, -1.0, 1.0, 1.0};

CorrelationEstimate from_counts(double same, double diff, const SettingPair& settings) {
    const double total = same + diff;
    if (!(total > 0.0)) {
        throw ValidationError("estimate_correlation: count matrix is empty");
    }
    CorrelationEstimate est;
    est.e_value = (same - diff) / total;
    est.sigma = 2.0 * std::sqrt(same * diff / (total * total * total));
    est.settings = settings;
    est.total = total;
    return est;
}

double basis_share(const AnalyzerSetting& s, int basis) {
    return basis == 0 ? s.splitter_ratio : 1.0 - s.splitter_ratio;
}

// Per-detector singles rate: signal photons split by basis then evenly by
// outcome, background uniform over detectors, both thinned by the coupler.
std::array<double, kDetectorsPerReceiver> detector_rates(const LinkConfig& c, Receiver r) {
    const double signal = c.pair_rate * (r == Receiver::alice ? c.arm_efficiency_alice
                                                              : c.arm_efficiency_bob);
    const double bg = r == Receiver::alice ? c.background_rate_alice : c.background_rate_bob;
    std::array<double, kDetectorsPerReceiver> out{};
    for (int d = 0; d < kDetectorsPerReceiver; ++d) {
        const double share = basis_share(c.settings(r), basis_of(static_cast<std::uint8_t>(d)));
        out[d] = (signal * share / 2.0 + bg / kDetectorsPerReceiver) * c.couplers(r)[d];
    }
    return out;
}

template <typename Sink>
void stream_coincidences(const LinkConfig& config, WindowConvention convention, double chunk_seconds,
                         DetectorCounts& singles_alice, DetectorCounts& singles_bob, Sink&& sink) {
    LinkSimulator sim(config, chunk_seconds);
    StreamingMatcher matcher(config.window, convention);
    SimulatedRun chunk;
    auto add = [](DetectorCounts& acc, const DetectorCounts& x) {
        for (int d = 0; d < kDetectorsPerReceiver; ++d) acc[d] += x[d];
    };
    while (sim.next(chunk)) {
        add(singles_alice, count_singles(chunk.alice));
        add(singles_bob, count_singles(chunk.bob));
        matcher.push(chunk.alice, chunk.bob);
        for (const auto& rec : matcher.take()) sink(rec);
    }
    matcher.finish();
    for (const auto& rec : matcher.take()) sink(rec);
}

}  // namespace

CorrelationEstimate estimate_correlation(const CountMatrix& m) {
    const double same = static_cast<double>(m.n[0][0] + m.n[1][1]);
    const double diff = static_cast<double>(m.n[0][1] + m.n[1][0]);
    return from_counts(same, diff, m.settings);
}

CorrelationEstimate estimate_correlation(const NormalizedCounts& m) {
    return from_counts(m.n[0][0] + m.n[1][1], m.n[0][1] + m.n[1][0], m.settings);
}

ChshResult compute_chsh(const std::array<CorrelationEstimate, 4>& c) {
    const auto& s = [&](int k) -> const SettingPair& { return c[k].settings; };
    const bool roles_ok = s(0).alice_angle == s(1).alice_angle && s(2).alice_angle == s(3).alice_angle &&
                          s(0).bob_angle == s(2).bob_angle && s(1).bob_angle == s(3).bob_angle;
    if (!roles_ok) {
        throw ValidationError(
            "compute_chsh: components must be ordered (a,b), (a,b'), (a',b), (a',b')");
    }
    ChshResult r;
    r.components = c;
    double sum = 0.0;
    double var = 0.0;
    for (int k = 0; k < 4; ++k) {
        sum += kSigns[k] * c[k].e_value;
        var += c[k].sigma * c[k].sigma;
    }
    r.s_value = std::abs(sum);
    r.sigma = std::sqrt(var);
    return r;
}

double violation_significance(const ChshResult& result) {
    const double excess = result.s_value - 2.0;
    if (result.sigma > 0.0) {
        return excess / result.sigma;
    }
    if (excess > 0.0) return std::numeric_limits<double>::infinity();
    if (excess < 0.0) return -std::numeric_limits<double>::infinity();
    return 0.0;
}

std::array<CorrelationEstimate, 4> published_table1() {
    const auto settings = ChshSettings::canonical();
    const std::array<Angle, 2> a{settings.alice, settings.alice_prime};
    const std::array<Angle, 2> b{settings.bob, settings.bob_prime};
    const std::array<double, 4> e{-0.681, 0.764, -0.421, -0.581};
    const std::array<double, 4> sigma{0.040, 0.036, 0.052, 0.046};
    std::array<CorrelationEstimate, 4> out;
    for (int k = 0; k < 4; ++k) {
        const auto [ia, ib] = kRoles[k];
        out[k].e_value = e[k];
        out[k].sigma = sigma[k];
        out[k].settings = {ia, ib, a[ia], b[ib]};
        out[k].total = std::round((1.0 - e[k] * e[k]) / (sigma[k] * sigma[k]));
    }
    return out;
}

std::array<CountMatrix, 4> counts_for_estimates(const std::array<CorrelationEstimate, 4>& estimates) {
    std::array<CountMatrix, 4> out;
    for (int k = 0; k < 4; ++k) {
        const auto& est = estimates[k];
        if (!(est.sigma > 0.0) || std::abs(est.e_value) >= 1.0) {
            throw ValidationError("counts_for_estimates: need sigma > 0 and |E| < 1");
        }
        const double nominal = (1.0 - est.e_value * est.e_value) / (est.sigma * est.sigma);
        // Search totals near the nominal one for the closest integer match.
        std::uint64_t best_same = 0;
        std::uint64_t best_total = 0;
        double best_err = std::numeric_limits<double>::infinity();
        const auto lo = static_cast<std::uint64_t>(std::max(2.0, std::floor(0.9 * nominal)));
        const auto hi = static_cast<std::uint64_t>(std::ceil(1.1 * nominal)) + 2;
        for (std::uint64_t total = lo; total <= hi; ++total) {
            const double t = static_cast<double>(total);
            const auto same = static_cast<std::uint64_t>(std::llround(t * (1.0 + est.e_value) / 2.0));
            const double sd = static_cast<double>(same);
            const double e = (2.0 * sd - t) / t;
            const double s = 2.0 * std::sqrt(sd * (t - sd) / (t * t * t));
            const double err = std::abs(e - est.e_value) / est.sigma + std::abs(s / est.sigma - 1.0);
            if (err < best_err) {
                best_err = err;
                best_same = same;
                best_total = total;
            }
        }
        const std::uint64_t diff = best_total - best_same;
        CountMatrix m;
        m.settings = est.settings;
        m.n[0][0] = best_same / 2;
        m.n[1][1] = best_same - best_same / 2;
        m.n[0][1] = diff / 2;
        m.n[1][0] = diff - diff / 2;
        out[k] = m;
    }
    return out;
}

double BellTestResult::coincidence_rate() const {
    return duration > 0.0 ? static_cast<double>(coincidences) / duration : 0.0;
}

double BellTestResult::singles_rate_alice() const {
    double total = 0.0;
    for (auto c : singles_alice) total += static_cast<double>(c);
    return duration > 0.0 ? total / duration : 0.0;
}

double BellTestResult::singles_rate_bob() const {
    double total = 0.0;
    for (auto c : singles_bob) total += static_cast<double>(c);
    return duration > 0.0 ? total / duration : 0.0;
}

BellTestResult run_bell_test(const LinkConfig& config, const BellTestOptions& options) {
    config.validate();
    BellTestResult result;
    result.duration = config.duration;
    for (int k = 0; k < 4; ++k) {
        result.matrices[k].settings = setting_pair(config, kRoles[k][0], kRoles[k][1]);
        result.matrices[k].duration = config.duration;
    }
    stream_coincidences(config, options.convention, options.chunk_seconds, result.singles_alice,
                        result.singles_bob, [&](const CoincidenceRecord& rec) {
                            auto& m = result.matrices[2 * rec.alice_basis() + rec.bob_basis()];
                            ++m.n[outcome_index(rec.alice_outcome())][outcome_index(rec.bob_outcome())];
                            ++result.coincidences;
                        });
    std::array<CorrelationEstimate, 4> estimates;
    for (int k = 0; k < 4; ++k) {
        auto& m = result.matrices[k];
        m.singles_alice = result.singles_alice;
        m.singles_bob = result.singles_bob;
        estimates[k] = options.normalize ? estimate_correlation(normalize(m)) : estimate_correlation(m);
    }
    result.chsh = compute_chsh(estimates);
    result.predicted_s = predicted_chsh(config, options.convention);
    return result;
}

RatePrediction predicted_rates(const LinkConfig& config, int alice_basis, int bob_basis,
                               WindowConvention convention) {
    config.validate();
    const double tol_s = static_cast<double>(match_tolerance_ps(config.window, convention)) /
                         static_cast<double>(kPicosecondsPerSecond);
    // The arrival difference of a pair is Gaussian with sigma * sqrt(2).
    const double match_eff =
        config.jitter_sigma > 0.0 ? std::erf(tol_s / (2.0 * config.jitter_sigma)) : 1.0;
    const Angle a = config.settings_alice.angle(alice_basis);
    const Angle b = config.settings_bob.angle(bob_basis);
    const double v = config.visibility.effective(a, b);

    double coupled = 0.0;
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            const Outcome oi = outcome_from_index(i);
            const Outcome oj = outcome_from_index(j);
            coupled += joint_probability(oi, oj, a, b, v) *
                       config.coupler_efficiencies_alice[detector_index(alice_basis, oi)] *
                       config.coupler_efficiencies_bob[detector_index(bob_basis, oj)];
        }
    }
    RatePrediction out;
    out.true_pairs = config.pair_rate * config.arm_efficiency_alice * config.arm_efficiency_bob *
                     basis_share(config.settings_alice, alice_basis) *
                     basis_share(config.settings_bob, bob_basis) * match_eff * coupled;

    const auto ra = detector_rates(config, Receiver::alice);
    const auto rb = detector_rates(config, Receiver::bob);
    const double sa = ra[2 * alice_basis] + ra[2 * alice_basis + 1];
    const double sb = rb[2 * bob_basis] + rb[2 * bob_basis + 1];
    out.accidentals = sa * sb * 2.0 * tol_s;
    return out;
}

double predicted_chsh(const LinkConfig& config, WindowConvention convention) {
    double sum = 0.0;
    for (int k = 0; k < 4; ++k) {
        const auto [ia, ib] = kRoles[k];
        const auto rates = predicted_rates(config, ia, ib, convention);
        const double total = rates.true_pairs + rates.accidentals;
        const double dilution = total > 0.0 ? rates.true_pairs / total : 0.0;
        sum += kSigns[k] * dilution *
               correlation(config.settings_alice.angle(ia), config.settings_bob.angle(ib),
                           config.visibility);
    }
    return std::abs(sum);
}

std::string curve_label(double bob_angle_deg) {
    const double a = Angle::degrees(bob_angle_deg).degrees();
    if (a == 0.0) return "H";
    if (a == 90.0) return "V";
    if (a == 45.0) return "D";
    if (a == 135.0) return "A";
    std::ostringstream os;
    os << "b" << a;
    std::string s = os.str();
    for (auto& ch : s) {
        if (ch == '.') ch = 'p';
    }
    return s;
}

std::vector<ScanCurve> visibility_scan(const LinkConfig& config,
                                       std::span<const double> bob_angles_deg,
                                       std::span<const double> alice_angles_deg,
                                       const ScanOptions& options) {
    config.validate();
    if (alice_angles_deg.size() < 8) {
        throw ValidationError("visibility_scan: need at least 8 sweep points per curve");
    }
    if (bob_angles_deg.empty()) {
        throw ValidationError("visibility_scan: no Bob angles given");
    }
    std::vector<ScanCurve> curves;
    for (std::size_t c = 0; c < bob_angles_deg.size(); ++c) {
        ScanCurve curve;
        const Angle b = Angle::degrees(bob_angles_deg[c]);
        curve.bob_angle_deg = b.degrees();
        curve.label = curve_label(bob_angles_deg[c]);
        const std::uint64_t curve_seed = derive_seed(config.seed, static_cast<std::uint64_t>(c));
        for (std::size_t k = 0; k < alice_angles_deg.size(); ++k) {
            LinkConfig point = config;
            const Angle a = Angle::degrees(alice_angles_deg[k]);
            point.settings_alice.basis_angles = {a, a};
            point.settings_bob.basis_angles = {b, b};
            point.seed = derive_seed(curve_seed, static_cast<std::uint64_t>(k));
            DetectorCounts sa{};
            DetectorCounts sb{};
            std::uint64_t hits = 0;
            stream_coincidences(point, options.convention, 1.0, sa, sb, [&](const CoincidenceRecord& r) {
                if (r.alice_outcome() == Outcome::plus && r.bob_outcome() == Outcome::plus) {
                    ++hits;
                }
            });
            curve.points.push_back({alice_angles_deg[k], static_cast<double>(hits)});
        }
        auto fit = fit_fringe(curve.points, options.weighted);
        curve.fit = fit.fit;
        curve.error = fit.error;
        curves.push_back(std::move(curve));
    }
    return curves;
}

}  // namespace entlink
