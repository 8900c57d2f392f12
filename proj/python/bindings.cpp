// Python bindings. Structured results cross the boundary as JSON text and are
// decoded by the entlink package; bit strings and counts use plain lists.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <json.hpp>

#include "entlink/bell.hpp"
#include "entlink/coincidence.hpp"
#include "entlink/config_json.hpp"
#include "entlink/fringe_fit.hpp"
#include "entlink/link_sim.hpp"
#include "entlink/polarization.hpp"
#include "entlink/qkd/bits.hpp"
#include "entlink/qkd/cascade.hpp"
#include "entlink/qkd/privacy.hpp"
#include "entlink/qkd/session.hpp"
#include "entlink/scenario.hpp"
#include "entlink/verify.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace entlink;

namespace {

Outcome outcome_arg(int s) {
    if (s != 1 && s != -1) throw std::invalid_argument("outcome must be +1 or -1");
    return s == 1 ? Outcome::plus : Outcome::minus;
}

LinkConfig link_from(const std::string& config_json) {
    const LinkConfig c = link_config_from_json(json::parse(config_json));
    c.validate();
    return c;
}

qkd::Bits bits_from(const std::vector<int>& v) {
    qkd::Bits b;
    b.reserve(v.size());
    for (int x : v) {
        if (x != 0 && x != 1) throw std::invalid_argument("bits must be 0 or 1");
        b.push_back(static_cast<std::uint8_t>(x));
    }
    return b;
}

std::vector<int> bits_to(const qkd::Bits& b) { return {b.begin(), b.end()}; }

WindowConvention convention_from(const std::string& s) { return window_convention_from_string(s); }

std::string simulate(const std::string& config_json) {
    const auto run = simulate_run(link_from(config_json));
    auto events = [](const std::vector<TimeTaggedEvent>& v) {
        json rows = json::array();
        for (const auto& e : v) rows.push_back({e.time_ps, e.detector, e.pulse_index, e.offset_ps});
        return rows;
    };
    json truth = json::array();
    for (const auto& t : run.truth) truth.push_back({t.alice_index, t.bob_index, t.depolarized});
    return json{{"alice", events(run.alice)}, {"bob", events(run.bob)}, {"truth", truth}}.dump();
}

std::string coincidences(const std::string& config_json, const std::string& convention) {
    const LinkConfig c = link_from(config_json);
    const auto run = simulate_run(c);
    const auto recs = match(run.alice, run.bob, c.window, convention_from(convention));
    json rows = json::array();
    for (const auto& r : recs) {
        rows.push_back({r.alice_index, r.bob_index, r.alice.detector, r.bob.detector, r.delta_ps});
    }
    return json{{"singles_alice", run.alice.size()}, {"singles_bob", run.bob.size()}, {"records", rows}}.dump();
}

std::string chsh(const std::vector<double>& e, const std::vector<double>& sigma) {
    if (e.size() != 4 || sigma.size() != 4) throw std::invalid_argument("need four E and four sigma values");
    auto comps = published_table1();
    for (int k = 0; k < 4; ++k) {
        comps[k].e_value = e[k];
        comps[k].sigma = sigma[k];
    }
    const auto r = compute_chsh(comps);
    json j = to_json(r);
    j["significance"] = violation_significance(r);
    return j.dump();
}

std::string bell_test(const std::string& config_json, bool normalize, const std::string& convention) {
    BellTestOptions opts;
    opts.normalize = normalize;
    opts.convention = convention_from(convention);
    const auto r = run_bell_test(link_from(config_json), opts);
    json j = to_json(r.chsh);
    j["significance"] = violation_significance(r.chsh);
    j["predicted_s"] = r.predicted_s;
    j["coincidences"] = r.coincidences;
    j["coincidence_rate"] = r.coincidence_rate();
    j["singles_rate_alice"] = r.singles_rate_alice();
    j["singles_rate_bob"] = r.singles_rate_bob();
    return j.dump();
}

std::string fringe(const std::vector<double>& angles, const std::vector<double>& counts, bool weighted) {
    if (angles.size() != counts.size()) throw std::invalid_argument("angles and counts differ in length");
    std::vector<FringePoint> pts;
    for (std::size_t i = 0; i < angles.size(); ++i) pts.push_back({angles[i], counts[i]});
    const auto out = fit_fringe(pts, weighted);
    if (!out.fit) return json{{"error", out.error}}.dump();
    return to_json(*out.fit).dump();
}

std::string scan(const std::string& config_json, const std::vector<double>& bob, const std::vector<double>& alice,
                 bool weighted) {
    ScanOptions opts;
    opts.weighted = weighted;
    json out = json::array();
    for (const auto& c : visibility_scan(link_from(config_json), bob, alice, opts)) out.push_back(to_json(c));
    return out.dump();
}

py::tuple cascade(const std::vector<int>& alice, const std::vector<int>& bob, double qber, std::uint64_t seed) {
    const qkd::Bits a = bits_from(alice);
    qkd::Bits b = bits_from(bob);
    if (a.size() != b.size()) throw std::invalid_argument("keys differ in length");
    const auto stats = qkd::cascade_correct(b, qber, seed, {}, [&](const qkd::ParityQuery& q) {
        return qkd::answer_parity_query(a, q);
    });
    return py::make_tuple(bits_to(b), stats.leaked_bits, stats.corrections);
}

std::string session(const std::string& config_json, std::uint64_t seed, const std::string& placement) {
    LinkConfig c = link_from(config_json);
    c.seed = derive_seed(seed, "link");
    const auto run = simulate_run(c);
    const auto recs = match(run.alice, run.bob, c.window);
    qkd::SessionConfig cfg;
    cfg.seed = derive_seed(seed, "protocol");
    if (placement == "lockstep") cfg.placement = qkd::Placement::lockstep;
    else if (placement == "threads") cfg.placement = qkd::Placement::threads;
    else if (placement == "processes") cfg.placement = qkd::Placement::processes;
    else throw std::invalid_argument("unknown placement: " + placement);
    const auto res = qkd::run_session(recs, c.duration, cfg);
    json j = qkd::to_json(res.ledger);
    j["audited_leakage"] = res.audited_leakage;
    j["alice_key"] = qkd::to_hex(res.run.alice.key.bits);
    j["bob_key"] = qkd::to_hex(res.run.bob.key.bits);
    j["transcript_lines"] = res.run.transcript.size();
    return j.dump();
}

std::string scenario_run(const std::filesystem::path& path, std::optional<std::filesystem::path> report_dir,
                         std::optional<std::uint64_t> seed) {
    ScenarioOverrides o;
    o.report_dir = std::move(report_dir);
    o.seed = seed;
    const auto summary = run_scenario(load_scenario(path, o));
    return json{{"report_dir", summary.report_dir.string()},
                {"files", summary.files},
                {"headline", summary.headline},
                {"aborted", summary.aborted}}
        .dump();
}

std::string verify(const std::filesystem::path& dir) {
    const auto report = verify_reports(dir);
    json checks = json::array();
    for (const auto& c : report.checks) {
        checks.push_back({{"criterion", c.criterion}, {"passed", c.passed}, {"detail", c.detail}});
    }
    return json{{"experiment", report.experiment}, {"passed", report.passed()}, {"checks", checks}}.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "entlink native core";
    m.attr("__version__") = ENTLINK_VERSION;

    m.def("joint_probability",
          [](int i, int j, double a, double b, double v) {
              return joint_probability(outcome_arg(i), outcome_arg(j), Angle::degrees(a), Angle::degrees(b), v);
          },
          py::arg("i"), py::arg("j"), py::arg("a_deg"), py::arg("b_deg"), py::arg("visibility"));
    m.def("correlation",
          [](double a, double b, double v) { return correlation(Angle::degrees(a), Angle::degrees(b), v); },
          py::arg("a_deg"), py::arg("b_deg"), py::arg("visibility"));
    m.def("chsh_value",
          [](double a, double ap, double b, double bp, double v) {
              return chsh_value({Angle::degrees(a), Angle::degrees(ap), Angle::degrees(b), Angle::degrees(bp)}, v);
          },
          py::arg("a_deg"), py::arg("a_prime_deg"), py::arg("b_deg"), py::arg("b_prime_deg"), py::arg("visibility"));
    m.def("qber_from_visibility", &qber_from_visibility, py::arg("visibility"));
    m.def("accidental_rate", &accidental_rate, py::arg("singles_alice"), py::arg("singles_bob"), py::arg("window"));

    m.def("_simulate", &simulate);
    m.def("_coincidences", &coincidences);
    m.def("_chsh", &chsh);
    m.def("_bell_test", &bell_test);
    m.def("_fit_fringe", &fringe);
    m.def("_visibility_scan", &scan);
    m.def("_session", &session);
    m.def("_run_scenario", &scenario_run);
    m.def("_verify", &verify);
    m.def("default_link_config", [] { return to_json(LinkConfig{}).dump(); });

    m.def("binary_entropy", &qkd::binary_entropy, py::arg("x"));
    m.def("final_key_length", &qkd::final_key_length, py::arg("n"), py::arg("qber"), py::arg("leakage"),
          py::arg("epsilon") = 1e-6);
    m.def("cascade", &cascade, py::arg("alice"), py::arg("bob"), py::arg("qber"), py::arg("seed") = 0);
    m.def("toeplitz_hash",
          [](const std::vector<int>& key, std::size_t m_out, std::uint64_t seed) {
              return bits_to(qkd::toeplitz_hash(bits_from(key), m_out, seed));
          },
          py::arg("key"), py::arg("m"), py::arg("seed"));
}
