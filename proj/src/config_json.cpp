#include "entlink/config_json.hpp"

#include <set>
#include <string>

#include "entlink/errors.hpp"
#include "entlink/event_io.hpp"

namespace entlink {
namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    if (!j.is_object()) {
        throw ValidationError(where + " must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        if (!known.contains(key)) {
            throw ValidationError("unknown key '" + key + "' in " + where);
        }
    }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("bad value for '") + key + "' in " + where);
    }
}

AnalyzerSetting analyzer_from_json(const json& j, AnalyzerSetting s, const std::string& where) {
    reject_unknown(j, {"basis_angles_deg", "splitter_ratio"}, where);
    if (j.contains("basis_angles_deg")) {
        std::vector<double> a;
        read(j, "basis_angles_deg", a, where);
        if (a.size() != 2) {
            throw ValidationError(where + ".basis_angles_deg needs exactly two angles");
        }
        s.basis_angles = {Angle::degrees(a[0]), Angle::degrees(a[1])};
    }
    read(j, "splitter_ratio", s.splitter_ratio, where);
    return s;
}

json analyzer_to_json(const AnalyzerSetting& s) {
    return json{{"basis_angles_deg", {s.basis_angles[0].degrees(), s.basis_angles[1].degrees()}},
                {"splitter_ratio", s.splitter_ratio}};
}

}  // namespace

LinkConfig link_config_from_json(const json& j, const LinkConfig& defaults) {
    const std::string where = "link";
    reject_unknown(j,
                   {"pair_rate", "arm_efficiency_alice", "arm_efficiency_bob", "background_rate_alice",
                    "background_rate_bob", "coupler_efficiencies_alice", "coupler_efficiencies_bob",
                    "sync_pulse_rate", "jitter_sigma", "window", "path_delay_alice", "path_delay_bob",
                    "visibility", "settings_alice", "settings_bob", "duration", "seed", "max_events"},
                   where);
    LinkConfig c = defaults;
    read(j, "pair_rate", c.pair_rate, where);
    read(j, "arm_efficiency_alice", c.arm_efficiency_alice, where);
    read(j, "arm_efficiency_bob", c.arm_efficiency_bob, where);
    read(j, "background_rate_alice", c.background_rate_alice, where);
    read(j, "background_rate_bob", c.background_rate_bob, where);
    read(j, "coupler_efficiencies_alice", c.coupler_efficiencies_alice, where);
    read(j, "coupler_efficiencies_bob", c.coupler_efficiencies_bob, where);
    read(j, "sync_pulse_rate", c.sync_pulse_rate, where);
    read(j, "jitter_sigma", c.jitter_sigma, where);
    read(j, "window", c.window, where);
    read(j, "path_delay_alice", c.path_delay_alice, where);
    read(j, "path_delay_bob", c.path_delay_bob, where);
    read(j, "duration", c.duration, where);
    read(j, "max_events", c.max_events, where);
    read(j, "seed", c.seed, where);
    if (j.contains("visibility")) {
        const auto& v = j.at("visibility");
        reject_unknown(v, {"v_hv", "v_diag"}, "link.visibility");
        read(v, "v_hv", c.visibility.v_hv, "link.visibility");
        read(v, "v_diag", c.visibility.v_diag, "link.visibility");
    }
    if (j.contains("settings_alice")) {
        c.settings_alice = analyzer_from_json(j.at("settings_alice"), c.settings_alice, "link.settings_alice");
    }
    if (j.contains("settings_bob")) {
        c.settings_bob = analyzer_from_json(j.at("settings_bob"), c.settings_bob, "link.settings_bob");
    }
    c.validate();
    return c;
}

json to_json(const LinkConfig& c) {
    return json{{"pair_rate", c.pair_rate},
                {"arm_efficiency_alice", c.arm_efficiency_alice},
                {"arm_efficiency_bob", c.arm_efficiency_bob},
                {"background_rate_alice", c.background_rate_alice},
                {"background_rate_bob", c.background_rate_bob},
                {"coupler_efficiencies_alice", c.coupler_efficiencies_alice},
                {"coupler_efficiencies_bob", c.coupler_efficiencies_bob},
                {"sync_pulse_rate", c.sync_pulse_rate},
                {"jitter_sigma", c.jitter_sigma},
                {"window", c.window},
                {"path_delay_alice", c.path_delay_alice},
                {"path_delay_bob", c.path_delay_bob},
                {"visibility", {{"v_hv", c.visibility.v_hv}, {"v_diag", c.visibility.v_diag}}},
                {"settings_alice", analyzer_to_json(c.settings_alice)},
                {"settings_bob", analyzer_to_json(c.settings_bob)},
                {"duration", c.duration},
                {"seed", c.seed},
                {"max_events", c.max_events}};
}

json to_json(const SettingPair& s) {
    return json{{"alice_basis", s.alice_basis},
                {"bob_basis", s.bob_basis},
                {"alice_angle_deg", s.alice_angle.degrees()},
                {"bob_angle_deg", s.bob_angle.degrees()}};
}

json to_json(const CountMatrix& m) {
    return json{{"settings", to_json(m.settings)},
                {"counts", {{"pp", m.n[0][0]}, {"pm", m.n[0][1]}, {"mp", m.n[1][0]}, {"mm", m.n[1][1]}}},
                {"singles_alice", m.singles_alice},
                {"singles_bob", m.singles_bob},
                {"duration_s", m.duration}};
}

json to_json(const CorrelationEstimate& e) {
    return json{{"settings", to_json(e.settings)}, {"e", e.e_value}, {"sigma", e.sigma}, {"total", e.total}};
}

json to_json(const ChshResult& r) {
    json components = json::array();
    for (const auto& c : r.components) components.push_back(to_json(c));
    return json{{"s", r.s_value},
                {"sigma", r.sigma},
                {"significance", violation_significance(r)},
                {"components", components}};
}

json to_json(const FringeFit& f) {
    return json{{"visibility", f.visibility},
                {"visibility_sigma", f.visibility_sigma},
                {"offset", f.offset},
                {"amplitude", f.amplitude},
                {"phase_deg", f.phase_deg},
                {"n_min", f.n_min},
                {"n_max", f.n_max}};
}

json to_json(const ScanCurve& c) {
    json j{{"label", c.label}, {"bob_angle_deg", c.bob_angle_deg}, {"points", c.points.size()}};
    j["fit"] = c.fit ? to_json(*c.fit) : json(nullptr);
    j["error"] = c.error.empty() ? json(nullptr) : json(c.error);
    return j;
}

void write_curve_csv(std::ostream& out, const ScanCurve& curve) {
    out << "alice_angle_deg,counts\n";
    for (const auto& p : curve.points) {
        out << p.angle_deg << ',' << static_cast<std::uint64_t>(p.counts) << '\n';
    }
}

void write_coincidences_csv(std::ostream& out, std::span<const CoincidenceRecord> records) {
    out << "alice_index,bob_index,pulse_index,alice_detector,bob_detector,alice_offset_ns,bob_offset_ns,"
           "delta_ns\n";
    for (const auto& r : records) {
        out << r.alice_index << ',' << r.bob_index << ',' << r.alice.pulse_index << ','
            << int(r.alice.detector) << ',' << int(r.bob.detector) << ','
            << format_picoseconds_as_ns(r.alice.offset_ps) << ',' << format_picoseconds_as_ns(r.bob.offset_ps)
            << ',' << format_picoseconds_as_ns(r.delta_ps) << '\n';
    }
}

WindowConvention window_convention_from_string(const std::string& name) {
    if (name == "full_width") return WindowConvention::full_width;
    if (name == "half_width") return WindowConvention::half_width;
    throw ValidationError("window_convention must be 'full_width' or 'half_width'");
}

std::string to_string(WindowConvention convention) {
    return convention == WindowConvention::full_width ? "full_width" : "half_width";
}

}  // namespace entlink
