#include "entlink/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "entlink/config_json.hpp"
#include "entlink/errors.hpp"
#include "entlink/event_io.hpp"
#include "entlink/random.hpp"

namespace entlink {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

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
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ValidationError(std::string("bad value for '") + key + "' in " + where);
    }
}

Experiment experiment_from_string(const std::string& s) {
    if (s == "bell_test") return Experiment::bell_test;
    if (s == "visibility_scan") return Experiment::visibility_scan;
    if (s == "qkd_session") return Experiment::qkd_session;
    throw ValidationError("experiment must be bell_test, visibility_scan or qkd_session");
}

qkd::Placement placement_from_string(const std::string& s) {
    if (s == "lockstep") return qkd::Placement::lockstep;
    if (s == "threads") return qkd::Placement::threads;
    if (s == "processes") return qkd::Placement::processes;
    throw ValidationError("placement must be lockstep, threads or processes");
}

std::vector<double> default_sweep() {
    std::vector<double> a;
    for (int k = 0; k < 16; ++k) a.push_back(11.25 * k);
    return a;
}

std::string dump_line(const json& j) { return j.dump(2) + "\n"; }

class ReportWriter {
public:
    explicit ReportWriter(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(dir_ / name, std::ios::binary);
        if (!out) {
            throw std::runtime_error("cannot write " + (dir_ / name).string());
        }
        out << content;
        if (!out) {
            throw std::runtime_error("failed writing " + (dir_ / name).string());
        }
        hashes_[name] = fnv1a_hex(content);
    }

    void manifest(const Scenario& s) {
        json files = json::object();
        for (const auto& [name, hash] : hashes_) files[name] = hash;
        // The output location is not part of the experiment.
        json config = s.document;
        config.erase("report_dir");
        const json m{{"name", s.name},
                     {"experiment", to_string(s.experiment)},
                     {"seed", s.seed},
                     {"version", ENTLINK_VERSION},
                     {"config_hash", fnv1a_hex(config.dump())},
                     {"config", config},
                     {"files", files}};
        write("manifest.json", dump_line(m));
    }

    [[nodiscard]] std::vector<std::string> names() const {
        std::vector<std::string> n;
        for (const auto& [name, hash] : hashes_) n.push_back(name);
        return n;
    }
    [[nodiscard]] const fs::path& dir() const { return dir_; }

private:
    fs::path dir_;
    std::map<std::string, std::string> hashes_;
};

std::string correlations_csv_header() {
    return "run,alice_angle_deg,bob_angle_deg,n_pp,n_pm,n_mp,n_mm,e,sigma\n";
}

void append_correlation_rows(std::ostringstream& csv, int run, const ChshResult& chsh,
                             const std::array<CountMatrix, 4>* matrices) {
    for (int k = 0; k < 4; ++k) {
        const auto& c = chsh.components[k];
        csv << run << ',' << c.settings.alice_angle.degrees() << ',' << c.settings.bob_angle.degrees() << ',';
        if (matrices) {
            const auto& n = (*matrices)[k].n;
            csv << n[0][0] << ',' << n[0][1] << ',' << n[1][0] << ',' << n[1][1];
        } else {
            csv << ",,,";
        }
        char buf[64];
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f\n", c.e_value, c.sigma);
        csv << buf;
    }
}

RunSummary run_bell(const Scenario& s) {
    ReportWriter w(s.report_dir);
    json report{{"name", s.name}, {"source", s.bell.source}};
    std::ostringstream csv;
    csv << correlations_csv_header();
    RunSummary summary;

    if (s.bell.source == "published_table1" || s.bell.source == "table1_counts") {
        ChshResult chsh;
        if (s.bell.source == "published_table1") {
            chsh = compute_chsh(published_table1());
            append_correlation_rows(csv, 0, chsh, nullptr);
        } else {
            const auto matrices = counts_for_estimates(published_table1());
            std::array<CorrelationEstimate, 4> est;
            for (int k = 0; k < 4; ++k) est[k] = estimate_correlation(matrices[k]);
            chsh = compute_chsh(est);
            append_correlation_rows(csv, 0, chsh, &matrices);
            json m = json::array();
            for (const auto& x : matrices) m.push_back(to_json(x));
            report["matrices"] = m;
        }
        report.update(to_json(chsh));
        report["runs"] = 1;
    } else {
        const std::uint64_t link_seed = derive_seed(s.seed, "link");
        BellTestOptions opts;
        opts.convention = s.convention;
        opts.normalize = s.bell.normalize;
        json runs = json::array();
        double sum_s = 0.0;
        double sum_sq = 0.0;
        double sum_sigma = 0.0;
        json first;
        for (int r = 0; r < s.bell.runs; ++r) {
            LinkConfig link = s.link;
            link.seed = derive_seed(link_seed, static_cast<std::uint64_t>(r));
            const BellTestResult res = run_bell_test(link, opts);
            sum_s += res.chsh.s_value;
            sum_sq += res.chsh.s_value * res.chsh.s_value;
            sum_sigma += res.chsh.sigma;
            append_correlation_rows(csv, r, res.chsh, &res.matrices);
            json run = to_json(res.chsh);
            run["run"] = r;
            run["coincidence_rate"] = res.coincidence_rate();
            run["singles_rate_alice"] = res.singles_rate_alice();
            run["singles_rate_bob"] = res.singles_rate_bob();
            json m = json::array();
            for (const auto& x : res.matrices) m.push_back(to_json(x));
            run["matrices"] = m;
            runs.push_back(run);
            if (r == 0) {
                first = to_json(res.chsh);
                report["predicted_s"] = res.predicted_s;
            }
        }
        const double n = s.bell.runs;
        const double mean = sum_s / n;
        report["runs"] = s.bell.runs;
        report["s"] = mean;
        report["sigma"] = sum_sigma / n;
        report["significance"] = (mean - 2.0) / (sum_sigma / n);
        report["s_spread"] = n > 1 ? std::sqrt(std::max(0.0, (sum_sq - n * mean * mean) / (n - 1))) : 0.0;
        report["components"] = first["components"];
        report["per_run"] = runs;
        report["duration_s"] = s.link.duration;
        report["window_convention"] = to_string(s.convention);
    }
    w.write("chsh.json", dump_line(report));
    w.write("correlations.csv", csv.str());
    w.manifest(s);
    summary.report_dir = s.report_dir;
    summary.files = w.names();
    summary.headline = {{"s", report["s"]}, {"sigma", report["sigma"]}, {"significance", report["significance"]}};
    return summary;
}

RunSummary run_scan(const Scenario& s) {
    ReportWriter w(s.report_dir);
    ScanOptions opts;
    opts.convention = s.convention;
    opts.weighted = s.scan.weighted;
    LinkConfig link = s.link;
    link.seed = derive_seed(s.seed, "link");
    json report{{"name", s.name},
                {"visibility_model", {{"v_hv", link.visibility.v_hv}, {"v_diag", link.visibility.v_diag}}},
                {"alice_angles_deg", s.scan.alice_angles_deg},
                {"seconds_per_point", link.duration},
                {"weighted", s.scan.weighted}};
    auto emit = [&](const std::vector<ScanCurve>& curves, const std::string& suffix) {
        json arr = json::array();
        for (const auto& c : curves) {
            std::ostringstream csv;
            write_curve_csv(csv, c);
            w.write("curve_" + c.label + suffix + ".csv", csv.str());
            arr.push_back(to_json(c));
        }
        return arr;
    };
    const auto curves = visibility_scan(link, s.scan.bob_angles_deg, s.scan.alice_angles_deg, opts);
    report["curves"] = emit(curves, "");
    report["background_rates"] = {link.background_rate_alice, link.background_rate_bob};
    if (s.scan.background) {
        LinkConfig noisy = link;
        noisy.background_rate_alice = s.scan.background->first;
        noisy.background_rate_bob = s.scan.background->second;
        const auto noisy_curves = visibility_scan(noisy, s.scan.bob_angles_deg, s.scan.alice_angles_deg, opts);
        report["background_curves"] = emit(noisy_curves, "_background");
        report["background_condition_rates"] = {noisy.background_rate_alice, noisy.background_rate_bob};
    }
    w.write("scan.json", dump_line(report));
    w.manifest(s);
    RunSummary summary;
    summary.report_dir = s.report_dir;
    summary.files = w.names();
    json vis = json::object();
    for (const auto& c : curves) vis[c.label] = c.fit ? json(c.fit->visibility) : json(nullptr);
    summary.headline = {{"visibility", vis}};
    return summary;
}

std::vector<CoincidenceRecord> simulate_coincidences(const LinkConfig& link, WindowConvention convention) {
    LinkSimulator sim(link);
    StreamingMatcher matcher(link.window, convention);
    SimulatedRun chunk;
    std::vector<CoincidenceRecord> records;
    auto take = [&] {
        auto r = matcher.take();
        records.insert(records.end(), r.begin(), r.end());
    };
    while (sim.next(chunk)) {
        matcher.push(chunk.alice, chunk.bob);
        take();
    }
    matcher.finish();
    take();
    return records;
}

RunSummary run_qkd(const Scenario& s) {
    ReportWriter w(s.report_dir);
    LinkConfig link = s.link;
    link.seed = derive_seed(s.seed, "link");
    const auto records = simulate_coincidences(link, s.convention);

    qkd::SessionConfig cfg;
    cfg.protocol = s.qkd.protocol;
    cfg.placement = s.qkd.placement;
    cfg.seed = derive_seed(s.seed, "protocol");
    const auto result = qkd::run_session(records, link.duration, cfg);

    json ledger = qkd::to_json(result.ledger);
    ledger["name"] = s.name;
    ledger["coincidence_rate"] = static_cast<double>(records.size()) / link.duration;
    ledger["audited_leakage"] = result.audited_leakage;
    ledger["leaked_bits_alice"] = result.run.alice.key.leaked_bits;
    ledger["leaked_bits_bob"] = result.run.bob.key.leaked_bits;
    ledger["margin"] = s.qkd.protocol.margin == qkd::MarginMode::half ? "half" : "security_bound";
    ledger["epsilon"] = s.qkd.protocol.epsilon;
    w.write("ledger.json", dump_line(ledger));

    std::string transcript;
    for (const auto& line : result.run.transcript) transcript += line.dump() + "\n";
    w.write("transcript.jsonl", transcript);
    w.write("alice.key", qkd::to_hex(result.run.alice.key.bits) + "\n");
    w.write("bob.key", qkd::to_hex(result.run.bob.key.bits) + "\n");
    w.manifest(s);

    RunSummary summary;
    summary.report_dir = s.report_dir;
    summary.files = w.names();
    summary.aborted = result.ledger.abort.has_value();
    summary.headline = {{"qber", result.ledger.qber},
                        {"final_bits", result.ledger.final_bits},
                        {"key_rate_bps", result.ledger.key_rate()},
                        {"keys_match", result.ledger.keys_match}};
    if (result.ledger.abort) {
        summary.headline["abort"] = {{"stage", result.ledger.abort->stage}, {"reason", result.ledger.abort->reason}};
    }
    return summary;
}

}  // namespace

std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::bell_test: return "bell_test";
        case Experiment::visibility_scan: return "visibility_scan";
        case Experiment::qkd_session: return "qkd_session";
    }
    return "unknown";
}

std::string fnv1a_hex(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Scenario parse_scenario(const json& doc) {
    reject_unknown(doc, {"name", "experiment", "seed", "report_dir", "window_convention", "link", "bell", "scan", "qkd"},
                   "scenario");
    Scenario s;
    s.document = doc;
    if (!doc.contains("name") || !doc["name"].is_string() || doc["name"].get<std::string>().empty()) {
        throw ValidationError("scenario needs a non-empty name");
    }
    s.name = doc["name"].get<std::string>();
    if (!doc.contains("experiment")) {
        throw ValidationError("scenario needs an experiment");
    }
    s.experiment = experiment_from_string(get_or<std::string>(doc, "experiment", "", "scenario"));
    s.seed = get_or<std::uint64_t>(doc, "seed", 0, "scenario");
    s.report_dir = get_or<std::string>(doc, "report_dir", "reports/" + s.name, "scenario");
    s.convention = window_convention_from_string(
        get_or<std::string>(doc, "window_convention", "full_width", "scenario"));

    const bool needs_link = !(s.experiment == Experiment::bell_test && doc.contains("bell") &&
                              doc["bell"].is_object() &&
                              get_or<std::string>(doc["bell"], "source", "simulate", "bell") != "simulate");
    if (doc.contains("link")) {
        s.link = link_config_from_json(doc["link"]);
    } else if (needs_link) {
        throw ValidationError("scenario needs a link block");
    }

    if (doc.contains("bell")) {
        const auto& b = doc["bell"];
        reject_unknown(b, {"source", "runs", "normalize"}, "bell");
        s.bell.source = get_or<std::string>(b, "source", "simulate", "bell");
        s.bell.runs = get_or<int>(b, "runs", 1, "bell");
        s.bell.normalize = get_or<bool>(b, "normalize", true, "bell");
        if (s.bell.source != "simulate" && s.bell.source != "published_table1" && s.bell.source != "table1_counts") {
            throw ValidationError("bell.source must be simulate, published_table1 or table1_counts");
        }
        if (s.bell.runs < 1) {
            throw ValidationError("bell.runs must be >= 1");
        }
    }
    if (doc.contains("scan")) {
        const auto& sc = doc["scan"];
        reject_unknown(sc, {"bob_angles_deg", "alice_angles_deg", "weighted", "background"}, "scan");
        s.scan.bob_angles_deg = get_or<std::vector<double>>(sc, "bob_angles_deg", s.scan.bob_angles_deg, "scan");
        s.scan.alice_angles_deg = get_or<std::vector<double>>(sc, "alice_angles_deg", {}, "scan");
        s.scan.weighted = get_or<bool>(sc, "weighted", false, "scan");
        if (sc.contains("background")) {
            const auto& bg = sc["background"];
            reject_unknown(bg, {"background_rate_alice", "background_rate_bob"}, "scan.background");
            const double a = get_or<double>(bg, "background_rate_alice", 0.0, "scan.background");
            const double b = get_or<double>(bg, "background_rate_bob", 0.0, "scan.background");
            if (!(a >= 0.0 && b >= 0.0)) throw ValidationError("scan.background rates must be >= 0");
            s.scan.background = std::make_pair(a, b);
        }
    }
    if (s.scan.alice_angles_deg.empty()) s.scan.alice_angles_deg = default_sweep();
    if (s.experiment == Experiment::visibility_scan && s.scan.alice_angles_deg.size() < 8) {
        throw ValidationError("scan.alice_angles_deg needs at least 8 points");
    }
    if (doc.contains("qkd")) {
        const auto& q = doc["qkd"];
        reject_unknown(q, {"session", "sample_fraction", "epsilon", "abort_qber", "passes", "first_block", "margin",
                           "placement"},
                       "qkd");
        auto& p = s.qkd.protocol;
        p.session = get_or<std::string>(q, "session", s.name, "qkd");
        p.sample_fraction = get_or<double>(q, "sample_fraction", p.sample_fraction, "qkd");
        p.epsilon = get_or<double>(q, "epsilon", p.epsilon, "qkd");
        p.abort_qber = get_or<double>(q, "abort_qber", p.abort_qber, "qkd");
        p.cascade.passes = get_or<int>(q, "passes", p.cascade.passes, "qkd");
        p.cascade.first_block = get_or<std::size_t>(q, "first_block", 0, "qkd");
        const auto margin = get_or<std::string>(q, "margin", "security_bound", "qkd");
        if (margin == "half") p.margin = qkd::MarginMode::half;
        else if (margin != "security_bound") throw ValidationError("qkd.margin must be security_bound or half");
        s.qkd.placement = placement_from_string(get_or<std::string>(q, "placement", "lockstep", "qkd"));
        if (!(p.sample_fraction > 0.0 && p.sample_fraction < 1.0)) throw ValidationError("qkd.sample_fraction must lie in (0, 1)");
        if (!(p.epsilon > 0.0 && p.epsilon <= 1.0)) throw ValidationError("qkd.epsilon must lie in (0, 1]");
        if (!(p.abort_qber > 0.0 && p.abort_qber <= 0.5)) throw ValidationError("qkd.abort_qber must lie in (0, 0.5]");
        if (p.cascade.passes < 1) throw ValidationError("qkd.passes must be >= 1");
    } else {
        s.qkd.protocol.session = s.name;
    }
    return s;
}

Scenario load_scenario(const fs::path& path) { return load_scenario(path, {}); }

Scenario load_scenario(const fs::path& path, const ScenarioOverrides& overrides) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError("cannot open scenario " + path.string());
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("scenario " + path.string() + " is not valid JSON: " + e.what());
    }
    if (!doc.is_object()) {
        throw ValidationError("scenario must be a JSON object");
    }
    if (overrides.seed) doc["seed"] = *overrides.seed;
    if (overrides.duration) doc["link"]["duration"] = *overrides.duration;
    if (overrides.report_dir) doc["report_dir"] = overrides.report_dir->string();
    return parse_scenario(doc);
}

RunSummary run_scenario(const Scenario& scenario) {
    switch (scenario.experiment) {
        case Experiment::bell_test: return run_bell(scenario);
        case Experiment::visibility_scan: return run_scan(scenario);
        case Experiment::qkd_session: return run_qkd(scenario);
    }
    throw ValidationError("unknown experiment");
}

std::uint64_t export_events(const Scenario& scenario, const fs::path& out, const std::string& format) {
    if (format != "csv" && format != "json" && format != "bin") {
        throw ValidationError("format must be csv, json or bin");
    }
    LinkConfig link = scenario.link;
    link.seed = derive_seed(scenario.seed, "link");
    const SimulatedRun run = simulate_run(link);
    std::vector<TimeTaggedEvent> events;
    events.reserve(run.alice.size() + run.bob.size());
    events.insert(events.end(), run.alice.begin(), run.alice.end());
    events.insert(events.end(), run.bob.begin(), run.bob.end());

    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream file(out, std::ios::binary);
    if (!file) {
        throw std::runtime_error("cannot write " + out.string());
    }
    if (format == "csv") {
        write_events_csv_header(file);
        write_events_csv(file, events);
    } else if (format == "json") {
        write_events_json(file, events);
    } else {
        write_events_binary_header(file, events.size());
        write_events_binary_records(file, events);
    }
    if (!file) {
        throw std::runtime_error("failed writing " + out.string());
    }
    return events.size();
}

}  // namespace entlink
