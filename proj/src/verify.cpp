#include "entlink/verify.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "entlink/scenario.hpp"

namespace entlink {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) {
        throw std::runtime_error("missing report " + p.filename().string());
    }
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

json load(const fs::path& p) {
    try {
        return json::parse(slurp(p));
    } catch (const json::exception& e) {
        throw std::runtime_error(p.filename().string() + " is not valid JSON");
    }
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, pattern, a, b, c);
    return buf;
}

class Checks {
public:
    explicit Checks(VerifyReport& r) : r_(r) {}
    void add(std::string name, bool ok, std::string detail) {
        r_.checks.push_back({std::move(name), ok, std::move(detail)});
    }
    // Runs a check body; any exception becomes a failure with its message.
    template <class F>
    void guard(const std::string& name, F&& body) {
        try {
            body();
        } catch (const std::exception& e) {
            add(name, false, e.what());
        }
    }

private:
    VerifyReport& r_;
};

double round_to(double x, int digits) {
    const double scale = std::pow(10.0, digits);
    return std::round(x * scale) / scale;
}

void verify_bell(const fs::path& dir, Checks& c) {
    c.guard("bell.report", [&] {
        const json r = load(dir / "chsh.json");
        const double s = r.at("s").get<double>();
        const double sigma = r.at("sigma").get<double>();
        const std::string source = r.at("source").get<std::string>();
        if (source == "simulate") {
            const int runs = r.at("runs").get<int>();
            c.add("bell.S_range", s >= 2.30 && s <= 2.60, fmt("mean S = %.4f, want [2.30, 2.60]", s));
            c.add("bell.sigma_range", sigma >= 0.05 && sigma <= 0.15,
                  fmt("mean sigma_S = %.4f, want [0.05, 0.15]", sigma));
            const double predicted = r.at("predicted_s").get<double>();
            const double tol = 4.0 * sigma / std::sqrt(static_cast<double>(runs));
            c.add("bell.prediction", std::abs(s - predicted) <= tol,
                  fmt("|%.4f - %.4f| vs 4 standard errors = %.4f", s, predicted, tol));
        } else {
            const double significance = r.at("significance").get<double>();
            c.add("table1.S", round_to(s, 2) == 2.45, fmt("S = %.4f, published 2.45", s));
            c.add("table1.sigma", round_to(sigma, 2) == 0.09, fmt("sigma_S = %.4f, published 0.09", sigma));
            c.add("table1.significance", std::abs(significance - 5.0) <= 0.1,
                  fmt("(S - 2) / sigma = %.3f, want 5.0 +- 0.1", significance));
        }
    });
}

void verify_scan(const fs::path& dir, Checks& c) {
    c.guard("fig3.report", [&] {
        const json r = load(dir / "scan.json");
        const double v_hv = r.at("visibility_model").at("v_hv").get<double>();
        const double v_diag = r.at("visibility_model").at("v_diag").get<double>();
        std::map<std::string, double> base;
        for (const auto& curve : r.at("curves")) {
            const auto label = curve.at("label").get<std::string>();
            if (curve.at("fit").is_null()) {
                c.add("fig3.fit_" + label, false, "fit failed: " + curve.value("error", std::string("?")));
                continue;
            }
            const double v = curve.at("fit").at("visibility").get<double>();
            base[label] = v;
            if (label == "H" || label == "V") {
                c.add("fig3.hv_visibility_" + label, std::abs(v - v_hv) <= 0.03,
                      fmt("V = %.4f, want %.2f +- 0.03", v, v_hv));
            } else if (label == "D" || label == "A") {
                c.add("fig3.diag_visibility_" + label, std::abs(v - v_diag) <= 0.03,
                      fmt("V = %.4f, want %.2f +- 0.03", v, v_diag));
            }
        }
        if (r.contains("background_curves")) {
            for (const auto& curve : r.at("background_curves")) {
                const auto label = curve.at("label").get<std::string>();
                const bool have = !curve.at("fit").is_null() && base.contains(label);
                const double v = have ? curve.at("fit").at("visibility").get<double>() : 0.0;
                c.add("fig3.background_lowers_" + label, have && v < base[label],
                      have ? fmt("V with background %.4f vs %.4f without", v, base[label]) : "fit missing");
            }
        }
    });
}

void verify_qkd(const fs::path& dir, Checks& c) {
    c.guard("qkd.report", [&] {
        const json l = load(dir / "ledger.json");
        if (!l.at("abort").is_null()) {
            c.add("qkd.completed", false, "session aborted at " + l["abort"].at("stage").get<std::string>());
        }
        const double f = l.at("sift_fraction").get<double>();
        c.add("qkd.sift_fraction", std::abs(f - 0.5) <= 0.03, fmt("sifted / balanced = %.4f, want 0.50 +- 0.03", f));
        const double q = l.at("qber").get<double>();
        c.add("qkd.qber", q >= 0.043 && q <= 0.073, fmt("QBER = %.4f, want [0.043, 0.073]", q));
        const std::string ka = slurp(dir / "alice.key");
        const std::string kb = slurp(dir / "bob.key");
        const bool match = l.at("confirmed").get<bool>() && l.at("keys_match").get<bool>() && ka == kb &&
                           ka.size() > 1;
        c.add("qkd.keys_match", match, match ? "alice.key == bob.key, confirmation hash matched" : "final keys differ or empty");
        const double rate = l.at("key_rate_bps").get<double>();
        c.add("qkd.key_rate", rate >= 5.0 && rate <= 20.0, fmt("%.3f bit/s, want [5, 20]", rate));
        const auto audited = l.at("audited_leakage").get<std::uint64_t>();
        const auto leaked = l.at("leaked_bits_bob").get<std::uint64_t>();
        c.add("qkd.leakage_audit", audited == leaked,
              fmt("transcript %.0f bits vs ledger %.0f", static_cast<double>(audited), static_cast<double>(leaked)));
        const std::uint64_t chain[] = {l.at("coincidences").get<std::uint64_t>(), l.at("balanced").get<std::uint64_t>(),
                                       l.at("sifted").get<std::uint64_t>(), l.at("reconciled").get<std::uint64_t>(),
                                       l.at("after_leakage").get<std::uint64_t>(), l.at("final").get<std::uint64_t>()};
        bool monotone = true;
        for (int i = 1; i < 6; ++i) monotone = monotone && chain[i] <= chain[i - 1];
        c.add("qkd.ledger_shape", monotone, "coincidences >= balanced >= sifted >= reconciled >= after leakage >= final");
    });
}

}  // namespace

bool VerifyReport::passed() const {
    if (checks.empty()) return false;
    for (const auto& c : checks) {
        if (!c.passed) return false;
    }
    return true;
}

VerifyReport verify_reports(const fs::path& dir) {
    VerifyReport report;
    Checks c(report);
    json manifest;
    try {
        manifest = load(dir / "manifest.json");
        report.experiment = manifest.at("experiment").get<std::string>();
    } catch (const std::exception& e) {
        c.add("manifest", false, e.what());
        return report;
    }
    c.guard("manifest", [&] {
        std::string bad;
        for (const auto& [name, hash] : manifest.at("files").items()) {
            std::string actual;
            try {
                actual = fnv1a_hex(slurp(dir / name));
            } catch (const std::exception&) {
                actual = "missing";
            }
            if (actual != hash.get<std::string>()) bad += (bad.empty() ? "" : ", ") + name;
        }
        c.add("manifest", bad.empty(), bad.empty() ? "all report hashes match" : "changed or missing: " + bad);
    });
    if (report.experiment == "bell_test") verify_bell(dir, c);
    else if (report.experiment == "visibility_scan") verify_scan(dir, c);
    else if (report.experiment == "qkd_session") verify_qkd(dir, c);
    else c.add("experiment", false, "unknown experiment " + report.experiment);
    return report;
}

std::string format_verify_table(const VerifyReport& report) {
    std::ostringstream out;
    for (const auto& c : report.checks) {
        char line[96];
        std::snprintf(line, sizeof line, "%-4s  %-28s  ", c.passed ? "PASS" : "FAIL", c.criterion.c_str());
        out << line << c.detail << '\n';
    }
    out << (report.passed() ? "verify: all checks passed" : "verify: FAILED") << '\n';
    return out.str();
}

}  // namespace entlink
