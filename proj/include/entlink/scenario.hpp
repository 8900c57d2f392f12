#pragma once

// Declarative scenarios: one JSON document names an experiment, its link
// configuration and a seed; running it writes reports plus a manifest.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "entlink/bell.hpp"
#include "entlink/link_sim.hpp"
#include "entlink/qkd/session.hpp"

namespace entlink {

enum class Experiment { bell_test, visibility_scan, qkd_session };

std::string to_string(Experiment experiment);

struct BellScenario {
    /// simulate: run the link; published_table1: the published E and sigma;
    /// table1_counts: integer count matrices reproducing them.
    std::string source = "simulate";
    int runs = 1;
    bool normalize = true;
};

struct ScanScenario {
    std::vector<double> bob_angles_deg{0.0, 45.0, 90.0, 135.0};
    std::vector<double> alice_angles_deg;  // default: 16 steps of 11.25 degrees
    bool weighted = false;
    /// Optional second condition with background switched on.
    std::optional<std::pair<double, double>> background;
};

struct QkdScenario {
    qkd::ProtocolParams protocol{};
    qkd::Placement placement = qkd::Placement::lockstep;
};

struct Scenario {
    std::string name;
    Experiment experiment = Experiment::bell_test;
    std::uint64_t seed = 0;
    std::filesystem::path report_dir;
    LinkConfig link;  // link.seed is derived from `seed`
    WindowConvention convention = WindowConvention::full_width;
    BellScenario bell;
    ScanScenario scan;
    QkdScenario qkd;
    nlohmann::json document;  // as parsed, after overrides
};

/// Validates and applies defaults. Unknown keys are rejected.
Scenario parse_scenario(const nlohmann::json& document);
Scenario load_scenario(const std::filesystem::path& path);

/// Command-line overrides applied before validation.
struct ScenarioOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<double> duration;
    std::optional<std::filesystem::path> report_dir;
};
Scenario load_scenario(const std::filesystem::path& path, const ScenarioOverrides& overrides);

struct RunSummary {
    std::filesystem::path report_dir;
    std::vector<std::string> files;  // written, relative to report_dir
    nlohmann::json headline;         // key numbers for the console
    bool aborted = false;            // qkd session stopped by a party
};

/// Runs the experiment and writes reports and manifest.json. Identical
/// scenarios produce byte-identical files.
RunSummary run_scenario(const Scenario& scenario);

/// FNV-1a 64-bit, hex encoded.
std::string fnv1a_hex(std::string_view data);

/// Simulates the scenario's link and writes both streams (Alice first).
/// format: csv | json | bin. Returns the number of events written.
std::uint64_t export_events(const Scenario& scenario, const std::filesystem::path& out,
                            const std::string& format);

}  // namespace entlink
