// entlink command-line tool: run scenarios, verify reports, export events.

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "entlink/errors.hpp"
#include "entlink/scenario.hpp"
#include "entlink/verify.hpp"

namespace {

enum ExitCode { kOk = 0, kRuntime = 1, kValidation = 2, kVerifyFailed = 3 };

int fail(int code, const std::string& kind, const std::string& message) {
    const nlohmann::json err{{"error", kind}, {"message", message}, {"exit_code", code}};
    std::cerr << err.dump() << '\n';
    return code;
}

entlink::ScenarioOverrides overrides(const std::optional<std::uint64_t>& seed,
                                     const std::optional<double>& duration,
                                     const std::optional<std::string>& report_dir) {
    entlink::ScenarioOverrides o;
    o.seed = seed;
    o.duration = duration;
    if (report_dir) o.report_dir = *report_dir;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Entangled-photon link simulator, Bell statistics and key distillation"};
    app.set_version_flag("--version", std::string(ENTLINK_VERSION));
    app.require_subcommand(1);

    std::string scenario_path;
    std::optional<std::uint64_t> seed;
    std::optional<double> duration;
    std::optional<std::string> report_dir;

    auto* run = app.add_subcommand("run", "Run a scenario and write its reports");
    run->add_option("scenario", scenario_path, "Scenario JSON file")->required();
    run->add_option("--seed", seed, "Override the scenario seed");
    run->add_option("--duration", duration, "Override link.duration (seconds)");
    run->add_option("--report-dir", report_dir, "Override the report directory");

    std::string verify_dir;
    auto* verify = app.add_subcommand("verify", "Check reports against acceptance tolerances");
    verify->add_option("report_dir", verify_dir, "Directory written by run")->required();

    std::string out_path;
    std::string format = "csv";
    auto* exporter = app.add_subcommand("export-events", "Simulate a scenario's link and write raw events");
    exporter->add_option("scenario", scenario_path, "Scenario JSON file")->required();
    exporter->add_option("out", out_path, "Output file")->required();
    exporter->add_option("--format", format, "csv, json or bin")->check(CLI::IsMember({"csv", "json", "bin"}));
    exporter->add_option("--seed", seed, "Override the scenario seed");
    exporter->add_option("--duration", duration, "Override link.duration (seconds)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            return app.exit(e);
        }
        return fail(kValidation, "usage", e.what());
    }

    try {
        if (*run) {
            const auto scenario = entlink::load_scenario(scenario_path, overrides(seed, duration, report_dir));
            const auto summary = entlink::run_scenario(scenario);
            nlohmann::json out{{"scenario", scenario.name},
                               {"report_dir", summary.report_dir.string()},
                               {"files", summary.files},
                               {"result", summary.headline}};
            std::cout << out.dump(2) << '\n';
            if (summary.aborted) {
                return fail(kRuntime, "protocol_abort", summary.headline["abort"].dump());
            }
            return kOk;
        }
        if (*verify) {
            const auto report = entlink::verify_reports(verify_dir);
            std::cout << entlink::format_verify_table(report);
            return report.passed() ? kOk : kVerifyFailed;
        }
        if (*exporter) {
            const auto scenario = entlink::load_scenario(scenario_path, overrides(seed, duration, std::nullopt));
            const auto n = entlink::export_events(scenario, out_path, format);
            std::cout << nlohmann::json{{"events", n}, {"out", out_path}, {"format", format}}.dump() << '\n';
            return kOk;
        }
    } catch (const entlink::ValidationError& e) {
        return fail(kValidation, "validation", e.what());
    } catch (const std::exception& e) {
        return fail(kRuntime, "runtime", e.what());
    }
    return kOk;
}
