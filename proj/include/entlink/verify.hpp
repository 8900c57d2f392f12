#pragma once

// Re-checks a report directory against the acceptance tolerances of its
// experiment.

#include <filesystem>
#include <string>
#include <vector>

namespace entlink {

struct CheckResult {
    std::string criterion;
    bool passed = false;
    std::string detail;
};

struct VerifyReport {
    std::string experiment;
    std::vector<CheckResult> checks;

    [[nodiscard]] bool passed() const;
};

/// Never throws for bad or missing reports; those become failed checks.
VerifyReport verify_reports(const std::filesystem::path& report_dir);

/// Fixed-width summary table, one line per check.
std::string format_verify_table(const VerifyReport& report);

}  // namespace entlink
