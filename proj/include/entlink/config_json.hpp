#pragma once

// JSON forms of configs and results shared by the CLI and the python module.

#include <ostream>
#include <span>

#include <json.hpp>

#include "entlink/bell.hpp"
#include "entlink/coincidence.hpp"
#include "entlink/link_sim.hpp"

namespace entlink {

/// Reads a link block on top of `defaults`. Unknown keys are rejected.
LinkConfig link_config_from_json(const nlohmann::json& j, const LinkConfig& defaults = {});
nlohmann::json to_json(const LinkConfig& config);

nlohmann::json to_json(const SettingPair& settings);
nlohmann::json to_json(const CountMatrix& matrix);
nlohmann::json to_json(const CorrelationEstimate& estimate);
nlohmann::json to_json(const ChshResult& result);
nlohmann::json to_json(const FringeFit& fit);
nlohmann::json to_json(const ScanCurve& curve);

/// `alice_angle_deg,counts` rows.
void write_curve_csv(std::ostream& out, const ScanCurve& curve);

/// One row per record: both clicks plus the offset difference in ns.
void write_coincidences_csv(std::ostream& out, std::span<const CoincidenceRecord> records);

WindowConvention window_convention_from_string(const std::string& name);
std::string to_string(WindowConvention convention);

}  // namespace entlink
