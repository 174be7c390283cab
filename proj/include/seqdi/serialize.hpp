#pragma once

#include <string>

#include <json.hpp>

#include "seqdi/estimators.hpp"
#include "seqdi/homogeneity.hpp"
#include "seqdi/pilot.hpp"

namespace seqdi {

nlohmann::json to_json(const PilotVarianceModel& model);
PilotVarianceModel pilot_from_json(const nlohmann::json& j);

nlohmann::json to_json(const Estimate& e);
nlohmann::json to_json(const HomogeneityResult& r);

// tag,point,variance,ci_low,ci_high with empty fields for missing values.
std::string estimate_csv_header();
std::string estimate_csv_row(const Estimate& e);

}  // namespace seqdi
