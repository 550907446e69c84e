#pragma once

// SVG rendering of evaluation reports: a row-normalised confusion heatmap for
// single-model and LOSO reports, accuracy-vs-window curves for window studies.

#include <string>

#include <json.hpp>

namespace wip::cli {

// Throws std::invalid_argument when the report has neither a well-formed
// "confusion" block nor window-study rows.
std::string render_report_svg(const nlohmann::json& report);

}  // namespace wip::cli
