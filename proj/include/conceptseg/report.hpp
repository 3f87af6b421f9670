#ifndef CONCEPTSEG_REPORT_HPP
#define CONCEPTSEG_REPORT_HPP

#include <map>
#include <string>

#include <json.hpp>

#include "conceptseg/config.hpp"
#include "conceptseg/eval.hpp"

namespace conceptseg {

// Values in percent with two decimals; the convention header records the
// foreground-only per-sample IoU averaging.
nlohmann::ordered_json report_to_json(const RunConfig& cfg,
                                      const std::map<RouterMode, EvalReport>& modes);

// Plot-ready CSV: one row per (mode, family) plus overall rows.
std::string report_to_csv(const std::map<RouterMode, EvalReport>& modes);

// Structural schema check (required keys + types, recursively). Throws
// IoError on violation.
void check_report_schema(const nlohmann::json& report, const nlohmann::json& schema);

nlohmann::json load_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace conceptseg

#endif
