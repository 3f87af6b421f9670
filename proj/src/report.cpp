#include "conceptseg/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace conceptseg {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

double pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
  return std::strtod(buf, nullptr);
}

ordered_json metrics_json(const DatasetMetrics& m) {
  ordered_json j;
  j["MAE"] = pct(m.mae);
  j["BER"] = pct(m.ber);
  j["Fbw"] = pct(m.wfm);
  j["Sm"] = pct(m.sm);
  j["mIoU"] = pct(m.miou);
  j["mDice"] = pct(m.mdice);
  j["gIoU"] = pct(m.giou);
  j["cIoU"] = pct(m.ciou);
  return j;
}

ordered_json family_json(const FamilyReport& f) {
  ordered_json j;
  j["family"] = family_name(f.family);
  j["n"] = f.n;
  j["routing_rate"] = pct(f.routing_rate);
  j["target_accuracy"] = pct(f.target_accuracy);
  j["check_accuracy"] = pct(f.check_accuracy);
  j["metrics"] = metrics_json(f.metrics);
  return j;
}

}  // namespace

ordered_json report_to_json(const RunConfig& cfg,
                            const std::map<RouterMode, EvalReport>& modes) {
  ordered_json j;
  j["version"] = 1;
  j["convention"] =
      "mIoU is the foreground-only per-sample IoU averaged over samples; values in percent";
  ordered_json cj;
  cj["seed"] = cfg.seed;
  cj["k"] = cfg.k;
  cj["l2"] = cfg.l2;
  cj["channels"] = cfg.channels;
  cj["group_size"] = cfg.group_size;
  cj["beta"] = cfg.beta;
  cj["theta"] = cfg.theta;
  cj["objects_per_scene"] = cfg.objects_per_scene;
  cj["router_mode"] = cfg.router_mode;
  cj["families"] = cfg.families.empty() ? "all" : cfg.families;
  j["config"] = std::move(cj);

  ordered_json mj;
  for (const auto& [mode, report] : modes) {
    ordered_json rj;
    rj["n"] = report.n;
    rj["routing_rate"] = pct(report.routing_rate);
    rj["target_accuracy"] = pct(report.target_accuracy);
    rj["overall"] = metrics_json(report.overall);
    ordered_json fams = ordered_json::array();
    for (const FamilyReport& f : report.families) fams.push_back(family_json(f));
    rj["families"] = std::move(fams);
    mj[router_mode_name(mode)] = std::move(rj);
  }
  j["modes"] = std::move(mj);
  return j;
}

std::string report_to_csv(const std::map<RouterMode, EvalReport>& modes) {
  std::ostringstream out;
  out << "mode,family,n,routing_rate,target_accuracy,MAE,BER,Fbw,Sm,mIoU,mDice,gIoU,cIoU\n";
  char line[512];
  auto emit = [&](const char* mode, const char* family, long n, double rate, double acc,
                  const DatasetMetrics& m) {
    std::snprintf(line, sizeof(line),
                  "%s,%s,%ld,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f\n", mode, family,
                  n, rate * 100.0, acc * 100.0, m.mae * 100.0, m.ber * 100.0, m.wfm * 100.0,
                  m.sm * 100.0, m.miou * 100.0, m.mdice * 100.0, m.giou * 100.0, m.ciou * 100.0);
    out << line;
  };
  for (const auto& [mode, report] : modes) {
    for (const FamilyReport& f : report.families)
      emit(router_mode_name(mode), family_name(f.family), f.n, f.routing_rate,
           f.target_accuracy, f.metrics);
    emit(router_mode_name(mode), "overall", report.n, report.routing_rate,
         report.target_accuracy, report.overall);
  }
  return out.str();
}

void check_report_schema(const json& report, const json& schema) {
  const std::string type = schema.value("type", "");
  if (type == "object") {
    if (!report.is_object()) throw IoError("report schema: expected object");
    if (schema.contains("required"))
      for (const json& key : schema.at("required"))
        if (!report.contains(key.get<std::string>()))
          throw IoError("report schema: missing required key " + key.get<std::string>());
    if (schema.contains("properties"))
      for (const auto& [key, sub] : schema.at("properties").items())
        if (report.contains(key)) check_report_schema(report.at(key), sub);
  } else if (type == "array") {
    if (!report.is_array()) throw IoError("report schema: expected array");
    if (schema.contains("items"))
      for (const json& item : report) check_report_schema(item, schema.at("items"));
  } else if (type == "number") {
    if (!report.is_number()) throw IoError("report schema: expected number");
  } else if (type == "string") {
    if (!report.is_string()) throw IoError("report schema: expected string");
  }
}

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  json j;
  in >> j;
  return j;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << content;
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace conceptseg
