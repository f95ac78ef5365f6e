#include "spde/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <sstream>

#include <json.hpp>

namespace spde {

namespace {

std::string full_precision(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace

std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

std::string manifest_to_json(const RunManifest& manifest) {
  nlohmann::ordered_json doc;
  doc["subcommand"] = manifest.subcommand;
  doc["config_hash"] = manifest.config_hash;
  doc["version"] = manifest.version;
  doc["seed"] = manifest.seed;
  doc["started_at"] = manifest.started_at;
  doc["finished_at"] = manifest.finished_at;
  doc["outputs"] = manifest.outputs;
  auto& checks = doc["checks"];
  checks = nlohmann::ordered_json::array();
  for (const auto& c : manifest.checks) {
    checks.push_back({{"name", c.name}, {"pass", c.pass}});
  }
  doc["exit_code"] = manifest.exit_code;
  return doc.dump(2);
}

RunManifest manifest_from_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  RunManifest m;
  m.subcommand = doc.value("subcommand", "");
  m.config_hash = doc.value("config_hash", "");
  m.version = doc.value("version", "");
  m.seed = doc.value("seed", std::uint64_t{0});
  m.started_at = doc.value("started_at", "");
  m.finished_at = doc.value("finished_at", "");
  if (doc.contains("outputs")) {
    m.outputs = doc["outputs"].get<std::vector<std::string>>();
  }
  if (doc.contains("checks")) {
    for (const auto& c : doc["checks"]) {
      m.checks.push_back({c.at("name").get<std::string>(), c.at("pass").get<bool>()});
    }
  }
  m.exit_code = doc.value("exit_code", 0);
  return m;
}

std::string csv_header() {
  return "quantity,value,stderr,samples,seed,config_hash,check";
}

std::string csv_line(const CsvRow& row) {
  std::ostringstream os;
  os << row.quantity << ',' << full_precision(row.value) << ','
     << full_precision(row.stderr_) << ',' << row.samples << ',' << row.seed << ','
     << row.config_hash << ',' << row.check;
  return os.str();
}

CsvRow csv_from_estimate(const std::string& quantity, const McEstimate& est,
                         const std::string& config_hash, const std::string& check) {
  CsvRow row;
  row.quantity = quantity;
  row.value = est.value;
  row.stderr_ = est.stderr_;
  row.samples = est.samples;
  row.seed = est.seed;
  row.config_hash = config_hash;
  row.check = check;
  return row;
}

std::string estimate_report_to_json(const EstimateReport& report) {
  nlohmann::ordered_json doc;
  doc["name"] = report.name;
  doc["pass"] = report.pass;
  doc["margin"] = report.margin;
  doc["details"] = report.details;
  doc["seed"] = report.seed;
  doc["samples"] = report.samples;
  auto& witnesses = doc["witnesses"];
  witnesses = nlohmann::ordered_json::array();
  for (const auto& [key, value] : report.witnesses) {
    witnesses.push_back({{"name", key}, {"value", value}});
  }
  return doc.dump(2);
}

std::string summarize_manifests(const std::vector<RunManifest>& manifests) {
  std::ostringstream os;
  os << "run summary (" << manifests.size() << " manifests)\n";
  os << "---------------------------------------------------------------\n";
  for (const auto& m : manifests) {
    os << m.subcommand << "  config=" << m.config_hash << "  exit=" << m.exit_code
       << '\n';
    for (const auto& c : m.checks) {
      os << "  [" << (c.pass ? "PASS" : "FAIL") << "] " << c.name << '\n';
    }
  }
  std::size_t failures = 0;
  for (const auto& m : manifests) {
    for (const auto& c : m.checks) {
      if (!c.pass) ++failures;
    }
  }
  os << "---------------------------------------------------------------\n";
  os << "failed checks: " << failures << '\n';
  return os.str();
}

std::string summarize_manifests_json(const std::vector<RunManifest>& manifests) {
  nlohmann::ordered_json doc;
  auto& runs = doc["runs"];
  runs = nlohmann::ordered_json::array();
  std::size_t failures = 0;
  for (const auto& m : manifests) {
    nlohmann::ordered_json entry;
    entry["subcommand"] = m.subcommand;
    entry["config_hash"] = m.config_hash;
    entry["exit_code"] = m.exit_code;
    auto& checks = entry["checks"];
    checks = nlohmann::ordered_json::array();
    for (const auto& c : m.checks) {
      checks.push_back({{"name", c.name}, {"pass", c.pass}});
      if (!c.pass) ++failures;
    }
    runs.push_back(entry);
  }
  doc["failed_checks"] = failures;
  return doc.dump(2);
}

}  // namespace spde
