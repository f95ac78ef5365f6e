#pragma once

// Run manifests and tabular output. Every numeric CSV row carries value,
// stderr, sample count, seed, config hash and the check tag it belongs to,
// printed with full precision so identical runs produce identical bytes.

#include <cstdint>
#include <string>
#include <vector>

#include "spde/analysis.hpp"
#include "spde/monte_carlo.hpp"

namespace spde {

struct CheckSummary {
  std::string name;
  bool pass = true;
};

struct RunManifest {
  std::string subcommand;
  std::string config_hash;
  std::string version;
  std::uint64_t seed = 0;
  std::string started_at;   // ISO-8601 UTC
  std::string finished_at;  // ISO-8601 UTC
  std::vector<std::string> outputs;
  std::vector<CheckSummary> checks;
  int exit_code = 0;

  bool all_pass() const {
    for (const auto& c : checks) {
      if (!c.pass) return false;
    }
    return true;
  }
};

std::string manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const std::string& text);

struct CsvRow {
  std::string quantity;
  double value = 0.0;
  double stderr_ = 0.0;
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string check;
};

std::string csv_header();
std::string csv_line(const CsvRow& row);

CsvRow csv_from_estimate(const std::string& quantity, const McEstimate& est,
                         const std::string& config_hash, const std::string& check);

// Report serialization.
std::string estimate_report_to_json(const EstimateReport& report);

// Aggregates manifests into a human-readable table and machine JSON.
std::string summarize_manifests(const std::vector<RunManifest>& manifests);
std::string summarize_manifests_json(const std::vector<RunManifest>& manifests);

std::string iso8601_now();

}  // namespace spde
