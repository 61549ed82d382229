#pragma once

// On-disk artifacts: CSV with shortest round-trip decimals, JSON reports.

#include "deficient/scenario.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace deficient {

class IOError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Shortest decimal that parses back to the same double.
std::string format_double(double x);

std::string run_csv(const RunRecord& record);
std::string snapshot_csv(const Measure& mu);
std::string sweep_csv(const MassReport& report);

nlohmann::json certificates_json(const Certificates& c);
nlohmann::json sweep_json(const SweepOutcome& s);

/// Creates the directory if missing; throws IOError if that or any write fails.
void ensure_directory(const std::filesystem::path& dir);
void write_text(const std::filesystem::path& path, const std::string& text);

/// run.csv, snapshot_<k>.csv at probe times and the final time, certificates.json, manifest.json.
std::vector<std::string> write_run_artifacts(const std::filesystem::path& dir, const ScenarioConfig& cfg,
                                             const RunOutcome& outcome);

/// sweep.csv, sweep.json, manifest.json.
std::vector<std::string> write_sweep_artifacts(const std::filesystem::path& dir, const ScenarioConfig& cfg,
                                               const SweepOutcome& outcome);

} // namespace deficient
