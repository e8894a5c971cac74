#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nse/rng.hpp"

namespace nse {

inline constexpr std::string_view kVersion = "0.1.0";
/// Bumped whenever a CSV layout changes; recorded in every manifest.
inline constexpr int kCsvSchemaVersion = 1;

enum class ScenarioType {
  Table1_2,
  GEVSweep,
  BlockMaxima,
  POT,
  StableSweep,
  QuadraticReg,
  MissingCovariateReg,
  MRQAsymptotics,
  LimitDistGrid,
};

std::string_view scenario_name(ScenarioType s);
ScenarioType scenario_from_string(std::string_view name);

struct ExperimentConfig {
  ScenarioType scenario = ScenarioType::Table1_2;
  std::size_t n = 300;
  std::size_t replications = 10;
  std::uint64_t seed = 1;
  std::map<std::string, std::string> params;
  std::filesystem::path output_dir = "out";
};

/// Flat text:
///   scenario = GEVSweep
///   n = 500
///   replications = 20
///   seed = 7
///   output_dir = out/gev
///   [params]
///   xi = -2,0,0.5
/// `#` starts a comment. Unknown top-level keys are rejected.
ExperimentConfig parse_config(std::istream& in);
std::string format_config(const ExperimentConfig& config);

/// Checks replications >= 1, n against the scenario and every param key and
/// value against the scenario schema. Throws ConfigError.
void validate(const ExperimentConfig& config);

/// Param keys accepted by a scenario with their defaults.
const std::map<std::string, std::string>& scenario_defaults(ScenarioType s);

struct OutputFile {
  std::string name;
  std::string sha256;
  std::size_t bytes = 0;
};

/// A directional claim evaluated on the run's own output.
struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct RunManifest {
  ExperimentConfig config;
  std::string version{kVersion};
  double wall_seconds = 0.0;
  std::vector<RngSeed> replication_seeds;
  std::vector<OutputFile> outputs;
  std::vector<CheckResult> checks;

  bool all_checks_passed() const;
  nlohmann::json to_json() const;
};

/// Executes the scenario, writes CSVs and manifest.json into output_dir.
/// Files written before a failure are removed. Deterministic for a fixed
/// config regardless of worker count (wall time aside).
RunManifest run(const ExperimentConfig& config);

/// Names accepted by reproduce().
std::vector<std::string> preset_names();

/// Preset config: replications = max(10, floor(full-size count * scale)).
ExperimentConfig preset(std::string_view name, double scale, std::uint64_t seed, const std::filesystem::path& out);

RunManifest reproduce(std::string_view name, double scale, std::uint64_t seed, const std::filesystem::path& out);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& file);

}  // namespace nse
