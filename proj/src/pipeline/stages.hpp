#pragma once

// File-in, file-out stage runners shared by the CLI and the pipeline
// orchestrator. Every runner writes its outputs atomically, records itself in
// the manifest of the output directory and returns a JSON report.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aggregation/aggregate.hpp"
#include "correlation/correlation.hpp"
#include "json.hpp"
#include "log_model/interaction.hpp"
#include "trend/trend.hpp"

namespace needscope {

namespace fs = std::filesystem;

// `<stem>.json` next to a TSV output.
fs::path sidecar_path(const fs::path& output);

struct GenerateParams {
  fs::path config;
  fs::path out_dir;
  std::optional<std::uint64_t> seed;  // overrides the config seed
  std::string stage = "gen";
};
nlohmann::json run_generate(const GenerateParams& p);

struct ClassifyParams {
  fs::path taxonomy;
  std::vector<fs::path> inputs;
  ObservationConfig obs;
  fs::path output;
  std::string stage = "classify";
};
nlohmann::json run_classify(const ClassifyParams& p);

struct AggregateParams {
  fs::path taxonomy;
  std::vector<fs::path> tagged;
  fs::path crosswalk;  // required for county and state cubes
  GeoLevel geo = GeoLevel::kZip;
  TimeResolution time = TimeResolution::kDay;
  fs::path output;
  std::string stage = "aggregate";
};
nlohmann::json run_aggregate(const AggregateParams& p);

struct TrendParams {
  fs::path cube;
  fs::path crosswalk;
  std::string need;
  std::string geo = "US";
  ObservationConfig obs;
  Windows windows;
  int smooth = 3;
  int n_boot = 500;
  double level = 0.95;
  std::uint64_t seed = 0;
  double laplace = 0.0;
  BootstrapScheme scheme = BootstrapScheme::kWindowAndBaselineDays;
  fs::path output;
  std::string stage = "trend";
};
// Writes the daily (or weekly) series TSV and a sidecar with the initial and
// long-term window changes.
nlohmann::json run_trend(const TrendParams& p);

struct PolicyParams {
  fs::path cube;
  fs::path crosswalk;
  fs::path policies;
  std::string need;
  ObservationConfig obs;
  Windows windows;
  double laplace = 0.0;
  fs::path output;
  std::string stage = "policy";
};
nlohmann::json run_policy(const PolicyParams& p);

struct ExternalParams {
  fs::path cube;
  fs::path crosswalk;
  fs::path external;
  std::string need;
  std::string geo = "US";
  std::string mode = "auto";  // "auto" or "relative"
  ObservationConfig obs;
  Windows windows;
  fs::path output;
  std::string stage = "external";
};
nlohmann::json run_external(const ExternalParams& p);

struct PrecisionParams {
  fs::path taxonomy;
  fs::path corpus;
  fs::path output;
  std::string stage = "eval-precision";
};
nlohmann::json run_eval_precision(const PrecisionParams& p);

struct TrendAgreementParams {
  fs::path table;
  fs::path output;
  std::string stage = "eval-trends";
};
nlohmann::json run_eval_trends(const TrendAgreementParams& p);

struct ClientRateParams {
  std::vector<fs::path> interactions;
  fs::path demographics;
  fs::path output;
  std::string stage = "eval-clientrate";
};
nlohmann::json run_eval_clientrate(const ClientRateParams& p);

ExternalMode parse_external_mode(std::string_view mode);
BootstrapScheme parse_bootstrap_scheme(std::string_view scheme);
std::string_view bootstrap_scheme_name(BootstrapScheme scheme);

}  // namespace needscope
