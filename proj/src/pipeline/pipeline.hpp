#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pipeline/stages.hpp"

namespace needscope {

// Orchestrated run: gen (optional) → classify → aggregate → trend → policy →
// external → eval. Relative paths resolve against the config file's directory.
struct PipelineConfig {
  fs::path source;
  std::uint64_t seed = 0;
  fs::path taxonomy;
  fs::path generator;
  std::vector<fs::path> inputs;
  ObservationConfig obs;
  Windows windows;
  fs::path crosswalk;

  std::vector<std::string> trend_needs;
  std::vector<std::string> trend_geos{"US"};
  int smooth = 3;
  int n_boot = 200;
  double level = 0.95;
  BootstrapScheme scheme = BootstrapScheme::kWindowAndBaselineDays;
  double laplace = 0.0;

  fs::path policies;
  std::vector<std::string> policy_needs;

  fs::path external;
  std::string external_need;
  std::string external_geo = "US";
  std::string external_mode = "auto";

  fs::path labeled_corpus;
  fs::path trend_table;
  fs::path demographics;
};

// Throws Error(kConfig) naming the offending field.
PipelineConfig parse_pipeline_config(std::string_view text, const fs::path& source);
PipelineConfig load_pipeline_config(const fs::path& path);

// File name fragment for a geo key ("state:WA" → "state-WA").
std::string geo_file_tag(std::string_view geo);

nlohmann::json run_pipeline(const PipelineConfig& cfg, const fs::path& out_dir);

}  // namespace needscope
