#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "log_model/interaction.hpp"
#include "taxonomy/matcher.hpp"

namespace needscope {

struct ZipVolume {
  std::string zip;
  double daily_volume = 0.0;
};

struct NeedRate {
  std::string detector;
  double rate = 0.0;
};

// amplitude · sin(2π (t − phase_days) / period_days), t in aligned days.
struct SeasonalTerm {
  double amplitude = 0.0;
  double period_days = 365.0;
  double phase_days = 0.0;
};

struct DriftStep {
  Date from;
  double factor = 1.0;
};

struct Shock {
  std::string need;
  std::vector<std::string> zips;  // empty: every ZIP
  DateRange window;
  double multiplier = 1.0;
};

// Expected volume of (zip, day) = daily_volume · weekday · drift(day).
// Expected share of need n = rate_n · weekday · seasonality(t) · shocks, where
// t counts days from 2020-01-01 after mapping a 2019 day forward by 364, so
// both years share the same seasonal and weekday pattern. Drift scales volume
// only; it grows exponentially from 2019-01-01 and can step up at given dates.
struct GeneratorConfig {
  std::uint64_t seed = 0;
  ObservationConfig obs;
  bool exact = false;
  int clients_per_zip = 500;
  std::vector<ZipVolume> zips;
  std::vector<NeedRate> needs;
  std::array<double, 7> weekday_multipliers{1, 1, 1, 1, 1, 1, 1};  // Monday first
  std::vector<SeasonalTerm> seasonality;
  double annual_growth = 0.0;
  std::vector<DriftStep> drift_steps;
  std::vector<Shock> shocks;
  std::vector<DetectorExample> background;  // empty: built-in pool
  std::filesystem::path taxonomy;           // resolved against the config file

  // Throws Error(kConfig) naming the offending field.
  void validate() const;
  double aligned_day(Date d) const;
  double seasonal_multiplier(Date d) const;
  double volume_multiplier(Date d) const;
  double expected_volume(std::size_t zip, Date d) const;
  double need_share(std::size_t need, std::size_t zip, Date d) const;
};

GeneratorConfig parse_generator_config(std::string_view json,
                                       const std::filesystem::path& base_dir = {});
GeneratorConfig load_generator_config(const std::filesystem::path& path);

struct GroundTruthCell {
  std::uint32_t need;  // index into GeneratorConfig::needs
  Date date;
  std::uint32_t zip;   // index into GeneratorConfig::zips
  double expected_matched;
  std::int64_t matched;
};

struct GroundTruthVolume {
  Date date;
  std::uint32_t zip;
  double expected_volume;
  std::int64_t volume;
};

struct GroundTruth {
  std::vector<GroundTruthCell> cells;
  std::vector<GroundTruthVolume> volumes;

  std::int64_t total_volume() const;
  std::int64_t total_matched(std::uint32_t need) const;
};

// C implied by the configured expectations for one need over a ZIP subset
// (empty: all), using window-pooled rates on 364-day-aligned paired days.
double implied_change(const GeneratorConfig& cfg, std::string_view need,
                      const std::vector<std::string>& zips, DateRange t1, DateRange t2);

struct GeneratedChunk {
  int year;
  unsigned month;
  std::uint32_t zip;
  std::vector<SearchInteraction> records;  // ordered by timestamp
};

struct GeneratorSummary {
  std::int64_t interactions_2019 = 0;
  std::int64_t interactions_2020 = 0;
  std::int64_t matched = 0;
  std::size_t background_templates = 0;
  std::size_t rejected_background = 0;
  std::vector<std::string> warnings;
  GroundTruth truth;
};

// Count-first generation: every (year, ZIP, month) chunk draws Poisson counts
// around the expectations (rounded when cfg.exact) from its own substream, then
// materializes records from template pools. Each need's templates are the
// taxonomy examples that classify to exactly that detector; background
// templates must match no detector. Chunks reach `sink` in a fixed order
// (year, month, ZIP) regardless of thread count.
GeneratorSummary generate(const GeneratorConfig& cfg, const CompiledMatcherSet& matcher,
                          const std::function<void(GeneratedChunk&&)>& sink);

// Writes interactions_2019.tsv, interactions_2020.tsv and groundtruth.tsv.
GeneratorSummary generate_to_directory(const GeneratorConfig& cfg, const CompiledMatcherSet& matcher,
                                       const std::filesystem::path& out_dir);

inline constexpr std::string_view kGroundTruthHeader =
    "need_key\tdate\tzip\texpected_matched\tmatched\texpected_volume\tvolume";

}  // namespace needscope
