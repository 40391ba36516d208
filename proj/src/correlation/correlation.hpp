#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "trend/trend.hpp"

namespace needscope {

struct CorrelationResult {
  double r = 0.0;
  double p = 1.0;
  int n = 0;
};

// Sample Pearson r with a two-sided p from Student's t on n − 2 degrees of
// freedom. Throws Error(kInvalidArgument) on a length mismatch,
// Error(kInsufficientData) below three points, Error(kUndefined) when either
// side has zero variance.
CorrelationResult pearson(const std::vector<double>& x, const std::vector<double>& y);

// r alone; defined from two points upward.
double pearson_r(const std::vector<double>& x, const std::vector<double>& y);

struct PolicyRecord {
  std::string state;
  std::optional<Date> shelter_start;
  std::optional<Date> shelter_end;

  std::optional<int> duration_days() const {
    if (!shelter_start || !shelter_end) return std::nullopt;
    return *shelter_end - *shelter_start;
  }
};

// CSV state,shelter_start,shelter_end; either date may be blank. Throws
// Error(kParse) on malformed rows and Error(kValidation) when an end precedes
// its start or a state repeats.
std::vector<PolicyRecord> load_policies(const std::filesystem::path& path);
std::vector<PolicyRecord> parse_policies(std::string_view csv, std::string_view source = "<memory>");

struct StateChange {
  std::string state;
  double covariate = 0.0;
  double c = 0.0;
  DateRange t1;
  DateRange t2;
};

struct PolicyAnalysis {
  std::string need_key;
  std::string covariate;  // "start_day_of_year" or "duration_days"
  std::vector<StateChange> states;
  std::vector<std::string> warnings;
  // Pearson r once two states remain; the full result from three upward.
  std::optional<double> r;
  std::optional<CorrelationResult> correlation;
};

struct PolicyOptions {
  ObservationConfig obs;
  Windows windows;
  const GeoCrosswalk* crosswalk = nullptr;
  double laplace = 0.0;
};

// Per state: t1 = the 7 days before shelter_start, t2 = the 14 days from it;
// covariate = ISO day-of-year of shelter_start.
PolicyAnalysis policy_short_term(const AggregateTable& cube,
                                 const std::vector<PolicyRecord>& policies, std::string_view need,
                                 const PolicyOptions& options);
// Per state: t1 = the baseline, t2 = the long-term window; covariate =
// mandate duration in days.
PolicyAnalysis policy_long_term(const AggregateTable& cube,
                                const std::vector<PolicyRecord>& policies, std::string_view need,
                                const PolicyOptions& options);

struct ExternalSeries {
  std::string label;
  std::vector<std::pair<Date, double>> points;

  // Throws Error(kValidation) unless dates strictly increase.
  void validate() const;
};

// CSV date,value with an optional header.
ExternalSeries load_external_series(const std::filesystem::path& path);
ExternalSeries parse_external_series(std::string_view csv, std::string label);

enum class ExternalMode {
  // Values are already relative changes in log2 units.
  kAsRelativeChange,
  // Raw levels: two-year DiD when 2019 weeks are present, else the
  // within-2020 ratio to the baseline.
  kAuto,
};

struct WeekGap {
  Date week;
  double internal_c;
  double external_c;
  double gap;  // internal − external, log2 units
};

struct ExternalComparison {
  std::string mode;  // "relative", "did" or "within-2020"
  CorrelationResult correlation;
  std::vector<WeekGap> gaps;
};

// Converts raw weekly levels to relative change against the baseline weeks
// (whole ISO weeks inside `baseline`). Reports the mode used.
std::vector<std::pair<Date, double>> external_relative_change(const ExternalSeries& external,
                                                              const DateRange& baseline,
                                                              const ObservationConfig& obs,
                                                              std::string* mode);

// Correlates the internal weekly series with the external one over the ISO
// weeks both define. Throws Error(kInsufficientData) below three shared weeks.
ExternalComparison compare_external(const std::vector<std::pair<Date, double>>& internal,
                                    const ExternalSeries& external, ExternalMode mode,
                                    const DateRange& baseline, const ObservationConfig& obs);

}  // namespace needscope
