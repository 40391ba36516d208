#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "aggregation/aggregate.hpp"
#include "log_model/interaction.hpp"

namespace needscope {

inline constexpr int kAlignmentOffsetDays = 364;

// d − 364 days, which keeps the weekday. Throws Error(kOutOfRange) when the
// result falls outside range_2019.
Date align_to_prior_year(Date d, const DateRange& range_2019);

// log2(e_t2_2020 / e_t1_2020) − log2(e_t2_2019 / e_t1_2019). Throws
// Error(kUndefined) when any input is not strictly positive.
double relative_change(double e_t2_2020, double e_t1_2020, double e_t2_2019, double e_t1_2019);

// 2^c − 1.
double percent_change(double c);

struct Windows {
  DateRange baseline_2020{Date::from_ymd(2020, 1, 6), Date::from_ymd(2020, 2, 23)};
  Date pandemic_start = Date::from_ymd(2020, 3, 16);
  DateRange initial_window{Date::from_ymd(2020, 3, 16), Date::from_ymd(2020, 4, 12)};
  DateRange longterm_window{Date::from_ymd(2020, 7, 6), Date::from_ymd(2020, 8, 2)};

  // Throws Error(kConfig) when a window leaves range_2020 or its aligned
  // 2019 span leaves range_2019.
  void validate(const ObservationConfig& obs) const;
};

struct RelativeChange {
  std::string need_key;
  DateRange t1;
  DateRange t2;
  double c = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int n_boot = 0;
  int n_days = 0;
};

struct MeanInterval {
  double mean = 0.0;
  double low = 0.0;
  double high = 0.0;
};

// Percentile bootstrap of the sample mean: n_boot resamples with replacement.
MeanInterval bootstrap_mean_ci(const std::vector<double>& values, int n_boot, double level,
                               std::uint64_t seed);

// Linear-interpolated quantile of sorted data, q in [0, 1].
double quantile_sorted(const std::vector<double>& sorted, double q);

// Mean of the available points within ±half_width positions; missing points
// are skipped and a window with no points stays missing.
std::vector<std::optional<double>> moving_average(const std::vector<std::optional<double>>& series,
                                                  int half_width = 3);

// Resolves `geo` against the table. A geo coarser than the table sums its
// constituent units (ZIPs, counties, ...), which needs the crosswalk unless
// the target is national.
std::vector<GeoKey> constituent_units(const AggregateTable& table, const GeoKey& geo,
                                      const GeoCrosswalk* crosswalk);

struct SeriesOptions {
  ObservationConfig obs;
  DateRange baseline = Windows{}.baseline_2020;
  // Buckets of range_2020 to report; defaults to all of range_2020.
  std::optional<DateRange> range;
  int smooth_half_width = 3;
  int n_boot = 0;
  double level = 0.95;
  std::uint64_t seed = 0;
  // Pseudocount k: E = (matched + k) / (volume + k). Off by default.
  double laplace = 0.0;
  const GeoCrosswalk* crosswalk = nullptr;
};

struct SeriesPoint {
  Date date;
  std::optional<double> c;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::optional<double> smoothed_c;
};

struct ChangeSeries {
  std::string need_key;
  GeoKey geo;
  TimeResolution resolution = TimeResolution::kDay;
  DateRange baseline;
  // Table level whose cells were resampled for per-point intervals, or "none".
  std::string ci_unit = "none";
  int n_boot = 0;
  std::vector<SeriesPoint> points;
};

// One point per bucket (day or ISO week) of the 2020 range: t1 is the
// baseline, t2 the bucket, and the 2019 terms use the 364-day-aligned
// buckets. Only buckets whose aligned bucket lies in range_2019 take part,
// in the baseline as well. Points with a zero E term are missing. With
// n_boot > 0 and several constituent units, per-point intervals resample the
// units with replacement.
ChangeSeries change_series(const AggregateTable& table, std::string_view need, const GeoKey& geo,
                           const SeriesOptions& options);

enum class BootstrapScheme {
  // Resample the window's daily c values only.
  kWindowDays,
  // Resample window days and baseline days together, so the interval also
  // carries the baseline's sampling noise.
  kWindowAndBaselineDays,
};

struct WindowOptions {
  ObservationConfig obs;
  int n_boot = 500;
  double level = 0.95;
  std::uint64_t seed = 0;
  BootstrapScheme scheme = BootstrapScheme::kWindowAndBaselineDays;
  double laplace = 0.0;
  const GeoCrosswalk* crosswalk = nullptr;
};

// Mean of the daily c values over t2 against baseline t1, with a percentile
// bootstrap interval. Deterministic in the seed, need, and geo. Throws
// Error(kInsufficientData) when t2 has no valid day.
RelativeChange window_mean_change(const AggregateTable& table, std::string_view need,
                                  const GeoKey& geo, DateRange t1, DateRange t2,
                                  const WindowOptions& options);

// C from window-pooled expression rates (Σ matched / Σ volume over the paired
// days of each window). Throws Error(kUndefined) on a zero term.
double window_change(const AggregateTable& table, std::string_view need, const GeoKey& geo,
                     DateRange t1, DateRange t2, const ObservationConfig& obs,
                     const GeoCrosswalk* crosswalk = nullptr, double laplace = 0.0);

}  // namespace needscope
