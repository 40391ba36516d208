#include "trend/trend.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "core/error.hpp"
#include "core/random.hpp"
#include "core/text.hpp"

namespace needscope {

Date align_to_prior_year(Date d, const DateRange& range_2019) {
  Date aligned = d - kAlignmentOffsetDays;
  if (!range_2019.contains(aligned)) {
    throw Error(ErrorCode::kOutOfRange, d.to_string() + " aligns to " + aligned.to_string() +
                                            ", outside " + range_2019.to_string());
  }
  return aligned;
}

double relative_change(double e_t2_2020, double e_t1_2020, double e_t2_2019, double e_t1_2019) {
  if (!(e_t2_2020 > 0) || !(e_t1_2020 > 0) || !(e_t2_2019 > 0) || !(e_t1_2019 > 0)) {
    throw Error(ErrorCode::kUndefined, "relative change needs four positive expression rates");
  }
  return std::log2(e_t2_2020 / e_t1_2020) - std::log2(e_t2_2019 / e_t1_2019);
}

double percent_change(double c) { return std::exp2(c) - 1.0; }

void Windows::validate(const ObservationConfig& obs) const {
  auto check = [&](const DateRange& w, const char* name) {
    if (w.empty()) throw Error(ErrorCode::kConfig, std::string(name) + " window is empty");
    if (!obs.range_2020.contains(w.first) || !obs.range_2020.contains(w.last)) {
      throw Error(ErrorCode::kConfig, std::string(name) + " window " + w.to_string() +
                                          " leaves the 2020 range " + obs.range_2020.to_string());
    }
  };
  check(baseline_2020, "baseline");
  check(initial_window, "initial");
  check(longterm_window, "long-term");
  if (!obs.range_2020.contains(pandemic_start)) {
    throw Error(ErrorCode::kConfig, "pandemic start outside the 2020 range");
  }
  Date b19 = baseline_2020.first - kAlignmentOffsetDays;
  Date e19 = baseline_2020.last - kAlignmentOffsetDays;
  if (!obs.range_2019.contains(b19) || !obs.range_2019.contains(e19)) {
    throw Error(ErrorCode::kConfig, "baseline aligns outside the 2019 range");
  }
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw Error(ErrorCode::kInsufficientData, "quantile of an empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

namespace {

void check_boot(int n_boot, double level) {
  if (n_boot < 1) throw Error(ErrorCode::kInvalidArgument, "bootstrap needs n_boot >= 1");
  if (!(level > 0.0 && level < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "confidence level must lie in (0, 1)");
  }
}

std::pair<double, double> percentile_interval(std::vector<double> values, double level) {
  std::sort(values.begin(), values.end());
  const double alpha = (1.0 - level) / 2.0;
  return {quantile_sorted(values, alpha), quantile_sorted(values, 1.0 - alpha)};
}

}  // namespace

MeanInterval bootstrap_mean_ci(const std::vector<double>& values, int n_boot, double level,
                               std::uint64_t seed) {
  check_boot(n_boot, level);
  if (values.empty()) throw Error(ErrorCode::kInsufficientData, "bootstrap of an empty sample");
  MeanInterval out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  Rng rng(derive_seed(seed, "bootstrap_mean"));
  std::uniform_int_distribution<std::size_t> pick(0, values.size() - 1);
  std::vector<double> means(n_boot);
  for (int b = 0; b < n_boot; ++b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) sum += values[pick(rng)];
    means[b] = sum / values.size();
  }
  std::tie(out.low, out.high) = percentile_interval(std::move(means), level);
  return out;
}

std::vector<std::optional<double>> moving_average(const std::vector<std::optional<double>>& series,
                                                  int half_width) {
  if (half_width < 0) throw Error(ErrorCode::kInvalidArgument, "negative smoothing half-width");
  const auto n = static_cast<std::ptrdiff_t>(series.size());
  std::vector<std::optional<double>> out(series.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double sum = 0.0;
    int count = 0;
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - half_width);
         j <= std::min(n - 1, i + half_width); ++j) {
      if (series[j]) {
        sum += *series[j];
        ++count;
      }
    }
    if (count > 0) out[i] = sum / count;
  }
  return out;
}

std::vector<GeoKey> constituent_units(const AggregateTable& table, const GeoKey& geo,
                                      const GeoCrosswalk* crosswalk) {
  if (geo.level == table.level()) return {geo};
  if (geo.level < table.level()) {
    throw Error(ErrorCode::kInvalidArgument,
                "geo " + geo.to_string() + " is finer than the " +
                    std::string(geo_level_name(table.level())) + "-level cube");
  }
  std::vector<GeoKey> out;
  if (geo.level == GeoLevel::kNational) return table.geos();
  if (!crosswalk) {
    throw Error(ErrorCode::kConfig, "a crosswalk is required to resolve " + geo.to_string() +
                                        " in a " + std::string(geo_level_name(table.level())) +
                                        "-level cube");
  }
  std::vector<std::string> unmapped;
  for (const auto& g : table.geos()) {
    auto code = crosswalk->lift(g, geo.level);
    if (!code) {
      unmapped.push_back(g.to_string());
    } else if (*code == geo.code) {
      out.push_back(g);
    }
  }
  if (!unmapped.empty()) {
    throw Error(ErrorCode::kValidation, "crosswalk has no mapping for: " + join(unmapped, ", "));
  }
  return out;
}

namespace {

// Counts on every bucket of range_2020 and on its aligned 2019 bucket, per
// constituent unit.
struct AlignedCounts {
  std::vector<Date> buckets;
  std::vector<bool> paired;
  std::vector<std::vector<Counts>> y2020;  // [unit][bucket]
  std::vector<std::vector<Counts>> y2019;
  std::vector<Counts> total2020;
  std::vector<Counts> total2019;
};

AlignedCounts aligned_counts(const AggregateTable& table, std::string_view need, const GeoKey& geo,
                             const ObservationConfig& obs, const GeoCrosswalk* crosswalk) {
  AlignedCounts a;
  const int step = table.resolution() == TimeResolution::kWeek ? 7 : 1;
  Date first = obs.range_2020.first;
  if (step == 7) {
    Date monday = first.iso_week_start();
    first = monday < first ? monday + 7 : monday;
  }
  for (Date d = first; d <= obs.range_2020.last; d = d + step) {
    a.buckets.push_back(d);
    a.paired.push_back(obs.range_2019.contains(d - kAlignmentOffsetDays));
  }
  if (a.buckets.empty()) throw Error(ErrorCode::kInsufficientData, "empty 2020 range");
  const DateRange span20{a.buckets.front(), a.buckets.back()};
  const DateRange span19{span20.first - kAlignmentOffsetDays, span20.last - kAlignmentOffsetDays};
  const auto units = constituent_units(table, geo, crosswalk);
  a.total2020.assign(a.buckets.size(), {});
  a.total2019.assign(a.buckets.size(), {});
  for (const auto& u : units) {
    a.y2020.push_back(table.slice(need, u, span20));
    a.y2019.push_back(table.slice(need, u, span19));
    for (std::size_t i = 0; i < a.buckets.size(); ++i) {
      a.total2020[i].matched += a.y2020.back()[i].matched;
      a.total2020[i].volume += a.y2020.back()[i].volume;
      a.total2019[i].matched += a.y2019.back()[i].matched;
      a.total2019[i].volume += a.y2019.back()[i].volume;
    }
  }
  if (!table.has_need(need)) {
    throw Error(ErrorCode::kInvalidArgument, "unknown need key '" + std::string(need) + "'");
  }
  return a;
}

bool in_window(Date bucket, const DateRange& w, TimeResolution r) {
  if (r == TimeResolution::kWeek) return bucket >= w.first && bucket + 6 <= w.last;
  return w.contains(bucket);
}

std::vector<std::size_t> window_indices(const AlignedCounts& a, const DateRange& w,
                                        TimeResolution r) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < a.buckets.size(); ++i) {
    if (a.paired[i] && in_window(a.buckets[i], w, r)) out.push_back(i);
  }
  return out;
}

// log2 of the smoothed expression rate, or nullopt when it is zero or undefined.
std::optional<double> log_rate(double matched, double volume, double k) {
  const double m = matched + k;
  const double v = volume + k;
  if (!(v > 0) || !(m > 0)) return std::nullopt;
  return std::log2(m / v);
}

struct Pooled {
  double m20 = 0, v20 = 0, m19 = 0, v19 = 0;
};

template <typename CountsAt>
Pooled pool(const std::vector<std::size_t>& idx, CountsAt at) {
  Pooled p;
  for (auto i : idx) {
    auto [c20, c19] = at(i);
    p.m20 += c20.matched;
    p.v20 += c20.volume;
    p.m19 += c19.matched;
    p.v19 += c19.volume;
  }
  return p;
}

// Per-bucket log2(E2020) − log2(E2019), before the baseline correction.
std::vector<std::optional<double>> bucket_contrast(const std::vector<Counts>& y20,
                                                   const std::vector<Counts>& y19,
                                                   const std::vector<bool>& paired, double k) {
  std::vector<std::optional<double>> out(y20.size());
  for (std::size_t i = 0; i < y20.size(); ++i) {
    if (!paired[i]) continue;
    auto a = log_rate(static_cast<double>(y20[i].matched), static_cast<double>(y20[i].volume), k);
    auto b = log_rate(static_cast<double>(y19[i].matched), static_cast<double>(y19[i].volume), k);
    if (a && b) out[i] = *a - *b;
  }
  return out;
}

std::optional<double> baseline_contrast(const Pooled& p, double k) {
  auto a = log_rate(p.m20, p.v20, k);
  auto b = log_rate(p.m19, p.v19, k);
  if (!a || !b) return std::nullopt;
  return *a - *b;
}

}  // namespace

ChangeSeries change_series(const AggregateTable& table, std::string_view need, const GeoKey& geo,
                           const SeriesOptions& options) {
  options.obs.validate();
  if (options.laplace < 0) throw Error(ErrorCode::kInvalidArgument, "negative pseudocount");
  const auto res = table.resolution();
  auto a = aligned_counts(table, need, geo, options.obs, options.crosswalk);
  const auto base_idx = window_indices(a, options.baseline, res);
  if (base_idx.empty()) {
    throw Error(ErrorCode::kInsufficientData,
                "baseline " + options.baseline.to_string() + " has no paired buckets");
  }
  const double k = options.laplace;

  ChangeSeries out;
  out.need_key = std::string(need);
  out.geo = geo;
  out.resolution = res;
  out.baseline = options.baseline;

  auto point_values = [&](const std::vector<Counts>& y20, const std::vector<Counts>& y19) {
    auto contrast = bucket_contrast(y20, y19, a.paired, k);
    auto base = baseline_contrast(
        pool(base_idx, [&](std::size_t i) { return std::pair{y20[i], y19[i]}; }), k);
    for (auto& c : contrast) {
      if (!base) {
        c.reset();
      } else if (c) {
        *c -= *base;
      }
    }
    return contrast;
  };

  const auto c = point_values(a.total2020, a.total2019);

  std::vector<std::size_t> report;
  const DateRange range = options.range.value_or(options.obs.range_2020);
  for (std::size_t i = 0; i < a.buckets.size(); ++i) {
    if (range.contains(a.buckets[i])) report.push_back(i);
  }
  out.points.resize(report.size());
  std::vector<std::optional<double>> raw(report.size());
  for (std::size_t j = 0; j < report.size(); ++j) {
    out.points[j].date = a.buckets[report[j]];
    out.points[j].c = c[report[j]];
    raw[j] = c[report[j]];
  }
  auto smooth = moving_average(raw, options.smooth_half_width);
  for (std::size_t j = 0; j < report.size(); ++j) out.points[j].smoothed_c = smooth[j];

  const std::size_t units = a.y2020.size();
  if (options.n_boot > 0 && units > 1) {
    check_boot(options.n_boot, options.level);
    out.ci_unit = std::string(geo_level_name(table.level()));
    out.n_boot = options.n_boot;
    Rng rng(derive_seed(options.seed, "series", need, geo.to_string()));
    std::uniform_int_distribution<std::size_t> pick(0, units - 1);
    std::vector<std::vector<double>> draws(report.size());
    std::vector<Counts> y20(a.buckets.size()), y19(a.buckets.size());
    std::vector<std::size_t> weight(units);
    for (int b = 0; b < options.n_boot; ++b) {
      std::fill(weight.begin(), weight.end(), 0);
      for (std::size_t u = 0; u < units; ++u) ++weight[pick(rng)];
      std::fill(y20.begin(), y20.end(), Counts{});
      std::fill(y19.begin(), y19.end(), Counts{});
      for (std::size_t u = 0; u < units; ++u) {
        if (!weight[u]) continue;
        const auto w = static_cast<std::int64_t>(weight[u]);
        for (std::size_t i = 0; i < a.buckets.size(); ++i) {
          y20[i].matched += w * a.y2020[u][i].matched;
          y20[i].volume += w * a.y2020[u][i].volume;
          y19[i].matched += w * a.y2019[u][i].matched;
          y19[i].volume += w * a.y2019[u][i].volume;
        }
      }
      auto rc = point_values(y20, y19);
      for (std::size_t j = 0; j < report.size(); ++j) {
        if (rc[report[j]]) draws[j].push_back(*rc[report[j]]);
      }
    }
    for (std::size_t j = 0; j < report.size(); ++j) {
      auto& p = out.points[j];
      // Intervals need most replicates defined; otherwise they stay missing.
      if (!p.c || draws[j].size() * 2 < static_cast<std::size_t>(options.n_boot)) continue;
      auto [lo, hi] = percentile_interval(std::move(draws[j]), options.level);
      p.ci_low = std::min(lo, *p.c);
      p.ci_high = std::max(hi, *p.c);
    }
  }
  return out;
}

RelativeChange window_mean_change(const AggregateTable& table, std::string_view need,
                                  const GeoKey& geo, DateRange t1, DateRange t2,
                                  const WindowOptions& options) {
  options.obs.validate();
  check_boot(options.n_boot, options.level);
  if (t1.empty() || t2.empty()) throw Error(ErrorCode::kInvalidArgument, "empty window");
  const double k = options.laplace;
  const auto res = table.resolution();
  auto a = aligned_counts(table, need, geo, options.obs, options.crosswalk);
  const auto base_idx = window_indices(a, t1, res);
  const auto win_idx = window_indices(a, t2, res);
  if (base_idx.empty()) {
    throw Error(ErrorCode::kInsufficientData, "baseline " + t1.to_string() + " has no paired days");
  }
  auto at = [&](std::size_t i) { return std::pair{a.total2020[i], a.total2019[i]}; };
  auto base = baseline_contrast(pool(base_idx, at), k);
  if (!base) {
    throw Error(ErrorCode::kUndefined, "baseline expression of " + std::string(need) + " is zero");
  }
  const auto contrast = bucket_contrast(a.total2020, a.total2019, a.paired, k);
  std::vector<std::size_t> valid;
  std::vector<double> daily;
  for (auto i : win_idx) {
    if (contrast[i]) {
      valid.push_back(i);
      daily.push_back(*contrast[i] - *base);
    }
  }
  if (daily.empty()) {
    throw Error(ErrorCode::kInsufficientData, "window " + t2.to_string() + " has no valid day");
  }

  RelativeChange out;
  out.need_key = std::string(need);
  out.t1 = t1;
  out.t2 = t2;
  out.n_boot = options.n_boot;
  out.n_days = static_cast<int>(daily.size());
  out.c = std::accumulate(daily.begin(), daily.end(), 0.0) / daily.size();

  const std::uint64_t seed = derive_seed(options.seed, need, geo.to_string());
  if (options.scheme == BootstrapScheme::kWindowDays) {
    auto ci = bootstrap_mean_ci(daily, options.n_boot, options.level, seed);
    out.ci_low = ci.low;
    out.ci_high = ci.high;
  } else {
    Rng rng(derive_seed(seed, "joint"));
    std::uniform_int_distribution<std::size_t> pick_day(0, valid.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_base(0, base_idx.size() - 1);
    std::vector<double> means;
    means.reserve(options.n_boot);
    std::vector<std::size_t> sample(base_idx.size());
    for (int b = 0; b < options.n_boot; ++b) {
      for (auto& s : sample) s = base_idx[pick_base(rng)];
      auto base_b = baseline_contrast(pool(sample, at), k);
      double sum = 0.0;
      for (std::size_t j = 0; j < valid.size(); ++j) sum += *contrast[valid[pick_day(rng)]];
      if (base_b) means.push_back(sum / valid.size() - *base_b);
    }
    if (means.empty()) throw Error(ErrorCode::kUndefined, "every bootstrap replicate undefined");
    std::tie(out.ci_low, out.ci_high) = percentile_interval(std::move(means), options.level);
  }
  out.ci_low = std::min(out.ci_low, out.c);
  out.ci_high = std::max(out.ci_high, out.c);
  return out;
}

double window_change(const AggregateTable& table, std::string_view need, const GeoKey& geo,
                     DateRange t1, DateRange t2, const ObservationConfig& obs,
                     const GeoCrosswalk* crosswalk, double laplace) {
  auto a = aligned_counts(table, need, geo, obs, crosswalk);
  auto at = [&](std::size_t i) { return std::pair{a.total2020[i], a.total2019[i]}; };
  const auto p1 = pool(window_indices(a, t1, table.resolution()), at);
  const auto p2 = pool(window_indices(a, t2, table.resolution()), at);
  auto rate = [&](double m, double v) { return v + laplace > 0 ? (m + laplace) / (v + laplace) : 0.0; };
  return relative_change(rate(p2.m20, p2.v20), rate(p1.m20, p1.v20), rate(p2.m19, p2.v19),
                         rate(p1.m19, p1.v19));
}

}  // namespace needscope
