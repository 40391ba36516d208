#include "correlation/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <boost/math/distributions/students_t.hpp>

#include "core/error.hpp"
#include "core/text.hpp"

namespace needscope {

namespace {

void check_lengths(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kInvalidArgument, "correlation inputs differ in length (" +
                                                 std::to_string(x.size()) + " vs " +
                                                 std::to_string(y.size()) + ")");
  }
}

}  // namespace

double pearson_r(const std::vector<double>& x, const std::vector<double>& y) {
  check_lengths(x, y);
  if (x.size() < 2) throw Error(ErrorCode::kInsufficientData, "correlation needs two points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0 || syy == 0) throw Error(ErrorCode::kUndefined, "correlation of a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

CorrelationResult pearson(const std::vector<double>& x, const std::vector<double>& y) {
  check_lengths(x, y);
  if (x.size() < 3) {
    throw Error(ErrorCode::kInsufficientData,
                "correlation needs at least 3 points, got " + std::to_string(x.size()));
  }
  CorrelationResult out;
  out.n = static_cast<int>(x.size());
  out.r = pearson_r(x, y);
  const double df = out.n - 2;
  const double denom = 1.0 - out.r * out.r;
  if (denom <= 0) {
    out.p = 0.0;
  } else {
    const double t = std::abs(out.r) * std::sqrt(df / denom);
    boost::math::students_t dist(df);
    out.p = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, t)), 0.0, 1.0);
  }
  return out;
}

std::vector<PolicyRecord> parse_policies(std::string_view csv, std::string_view source) {
  std::vector<PolicyRecord> out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  for (auto raw : split(csv, '\n')) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line_no == 1 && starts_with(line, "state")) continue;
    const auto where = std::string(source) + ":" + std::to_string(line_no) + ": ";
    auto f = split(line, ',');
    if (f.size() != 3) throw Error(ErrorCode::kParse, where + "want state,shelter_start,shelter_end");
    PolicyRecord p;
    p.state = std::string(trim(f[0]));
    if (!is_valid_geo_code(GeoLevel::kState, p.state)) {
      throw Error(ErrorCode::kParse, where + "malformed state code '" + p.state + "'");
    }
    try {
      if (!trim(f[1]).empty()) p.shelter_start = Date::parse(trim(f[1]));
      if (!trim(f[2]).empty()) p.shelter_end = Date::parse(trim(f[2]));
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, where + e.what());
    }
    if (p.shelter_start && p.shelter_end && *p.shelter_end < *p.shelter_start) {
      throw Error(ErrorCode::kValidation, where + "shelter_end precedes shelter_start");
    }
    if (!seen.insert(p.state).second) {
      throw Error(ErrorCode::kValidation, where + "state " + p.state + " listed twice");
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PolicyRecord> load_policies(const std::filesystem::path& path) {
  return parse_policies(read_file(path), path.string());
}

namespace {

struct PolicyWindows {
  DateRange t1;
  DateRange t2;
  double covariate;
};

template <typename Plan>
PolicyAnalysis policy_analysis(const AggregateTable& cube, const std::vector<PolicyRecord>& policies,
                               std::string_view need, const PolicyOptions& options,
                               std::string covariate_name, Plan plan) {
  PolicyAnalysis out;
  out.need_key = std::string(need);
  out.covariate = std::move(covariate_name);

  std::set<std::string> cube_states;
  if (cube.level() == GeoLevel::kState) {
    for (const auto& g : cube.geos()) cube_states.insert(g.code);
  } else if (cube.level() == GeoLevel::kNational) {
    throw Error(ErrorCode::kInvalidArgument, "policy analysis needs a state-level or finer cube");
  } else {
    if (!options.crosswalk) {
      throw Error(ErrorCode::kConfig, "a crosswalk is required for a " +
                                          std::string(geo_level_name(cube.level())) +
                                          "-level cube");
    }
    for (const auto& g : cube.geos()) {
      if (auto s = options.crosswalk->lift(g, GeoLevel::kState)) cube_states.insert(*s);
    }
  }

  std::set<std::string> with_policy;
  for (const auto& p : policies) {
    with_policy.insert(p.state);
    auto windows = plan(p);
    if (!windows) {
      out.warnings.push_back(p.state + ": missing policy date, excluded");
      continue;
    }
    if (!cube_states.count(p.state)) {
      out.warnings.push_back(p.state + ": no data in the cube, excluded");
      continue;
    }
    try {
      double c = window_change(cube, need, GeoKey::make(GeoLevel::kState, p.state), windows->t1,
                               windows->t2, options.obs, options.crosswalk, options.laplace);
      out.states.push_back(StateChange{p.state, windows->covariate, c, windows->t1, windows->t2});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUndefined) throw;
      out.warnings.push_back(p.state + ": " + e.what() + ", excluded");
    }
  }
  for (const auto& s : cube_states) {
    if (!with_policy.count(s)) out.warnings.push_back(s + ": no policy record, excluded");
  }

  std::vector<double> x, y;
  for (const auto& s : out.states) {
    x.push_back(s.covariate);
    y.push_back(s.c);
  }
  try {
    if (x.size() >= 2) out.r = pearson_r(x, y);
    if (x.size() >= 3) out.correlation = pearson(x, y);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kUndefined) throw;
    out.warnings.push_back(std::string("no correlation: ") + e.what());
  }
  return out;
}

}  // namespace

PolicyAnalysis policy_short_term(const AggregateTable& cube,
                                 const std::vector<PolicyRecord>& policies, std::string_view need,
                                 const PolicyOptions& options) {
  return policy_analysis(cube, policies, need, options, "start_day_of_year",
                         [](const PolicyRecord& p) -> std::optional<PolicyWindows> {
                           if (!p.shelter_start) return std::nullopt;
                           const Date s = *p.shelter_start;
                           return PolicyWindows{{s - 7, s - 1}, {s, s + 13},
                                                static_cast<double>(s.day_of_year())};
                         });
}

PolicyAnalysis policy_long_term(const AggregateTable& cube,
                                const std::vector<PolicyRecord>& policies, std::string_view need,
                                const PolicyOptions& options) {
  return policy_analysis(cube, policies, need, options, "duration_days",
                         [&](const PolicyRecord& p) -> std::optional<PolicyWindows> {
                           auto d = p.duration_days();
                           if (!d) return std::nullopt;
                           return PolicyWindows{options.windows.baseline_2020,
                                                options.windows.longterm_window,
                                                static_cast<double>(*d)};
                         });
}

void ExternalSeries::validate() const {
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (!(points[i - 1].first < points[i].first)) {
      throw Error(ErrorCode::kValidation, label + ": dates must strictly increase (" +
                                              points[i].first.to_string() + ")");
    }
  }
}

ExternalSeries parse_external_series(std::string_view csv, std::string label) {
  ExternalSeries out;
  out.label = std::move(label);
  std::size_t line_no = 0;
  for (auto raw : split(csv, '\n')) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line_no == 1 && starts_with(line, "date")) continue;
    auto f = split(line, ',');
    const auto where = out.label + ":" + std::to_string(line_no) + ": ";
    if (f.size() != 2) throw Error(ErrorCode::kParse, where + "want date,value");
    try {
      out.points.emplace_back(Date::parse(trim(f[0])), parse_double(trim(f[1]), "value"));
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, where + e.what());
    }
  }
  out.validate();
  return out;
}

ExternalSeries load_external_series(const std::filesystem::path& path) {
  return parse_external_series(read_file(path), path.string());
}

namespace {

std::map<Date, double> weekly_means(const ExternalSeries& s) {
  std::map<Date, std::pair<double, int>> acc;
  for (const auto& [d, v] : s.points) {
    auto& a = acc[d.iso_week_start()];
    a.first += v;
    ++a.second;
  }
  std::map<Date, double> out;
  for (const auto& [w, a] : acc) out[w] = a.first / a.second;
  return out;
}

}  // namespace

std::vector<std::pair<Date, double>> external_relative_change(const ExternalSeries& external,
                                                              const DateRange& baseline,
                                                              const ObservationConfig& obs,
                                                              std::string* mode) {
  const auto weeks = weekly_means(external);
  auto in_baseline = [&](Date w) { return w >= baseline.first && w + 6 <= baseline.last; };
  bool have_2019 = false;
  for (const auto& [w, v] : weeks) {
    if (obs.range_2019.contains(w)) have_2019 = true;
  }
  auto baseline_level = [&](int shift) {
    double sum = 0;
    int n = 0;
    for (const auto& [w, v] : weeks) {
      if (in_baseline(w + shift)) {
        sum += v;
        ++n;
      }
    }
    if (n == 0 || !(sum > 0)) {
      throw Error(ErrorCode::kInsufficientData,
                  external.label + ": no positive values in the baseline weeks");
    }
    return sum / n;
  };
  const double b20 = baseline_level(0);
  const double b19 = have_2019 ? baseline_level(kAlignmentOffsetDays) : 0.0;
  if (mode) *mode = have_2019 ? "did" : "within-2020";

  std::vector<std::pair<Date, double>> out;
  for (const auto& [w, v] : weeks) {
    if (!obs.range_2020.contains(w) || !(v > 0)) continue;
    double c = std::log2(v / b20);
    if (have_2019) {
      auto it = weeks.find(w - kAlignmentOffsetDays);
      if (it == weeks.end() || !(it->second > 0)) continue;
      c -= std::log2(it->second / b19);
    }
    out.emplace_back(w, c);
  }
  return out;
}

ExternalComparison compare_external(const std::vector<std::pair<Date, double>>& internal,
                                    const ExternalSeries& external, ExternalMode mode,
                                    const DateRange& baseline, const ObservationConfig& obs) {
  external.validate();
  ExternalComparison out;
  std::vector<std::pair<Date, double>> ext;
  if (mode == ExternalMode::kAsRelativeChange) {
    out.mode = "relative";
    std::map<Date, std::pair<double, int>> acc;
    for (const auto& [d, v] : external.points) {
      auto& a = acc[d.iso_week_start()];
      a.first += v;
      ++a.second;
    }
    for (const auto& [w, a] : acc) ext.emplace_back(w, a.first / a.second);
  } else {
    ext = external_relative_change(external, baseline, obs, &out.mode);
  }
  std::map<Date, double> ext_by_week(ext.begin(), ext.end());
  std::vector<double> x, y;
  for (const auto& [d, c] : internal) {
    auto it = ext_by_week.find(d.iso_week_start());
    if (it == ext_by_week.end()) continue;
    x.push_back(c);
    y.push_back(it->second);
    out.gaps.push_back(WeekGap{d.iso_week_start(), c, it->second, c - it->second});
  }
  if (x.size() < 3) {
    throw Error(ErrorCode::kInsufficientData, "internal and external series share " +
                                                  std::to_string(x.size()) +
                                                  " week(s); at least 3 are needed");
  }
  out.correlation = pearson(x, y);
  return out;
}

}  // namespace needscope
