#include <cmath>
#include <random>

#include "core/error.hpp"
#include "doctest.h"
#include "trend/trend.hpp"

using namespace needscope;

namespace {

// One ZIP, constant volume, expression rate given per day.
AggregateTable constant_table(double rate_2019, double rate_2020_base, double rate_2020_window,
                              DateRange window) {
  AggregateTable t(GeoLevel::kZip, TimeResolution::kDay);
  t.register_need("N1");
  const auto geo = GeoKey::make(GeoLevel::kZip, "98105");
  const std::int64_t volume = 10000;
  for (Date d = Date::from_ymd(2019, 1, 1); d <= Date::from_ymd(2019, 8, 2); d = d + 1) {
    t.add_volume(d, geo, volume);
    t.add_matched("N1", d, geo, std::llround(rate_2019 * volume));
  }
  for (Date d = Date::from_ymd(2020, 1, 1); d <= Date::from_ymd(2020, 8, 2); d = d + 1) {
    const double r = window.contains(d) ? rate_2020_window : rate_2020_base;
    t.add_volume(d, geo, volume);
    t.add_matched("N1", d, geo, std::llround(r * volume));
  }
  return t;
}

}  // namespace

TEST_CASE("trend: alignment keeps the weekday") {
  ObservationConfig obs;
  CHECK(align_to_prior_year(Date::from_ymd(2020, 1, 6), obs.range_2019) == Date::from_ymd(2019, 1, 7));
  CHECK_THROWS_AS(align_to_prior_year(Date::from_ymd(2020, 8, 1), obs.range_2019), Error);
  obs.range_2019 = DateRange::parse("2019-01-01:2019-08-04");
  for (Date d = Date::from_ymd(2020, 1, 6); d <= Date::from_ymd(2020, 8, 2); d = d + 1) {
    const Date a = align_to_prior_year(d, obs.range_2019);
    CHECK(a.iso_weekday() == d.iso_weekday());
    CHECK(d - a == kAlignmentOffsetDays);
  }
  CHECK(align_to_prior_year(Date::from_ymd(2020, 1, 1), obs.range_2019) == Date::from_ymd(2019, 1, 2));
  CHECK_THROWS_AS(align_to_prior_year(Date::from_ymd(2019, 12, 30), obs.range_2019), Error);
}

TEST_CASE("trend: relative change and percent change") {
  CHECK(relative_change(4, 1, 1, 1) == 2.0);
  CHECK(relative_change(0.2, 0.1, 0.3, 0.3) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(relative_change(1, 1, 2, 1) == -1.0);
  CHECK_THROWS_AS(relative_change(0, 1, 1, 1), Error);
  CHECK_THROWS_AS(relative_change(1, 1, 1, -1), Error);
  CHECK(percent_change(0.0) == 0.0);
  CHECK(percent_change(1.0) == 1.0);
  CHECK(percent_change(-1.0) == -0.5);
  CHECK(percent_change(7.0) * 100 == doctest::Approx(12700.0));
}

TEST_CASE("trend: swapping periods negates c") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(1e-6, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    CHECK(std::abs(relative_change(a, b, c, d) + relative_change(b, a, d, c)) <= 1e-12);
  }
}

TEST_CASE("trend: quantiles and moving average") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(quantile_sorted(v, 0.0) == 1.0);
  CHECK(quantile_sorted(v, 1.0) == 4.0);
  CHECK(quantile_sorted(v, 0.5) == 2.5);
  CHECK(quantile_sorted(v, 0.25) == doctest::Approx(1.75));
  const std::vector<std::optional<double>> s{1.0, std::nullopt, 3.0, 5.0, std::nullopt, std::nullopt, std::nullopt};
  const auto m = moving_average(s, 1);
  CHECK(*m[0] == 1.0);
  CHECK(*m[1] == 2.0);
  CHECK(*m[2] == 4.0);
  CHECK(*m[3] == 4.0);
  CHECK(*m[4] == 5.0);
  CHECK_FALSE(m[5].has_value());
  CHECK_FALSE(m[6].has_value());
}

TEST_CASE("trend: bootstrap of a constant sample is degenerate") {
  const auto ci = bootstrap_mean_ci(std::vector<double>(20, 1.5), 200, 0.95, 1);
  CHECK(ci.mean == 1.5);
  CHECK(ci.low == 1.5);
  CHECK(ci.high == 1.5);
  const auto a = bootstrap_mean_ci({1, 2, 3, 4, 5}, 300, 0.9, 7);
  const auto b = bootstrap_mean_ci({1, 2, 3, 4, 5}, 300, 0.9, 7);
  CHECK(a.low == b.low);
  CHECK(a.high == b.high);
  CHECK(a.low < 3.0);
  CHECK(a.high > 3.0);
}

TEST_CASE("trend: a doubled window rate gives c = 1") {
  const Windows w;
  const ObservationConfig obs;
  const auto table = constant_table(0.1, 0.1, 0.2, w.initial_window);
  const auto geo = GeoKey::make(GeoLevel::kZip, "98105");
  CHECK(window_change(table, "N1", geo, w.baseline_2020, w.initial_window, obs) == doctest::Approx(1.0));
  CHECK(window_change(table, "N1", geo, w.baseline_2020, w.longterm_window, obs) == doctest::Approx(0.0));
  WindowOptions opt;
  opt.n_boot = 100;
  const auto rc = window_mean_change(table, "N1", geo, w.baseline_2020, w.initial_window, opt);
  CHECK(rc.c == doctest::Approx(1.0));
  CHECK(rc.ci_low <= rc.c);
  CHECK(rc.ci_high >= rc.c);
  CHECK(rc.n_days == 28);

  SeriesOptions so;
  so.smooth_half_width = 0;
  const auto series = change_series(table, "N1", GeoKey::national(), so);
  for (const auto& p : series.points) {
    if (!p.c) continue;
    CHECK(*p.c == doctest::Approx(w.initial_window.contains(p.date) ? 1.0 : 0.0));
  }
}

TEST_CASE("trend: unpaired days are excluded") {
  const Windows w;
  const ObservationConfig obs;
  auto table = constant_table(0.1, 0.1, 0.1, w.initial_window);
  // Spike on 2020-01-01, whose aligned day 2019-01-02 exists, and on
  // 2020-01-06; only the latter is inside the baseline.
  const auto geo = GeoKey::make(GeoLevel::kZip, "98105");
  table.add_matched("N1", Date::from_ymd(2020, 1, 6), geo, 1000);
  const double c = window_change(table, "N1", geo, w.baseline_2020, w.initial_window, obs);
  // Baseline pooled rate 2020: (49*1000 + 1000) / (49*10000).
  CHECK(c == doctest::Approx(-std::log2(50.0 / 49.0)));
}

TEST_CASE("trend: windows must stay inside the observation ranges") {
  ObservationConfig obs;
  Windows w;
  CHECK_NOTHROW(w.validate(obs));
  w.longterm_window = DateRange::parse("2020-07-06:2020-08-09");
  CHECK_THROWS_AS(w.validate(obs), Error);
}
