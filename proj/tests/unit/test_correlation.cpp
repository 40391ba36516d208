#include <cmath>

#include "core/error.hpp"
#include "correlation/correlation.hpp"
#include "doctest.h"

using namespace needscope;

namespace {

// Raw weekly levels for both years: flat in 2019, flat in 2020 until the
// shock week, then doubled.
ExternalSeries claims() {
  ExternalSeries s;
  s.label = "claims";
  for (Date w = Date::from_ymd(2019, 1, 7); w <= Date::from_ymd(2019, 7, 29); w = w + 7) {
    s.points.emplace_back(w, 200.0 + (w.day() % 3));
  }
  for (Date w = Date::from_ymd(2020, 1, 6); w <= Date::from_ymd(2020, 7, 27); w = w + 7) {
    const double base = 220.0 + (w.day() % 5);
    s.points.emplace_back(w, w >= Date::from_ymd(2020, 3, 16) ? base * (2.0 + (w.day() % 4)) : base);
  }
  return s;
}

}  // namespace

TEST_CASE("correlation: pearson matches reference values") {
  // Frozen from scipy.stats.pearsonr.
  auto a = pearson({1, 2, 3, 4, 5, 6, 7}, {2.1, 3.9, 6.2, 7.8, 10.1, 12.2, 13.8});
  CHECK(a.r == doctest::Approx(0.999172912755884).epsilon(1e-12));
  CHECK(a.p == doctest::Approx(3.776936574882502e-08).epsilon(1e-8));
  CHECK(a.n == 7);
  auto b = pearson({0.5, 1.5, -0.3, 2.2, 0.9, -1.1, 0.4, 1.8}, {0.1, 0.7, 0.4, 1.2, -0.2, -0.5, 0.9, 0.6});
  CHECK(b.r == doctest::Approx(0.6974184380541958).epsilon(1e-12));
  CHECK(b.p == doctest::Approx(0.0544916775895762).epsilon(1e-9));
  auto c = pearson({1, 2, 3}, {1, 3, 2});
  CHECK(c.r == doctest::Approx(0.5));
  CHECK(c.p == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("correlation: pearson errors") {
  CHECK_THROWS_AS(pearson({1, 2, 3}, {1, 2}), Error);
  CHECK_THROWS_AS(pearson({1, 2}, {1, 2}), Error);
  CHECK_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), Error);
  CHECK(pearson_r({1, 2}, {3, 1}) == doctest::Approx(-1.0));
  const auto perfect = pearson({1, 2, 3, 4}, {2, 4, 6, 8});
  CHECK(perfect.r == doctest::Approx(1.0));
  CHECK(perfect.p == doctest::Approx(0.0));
}

TEST_CASE("correlation: policy files") {
  const auto p = parse_policies(
      "state,shelter_start,shelter_end\nWA,2020-03-23,2020-05-31\nCA,2020-03-19,\nSD,,\n");
  REQUIRE(p.size() == 3);
  CHECK(*p[0].duration_days() == 69);
  CHECK_FALSE(p[1].duration_days().has_value());
  CHECK_FALSE(p[2].shelter_start.has_value());
  CHECK_THROWS_AS(parse_policies("state,shelter_start,shelter_end\nWA,2020-05-31,2020-03-23\n"), Error);
  CHECK_THROWS_AS(parse_policies("state,shelter_start,shelter_end\nWA,,\nWA,,\n"), Error);
  CHECK_THROWS_AS(parse_policies("state,shelter_start,shelter_end\nWA,2020-13-01,\n"), Error);
}

TEST_CASE("correlation: short-term policy analysis tracks the per-state shock") {
  // State k issues its order on day 16+2k of March; the need rate doubles k
  // times from that day, so c = k exactly and r(start doy, c) = 1.
  const std::vector<std::string> states = {"WA", "OR", "NY", "IL"};
  AggregateTable t(GeoLevel::kState, TimeResolution::kDay);
  t.register_need("N1");
  std::vector<PolicyRecord> policies;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const auto geo = GeoKey::make(GeoLevel::kState, states[k]);
    const Date start = Date::from_ymd(2020, 3, 16 + 2 * static_cast<int>(k));
    policies.push_back({states[k], start, start + 60});
    for (Date d = Date::from_ymd(2019, 1, 1); d <= Date::from_ymd(2019, 8, 2); d = d + 1) {
      t.add_volume(d, geo, 1 << 12);
      t.add_matched("N1", d, geo, 64);
    }
    for (Date d = Date::from_ymd(2020, 1, 1); d <= Date::from_ymd(2020, 8, 2); d = d + 1) {
      t.add_volume(d, geo, 1 << 12);
      t.add_matched("N1", d, geo, d >= start ? (64 << k) : 64);
    }
  }
  policies.push_back({"SD", std::nullopt, std::nullopt});
  PolicyOptions opt;
  const auto a = policy_short_term(t, policies, "N1", opt);
  CHECK(a.covariate == "start_day_of_year");
  REQUIRE(a.states.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(a.states[k].c == doctest::Approx(static_cast<double>(k)));
    CHECK(a.states[k].t1.days() == 7);
    CHECK(a.states[k].t2.days() == 14);
  }
  REQUIRE(a.correlation.has_value());
  CHECK(a.correlation->r == doctest::Approx(1.0));
  CHECK_FALSE(a.warnings.empty());

  const auto l = policy_long_term(t, policies, "N1", opt);
  CHECK(l.covariate == "duration_days");
  REQUIRE(l.states.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(l.states[k].c == doctest::Approx(static_cast<double>(k)));
  // Durations are all 60 days: no variance, so no correlation.
  CHECK_FALSE(l.correlation.has_value());
}

TEST_CASE("correlation: raw levels become a two-year difference in differences") {
  const auto ext = claims();
  const Windows w;
  const ObservationConfig obs;
  std::string mode;
  const auto rc = external_relative_change(ext, w.baseline_2020, obs, &mode);
  CHECK(mode == "did");
  // Independent computation over the 7 whole baseline weeks.
  double b20 = 0, b19 = 0;
  std::map<Date, double> level(ext.points.begin(), ext.points.end());
  for (Date m = Date::from_ymd(2020, 1, 6); m <= Date::from_ymd(2020, 2, 17); m = m + 7) {
    b20 += level[m] / 7;
    b19 += level[m - 364] / 7;
  }
  REQUIRE_FALSE(rc.empty());
  for (const auto& [week, c] : rc) {
    CHECK(c == doctest::Approx(std::log2(level[week] / b20) - std::log2(level[week - 364] / b19)).epsilon(1e-12));
  }

  ExternalSeries only2020 = ext;
  std::erase_if(only2020.points, [](const auto& p) { return p.first.year() == 2019; });
  external_relative_change(only2020, w.baseline_2020, obs, &mode);
  CHECK(mode == "within-2020");
}

TEST_CASE("correlation: compare_external identity and constant offset") {
  const auto ext = claims();
  const Windows w;
  const ObservationConfig obs;
  const auto internal = external_relative_change(ext, w.baseline_2020, obs, nullptr);

  const auto self = compare_external(internal, ext, ExternalMode::kAuto, w.baseline_2020, obs);
  CHECK(self.correlation.r == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& g : self.gaps) CHECK(std::abs(g.gap) < 1e-12);

  auto shifted = internal;
  for (auto& [d, c] : shifted) c += 0.75;
  const auto off = compare_external(shifted, ext, ExternalMode::kAuto, w.baseline_2020, obs);
  CHECK(off.correlation.r == doctest::Approx(1.0).epsilon(1e-12));
  for (const auto& g : off.gaps) CHECK(g.gap == doctest::Approx(0.75).epsilon(1e-12));

  ExternalSeries as_rc{"rc", internal};
  const auto rel = compare_external(internal, as_rc, ExternalMode::kAsRelativeChange, w.baseline_2020, obs);
  CHECK(rel.mode == "relative");
  CHECK(rel.correlation.r == doctest::Approx(1.0));

  const std::vector<std::pair<Date, double>> short_internal(internal.begin(), internal.begin() + 2);
  CHECK_THROWS_AS(compare_external(short_internal, ext, ExternalMode::kAuto, w.baseline_2020, obs), Error);
  ExternalSeries unordered{"u", {{Date::from_ymd(2020, 2, 3), 1.0}, {Date::from_ymd(2020, 1, 6), 1.0}}};
  CHECK_THROWS_AS(compare_external(internal, unordered, ExternalMode::kAuto, w.baseline_2020, obs), Error);
}
