#include <random>
#include <sstream>

#include "aggregation/aggregate.hpp"
#include "core/error.hpp"
#include "doctest.h"
#include "support/paths.hpp"

using namespace needscope;

namespace {

const char* kCrosswalk =
    "zip,county_fips,state\n"
    "98105,53033,WA\n98101,53033,WA\n98052,53033,WA\n97201,41051,OR\n"
    "10001,36061,NY\n10002,36061,NY\n60601,17031,IL\n";

const std::vector<std::string> kZips = {"98105", "98101", "98052", "97201", "10001", "10002", "60601"};

AggregateTable random_cube(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AggregateTable t(GeoLevel::kZip, TimeResolution::kDay);
  for (const char* need : {"P12", "LB6", "ALL"}) t.register_need(need);
  const Date start = Date::from_ymd(2020, 3, 1);
  for (int d = 0; d < 21; ++d) {
    for (const auto& zip : kZips) {
      const GeoKey geo = GeoKey::make(GeoLevel::kZip, zip);
      const auto volume = static_cast<std::int64_t>(rng() % 500);
      t.add_volume(start + d, geo, volume);
      for (const char* need : {"P12", "LB6", "ALL"}) {
        if (volume > 0) t.add_matched(need, start + d, geo, static_cast<std::int64_t>(rng() % (volume + 1)));
      }
    }
  }
  return t;
}

}  // namespace

TEST_CASE("aggregate: geo keys") {
  CHECK(GeoKey::parse("US") == GeoKey::national());
  CHECK(GeoKey::parse("state:WA").to_string() == "state:WA");
  CHECK(GeoKey::parse("zip:98105").level == GeoLevel::kZip);
  CHECK(GeoKey::parse("county:53033").code == "53033");
  for (const char* bad : {"state:wa", "zip:9810", "county:5303", "planet:earth", "state:"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(GeoKey::parse(bad), Error);
  }
}

TEST_CASE("aggregate: crosswalk lifts and rejects conflicts") {
  const auto cw = GeoCrosswalk::parse(kCrosswalk);
  CHECK(cw.zip_count() == 7);
  CHECK(cw.lift(GeoKey::make(GeoLevel::kZip, "98105"), GeoLevel::kState) == std::optional<std::string>("WA"));
  CHECK(cw.lift(GeoKey::make(GeoLevel::kCounty, "36061"), GeoLevel::kState) == std::optional<std::string>("NY"));
  CHECK_FALSE(cw.lift(GeoKey::make(GeoLevel::kZip, "99999"), GeoLevel::kState).has_value());
  CHECK_THROWS_AS(GeoCrosswalk::parse("zip,county_fips,state\n98105,53033,WA\n98105,41051,OR\n"), Error);
  CHECK_THROWS_AS(GeoCrosswalk::parse("zip,county_fips,state\n98105,53033\n"), Error);
}

TEST_CASE("aggregate: one interaction counts once per detector, category and ALL") {
  const auto tax = parse_taxonomy(
      "detector A1\n  category Safety\n  subcategory a\n  logic Q\n  query tax\nend\n"
      "detector A2\n  category Safety\n  subcategory b\n  logic Q\n  query lawyer\nend\n"
      "detector B1\n  category LoveBelonging\n  subcategory c\n  logic Q\n  query divorce\nend\n");
  AggregateTable t(GeoLevel::kZip, TimeResolution::kDay);
  t.register_taxonomy(tax);
  const auto x = parse_interaction("2020-03-16T08:00:00\tdivorce lawyer tax\t\t98105\tC");
  t.add(x, {0, 1, 2}, tax);
  t.add(parse_interaction("2020-03-16T09:00:00\tweather\t\t98105\tC"), {}, tax);
  const Date d = Date::from_ymd(2020, 3, 16);
  const auto geo = GeoKey::make(GeoLevel::kZip, "98105");
  CHECK(t.volume(d, geo) == 2);
  CHECK(t.matched("A1", d, geo) == 1);
  CHECK(t.matched("A2", d, geo) == 1);
  CHECK(t.matched("B1", d, geo) == 1);
  CHECK(t.matched("Safety", d, geo) == 1);
  CHECK(t.matched("LoveBelonging", d, geo) == 1);
  CHECK(t.matched("Physiological", d, geo) == 0);
  CHECK(t.matched("ALL", d, geo) == 1);
  CHECK(expression_rate(t, "ALL", DateRange{d, d}, geo) == 0.5);
  CHECK_THROWS_AS(expression_rate(t, "ALL", DateRange{d + 1, d + 1}, geo), Error);
}

TEST_CASE("aggregate: rollup is path independent") {
  const auto cw = GeoCrosswalk::parse(kCrosswalk);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto zip = random_cube(seed);
    const auto county = rollup(zip, GeoLevel::kCounty, TimeResolution::kDay, &cw);
    CHECK(rollup(county, GeoLevel::kState, TimeResolution::kDay, &cw) ==
          rollup(zip, GeoLevel::kState, TimeResolution::kDay, &cw));
    CHECK(rollup(county, GeoLevel::kNational, TimeResolution::kWeek, &cw) ==
          rollup(rollup(zip, GeoLevel::kState, TimeResolution::kWeek, &cw), GeoLevel::kNational,
                 TimeResolution::kWeek, &cw));
    CHECK(rollup(zip, GeoLevel::kNational, TimeResolution::kDay, nullptr) ==
          rollup(zip, GeoLevel::kNational, TimeResolution::kDay, &cw));
  }
}

TEST_CASE("aggregate: partitions add up") {
  const auto cw = GeoCrosswalk::parse(kCrosswalk);
  const auto zip = random_cube(9);
  const auto state = rollup(zip, GeoLevel::kState, TimeResolution::kDay, &cw);
  const auto nation = rollup(zip, GeoLevel::kNational, TimeResolution::kDay, &cw);
  for (const Date d : zip.dates()) {
    std::int64_t vol = 0, matched = 0, by_zip = 0;
    for (const auto& g : state.geos()) {
      vol += state.volume(d, g);
      matched += state.matched("P12", d, g);
    }
    for (const auto& z : kZips) by_zip += zip.matched("P12", d, GeoKey::make(GeoLevel::kZip, z));
    CHECK(vol == nation.volume(d, GeoKey::national()));
    CHECK(matched == nation.matched("P12", d, GeoKey::national()));
    CHECK(by_zip == matched);
  }
  // Sharded builds merge to the whole.
  AggregateTable a(GeoLevel::kZip, TimeResolution::kDay), b(GeoLevel::kZip, TimeResolution::kDay);
  for (const auto& c : zip.cells()) {
    (c.date.day() % 2 ? a : b).add_matched(c.need, c.date, c.geo, c.matched);
  }
  for (const auto& [k, v] : zip.volumes()) (k.first.day() % 2 ? a : b).add_volume(k.first, k.second, v);
  for (const auto& n : zip.needs()) {
    a.register_need(n);
    b.register_need(n);
  }
  a.merge(b);
  CHECK(a == zip);
}

TEST_CASE("aggregate: weekly rollup keys weeks by Monday") {
  const auto zip = random_cube(4);
  const auto weekly = rollup(zip, GeoLevel::kNational, TimeResolution::kWeek, nullptr);
  for (const Date d : weekly.dates()) CHECK(d.iso_weekday() == 1u);
  std::int64_t total = 0;
  for (const Date d : weekly.dates()) total += weekly.volume(d, GeoKey::national());
  CHECK(total == zip.total_volume());
}

TEST_CASE("aggregate: rollup errors") {
  const auto zip = random_cube(5);
  const auto partial = GeoCrosswalk::parse("zip,county_fips,state\n98105,53033,WA\n");
  try {
    rollup(zip, GeoLevel::kState, TimeResolution::kDay, &partial);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kValidation);
    CHECK(std::string(e.what()).find("60601") != std::string::npos);
  }
  const auto full = GeoCrosswalk::parse(kCrosswalk);
  const auto state = rollup(zip, GeoLevel::kState, TimeResolution::kDay, &full);
  CHECK_THROWS_AS(rollup(state, GeoLevel::kZip, TimeResolution::kDay, nullptr), Error);
}

TEST_CASE("aggregate: cube files round-trip") {
  const auto zip = random_cube(6);
  std::stringstream s;
  write_cube(zip, s);
  const std::string text = s.str();
  CHECK(text.rfind("#resolution=day\n#needs=", 0) == 0);
  CHECK(text.find(kCubeHeader) != std::string::npos);
  std::istringstream in(text);
  const auto back = read_cube(in);
  CHECK(back == zip);
  std::stringstream again;
  write_cube(back, again);
  CHECK(again.str() == text);

  std::istringstream bad("need_key\tdate\tgeo_level\tgeo_code\tmatched\tvolume\nP12\t2020-13-01\tzip\t98105\t1\t2\n");
  CHECK_THROWS_AS(read_cube(bad), Error);
}
