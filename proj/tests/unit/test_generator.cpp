#include <cmath>

#include "aggregation/aggregate.hpp"
#include "core/error.hpp"
#include "core/parallel.hpp"
#include "doctest.h"
#include "support/paths.hpp"
#include "synthgen/generator.hpp"
#include "trend/trend.hpp"

using namespace needscope;

namespace {

const CompiledMatcherSet& matcher() {
  static const CompiledMatcherSet m(load_taxonomy(testing::source_path("data/reference.needs")));
  return m;
}

std::string small_config(const std::string& extra = "") {
  return R"({
    "seed": 5,
    "range_2019": "2019-01-01:2019-08-04",
    "range_2020": "2020-01-01:2020-08-02",
    "clients_per_zip": 50,
    "zips": [{"zip": "98105", "daily_volume": 60}, {"zip": "10001", "daily_volume": 40}],
    "needs": [{"detector": "P20", "rate": 0.1}, {"detector": "LB6", "rate": 0.05}],
    "weekday_multipliers": [1.1, 1, 1, 1, 1, 0.9, 0.9],
    "seasonality": [{"amplitude": 0.2, "period_days": 365.25, "phase_days": 10}],
    "drift": {"annual_growth": 0.1, "steps": [{"from": "2019-06-01", "factor": 1.2}]},
    "shocks": [{"need": "P20", "from": "2020-03-16", "to": "2020-04-12", "multiplier": 3.0},
               {"need": "LB6", "zips": ["10001"], "from": "2020-03-16", "to": "2020-08-02", "multiplier": 0.5}])" +
         extra + "}";
}

std::string config_error(const std::string& text) {
  try {
    parse_generator_config(text);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
    return e.what();
  }
  return {};
}

std::vector<SearchInteraction> run(const GeneratorConfig& cfg, GeneratorSummary* summary = nullptr) {
  std::vector<SearchInteraction> all;
  auto s = generate(cfg, matcher(), [&](GeneratedChunk&& c) {
    all.insert(all.end(), c.records.begin(), c.records.end());
  });
  if (summary) *summary = std::move(s);
  return all;
}

}  // namespace

TEST_CASE("generator: config errors name the field") {
  CHECK(config_error("{").find("generator config") != std::string::npos);
  CHECK(config_error(small_config(R"(, "clients_per_zip": 0)")).find("clients_per_zip") != std::string::npos);
  auto bad_rate = small_config();
  bad_rate.replace(bad_rate.find("0.05"), 4, "-0.1");
  CHECK(config_error(bad_rate).find("rate") != std::string::npos);
  auto bad_date = small_config();
  bad_date.replace(bad_date.find("2020-04-12"), 10, "2020-04-31");
  CHECK(config_error(bad_date).find("shocks") != std::string::npos);
  auto infeasible = small_config();
  infeasible.replace(infeasible.find("\"multiplier\": 3.0"), 17, "\"multiplier\": 30.0");
  CHECK(config_error(infeasible).find("share") != std::string::npos);
  CHECK_THROWS_AS(load_generator_config(testing::source_path("configs/missing.json")), Error);
}

TEST_CASE("generator: expectations follow the configured shape") {
  const auto cfg = parse_generator_config(small_config());
  const Date d20 = Date::from_ymd(2020, 2, 3);
  const Date d19 = d20 - 364;
  CHECK(cfg.aligned_day(d19) == cfg.aligned_day(d20));
  CHECK(cfg.seasonal_multiplier(d19) == cfg.seasonal_multiplier(d20));
  CHECK(cfg.need_share(0, 0, d20) == doctest::Approx(0.1 * 1.1 * cfg.seasonal_multiplier(d20)));
  CHECK(cfg.need_share(0, 0, Date::from_ymd(2020, 3, 16)) ==
        doctest::Approx(3.0 * 0.1 * 1.1 * cfg.seasonal_multiplier(Date::from_ymd(2020, 3, 16))));
  CHECK(cfg.need_share(1, 0, Date::from_ymd(2020, 5, 4)) / cfg.need_share(1, 1, Date::from_ymd(2020, 5, 4)) ==
        doctest::Approx(2.0));
  CHECK(cfg.volume_multiplier(Date::from_ymd(2019, 1, 1)) == doctest::Approx(1.0));
  CHECK(cfg.volume_multiplier(Date::from_ymd(2019, 6, 1)) ==
        doctest::Approx(1.2 * std::pow(1.1, 151 / 365.25)));

  const Windows w;
  // The shock scales the share by 3 over the whole window and nothing else
  // differs between years, so C = log2 3.
  CHECK(implied_change(cfg, "P20", {}, w.baseline_2020, w.initial_window) == doctest::Approx(std::log2(3.0)));
  CHECK(implied_change(cfg, "P20", {}, w.baseline_2020, w.longterm_window) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(implied_change(cfg, "LB6", {"10001"}, w.baseline_2020, w.longterm_window) == doctest::Approx(-1.0));
  CHECK(implied_change(cfg, "LB6", {"98105"}, w.baseline_2020, w.longterm_window) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("generator: output is deterministic and thread independent") {
  const auto cfg = parse_generator_config(small_config());
  set_thread_limit(1);
  GeneratorSummary s1;
  const auto a = run(cfg, &s1);
  set_thread_limit(4);
  const auto b = run(cfg);
  set_thread_limit(0);
  REQUIRE(a.size() == b.size());
  CHECK(a == b);
  CHECK(static_cast<std::int64_t>(a.size()) == s1.interactions_2019 + s1.interactions_2020);
  CHECK(s1.truth.total_volume() == static_cast<std::int64_t>(a.size()));

  auto other = cfg;
  other.seed = 6;
  CHECK(run(other) != a);
}

TEST_CASE("generator: records classify to their intended need") {
  auto cfg = parse_generator_config(small_config());
  GeneratorSummary s;
  const auto records = run(cfg, &s);
  std::map<std::string, std::int64_t> matched;
  std::int64_t any = 0;
  for (const auto& r : records) {
    const auto hits = matcher().match(r.query, r.clicked_url);
    CHECK(hits.size() <= 1);
    if (!hits.empty()) {
      ++matched[matcher().taxonomy().detectors[hits[0]].id];
      ++any;
    }
    CHECK(r.client_hash.size() == 12);
  }
  CHECK(matched["P20"] == s.truth.total_matched(0));
  CHECK(matched["LB6"] == s.truth.total_matched(1));
  CHECK(any == s.matched);
  CHECK(s.background_templates > 0);
}

TEST_CASE("generator: exact mode recovers the implied change") {
  // Rounding each cell to an integer biases small counts, so volumes are large.
  auto cfg = parse_generator_config(small_config(R"(, "exact": true)"));
  for (auto& z : cfg.zips) z.daily_volume *= 25;
  AggregateTable table(GeoLevel::kZip, TimeResolution::kDay);
  table.register_taxonomy(matcher().taxonomy());
  generate(cfg, matcher(), [&](GeneratedChunk&& c) {
    for (const auto& r : c.records) table.add(r, matcher().match(r.query, r.clicked_url), matcher().taxonomy());
  });
  const Windows w;
  for (const char* need : {"P20", "LB6"}) {
    for (const auto& t2 : {w.initial_window, w.longterm_window}) {
      const double want = implied_change(cfg, need, {}, w.baseline_2020, t2);
      const double got = window_change(table, need, GeoKey::national(), w.baseline_2020, t2, cfg.obs);
      CAPTURE(need);
      CHECK(std::abs(got - want) < 0.01);
    }
  }
}
