#include <fstream>

#include "core/error.hpp"
#include "doctest.h"
#include "evaluation/evaluation.hpp"
#include "support/paths.hpp"

using namespace needscope;

namespace {

const CompiledMatcherSet& matcher() {
  static const CompiledMatcherSet m(load_taxonomy(testing::source_path("data/reference.needs")));
  return m;
}

}  // namespace

TEST_CASE("evaluation: example-based precision by hand") {
  const auto phys = category_bit(NeedCategory::kPhysiological);
  const auto safe = category_bit(NeedCategory::kSafety);
  const auto love = category_bit(NeedCategory::kLoveBelonging);
  // (1·1 + 2·0.5 + 1·0) / 4; the empty prediction is skipped.
  const double p = example_based_precision({phys, CategorySet(love | safe), safe, 0},
                                           {phys, love, love, safe}, {1, 2, 1, 9});
  CHECK(p == doctest::Approx(0.5));
  CHECK_THROWS_AS(example_based_precision({0}, {phys}, {1}), Error);
  CHECK_THROWS_AS(example_based_precision({phys}, {phys}, {0}), Error);
  CHECK_THROWS_AS(example_based_precision({phys, phys}, {phys}, {1}), Error);
}

TEST_CASE("evaluation: category sets format canonically") {
  const CategorySet s = parse_categories("Safety;LoveBelonging");
  CHECK(category_count(s) == 2);
  CHECK(format_categories(s) == "LoveBelonging;Safety");
  CHECK(format_categories(0) == "");
  CHECK_THROWS_AS(parse_categories("Hunger"), Error);
}

TEST_CASE("evaluation: labeled corpus scores perfectly") {
  const auto corpus = load_labeled_corpus(testing::source_path("data/labeled_corpus.tsv"));
  const auto r = evaluate_precision(corpus, matcher());
  CHECK(r.precision == 1.0);
  CHECK(r.tuples == corpus.size());
  CHECK(r.predicted < r.tuples);
  CHECK(r.imperfect.empty());
}

TEST_CASE("evaluation: spurious fixture matches the hand count") {
  const auto corpus = load_labeled_corpus(testing::source_path("tests/fixtures/spurious_corpus.tsv"));
  const auto r = evaluate_precision(corpus, matcher());
  // Weights 3, 1, 2 score 1, 1, 1/2; the unmatched tuple is skipped.
  CHECK(r.precision == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(r.predicted == 3);
  CHECK(r.imperfect.size() == 1);
}

TEST_CASE("evaluation: trend agreement normalizes by the max") {
  std::vector<std::pair<Date, double>> a, b;
  for (int i = 0; i < 10; ++i) {
    a.emplace_back(Date::from_ymd(2020, 1, 6) + 7 * i, 1.0 + i);
    b.emplace_back(Date::from_ymd(2020, 1, 6) + 7 * i, 100.0 * (1.0 + i));
  }
  b.emplace_back(Date::from_ymd(2021, 1, 4), 5.0);
  const auto r = trend_agreement(a, b);
  CHECK(r.r == doctest::Approx(1.0));
  CHECK(r.n == 10);
  const auto table = trend_agreement_file(testing::source_path("data/trend_agreement_example.csv"));
  CHECK(table.keywords.size() == 4);
  REQUIRE(table.median_r.has_value());
  CHECK(*table.median_r > 0.5);
}

TEST_CASE("evaluation: client rate correlates with demographics") {
  testing::TempDir dir("clientrate");
  {
    std::ofstream f(dir / "log.tsv");
    // ZIP k has 10k distinct clients over population 1000·k... rate = 10k/(1000k).
    const char* zips[] = {"98105", "10001", "60601", "97201"};
    for (int k = 0; k < 4; ++k) {
      for (int c = 0; c < 10 * (k + 1) * (k + 1); ++c) {
        f << "2020-03-16T08:00:00\tq\t\t" << zips[k] << "\tc" << c << "\n";
        f << "2020-03-16T09:00:00\tq\t\t" << zips[k] << "\tc" << c << "\n";
      }
    }
    std::ofstream d(dir / "demo.csv");
    d << "zip,population,median_income\n98105,1000,10\n10001,2000,20\n60601,3000,30\n97201,4000,40\n99999,10,1\n";
  }
  std::vector<std::string> warnings;
  const auto profiles = build_zip_profiles({dir / "log.tsv"}, dir / "demo.csv", &warnings);
  REQUIRE(profiles.size() == 4);
  CHECK_FALSE(warnings.empty());
  std::map<std::string, double> rate;
  for (const auto& p : profiles) rate[p.zip] = p.client_rate;
  CHECK(rate["98105"] == doctest::Approx(0.01));
  CHECK(rate["97201"] == doctest::Approx(0.04));
  const auto report = client_rate_correlations(profiles);
  REQUIRE(report.columns.size() == 2);
  for (const auto& c : report.columns) CHECK(c.result.r == doctest::Approx(1.0));
}
