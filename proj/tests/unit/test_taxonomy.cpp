#include <set>

#include "core/error.hpp"
#include "core/text.hpp"
#include "doctest.h"
#include "oracles/naive_matcher.hpp"
#include "oracles/random_interactions.hpp"
#include "support/paths.hpp"
#include "taxonomy/matcher.hpp"
#include "taxonomy/taxonomy.hpp"

using namespace needscope;

namespace {

const NeedTaxonomy& reference() {
  static const NeedTaxonomy tax = load_taxonomy(testing::source_path("data/reference.needs"));
  return tax;
}

const CompiledMatcherSet& reference_matcher() {
  static const CompiledMatcherSet m(reference());
  return m;
}

std::vector<std::string> ids(const std::vector<std::uint32_t>& hits) {
  std::vector<std::string> out;
  for (auto i : hits) out.push_back(reference().detectors[i].id);
  return out;
}

std::vector<std::string> classify_ids(const std::string& query, std::optional<std::string> url = {}) {
  return ids(reference_matcher().match(normalize_text(query), url));
}

std::string error_of(std::string_view text) {
  try {
    parse_taxonomy(text, "t.needs");
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("taxonomy: reference covers all five categories") {
  const auto& tax = reference();
  CHECK(tax.detectors.size() == 79);
  CHECK(tax.version == "1.0");
  std::map<NeedCategory, int> per;
  for (const auto& d : tax.detectors) ++per[d.category];
  CHECK(per.size() == 5);
  CHECK(per[NeedCategory::kSelfActualization] == 32);
  CHECK(per[NeedCategory::kCognitive] == 4);
  CHECK(per[NeedCategory::kLoveBelonging] == 8);
  CHECK(per[NeedCategory::kSafety] == 15);
  CHECK(per[NeedCategory::kPhysiological] == 20);
}

TEST_CASE("taxonomy: every bundled example classifies to exactly its detector") {
  CHECK(check_examples(reference_matcher()).empty());
}

TEST_CASE("taxonomy: required classifications") {
  CHECK(classify_ids("bandages", "amazon.com/s?k=bandages") == std::vector<std::string>{"P12"});
  CHECK(classify_ids("bandages").empty());
  CHECK(classify_ids("online games with friends") == std::vector<std::string>{"LB6"});
  CHECK(classify_ids("I feel depressed") == std::vector<std::string>{"LB4"});
  CHECK(classify_ids("divorce lawyer tax") == std::vector<std::string>{"LB3", "S14"});
  CHECK(classify_ids("weather tomorrow").empty());
}

TEST_CASE("taxonomy: KD detector without a url pattern names the detector") {
  const auto msg = error_of(
      "detector X1\n  category Safety\n  subcategory s\n  logic KD\n  query a\nend\n");
  CHECK(msg.find("X1") != std::string::npos);
  CHECK(msg.find("KD") != std::string::npos);
}

TEST_CASE("taxonomy: structural errors") {
  CHECK(error_of("detector X1\n  category Safety\n  subcategory s\n  logic Q\n  query (\nend\n")
            .find("X1") != std::string::npos);
  CHECK(error_of("detector X1\n  category Safety\n  subcategory s\n  logic Q\n  query a\nend\n"
                 "detector X1\n  category Safety\n  subcategory s\n  logic Q\n  query b\nend\n")
            .find("duplicate") != std::string::npos);
  CHECK(error_of("detector X1\n  category Hunger\n  subcategory s\n  logic Q\n  query a\nend\n")
            .find("Hunger") != std::string::npos);
  CHECK(error_of("detector X1\n  category Safety\n  subcategory s\n  logic Q\n  query a\n")
            .find("end") != std::string::npos);
  CHECK(error_of("detector X1\n  category Safety\n  subcategory s\n  logic Q\n  query Bank\nend\n")
            .find("uppercase") != std::string::npos);
  CHECK(error_of("detector X1\n  category Safety\n  subcategory s\n  logic Q\n  query ${nope}\nend\n")
            .find("nope") != std::string::npos);
  CHECK(error_of("detector ALL\n  category Safety\n  subcategory s\n  logic Q\n  query a\nend\n") != "");
  try {
    parse_taxonomy("bogus line\n", "t.needs");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kValidation);
    CHECK(std::string(e.what()).find("t.needs:1") != std::string::npos);
  }
}

TEST_CASE("taxonomy: macros expand and query lines combine") {
  const auto tax = parse_taxonomy(
      "version 2\n"
      "macro shop = (?:amazon|ebay)\\.com\n"
      "detector K1\n  category Physiological\n  subcategory s\n  logic KD\n"
      "  query \\bsoap\\b\n  query \\bshampoo\\b\n  url ^${shop}\nend\n");
  REQUIRE(tax.detectors.size() == 1);
  CHECK(tax.version == "2");
  CompiledMatcherSet m(tax);
  CHECK(m.match("soap", std::string("ebay.com/x")).size() == 1);
  CHECK(m.match("shampoo", std::string("amazon.com")).size() == 1);
  CHECK(m.match("soap", std::string("walmart.com")).empty());
  CHECK(m.match("soap", std::nullopt).empty());
}

TEST_CASE("taxonomy: empty and single-detector taxonomies") {
  CompiledMatcherSet empty(parse_taxonomy("# nothing\n"));
  CHECK(empty.size() == 0);
  CHECK(empty.match("bandages", std::string("amazon.com")).empty());

  CompiledMatcherSet one(parse_taxonomy(
      "detector D1\n  category Cognitive\n  subcategory s\n  logic D\n  url ^coursera\\.org\nend\n"));
  CHECK(one.match("anything", std::string("coursera.org/learn")) == std::vector<std::uint32_t>{0});
  CHECK(one.match("coursera.org", std::nullopt).empty());
}

TEST_CASE("taxonomy: compiled sets stay deterministic") {
  const auto s = reference_matcher().stats();
  CHECK(s.deterministic);
  CHECK(s.query_patterns > 0);
  CHECK(s.url_patterns > 0);
}

TEST_CASE("taxonomy: matcher agrees with naive per-pattern search on 10k interactions") {
  const auto& tax = reference();
  oracle::NaiveMatcher naive(tax);
  oracle::InteractionSampler sampler(tax, 6);
  std::size_t agree = 0, any_match = 0;
  const std::size_t n = 10000;
  for (std::size_t i = 0; i < n; ++i) {
    const auto [q, url] = sampler.next();
    const auto got = reference_matcher().match(q, url);
    const auto want = naive.match(q, url);
    if (got == want) {
      ++agree;
    } else {
      CAPTURE(q);
      CHECK(got == want);
    }
    if (!want.empty()) ++any_match;
  }
  CHECK(agree == n);
  CHECK(any_match > n / 2);
}
