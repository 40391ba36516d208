#include <regex>

#include "core/error.hpp"
#include "doctest.h"
#include "oracles/random_pattern.hpp"
#include "taxonomy/multi_pattern.hpp"
#include "taxonomy/regex.hpp"

using namespace needscope;

namespace {

bool single(const std::string& pattern, const std::string& text) {
  rx::MultiPatternSet set({pattern});
  return !set.matching(text).empty();
}

}  // namespace

TEST_CASE("regex: literals and search semantics") {
  CHECK(single("band", "bandages"));
  CHECK(single("ages", "bandages"));
  CHECK_FALSE(single("bandz", "bandages"));
  CHECK(single("", "anything"));
  CHECK(single("", ""));
}

TEST_CASE("regex: anchors and word boundaries") {
  CHECK(single("^i feel", "i feel sad"));
  CHECK_FALSE(single("^feel", "i feel sad"));
  CHECK(single("sad$", "i feel sad"));
  CHECK_FALSE(single("feel$", "i feel sad"));
  CHECK(single("\\bfeel\\b", "i feel sad"));
  CHECK_FALSE(single("\\bfee\\b", "i feel sad"));
  CHECK(single("\\Bee", "i feel sad"));
  CHECK(single("^$", ""));
  CHECK_FALSE(single("^$", "x"));
  CHECK(single("\\b", "a"));
  CHECK_FALSE(single("\\b", ""));
  CHECK(single("\\B", ""));
}

TEST_CASE("regex: classes, repeats and alternation") {
  CHECK(single("^(https?://)?([a-z0-9-]+\\.)*amazon\\.", "https://www.amazon.com/s?k=x"));
  CHECK(single("^(https?://)?([a-z0-9-]+\\.)*amazon\\.", "amazon.com"));
  CHECK_FALSE(single("^(https?://)?([a-z0-9-]+\\.)*amazon\\.", "notamazon.com"));
  CHECK(single("a{3}", "xaaax"));
  CHECK_FALSE(single("a{3}", "xaax"));
  CHECK(single("^a{2,3}$", "aaa"));
  CHECK_FALSE(single("^a{2,3}$", "aaaa"));
  CHECK(single("cat|dog", "hotdog"));
  CHECK(single("[^a-z]", "abc1"));
  CHECK_FALSE(single("[^a-z]", "abc"));
  CHECK(single("\\x41", "A"));
  CHECK(single(".", "\xC3\xA9"));
  CHECK_FALSE(single("^.$", "\n"));
}

TEST_CASE("regex: rejected syntax names the offset") {
  for (const char* bad : {"(", ")", "a**", "(?=a)", "(?!a)", "(?<n>a)", "\\1", "[b-a]", "[]",
                          "a{2,1}", "\\q", "{", "a{", "*", "^*", "[", "\\b+"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(rx::parse(bad), Error);
  }
  try {
    rx::parse("ab(");
    FAIL("expected a parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kValidation);
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }
}

TEST_CASE("regex: uppercase literals are flagged") {
  CHECK(rx::parse("Amazon").has_uppercase_literal);
  CHECK(rx::parse("[A-Z]").has_uppercase_literal);
  CHECK_FALSE(rx::parse("amazon\\W").has_uppercase_literal);
}

TEST_CASE("regex: multi-pattern set reports every matching pattern") {
  rx::MultiPatternSet set({"foo", "bar", "^foo", "o+b", "zzz"});
  CHECK(set.matching("foobar") == std::vector<std::uint32_t>{0, 1, 2, 3});
  CHECK(set.matching("a foo") == std::vector<std::uint32_t>{0});
  CHECK(set.matching("").empty());
  CHECK(set.deterministic());
}

TEST_CASE("regex: empty set matches nothing") {
  rx::MultiPatternSet set(std::vector<std::string>{});
  CHECK(set.size() == 0);
  CHECK(set.matching("anything").empty());
}

TEST_CASE("regex: NFA fallback agrees with the DFA") {
  std::vector<std::string> patterns = {"a.{6}b", "(a|b)*c[ab]{4}", "\\bx.?1", "b{2,}$"};
  rx::MultiPatternSet dfa(patterns);
  rx::MultiPatternSet nfa(patterns, 4);
  REQUIRE(dfa.deterministic());
  REQUIRE_FALSE(nfa.deterministic());
  oracle::PatternGenerator gen(99);
  for (int i = 0; i < 2000; ++i) {
    std::string text = gen.text(24);
    CAPTURE(text);
    CHECK(dfa.matching(text) == nfa.matching(text));
  }
}

TEST_CASE("regex: differential against std::regex on random patterns") {
  oracle::PatternGenerator gen(20200316);
  int compared = 0;
  for (int round = 0; round < 300; ++round) {
    std::vector<std::string> patterns;
    while (patterns.size() < 4) {
      std::string p = gen.pattern();
      try {
        rx::parse(p);
      } catch (const Error&) {
        continue;
      }
      patterns.push_back(p);
    }
    rx::MultiPatternSet set(patterns);
    std::vector<std::regex> naive;
    for (const auto& p : patterns) naive.emplace_back(p, std::regex::ECMAScript);
    for (int t = 0; t < 40; ++t) {
      std::string text = gen.text(16);
      auto got = set.matching(text);
      std::vector<std::uint32_t> want;
      for (std::uint32_t k = 0; k < naive.size(); ++k) {
        if (std::regex_search(text, naive[k])) want.push_back(k);
      }
      if (got != want) {
        std::string detail;
        for (const auto& p : patterns) detail += "[" + p + "] ";
        CAPTURE(detail);
        CAPTURE(text);
        CHECK(got == want);
      }
      ++compared;
    }
  }
  CHECK(compared == 12000);
}
