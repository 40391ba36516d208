#pragma once

// Random (query, clicked URL) pairs built from a taxonomy's own examples,
// their words, and a few near-miss URLs, so that most draws hit some detector
// and many sit on pattern boundaries.

#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "core/text.hpp"
#include "taxonomy/taxonomy.hpp"

namespace needscope::oracle {

class InteractionSampler {
 public:
  InteractionSampler(const NeedTaxonomy& tax, std::uint64_t seed) : rng_(seed) {
    for (const auto& d : tax.detectors) {
      for (const auto& ex : d.examples) {
        queries_.push_back(ex.query);
        if (ex.clicked_url) urls_.push_back(*ex.clicked_url);
        for (auto w : split(ex.query, ' ')) words_.emplace_back(w);
      }
    }
    for (const char* u : {"https://www.google.com/search?q=x", "en.wikipedia.org/wiki/Bank", "walmart.com",
                          "amazon.co.uk/dp/1", "notamazon.com/x", "ebay.com.evil.net", "target.com:8080/c"}) {
      urls_.push_back(u);
    }
  }

  std::pair<std::string, std::optional<std::string>> next() {
    std::string q;
    switch (rng_() % 3) {
      case 0: q = pick(queries_); break;
      case 1: q = pick(queries_) + " " + pick(words_); break;
      default:
        for (int k = 0, len = 1 + static_cast<int>(rng_() % 4); k < len; ++k) q += (k ? " " : "") + pick(words_);
    }
    std::optional<std::string> url;
    if (rng_() % 2) url = pick(urls_);
    return {normalize_text(q), url};
  }

 private:
  const std::string& pick(const std::vector<std::string>& v) { return v[rng_() % v.size()]; }

  std::mt19937_64 rng_;
  std::vector<std::string> queries_, urls_, words_;
};

}  // namespace needscope::oracle
