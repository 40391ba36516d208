#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "taxonomy/multi_pattern.hpp"
#include "taxonomy/taxonomy.hpp"

namespace needscope {

// All query patterns of a taxonomy compiled into one multi-pattern scanner and
// all URL patterns into another; each detector then applies its Q/D/KD rule to
// the two hit vectors. Identical pattern strings share one slot.
//
// Immutable after construction and safe to share across threads.
class CompiledMatcherSet {
 public:
  explicit CompiledMatcherSet(NeedTaxonomy taxonomy);

  const NeedTaxonomy& taxonomy() const { return *taxonomy_; }
  std::size_t size() const { return rules_.size(); }

  // Appends the indices (ascending) of matching detectors to `out` after
  // clearing it. Inputs are expected to be normalized already.
  void match(std::string_view query, const std::optional<std::string>& clicked_url,
             std::vector<std::uint32_t>& out) const;
  std::vector<std::uint32_t> match(std::string_view query,
                                   const std::optional<std::string>& clicked_url) const;

  struct Stats {
    std::size_t query_patterns = 0;
    std::size_t url_patterns = 0;
    std::size_t query_dfa_states = 0;
    std::size_t url_dfa_states = 0;
    bool deterministic = true;
  };
  Stats stats() const;

 private:
  struct Rule {
    DetectorLogic logic;
    std::int32_t query_slot = -1;
    std::int32_t url_slot = -1;
  };

  std::shared_ptr<const NeedTaxonomy> taxonomy_;
  rx::MultiPatternSet query_set_;
  rx::MultiPatternSet url_set_;
  std::vector<Rule> rules_;
};

// A bundled example that does not classify to exactly its own detector.
struct ExampleIssue {
  std::string detector_id;
  DetectorExample example;
  bool own_detector_missed = false;
  std::vector<std::string> also_matched;
};

std::vector<ExampleIssue> check_examples(const CompiledMatcherSet& matcher);

}  // namespace needscope
