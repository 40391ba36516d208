#include "taxonomy/matcher.hpp"

#include <map>

namespace needscope {

namespace {

std::int32_t slot_for(const std::string& pattern, std::map<std::string, std::int32_t>& index,
                      std::vector<std::string>& patterns) {
  auto [it, inserted] = index.try_emplace(pattern, static_cast<std::int32_t>(patterns.size()));
  if (inserted) patterns.push_back(pattern);
  return it->second;
}

}  // namespace

CompiledMatcherSet::CompiledMatcherSet(NeedTaxonomy taxonomy)
    : taxonomy_(std::make_shared<const NeedTaxonomy>(std::move(taxonomy))) {
  std::map<std::string, std::int32_t> query_index, url_index;
  std::vector<std::string> query_patterns, url_patterns;
  for (const auto& d : taxonomy_->detectors) {
    Rule rule{d.logic};
    if (d.query_pattern) rule.query_slot = slot_for(*d.query_pattern, query_index, query_patterns);
    if (d.url_pattern) rule.url_slot = slot_for(*d.url_pattern, url_index, url_patterns);
    rules_.push_back(rule);
  }
  query_set_ = rx::MultiPatternSet(query_patterns);
  url_set_ = rx::MultiPatternSet(url_patterns);
}

void CompiledMatcherSet::match(std::string_view query,
                               const std::optional<std::string>& clicked_url,
                               std::vector<std::uint32_t>& out) const {
  out.clear();
  if (rules_.empty()) return;
  thread_local std::vector<std::uint8_t> query_hits;
  thread_local std::vector<std::uint8_t> url_hits;
  query_hits.assign(query_set_.size(), 0);
  url_hits.assign(url_set_.size(), 0);
  query_set_.scan(query, query_hits);
  if (clicked_url) url_set_.scan(*clicked_url, url_hits);

  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const Rule& r = rules_[i];
    bool hit = false;
    switch (r.logic) {
      case DetectorLogic::kQuery: hit = query_hits[r.query_slot]; break;
      case DetectorLogic::kDomain: hit = clicked_url && url_hits[r.url_slot]; break;
      case DetectorLogic::kKeywordDomain:
        hit = clicked_url && query_hits[r.query_slot] && url_hits[r.url_slot];
        break;
    }
    if (hit) out.push_back(static_cast<std::uint32_t>(i));
  }
}

std::vector<std::uint32_t> CompiledMatcherSet::match(
    std::string_view query, const std::optional<std::string>& clicked_url) const {
  std::vector<std::uint32_t> out;
  match(query, clicked_url, out);
  return out;
}

CompiledMatcherSet::Stats CompiledMatcherSet::stats() const {
  Stats s;
  s.query_patterns = query_set_.size();
  s.url_patterns = url_set_.size();
  s.query_dfa_states = query_set_.dfa_state_count();
  s.url_dfa_states = url_set_.dfa_state_count();
  s.deterministic = (query_set_.size() == 0 || query_set_.deterministic()) &&
                    (url_set_.size() == 0 || url_set_.deterministic());
  return s;
}

std::vector<ExampleIssue> check_examples(const CompiledMatcherSet& matcher) {
  std::vector<ExampleIssue> issues;
  const auto& detectors = matcher.taxonomy().detectors;
  std::vector<std::uint32_t> hits;
  for (std::uint32_t i = 0; i < detectors.size(); ++i) {
    for (const auto& ex : detectors[i].examples) {
      matcher.match(ex.query, ex.clicked_url, hits);
      ExampleIssue issue;
      issue.detector_id = detectors[i].id;
      issue.example = ex;
      issue.own_detector_missed = true;
      for (auto h : hits) {
        if (h == i) {
          issue.own_detector_missed = false;
        } else {
          issue.also_matched.push_back(detectors[h].id);
        }
      }
      if (issue.own_detector_missed || !issue.also_matched.empty()) {
        issues.push_back(std::move(issue));
      }
    }
  }
  return issues;
}

}  // namespace needscope
