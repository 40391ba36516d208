#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "log_model/interaction.hpp"
#include "taxonomy/matcher.hpp"

namespace needscope {

struct NeedTag {
  std::string detector_id;
  NeedCategory category;
  std::string subcategory;

  friend bool operator==(const NeedTag&, const NeedTag&) = default;
};

// Detector indices refer to CompiledMatcherSet::taxonomy(); ascending and
// unique, which is the dedup-by-id rule.
struct TaggedInteraction {
  SearchInteraction interaction;
  std::vector<std::uint32_t> detectors;
};

std::vector<NeedTag> classify(const SearchInteraction& x, const CompiledMatcherSet& m);
std::vector<NeedTag> tags_of(const std::vector<std::uint32_t>& detectors, const NeedTaxonomy& tax);

struct CorpusClassification {
  std::vector<TaggedInteraction> records;
  std::size_t matched = 0;

  double coverage() const {
    return records.empty() ? 0.0 : static_cast<double>(matched) / records.size();
  }
};

// Order-preserving; runs on up to thread_limit() workers with results
// identical to a serial pass.
CorpusClassification classify_corpus(std::vector<SearchInteraction> records,
                                     const CompiledMatcherSet& m);

// Semicolon-joined detector ids; empty when untagged.
std::string join_detector_ids(const std::vector<std::uint32_t>& detectors, const NeedTaxonomy& tax);

inline constexpr std::string_view kTaggedHeader =
    "timestamp\tquery\tclicked_url\tzip\tclient_hash\tneeds";

std::string serialize_tagged(const TaggedInteraction& t, const NeedTaxonomy& tax);
// Throws Error(kParse) on a malformed line or an id unknown to `tax`.
TaggedInteraction parse_tagged(std::string_view line, const NeedTaxonomy& tax,
                               std::size_t line_number = 0);
void read_tagged(const std::vector<std::filesystem::path>& paths, const NeedTaxonomy& tax,
                 const std::function<void(TaggedInteraction&&)>& sink);

struct ClassifyFilesReport {
  std::size_t read = 0;
  std::size_t out_of_range = 0;
  std::size_t below_anonymity_threshold = 0;
  std::size_t classified = 0;
  std::size_t matched = 0;

  double coverage() const {
    return classified == 0 ? 0.0 : static_cast<double>(matched) / classified;
  }
};

// Two passes over the inputs: per (ZIP, month) counts first, then parse,
// filter, classify in parallel batches and write the tagged file atomically.
// Records outside the observation ranges are dropped before counting.
ClassifyFilesReport classify_files(const std::vector<std::filesystem::path>& inputs,
                                   const CompiledMatcherSet& m, const ObservationConfig& cfg,
                                   const std::filesystem::path& output);

}  // namespace needscope
