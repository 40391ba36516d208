#include "classifier/classifier.hpp"

#include <algorithm>
#include <unordered_map>

#include "core/error.hpp"
#include "core/parallel.hpp"
#include "core/text.hpp"

namespace needscope {

namespace {

constexpr std::size_t kBatch = 8192;

}  // namespace

std::vector<NeedTag> tags_of(const std::vector<std::uint32_t>& detectors,
                             const NeedTaxonomy& tax) {
  std::vector<NeedTag> out;
  out.reserve(detectors.size());
  for (auto i : detectors) {
    const auto& d = tax.detectors.at(i);
    out.push_back(NeedTag{d.id, d.category, d.subcategory});
  }
  return out;
}

std::vector<NeedTag> classify(const SearchInteraction& x, const CompiledMatcherSet& m) {
  return tags_of(m.match(x.query, x.clicked_url), m.taxonomy());
}

CorpusClassification classify_corpus(std::vector<SearchInteraction> records,
                                     const CompiledMatcherSet& m) {
  CorpusClassification out;
  out.records.resize(records.size());
  const std::size_t batches = (records.size() + kBatch - 1) / kBatch;
  std::vector<std::size_t> matched(batches, 0);
  parallel_for(batches, [&](std::size_t b) {
    const std::size_t end = std::min(records.size(), (b + 1) * kBatch);
    for (std::size_t i = b * kBatch; i < end; ++i) {
      auto& t = out.records[i];
      m.match(records[i].query, records[i].clicked_url, t.detectors);
      t.interaction = std::move(records[i]);
      if (!t.detectors.empty()) ++matched[b];
    }
  });
  for (auto n : matched) out.matched += n;
  return out;
}

std::string join_detector_ids(const std::vector<std::uint32_t>& detectors,
                              const NeedTaxonomy& tax) {
  std::string out;
  for (std::size_t k = 0; k < detectors.size(); ++k) {
    if (k) out += ';';
    out += tax.detectors.at(detectors[k]).id;
  }
  return out;
}

std::string serialize_tagged(const TaggedInteraction& t, const NeedTaxonomy& tax) {
  return serialize_interaction(t.interaction) + '\t' + join_detector_ids(t.detectors, tax);
}

TaggedInteraction parse_tagged(std::string_view line, const NeedTaxonomy& tax,
                               std::size_t line_number) {
  auto tab = line.rfind('\t');
  if (tab == std::string_view::npos) {
    throw Error(ErrorCode::kParse,
                "line " + std::to_string(line_number) + ": missing needs column");
  }
  TaggedInteraction t;
  t.interaction = parse_interaction(line.substr(0, tab), line_number);
  auto ids = line.substr(tab + 1);
  if (!ids.empty()) {
    for (auto id : split(ids, ';')) {
      auto idx = tax.find(id);
      if (!idx) {
        throw Error(ErrorCode::kParse, "line " + std::to_string(line_number) +
                                           ": detector '" + std::string(id) +
                                           "' is not in the taxonomy");
      }
      t.detectors.push_back(static_cast<std::uint32_t>(*idx));
    }
    std::sort(t.detectors.begin(), t.detectors.end());
    t.detectors.erase(std::unique(t.detectors.begin(), t.detectors.end()), t.detectors.end());
  }
  return t;
}

void read_tagged(const std::vector<std::filesystem::path>& paths, const NeedTaxonomy& tax,
                 const std::function<void(TaggedInteraction&&)>& sink) {
  std::string line;
  for (const auto& path : paths) {
    LineReader reader(path);
    while (reader.next(line)) {
      if (line.empty()) continue;
      if (reader.line_number() == 1 && line == kTaggedHeader) continue;
      try {
        sink(parse_tagged(line, tax, reader.line_number()));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kParse) throw;
        throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
      }
    }
  }
}

ClassifyFilesReport classify_files(const std::vector<std::filesystem::path>& inputs,
                                   const CompiledMatcherSet& m, const ObservationConfig& cfg,
                                   const std::filesystem::path& output) {
  cfg.validate();
  ClassifyFilesReport report;
  ZipMonthCounts counts;
  read_interactions(inputs, [&](SearchInteraction&& r) {
    ++report.read;
    if (cfg.observed(r.date())) counts.add(r);
  });

  AtomicFileWriter writer(output);
  auto& out = writer.stream();
  out << kTaggedHeader << '\n';
  std::vector<SearchInteraction> batch;
  auto flush = [&] {
    auto result = classify_corpus(std::move(batch), m);
    report.classified += result.records.size();
    report.matched += result.matched;
    for (const auto& t : result.records) out << serialize_tagged(t, m.taxonomy()) << '\n';
    batch.clear();
  };
  read_interactions(inputs, [&](SearchInteraction&& r) {
    if (!cfg.observed(r.date())) {
      ++report.out_of_range;
      return;
    }
    if (!counts.admits(r, cfg.anonymity_threshold)) {
      ++report.below_anonymity_threshold;
      return;
    }
    batch.push_back(std::move(r));
    if (batch.size() >= kBatch * std::max(1u, thread_limit())) flush();
  });
  flush();
  if (!out) throw Error(ErrorCode::kIo, "failed writing " + output.string());
  writer.commit();
  return report;
}

}  // namespace needscope
