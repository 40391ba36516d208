#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "correlation/correlation.hpp"
#include "taxonomy/matcher.hpp"

namespace needscope {

// Bit i set for kAllCategories[i].
using CategorySet = std::uint8_t;

CategorySet category_bit(NeedCategory c);
int category_count(CategorySet s);
// Semicolon-joined category names in canonical order; "" when empty.
std::string format_categories(CategorySet s);
CategorySet parse_categories(std::string_view text);
CategorySet categories_of(const std::vector<std::uint32_t>& detectors, const NeedTaxonomy& tax);

// Weighted mean over examples with a non-empty prediction of
// |predicted ∩ truth| / |predicted|. Throws Error(kInvalidArgument) on length
// mismatch or a weight below 1, Error(kUndefined) when every prediction is
// empty.
double example_based_precision(const std::vector<CategorySet>& predicted,
                               const std::vector<CategorySet>& truth,
                               const std::vector<std::int64_t>& weights);

struct LabeledTuple {
  std::string query;
  std::optional<std::string> clicked_url;
  CategorySet true_categories = 0;
  std::int64_t weight = 1;
};

// TSV query, clicked_url, categories (semicolon list), weight; header optional.
std::vector<LabeledTuple> load_labeled_corpus(const std::filesystem::path& path);
std::vector<LabeledTuple> parse_labeled_corpus(std::string_view tsv,
                                               std::string_view source = "<memory>");

struct PrecisionReport {
  double precision = 0.0;
  std::size_t tuples = 0;
  std::size_t predicted = 0;          // tuples with a non-empty prediction
  std::int64_t interactions = 0;      // Σ weight
  std::int64_t predicted_interactions = 0;
  std::vector<std::size_t> imperfect;  // tuples scoring below 1
};

PrecisionReport evaluate_precision(const std::vector<LabeledTuple>& corpus,
                                   const CompiledMatcherSet& matcher);

// Both series max-normalized over their shared dates, then Pearson r.
CorrelationResult trend_agreement(const std::vector<std::pair<Date, double>>& internal,
                                  const std::vector<std::pair<Date, double>>& external);

struct KeywordAgreement {
  std::string keyword;
  CorrelationResult result;
};

struct TrendAgreementReport {
  std::vector<KeywordAgreement> keywords;
  std::vector<std::string> warnings;
  std::optional<double> median_r;
};

// CSV keyword,date,internal,external.
TrendAgreementReport trend_agreement_file(const std::filesystem::path& path);
TrendAgreementReport trend_agreement_table(std::string_view csv, std::string_view source);

struct ZipProfile {
  std::string zip;
  double client_rate = 0.0;
  double population = 0.0;
  std::map<std::string, double> columns;
};

struct ColumnCorrelation {
  std::string column;
  CorrelationResult result;
};

struct ClientRateReport {
  std::vector<ColumnCorrelation> columns;
  std::vector<std::string> warnings;
};

// Pearson r between client_rate and every demographic column (population
// included). Zero-variance columns are skipped with a warning.
ClientRateReport client_rate_correlations(const std::vector<ZipProfile>& profiles);

// Demographics CSV: zip, population, then any numeric columns. client_rate is
// the distinct client_hash count per ZIP in `interactions` over population;
// ZIPs absent from either side are skipped with a warning.
std::vector<ZipProfile> build_zip_profiles(const std::vector<std::filesystem::path>& interactions,
                                           const std::filesystem::path& demographics,
                                           std::vector<std::string>* warnings);

}  // namespace needscope
