#include "evaluation/evaluation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "core/error.hpp"
#include "core/text.hpp"
#include "log_model/interaction.hpp"

namespace needscope {

CategorySet category_bit(NeedCategory c) {
  return static_cast<CategorySet>(1u << static_cast<unsigned>(c));
}

int category_count(CategorySet s) { return std::popcount(static_cast<unsigned>(s)); }

std::string format_categories(CategorySet s) {
  std::string out;
  for (auto c : kAllCategories) {
    if (s & category_bit(c)) {
      if (!out.empty()) out += ';';
      out += category_name(c);
    }
  }
  return out;
}

CategorySet parse_categories(std::string_view text) {
  CategorySet s = 0;
  if (trim(text).empty()) return s;
  for (auto part : split(text, ';')) {
    auto name = trim(part);
    if (name.empty()) continue;
    auto c = parse_category(name);
    if (!c) throw Error(ErrorCode::kParse, "unknown category '" + std::string(name) + "'");
    s |= category_bit(*c);
  }
  return s;
}

CategorySet categories_of(const std::vector<std::uint32_t>& detectors, const NeedTaxonomy& tax) {
  CategorySet s = 0;
  for (auto d : detectors) s |= category_bit(tax.detectors.at(d).category);
  return s;
}

double example_based_precision(const std::vector<CategorySet>& predicted,
                               const std::vector<CategorySet>& truth,
                               const std::vector<std::int64_t>& weights) {
  if (predicted.size() != truth.size() || predicted.size() != weights.size()) {
    throw Error(ErrorCode::kInvalidArgument, "precision inputs differ in length");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (weights[i] < 1) throw Error(ErrorCode::kInvalidArgument, "weights must be at least 1");
    const int np = category_count(predicted[i]);
    if (np == 0) continue;
    const int hit = category_count(static_cast<CategorySet>(predicted[i] & truth[i]));
    num += static_cast<double>(weights[i]) * hit / np;
    den += static_cast<double>(weights[i]);
  }
  if (den == 0) throw Error(ErrorCode::kUndefined, "precision undefined: every prediction is empty");
  return num / den;
}

std::vector<LabeledTuple> parse_labeled_corpus(std::string_view tsv, std::string_view source) {
  std::vector<LabeledTuple> out;
  std::size_t line_no = 0;
  for (auto raw : split(tsv, '\n')) {
    ++line_no;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || line.front() == '#') continue;
    if (line_no == 1 && starts_with(line, "query\t")) continue;
    const auto where = std::string(source) + ":" + std::to_string(line_no) + ": ";
    auto f = split(line, '\t');
    if (f.size() != 4) {
      throw Error(ErrorCode::kParse, where + "wrong field count (" + std::to_string(f.size()) +
                                         ", want 4)");
    }
    LabeledTuple t;
    t.query = normalize_text(f[0]);
    if (t.query.empty()) throw Error(ErrorCode::kParse, where + "empty query");
    auto url = normalize_text(f[1]);
    if (!url.empty()) t.clicked_url = std::move(url);
    try {
      t.true_categories = parse_categories(f[2]);
      t.weight = parse_int(trim(f[3]), "weight");
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, where + e.what());
    }
    if (t.weight < 1) throw Error(ErrorCode::kParse, where + "weight must be at least 1");
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<LabeledTuple> load_labeled_corpus(const std::filesystem::path& path) {
  return parse_labeled_corpus(read_file(path), path.string());
}

PrecisionReport evaluate_precision(const std::vector<LabeledTuple>& corpus,
                                   const CompiledMatcherSet& matcher) {
  PrecisionReport r;
  std::vector<CategorySet> predicted, truth;
  std::vector<std::int64_t> weights;
  std::vector<std::uint32_t> hits;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& t = corpus[i];
    matcher.match(t.query, t.clicked_url, hits);
    const CategorySet p = categories_of(hits, matcher.taxonomy());
    predicted.push_back(p);
    truth.push_back(t.true_categories);
    weights.push_back(t.weight);
    r.interactions += t.weight;
    if (p) {
      ++r.predicted;
      r.predicted_interactions += t.weight;
      if ((p & t.true_categories) != p) r.imperfect.push_back(i);
    }
  }
  r.tuples = corpus.size();
  r.precision = example_based_precision(predicted, truth, weights);
  return r;
}

CorrelationResult trend_agreement(const std::vector<std::pair<Date, double>>& internal,
                                  const std::vector<std::pair<Date, double>>& external) {
  std::map<Date, double> ext(external.begin(), external.end());
  std::vector<double> x, y;
  for (const auto& [d, v] : internal) {
    auto it = ext.find(d);
    if (it == ext.end()) continue;
    x.push_back(v);
    y.push_back(it->second);
  }
  if (x.size() < 3) {
    throw Error(ErrorCode::kInsufficientData,
                "series share " + std::to_string(x.size()) + " date(s); at least 3 are needed");
  }
  auto normalize = [](std::vector<double>& v) {
    const double peak = *std::max_element(v.begin(), v.end());
    if (!(peak > 0)) throw Error(ErrorCode::kUndefined, "series maximum is not positive");
    for (auto& e : v) e /= peak;
  };
  normalize(x);
  normalize(y);
  return pearson(x, y);
}

TrendAgreementReport trend_agreement_table(std::string_view csv, std::string_view source) {
  std::map<std::string, std::pair<std::vector<std::pair<Date, double>>,
                                  std::vector<std::pair<Date, double>>>>
      series;
  std::size_t line_no = 0;
  for (auto raw : split(csv, '\n')) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line_no == 1 && starts_with(line, "keyword")) continue;
    const auto where = std::string(source) + ":" + std::to_string(line_no) + ": ";
    auto f = split(line, ',');
    if (f.size() != 4) throw Error(ErrorCode::kParse, where + "want keyword,date,internal,external");
    try {
      auto& s = series[std::string(trim(f[0]))];
      Date d = Date::parse(trim(f[1]));
      s.first.emplace_back(d, parse_double(trim(f[2]), "internal"));
      s.second.emplace_back(d, parse_double(trim(f[3]), "external"));
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, where + e.what());
    }
  }
  TrendAgreementReport report;
  std::vector<double> rs;
  for (const auto& [keyword, s] : series) {
    try {
      auto r = trend_agreement(s.first, s.second);
      report.keywords.push_back({keyword, r});
      rs.push_back(r.r);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUndefined && e.code() != ErrorCode::kInsufficientData) throw;
      report.warnings.push_back(keyword + ": " + e.what());
    }
  }
  if (!rs.empty()) {
    std::sort(rs.begin(), rs.end());
    const std::size_t n = rs.size();
    report.median_r = n % 2 ? rs[n / 2] : (rs[n / 2 - 1] + rs[n / 2]) / 2.0;
  }
  return report;
}

TrendAgreementReport trend_agreement_file(const std::filesystem::path& path) {
  return trend_agreement_table(read_file(path), path.string());
}

ClientRateReport client_rate_correlations(const std::vector<ZipProfile>& profiles) {
  if (profiles.size() < 3) {
    throw Error(ErrorCode::kInsufficientData, "client-rate correlation needs at least 3 ZIPs");
  }
  std::vector<double> rate;
  for (const auto& p : profiles) {
    if (!(p.population > 0)) throw Error(ErrorCode::kValidation, p.zip + ": population must be > 0");
    if (p.client_rate < 0) throw Error(ErrorCode::kValidation, p.zip + ": negative client rate");
    rate.push_back(p.client_rate);
  }
  std::vector<std::string> names = {"population"};
  for (const auto& [name, v] : profiles.front().columns) names.push_back(name);

  ClientRateReport report;
  for (const auto& name : names) {
    std::vector<double> col;
    for (const auto& p : profiles) {
      if (name == "population") {
        col.push_back(p.population);
        continue;
      }
      auto it = p.columns.find(name);
      if (it == p.columns.end()) {
        throw Error(ErrorCode::kValidation, p.zip + ": missing column " + name);
      }
      col.push_back(it->second);
    }
    try {
      report.columns.push_back({name, pearson(rate, col)});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUndefined) throw;
      report.warnings.push_back(name + ": zero variance, skipped");
    }
  }
  return report;
}

std::vector<ZipProfile> build_zip_profiles(const std::vector<std::filesystem::path>& interactions,
                                           const std::filesystem::path& demographics,
                                           std::vector<std::string>* warnings) {
  std::unordered_map<std::string, std::unordered_set<std::string>> clients;
  read_interactions(interactions, [&](SearchInteraction&& r) {
    clients[r.zip].insert(std::move(r.client_hash));
  });

  const auto text = read_file(demographics);
  std::vector<std::string> header;
  std::vector<ZipProfile> out;
  std::size_t line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    auto f = split(line, ',');
    const auto where = demographics.string() + ":" + std::to_string(line_no) + ": ";
    if (header.empty()) {
      for (auto h : f) header.emplace_back(trim(h));
      if (header.size() < 2 || header[0] != "zip" || header[1] != "population") {
        throw Error(ErrorCode::kParse, where + "header must start with zip,population");
      }
      continue;
    }
    if (f.size() != header.size()) throw Error(ErrorCode::kParse, where + "wrong field count");
    ZipProfile p;
    p.zip = std::string(trim(f[0]));
    if (!is_valid_zip(p.zip)) throw Error(ErrorCode::kParse, where + "invalid ZIP");
    try {
      p.population = parse_double(trim(f[1]), "population");
      for (std::size_t i = 2; i < f.size(); ++i) {
        p.columns[header[i]] = parse_double(trim(f[i]), header[i]);
      }
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, where + e.what());
    }
    if (!(p.population > 0)) throw Error(ErrorCode::kValidation, where + "population must be > 0");
    auto it = clients.find(p.zip);
    if (it == clients.end()) {
      if (warnings) warnings->push_back(p.zip + ": no interactions, skipped");
      continue;
    }
    p.client_rate = static_cast<double>(it->second.size()) / p.population;
    clients.erase(it);
    out.push_back(std::move(p));
  }
  if (warnings) {
    std::vector<std::string> orphan;
    for (const auto& [zip, set] : clients) orphan.push_back(zip);
    std::sort(orphan.begin(), orphan.end());
    for (const auto& z : orphan) warnings->push_back(z + ": no demographic row, skipped");
  }
  return out;
}

}  // namespace needscope
