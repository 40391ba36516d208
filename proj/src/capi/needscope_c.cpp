#include "needscope/needscope.h"

#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/parallel.hpp"
#include "core/text.hpp"
#include "correlation/correlation.hpp"
#include "pipeline/manifest.hpp"
#include "pipeline/pipeline.hpp"
#include "pipeline/stages.hpp"
#include "taxonomy/matcher.hpp"

using namespace needscope;
using nlohmann::json;

struct ns_taxonomy {
  NeedTaxonomy taxonomy;
};

struct ns_matcher {
  CompiledMatcherSet matcher;
};

namespace {

thread_local std::string g_last_error;

ns_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return NS_E_INVALID_ARGUMENT;
    case ErrorCode::kConfig: return NS_E_CONFIG;
    case ErrorCode::kIo: return NS_E_IO;
    case ErrorCode::kParse: return NS_E_PARSE;
    case ErrorCode::kValidation: return NS_E_VALIDATION;
    case ErrorCode::kUndefined: return NS_E_UNDEFINED;
    case ErrorCode::kOutOfRange: return NS_E_OUT_OF_RANGE;
    case ErrorCode::kInsufficientData: return NS_E_INSUFFICIENT_DATA;
    case ErrorCode::kInternal: return NS_E_INTERNAL;
  }
  return NS_E_INTERNAL;
}

template <typename F>
ns_status guarded(F&& fn) {
  try {
    fn();
    g_last_error.clear();
    return NS_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return NS_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return NS_E_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw Error(ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(const json& report, char** out) {
  if (out) *out = copy_string(report.dump(2));
}

std::string str(const char* s, const char* fallback = "") { return s ? s : fallback; }

fs::path path(const char* s) { return s ? fs::path(s) : fs::path(); }

std::vector<fs::path> paths(const char* const* list, size_t n) {
  if (n && !list) throw Error(ErrorCode::kInvalidArgument, "path list is NULL");
  std::vector<fs::path> out;
  for (size_t i = 0; i < n; ++i) {
    require(list[i], "path");
    out.emplace_back(list[i]);
  }
  return out;
}

ObservationConfig observation(const ns_observation& o) {
  ObservationConfig obs;
  if (o.range_2019) obs.range_2019 = DateRange::parse(o.range_2019);
  if (o.range_2020) obs.range_2020 = DateRange::parse(o.range_2020);
  if (o.anonymity_threshold) obs.anonymity_threshold = o.anonymity_threshold;
  return obs;
}

Windows windows(const ns_windows& w) {
  Windows out;
  if (w.baseline) out.baseline_2020 = DateRange::parse(w.baseline);
  if (w.pandemic_start) out.pandemic_start = Date::parse(w.pandemic_start);
  if (w.initial) out.initial_window = DateRange::parse(w.initial);
  if (w.longterm) out.longterm_window = DateRange::parse(w.longterm);
  return out;
}

// Date and range parse failures in options are configuration errors.
template <typename T, typename F>
T option(F&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    throw Error(ErrorCode::kConfig, e.what());
  }
}

}  // namespace

extern "C" {

const char* ns_version(void) { return kToolVersion.data(); }

const char* ns_status_name(ns_status status) {
  switch (status) {
    case NS_OK: return "ok";
    case NS_E_INVALID_ARGUMENT: return "invalid argument";
    case NS_E_CONFIG: return "configuration error";
    case NS_E_IO: return "I/O error";
    case NS_E_PARSE: return "parse error";
    case NS_E_VALIDATION: return "validation error";
    case NS_E_UNDEFINED: return "undefined";
    case NS_E_OUT_OF_RANGE: return "out of range";
    case NS_E_INSUFFICIENT_DATA: return "insufficient data";
    case NS_E_INTERNAL: return "internal error";
  }
  return "unknown";
}

const char* ns_last_error(void) { return g_last_error.c_str(); }

int ns_exit_code(ns_status status) {
  if (status == NS_OK) return 0;
  if (status == NS_E_CONFIG || status == NS_E_INVALID_ARGUMENT) return 2;
  return 1;
}

void ns_string_free(char* s) { std::free(s); }

ns_status ns_set_threads(unsigned threads) {
  return guarded([&] { set_thread_limit(threads); });
}

ns_status ns_set_command_line(int argc, const char* const* argv) {
  return guarded([&] {
    if (argc < 0) throw Error(ErrorCode::kInvalidArgument, "argc is negative");
    if (argc) require(argv, "argv");
    std::vector<std::string> args;
    for (int i = 0; i < argc; ++i) args.emplace_back(argv[i] ? argv[i] : "");
    set_command_line(std::move(args));
  });
}

ns_status ns_taxonomy_load(const char* p, ns_taxonomy** out) {
  return guarded([&] {
    require(p, "path");
    require(out, "out");
    *out = nullptr;
    require_input_file(p, "taxonomy");
    *out = new ns_taxonomy{load_taxonomy(p)};
  });
}

ns_status ns_taxonomy_parse(const char* text, size_t length, ns_taxonomy** out) {
  return guarded([&] {
    if (length) require(text, "text");
    require(out, "out");
    *out = nullptr;
    *out = new ns_taxonomy{parse_taxonomy(std::string_view(text ? text : "", length))};
  });
}

void ns_taxonomy_free(ns_taxonomy* taxonomy) { delete taxonomy; }

size_t ns_taxonomy_size(const ns_taxonomy* taxonomy) {
  return taxonomy ? taxonomy->taxonomy.detectors.size() : 0;
}

ns_status ns_taxonomy_stats(const ns_taxonomy* taxonomy, char** report) {
  return guarded([&] {
    require(taxonomy, "taxonomy");
    const auto& tax = taxonomy->taxonomy;
    json categories = json::object(), logic = json::object();
    for (auto c : kAllCategories) categories[std::string(category_name(c))] = 0;
    for (auto l : {DetectorLogic::kQuery, DetectorLogic::kDomain, DetectorLogic::kKeywordDomain}) {
      logic[std::string(logic_name(l))] = 0;
    }
    std::size_t examples = 0;
    for (const auto& d : tax.detectors) {
      categories[std::string(category_name(d.category))] = categories[std::string(category_name(d.category))].get<int>() + 1;
      logic[std::string(logic_name(d.logic))] = logic[std::string(logic_name(d.logic))].get<int>() + 1;
      examples += d.examples.size();
    }
    const CompiledMatcherSet matcher(tax);
    const auto s = matcher.stats();
    emit({{"version", tax.version},
          {"detectors", tax.detectors.size()},
          {"macros", tax.macros.size()},
          {"examples", examples},
          {"categories", categories},
          {"logic", logic},
          {"query_patterns", s.query_patterns},
          {"url_patterns", s.url_patterns},
          {"query_dfa_states", s.query_dfa_states},
          {"url_dfa_states", s.url_dfa_states},
          {"deterministic", s.deterministic}},
         report);
  });
}

ns_status ns_taxonomy_self_check(const ns_taxonomy* taxonomy, char** report) {
  return guarded([&] {
    require(taxonomy, "taxonomy");
    const CompiledMatcherSet matcher(taxonomy->taxonomy);
    json issues = json::array();
    for (const auto& i : check_examples(matcher)) {
      issues.push_back({{"detector", i.detector_id},
                        {"query", i.example.query},
                        {"clicked_url", i.example.clicked_url ? json(*i.example.clicked_url) : json(nullptr)},
                        {"own_detector_missed", i.own_detector_missed},
                        {"also_matched", i.also_matched}});
    }
    emit({{"detectors", taxonomy->taxonomy.detectors.size()}, {"issues", issues}}, report);
  });
}

ns_status ns_matcher_compile(const ns_taxonomy* taxonomy, ns_matcher** out) {
  return guarded([&] {
    require(taxonomy, "taxonomy");
    require(out, "out");
    *out = nullptr;
    *out = new ns_matcher{CompiledMatcherSet(taxonomy->taxonomy)};
  });
}

void ns_matcher_free(ns_matcher* matcher) { delete matcher; }

ns_status ns_matcher_classify(const ns_matcher* matcher, const char* query, const char* clicked_url,
                              char** detector_ids) {
  return guarded([&] {
    require(matcher, "matcher");
    require(query, "query");
    require(detector_ids, "detector_ids");
    std::optional<std::string> url;
    if (clicked_url) {
      auto u = normalize_text(clicked_url);
      if (!u.empty()) url = std::move(u);
    }
    const auto hits = matcher->matcher.match(normalize_text(query), url);
    *detector_ids = copy_string(join_detector_ids(hits, matcher->matcher.taxonomy()));
  });
}

ns_status ns_relative_change(double e_t2_2020, double e_t1_2020, double e_t2_2019, double e_t1_2019,
                             double* c) {
  return guarded([&] {
    require(c, "c");
    *c = relative_change(e_t2_2020, e_t1_2020, e_t2_2019, e_t1_2019);
  });
}

double ns_percent_change(double c) { return percent_change(c); }

ns_status ns_align_to_prior_year(const char* date, char* out) {
  return guarded([&] {
    require(date, "date");
    require(out, "out");
    const auto s = align_to_prior_year(Date::parse(date), ObservationConfig{}.range_2019).to_string();
    std::memcpy(out, s.c_str(), s.size() + 1);
  });
}

ns_status ns_pearson(const double* x, const double* y, size_t n, double* r, double* p) {
  return guarded([&] {
    if (n) {
      require(x, "x");
      require(y, "y");
    }
    const auto res = pearson(std::vector<double>(x, x + n), std::vector<double>(y, y + n));
    if (r) *r = res.r;
    if (p) *p = res.p;
  });
}

ns_status ns_stage_gen(const ns_gen_options* o, char** report) {
  return guarded([&] {
    require(o, "options");
    GenerateParams p;
    p.config = path(o->config);
    p.out_dir = path(o->out_dir);
    if (p.out_dir.empty()) throw Error(ErrorCode::kConfig, "out-dir: no path given");
    if (o->override_seed) p.seed = o->seed;
    emit(run_generate(p), report);
  });
}

ns_status ns_stage_classify(const ns_classify_options* o, char** report) {
  return guarded([&] {
    require(o, "options");
    ClassifyParams p;
    p.taxonomy = path(o->taxonomy);
    p.inputs = paths(o->inputs, o->n_inputs);
    p.obs = option<ObservationConfig>([&] { return observation(o->observation); });
    p.output = path(o->output);
    emit(run_classify(p), report);
  });
}

ns_status ns_stage_aggregate(const ns_aggregate_options* o, char** report) {
  return guarded([&] {
    require(o, "options");
    AggregateParams p;
    p.taxonomy = path(o->taxonomy);
    p.tagged = paths(o->tagged, o->n_tagged);
    p.crosswalk = path(o->crosswalk);
    auto geo = parse_geo_level(str(o->geo, "zip"));
    if (!geo) throw Error(ErrorCode::kConfig, "geo: expected zip, county, state or national");
    auto time = parse_time_resolution(str(o->time, "day"));
    if (!time) throw Error(ErrorCode::kConfig, "time: expected day or week");
    p.geo = *geo;
    p.time = *time;
    p.output = path(o->output);
    emit(run_aggregate(p), report);
  });
}

ns_status ns_stage_trend(const ns_trend_options* o, char** report) {
  return guarded([&] {
    require(o, "options");
    require(o->need, "need");
    TrendParams p;
    p.cube = path(o->cube);
    p.crosswalk = path(o->crosswalk);
    p.need = o->need;
    p.geo = str(o->geo, "US");
    p.obs = option<ObservationConfig>([&] { return observation(o->observation); });
    p.windows = option<Windows>([&] { return windows(o->windows); });
    if (o->smooth >= 0) p.smooth = o->smooth;
    if (o->n_boot >= 0) p.n_boot = o->n_boot;
    if (o->level != 0) p.level = o->level;
    if (!(p.level > 0 && p.level < 1)) throw Error(ErrorCode::kConfig, "level: must lie in (0, 1)");
    p.seed = o->seed;
    p.laplace = o->laplace;
    if (o->scheme) p.scheme = parse_bootstrap_scheme(o->scheme);
    p.output = path(o->output);
    p.geo = option<std::string>([&] { return GeoKey::parse(p.geo).to_string(); });
    emit(run_trend(p), report);
  });
}

ns_status ns_stage_policy(const ns_policy_options* o, char** report) {
  return guarded([&] {
    require(o, "options");
    require(o->need, "need");
    PolicyParams p;
    p.cube = path(o->cube);
    p.crosswalk = path(o->crosswalk);
    p.policies = path(o->policies);
    p.need = o->need;
    p.obs = option<ObservationConfig>([&] { return observation(o->observation); });
    p.windows = option<Windows>([&] { return windows(o->windows); });
    p.laplace = o->laplace;
    p.output = path(o->output);
    emit(run_policy(p), report);
  });
}

ns_status ns_stage_external(const ns_external_options* o, char** report) {
  return guarded([&] {
    require(o, "options");
    require(o->need, "need");
    ExternalParams p;
    p.cube = path(o->cube);
    p.crosswalk = path(o->crosswalk);
    p.external = path(o->external);
    p.need = o->need;
    p.geo = option<std::string>([&] { return GeoKey::parse(str(o->geo, "US")).to_string(); });
    p.mode = str(o->mode, "auto");
    p.obs = option<ObservationConfig>([&] { return observation(o->observation); });
    p.windows = option<Windows>([&] { return windows(o->windows); });
    p.output = path(o->output);
    emit(run_external(p), report);
  });
}

ns_status ns_stage_eval_precision(const ns_precision_options* o, char** report) {
  return guarded([&] {
    require(o, "options");
    PrecisionParams p;
    p.taxonomy = path(o->taxonomy);
    p.corpus = path(o->corpus);
    p.output = path(o->output);
    emit(run_eval_precision(p), report);
  });
}

ns_status ns_stage_eval_trends(const ns_trend_agreement_options* o, char** report) {
  return guarded([&] {
    require(o, "options");
    TrendAgreementParams p;
    p.table = path(o->table);
    p.output = path(o->output);
    emit(run_eval_trends(p), report);
  });
}

ns_status ns_stage_eval_clientrate(const ns_clientrate_options* o, char** report) {
  return guarded([&] {
    require(o, "options");
    ClientRateParams p;
    p.interactions = paths(o->inputs, o->n_inputs);
    p.demographics = path(o->demographics);
    p.output = path(o->output);
    emit(run_eval_clientrate(p), report);
  });
}

ns_status ns_pipeline_run(const char* config, const char* out_dir, char** report) {
  return guarded([&] {
    require(config, "config");
    if (!out_dir || !*out_dir) throw Error(ErrorCode::kConfig, "out-dir: no path given");
    const auto cfg = load_pipeline_config(config);
    emit(run_pipeline(cfg, out_dir), report);
  });
}

}  // extern "C"
