#include "pipeline/pipeline.hpp"

#include <set>

#include "core/error.hpp"
#include "core/text.hpp"
#include "pipeline/manifest.hpp"
#include "synthgen/generator.hpp"

namespace needscope {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kConfig, "pipeline config: " + field + ": " + why);
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& field) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    config_error(field, "missing or wrong type");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_relative() ? base / path : path;
}

fs::path get_path(const json& j, const std::string& key, const std::string& field, const fs::path& base) {
  auto p = get<std::string>(j, key, field);
  if (p.empty()) config_error(field, "empty path");
  return resolve(base, p);
}

void check_file(const fs::path& path, const std::string& field) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) config_error(field, "file '" + path.string() + "' does not exist");
}

template <typename F>
auto stage(const std::string& name, F&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), "stage " + name + ": " + e.what());
  }
}

}  // namespace

std::string geo_file_tag(std::string_view geo) {
  std::string out(geo);
  for (auto& c : out) {
    if (c == ':' || c == '/') c = '-';
  }
  return out;
}

PipelineConfig parse_pipeline_config(std::string_view text, const fs::path& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, "pipeline config is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "pipeline config must be a JSON object");
  const fs::path base = source.parent_path();
  PipelineConfig cfg;
  cfg.source = source;
  if (j.contains("seed")) cfg.seed = get<std::uint64_t>(j, "seed", "seed");
  if (!j.contains("taxonomy")) config_error("taxonomy", "missing");
  cfg.taxonomy = get_path(j, "taxonomy", "taxonomy", base);
  check_file(cfg.taxonomy, "taxonomy");

  if (j.contains("generator")) {
    cfg.generator = get_path(j, "generator", "generator", base);
    check_file(cfg.generator, "generator");
  }
  if (j.contains("inputs")) {
    const auto list = get<std::vector<std::string>>(j, "inputs", "inputs");
    for (std::size_t i = 0; i < list.size(); ++i) {
      cfg.inputs.push_back(resolve(base, list[i]));
      check_file(cfg.inputs.back(), "inputs[" + std::to_string(i) + "]");
    }
  }
  if (cfg.generator.empty() == cfg.inputs.empty()) {
    config_error("inputs", "give exactly one of 'generator' or 'inputs'");
  }

  if (!cfg.generator.empty()) cfg.obs = load_generator_config(cfg.generator).obs;
  if (j.contains("observation")) {
    const auto& o = j["observation"];
    try {
      if (o.contains("range_2019")) cfg.obs.range_2019 = DateRange::parse(get<std::string>(o, "range_2019", "observation.range_2019"));
      if (o.contains("range_2020")) cfg.obs.range_2020 = DateRange::parse(get<std::string>(o, "range_2020", "observation.range_2020"));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kConfig) throw;
      config_error("observation", e.what());
    }
    if (o.contains("anonymity_threshold")) {
      cfg.obs.anonymity_threshold = get<std::int64_t>(o, "anonymity_threshold", "observation.anonymity_threshold");
    }
  }
  try {
    cfg.obs.validate();
  } catch (const Error& e) {
    config_error("observation", e.what());
  }

  if (j.contains("windows")) {
    const auto& w = j["windows"];
    try {
      if (w.contains("baseline")) cfg.windows.baseline_2020 = DateRange::parse(get<std::string>(w, "baseline", "windows.baseline"));
      if (w.contains("pandemic_start")) cfg.windows.pandemic_start = Date::parse(get<std::string>(w, "pandemic_start", "windows.pandemic_start"));
      if (w.contains("initial")) cfg.windows.initial_window = DateRange::parse(get<std::string>(w, "initial", "windows.initial"));
      if (w.contains("longterm")) cfg.windows.longterm_window = DateRange::parse(get<std::string>(w, "longterm", "windows.longterm"));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kConfig) throw;
      config_error("windows", e.what());
    }
  }
  try {
    cfg.windows.validate(cfg.obs);
  } catch (const Error& e) {
    config_error("windows", e.what());
  }

  if (j.contains("crosswalk")) {
    cfg.crosswalk = get_path(j, "crosswalk", "crosswalk", base);
    check_file(cfg.crosswalk, "crosswalk");
  }

  if (!j.contains("trend")) config_error("trend", "missing");
  const auto& t = j["trend"];
  cfg.trend_needs = get<std::vector<std::string>>(t, "needs", "trend.needs");
  if (cfg.trend_needs.empty()) config_error("trend.needs", "at least one need is required");
  if (t.contains("geos")) cfg.trend_geos = get<std::vector<std::string>>(t, "geos", "trend.geos");
  for (const auto& g : cfg.trend_geos) {
    try {
      auto key = GeoKey::parse(g);
      if (key.level != GeoLevel::kZip && key.level != GeoLevel::kNational && cfg.crosswalk.empty()) {
        config_error("crosswalk", "required for trend geo " + g);
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kConfig) throw;
      config_error("trend.geos", e.what());
    }
  }
  if (t.contains("smooth")) cfg.smooth = get<int>(t, "smooth", "trend.smooth");
  if (t.contains("boot")) cfg.n_boot = get<int>(t, "boot", "trend.boot");
  if (t.contains("level")) cfg.level = get<double>(t, "level", "trend.level");
  if (t.contains("scheme")) {
    try {
      cfg.scheme = parse_bootstrap_scheme(get<std::string>(t, "scheme", "trend.scheme"));
    } catch (const Error& e) {
      config_error("trend.scheme", e.what());
    }
  }
  if (t.contains("laplace")) cfg.laplace = get<double>(t, "laplace", "trend.laplace");
  if (cfg.smooth < 0) config_error("trend.smooth", "must be >= 0");
  if (cfg.n_boot < 0) config_error("trend.boot", "must be >= 0");
  if (!(cfg.level > 0 && cfg.level < 1)) config_error("trend.level", "must lie in (0, 1)");
  if (!(cfg.laplace >= 0)) config_error("trend.laplace", "must be >= 0");

  if (j.contains("policy")) {
    const auto& p = j["policy"];
    cfg.policies = get_path(p, "file", "policy.file", base);
    check_file(cfg.policies, "policy.file");
    cfg.policy_needs = get<std::vector<std::string>>(p, "needs", "policy.needs");
    if (cfg.crosswalk.empty()) config_error("crosswalk", "required for the policy analysis");
  }
  if (j.contains("external")) {
    const auto& e = j["external"];
    cfg.external = get_path(e, "file", "external.file", base);
    check_file(cfg.external, "external.file");
    cfg.external_need = get<std::string>(e, "need", "external.need");
    if (e.contains("geo")) cfg.external_geo = get<std::string>(e, "geo", "external.geo");
    if (e.contains("mode")) cfg.external_mode = get<std::string>(e, "mode", "external.mode");
    try {
      parse_external_mode(cfg.external_mode);
    } catch (const Error& err) {
      config_error("external.mode", err.what());
    }
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    if (e.contains("labeled_corpus")) {
      cfg.labeled_corpus = get_path(e, "labeled_corpus", "eval.labeled_corpus", base);
      check_file(cfg.labeled_corpus, "eval.labeled_corpus");
    }
    if (e.contains("trend_table")) {
      cfg.trend_table = get_path(e, "trend_table", "eval.trend_table", base);
      check_file(cfg.trend_table, "eval.trend_table");
    }
    if (e.contains("demographics")) {
      cfg.demographics = get_path(e, "demographics", "eval.demographics", base);
      check_file(cfg.demographics, "eval.demographics");
    }
  }
  return cfg;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  require_input_file(path, "pipeline config");
  return parse_pipeline_config(read_file(path), path);
}

json run_pipeline(const PipelineConfig& cfg, const fs::path& out_dir) {
  const std::string started = utc_now_iso();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + out_dir.string() + ": " + ec.message());
  json report = json::object();

  std::vector<fs::path> inputs = cfg.inputs;
  std::optional<GeneratorConfig> gen_cfg;
  if (!cfg.generator.empty()) {
    GenerateParams p;
    p.config = cfg.generator;
    p.out_dir = out_dir;
    report["gen"] = stage("gen", [&] { return run_generate(p); });
    gen_cfg = load_generator_config(cfg.generator);
    inputs = {out_dir / "interactions_2019.tsv", out_dir / "interactions_2020.tsv"};
  }

  ClassifyParams cp;
  cp.taxonomy = cfg.taxonomy;
  cp.inputs = inputs;
  cp.obs = cfg.obs;
  cp.output = out_dir / "tagged.tsv";
  report["classify"] = stage("classify", [&] { return run_classify(cp); });

  AggregateParams ap;
  ap.taxonomy = cfg.taxonomy;
  ap.tagged = {cp.output};
  ap.output = out_dir / "cube.tsv";
  report["aggregate"] = stage("aggregate", [&] { return run_aggregate(ap); });

  AtomicFileWriter changes(out_dir / "changes.tsv");
  changes.stream() << "need_key\tgeo\twindow\tt1\tt2\tc\tci_low\tci_high\tpercent_change\ttruth_c\n";
  report["trend"] = json::object();
  for (const auto& need : cfg.trend_needs) {
    for (const auto& geo : cfg.trend_geos) {
      TrendParams tp;
      tp.cube = ap.output;
      tp.crosswalk = cfg.crosswalk;
      tp.need = need;
      tp.geo = geo;
      tp.obs = cfg.obs;
      tp.windows = cfg.windows;
      tp.smooth = cfg.smooth;
      tp.n_boot = cfg.n_boot;
      tp.level = cfg.level;
      tp.seed = cfg.seed;
      tp.laplace = cfg.laplace;
      tp.scheme = cfg.scheme;
      tp.output = out_dir / ("trend_" + need + "_" + geo_file_tag(geo) + ".tsv");
      tp.stage = "trend:" + need + "@" + geo;
      auto r = stage(tp.stage, [&] { return run_trend(tp); });
      for (const auto& [label, w] : r["windows"].items()) {
        if (w.is_null()) continue;
        std::string truth;
        if (gen_cfg && GeoKey::parse(geo).level == GeoLevel::kNational) {
          for (const auto& n : gen_cfg->needs) {
            if (n.detector != need) continue;
            truth = format_double(implied_change(*gen_cfg, need, {},
                                                 DateRange::parse(w["t1"].get<std::string>()),
                                                 DateRange::parse(w["t2"].get<std::string>())));
          }
        }
        changes.stream() << need << '\t' << geo << '\t' << label << '\t' << w["t1"].get<std::string>()
                         << '\t' << w["t2"].get<std::string>() << '\t'
                         << format_double(w["c"].get<double>()) << '\t'
                         << format_double(w["ci_low"].get<double>()) << '\t'
                         << format_double(w["ci_high"].get<double>()) << '\t'
                         << format_double(w["percent_change"].get<double>()) << '\t' << truth << '\n';
      }
      report["trend"][tp.stage] = std::move(r);
    }
  }
  if (!changes.stream()) throw Error(ErrorCode::kIo, "failed writing changes.tsv");
  changes.commit();

  for (const auto& need : cfg.policy_needs) {
    PolicyParams pp;
    pp.cube = ap.output;
    pp.crosswalk = cfg.crosswalk;
    pp.policies = cfg.policies;
    pp.need = need;
    pp.obs = cfg.obs;
    pp.windows = cfg.windows;
    pp.laplace = cfg.laplace;
    pp.output = out_dir / ("policy_" + need + ".tsv");
    pp.stage = "policy:" + need;
    report["policy"][need] = stage(pp.stage, [&] { return run_policy(pp); });
  }

  if (!cfg.external.empty()) {
    ExternalParams ep;
    ep.cube = ap.output;
    ep.crosswalk = cfg.crosswalk;
    ep.external = cfg.external;
    ep.need = cfg.external_need;
    ep.geo = cfg.external_geo;
    ep.mode = cfg.external_mode;
    ep.obs = cfg.obs;
    ep.windows = cfg.windows;
    ep.output = out_dir / "external.tsv";
    report["external"] = stage("external", [&] { return run_external(ep); });
  }

  if (!cfg.labeled_corpus.empty()) {
    PrecisionParams pp;
    pp.taxonomy = cfg.taxonomy;
    pp.corpus = cfg.labeled_corpus;
    pp.output = out_dir / "precision.tsv";
    report["eval-precision"] = stage("eval-precision", [&] { return run_eval_precision(pp); });
  }
  if (!cfg.trend_table.empty()) {
    TrendAgreementParams tp;
    tp.table = cfg.trend_table;
    tp.output = out_dir / "trend_agreement.tsv";
    report["eval-trends"] = stage("eval-trends", [&] { return run_eval_trends(tp); });
  }
  if (!cfg.demographics.empty()) {
    ClientRateParams cr;
    cr.interactions = inputs;
    cr.demographics = cfg.demographics;
    cr.output = out_dir / "clientrate.tsv";
    report["eval-clientrate"] = stage("eval-clientrate", [&] { return run_eval_clientrate(cr); });
  }

  StageRecord rec;
  rec.stage = "pipeline";
  rec.inputs = {cfg.source, cfg.taxonomy};
  if (!cfg.generator.empty()) rec.inputs.push_back(cfg.generator);
  rec.outputs = {out_dir / "changes.tsv"};
  rec.seeds["bootstrap"] = cfg.seed;
  if (gen_cfg) rec.seeds["generator"] = gen_cfg->seed;
  rec.taxonomy_version = load_taxonomy(cfg.taxonomy).version;
  rec.parameters = {{"trend_needs", cfg.trend_needs}, {"trend_geos", cfg.trend_geos}};
  rec.started_at = started;
  rec.finished_at = utc_now_iso();
  record_stage(out_dir, rec);
  return report;
}

}  // namespace needscope
