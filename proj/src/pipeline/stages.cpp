#include "pipeline/stages.hpp"

#include <algorithm>
#include <cmath>

#include "classifier/classifier.hpp"
#include "core/error.hpp"
#include "core/random.hpp"
#include "core/text.hpp"
#include "correlation/correlation.hpp"
#include "evaluation/evaluation.hpp"
#include "pipeline/manifest.hpp"
#include "synthgen/generator.hpp"

namespace needscope {

using nlohmann::json;

namespace {

fs::path output_dir(const fs::path& output) {
  auto dir = output.parent_path();
  return dir.empty() ? fs::path(".") : dir;
}

void require_output(const fs::path& output) {
  if (output.empty()) throw Error(ErrorCode::kConfig, "output: no path given");
  std::error_code ec;
  fs::create_directories(output_dir(output), ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + output_dir(output).string() + ": " + ec.message());
}

std::optional<GeoCrosswalk> maybe_crosswalk(const fs::path& path) {
  if (path.empty()) return std::nullopt;
  require_input_file(path, "crosswalk");
  return GeoCrosswalk::load(path);
}

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json obs_json(const ObservationConfig& obs) {
  return {{"range_2019", obs.range_2019.to_string()},
          {"range_2020", obs.range_2020.to_string()},
          {"anonymity_threshold", obs.anonymity_threshold}};
}

json windows_json(const Windows& w) {
  return {{"baseline", w.baseline_2020.to_string()},
          {"pandemic_start", w.pandemic_start.to_string()},
          {"initial", w.initial_window.to_string()},
          {"longterm", w.longterm_window.to_string()}};
}

json correlation_json(const CorrelationResult& c) { return {{"r", c.r}, {"p", c.p}, {"n", c.n}}; }

struct StageScope {
  StageRecord record;
  explicit StageScope(std::string stage) {
    record.stage = std::move(stage);
    record.started_at = utc_now_iso();
  }
  void commit(const fs::path& dir) {
    record.finished_at = utc_now_iso();
    record_stage(dir, record);
  }
};

void write_sidecar(const fs::path& output, const json& report) {
  write_file_atomic(sidecar_path(output), report.dump(2) + "\n");
}

}  // namespace

fs::path sidecar_path(const fs::path& output) {
  auto p = output;
  return p.replace_extension(".json");
}

ExternalMode parse_external_mode(std::string_view mode) {
  if (mode == "auto") return ExternalMode::kAuto;
  if (mode == "relative") return ExternalMode::kAsRelativeChange;
  throw Error(ErrorCode::kConfig, "external mode must be 'auto' or 'relative', got '" + std::string(mode) + "'");
}

BootstrapScheme parse_bootstrap_scheme(std::string_view scheme) {
  if (scheme == "window") return BootstrapScheme::kWindowDays;
  if (scheme == "window+baseline") return BootstrapScheme::kWindowAndBaselineDays;
  throw Error(ErrorCode::kConfig,
              "bootstrap scheme must be 'window' or 'window+baseline', got '" + std::string(scheme) + "'");
}

std::string_view bootstrap_scheme_name(BootstrapScheme scheme) {
  return scheme == BootstrapScheme::kWindowDays ? "window" : "window+baseline";
}

json run_generate(const GenerateParams& p) {
  StageScope scope(p.stage);
  require_input_file(p.config, "generator config");
  auto cfg = load_generator_config(p.config);
  if (p.seed) cfg.seed = *p.seed;
  require_input_file(cfg.taxonomy, "generator config: taxonomy");
  const CompiledMatcherSet matcher(load_taxonomy(cfg.taxonomy));
  auto summary = generate_to_directory(cfg, matcher, p.out_dir);

  json report = {{"interactions_2019", summary.interactions_2019},
                 {"interactions_2020", summary.interactions_2020},
                 {"matched", summary.matched},
                 {"background_templates", summary.background_templates},
                 {"rejected_background", summary.rejected_background},
                 {"warnings", summary.warnings},
                 {"seed", cfg.seed}};
  auto& r = scope.record;
  r.inputs = {p.config, cfg.taxonomy};
  r.outputs = {p.out_dir / "interactions_2019.tsv", p.out_dir / "interactions_2020.tsv",
               p.out_dir / "groundtruth.tsv"};
  r.taxonomy_version = matcher.taxonomy().version;
  r.seeds["generator"] = cfg.seed;
  r.parameters = {{"exact", cfg.exact}, {"observation", obs_json(cfg.obs)}};
  scope.commit(p.out_dir);
  return report;
}

json run_classify(const ClassifyParams& p) {
  StageScope scope(p.stage);
  require_input_file(p.taxonomy, "taxonomy");
  if (p.inputs.empty()) throw Error(ErrorCode::kConfig, "input: no interaction files given");
  for (const auto& in : p.inputs) require_input_file(in, "input");
  p.obs.validate();
  require_output(p.output);
  const CompiledMatcherSet matcher(load_taxonomy(p.taxonomy));
  const auto rep = classify_files(p.inputs, matcher, p.obs, p.output);

  json report = {{"read", rep.read},
                 {"out_of_range", rep.out_of_range},
                 {"below_anonymity_threshold", rep.below_anonymity_threshold},
                 {"classified", rep.classified},
                 {"matched", rep.matched},
                 {"coverage", rep.coverage()}};
  auto& r = scope.record;
  r.inputs = p.inputs;
  r.inputs.insert(r.inputs.begin(), p.taxonomy);
  r.outputs = {p.output};
  r.taxonomy_version = matcher.taxonomy().version;
  r.parameters = {{"observation", obs_json(p.obs)}};
  scope.commit(output_dir(p.output));
  return report;
}

json run_aggregate(const AggregateParams& p) {
  StageScope scope(p.stage);
  require_input_file(p.taxonomy, "taxonomy");
  if (p.tagged.empty()) throw Error(ErrorCode::kConfig, "tagged: no tagged files given");
  for (const auto& in : p.tagged) require_input_file(in, "tagged");
  const auto crosswalk = maybe_crosswalk(p.crosswalk);
  if (p.geo != GeoLevel::kZip && p.geo != GeoLevel::kNational && !crosswalk) {
    throw Error(ErrorCode::kConfig, "crosswalk: required for a " +
                                        std::string(geo_level_name(p.geo)) + "-level cube");
  }
  require_output(p.output);
  const auto tax = load_taxonomy(p.taxonomy);
  AggregateTable table(GeoLevel::kZip, TimeResolution::kDay);
  table.register_taxonomy(tax);
  read_tagged(p.tagged, tax, [&](TaggedInteraction&& t) { table.add(t, tax); });
  if (p.geo != GeoLevel::kZip || p.time != TimeResolution::kDay) {
    table = rollup(table, p.geo, p.time, crosswalk ? &*crosswalk : nullptr);
  }
  write_cube_file(table, p.output);

  json report = {{"geo", geo_level_name(p.geo)},
                 {"time", time_resolution_name(p.time)},
                 {"needs", table.needs().size()},
                 {"geos", table.geos().size()},
                 {"dates", table.dates().size()},
                 {"volume", table.total_volume()}};
  auto& r = scope.record;
  r.inputs = p.tagged;
  r.inputs.insert(r.inputs.begin(), p.taxonomy);
  if (!p.crosswalk.empty()) r.inputs.push_back(p.crosswalk);
  r.outputs = {p.output};
  r.taxonomy_version = tax.version;
  r.parameters = {{"geo", geo_level_name(p.geo)}, {"time", time_resolution_name(p.time)}};
  scope.commit(output_dir(p.output));
  return report;
}

json run_trend(const TrendParams& p) {
  StageScope scope(p.stage);
  require_input_file(p.cube, "cube");
  const auto crosswalk = maybe_crosswalk(p.crosswalk);
  p.obs.validate();
  p.windows.validate(p.obs);
  if (p.n_boot < 0) throw Error(ErrorCode::kConfig, "boot: must be >= 0");
  if (p.smooth < 0) throw Error(ErrorCode::kConfig, "smooth: must be >= 0");
  require_output(p.output);
  const auto table = read_cube_file(p.cube);
  const auto geo = GeoKey::parse(p.geo);
  const GeoCrosswalk* cw = crosswalk ? &*crosswalk : nullptr;

  SeriesOptions so;
  so.obs = p.obs;
  so.baseline = p.windows.baseline_2020;
  so.smooth_half_width = p.smooth;
  so.n_boot = p.n_boot;
  so.level = p.level;
  so.seed = p.seed;
  so.laplace = p.laplace;
  so.crosswalk = cw;
  const auto series = change_series(table, p.need, geo, so);

  AtomicFileWriter out(p.output);
  out.stream() << "date\tc\tci_low\tci_high\tsmoothed_c\n";
  std::size_t defined = 0;
  for (const auto& pt : series.points) {
    if (pt.c) ++defined;
    out.stream() << pt.date.to_string() << '\t' << cell(pt.c) << '\t' << cell(pt.ci_low) << '\t'
                 << cell(pt.ci_high) << '\t' << cell(pt.smoothed_c) << '\n';
  }
  if (!out.stream()) throw Error(ErrorCode::kIo, "failed writing " + p.output.string());
  out.commit();

  json windows = json::object();
  json warnings = json::array();
  const std::pair<const char*, DateRange> targets[] = {{"initial", p.windows.initial_window},
                                                       {"longterm", p.windows.longterm_window}};
  for (const auto& [label, t2] : targets) {
    WindowOptions wo;
    wo.obs = p.obs;
    wo.n_boot = p.n_boot;
    wo.level = p.level;
    wo.seed = derive_seed(p.seed, "window", p.need, geo.to_string(), label);
    wo.scheme = p.scheme;
    wo.laplace = p.laplace;
    wo.crosswalk = cw;
    try {
      const auto rc = window_mean_change(table, p.need, geo, p.windows.baseline_2020, t2, wo);
      windows[label] = {{"t1", rc.t1.to_string()},
                        {"t2", rc.t2.to_string()},
                        {"c", rc.c},
                        {"ci_low", rc.ci_low},
                        {"ci_high", rc.ci_high},
                        {"percent_change", percent_change(rc.c)},
                        {"n_days", rc.n_days},
                        {"n_boot", rc.n_boot}};
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kUndefined && e.code() != ErrorCode::kInsufficientData) throw;
      windows[label] = nullptr;
      warnings.push_back(std::string(label) + " window: " + e.what());
    }
  }

  json report = {{"need", series.need_key},
                 {"geo", series.geo.to_string()},
                 {"resolution", time_resolution_name(series.resolution)},
                 {"baseline", series.baseline.to_string()},
                 {"ci_unit", series.ci_unit},
                 {"n_boot", series.n_boot},
                 {"level", p.level},
                 {"seed", p.seed},
                 {"smooth_half_width", p.smooth},
                 {"bootstrap_scheme", bootstrap_scheme_name(p.scheme)},
                 {"laplace", p.laplace},
                 {"points", series.points.size()},
                 {"defined_points", defined},
                 {"windows", windows},
                 {"warnings", warnings}};
  write_sidecar(p.output, report);

  auto& r = scope.record;
  r.inputs = {p.cube};
  if (!p.crosswalk.empty()) r.inputs.push_back(p.crosswalk);
  r.outputs = {p.output, sidecar_path(p.output)};
  r.seeds["bootstrap"] = p.seed;
  r.parameters = {{"need", p.need},
                  {"geo", geo.to_string()},
                  {"observation", obs_json(p.obs)},
                  {"windows", windows_json(p.windows)},
                  {"smooth", p.smooth},
                  {"boot", p.n_boot},
                  {"level", p.level},
                  {"scheme", bootstrap_scheme_name(p.scheme)},
                  {"laplace", p.laplace}};
  scope.commit(output_dir(p.output));
  return report;
}

json run_policy(const PolicyParams& p) {
  StageScope scope(p.stage);
  require_input_file(p.cube, "cube");
  require_input_file(p.policies, "policies");
  const auto crosswalk = maybe_crosswalk(p.crosswalk);
  p.obs.validate();
  p.windows.validate(p.obs);
  require_output(p.output);
  const auto table = read_cube_file(p.cube);
  const auto policies = load_policies(p.policies);
  PolicyOptions po;
  po.obs = p.obs;
  po.windows = p.windows;
  po.crosswalk = crosswalk ? &*crosswalk : nullptr;
  po.laplace = p.laplace;
  const auto short_term = policy_short_term(table, policies, p.need, po);
  const auto long_term = policy_long_term(table, policies, p.need, po);

  AtomicFileWriter out(p.output);
  out.stream() << "analysis\tstate\tcovariate\tvalue\tc\tt1\tt2\n";
  auto analysis_json = [&](const PolicyAnalysis& a, const char* name) {
    for (const auto& s : a.states) {
      out.stream() << name << '\t' << s.state << '\t' << a.covariate << '\t' << format_double(s.covariate)
                   << '\t' << format_double(s.c) << '\t' << s.t1.to_string() << '\t'
                   << s.t2.to_string() << '\n';
    }
    json j = {{"covariate", a.covariate}, {"states", a.states.size()}, {"r", opt_json(a.r)},
              {"warnings", a.warnings}};
    j["correlation"] = a.correlation ? correlation_json(*a.correlation) : json(nullptr);
    return j;
  };
  json report = {{"need", p.need},
                 {"short_term", analysis_json(short_term, "short_term")},
                 {"long_term", analysis_json(long_term, "long_term")}};
  if (!out.stream()) throw Error(ErrorCode::kIo, "failed writing " + p.output.string());
  out.commit();
  write_sidecar(p.output, report);

  auto& r = scope.record;
  r.inputs = {p.cube, p.policies};
  if (!p.crosswalk.empty()) r.inputs.push_back(p.crosswalk);
  r.outputs = {p.output, sidecar_path(p.output)};
  r.parameters = {{"need", p.need},
                  {"observation", obs_json(p.obs)},
                  {"windows", windows_json(p.windows)},
                  {"laplace", p.laplace}};
  scope.commit(output_dir(p.output));
  return report;
}

json run_external(const ExternalParams& p) {
  StageScope scope(p.stage);
  require_input_file(p.cube, "cube");
  require_input_file(p.external, "external");
  const auto crosswalk = maybe_crosswalk(p.crosswalk);
  const auto mode = parse_external_mode(p.mode);
  p.obs.validate();
  p.windows.validate(p.obs);
  require_output(p.output);
  auto table = read_cube_file(p.cube);
  if (table.resolution() != TimeResolution::kWeek) {
    table = rollup(table, table.level(), TimeResolution::kWeek, nullptr);
  }
  const auto geo = GeoKey::parse(p.geo);
  SeriesOptions so;
  so.obs = p.obs;
  so.baseline = p.windows.baseline_2020;
  so.smooth_half_width = 0;
  so.crosswalk = crosswalk ? &*crosswalk : nullptr;
  const auto series = change_series(table, p.need, geo, so);
  std::vector<std::pair<Date, double>> internal;
  for (const auto& pt : series.points) {
    if (pt.c) internal.emplace_back(pt.date, *pt.c);
  }
  const auto external = load_external_series(p.external);
  const auto cmp = compare_external(internal, external, mode, p.windows.baseline_2020, p.obs);

  AtomicFileWriter out(p.output);
  out.stream() << "week\tinternal_c\texternal_c\tgap\tgap_percent\n";
  double gap_sum = 0.0;
  for (const auto& g : cmp.gaps) {
    gap_sum += g.gap;
    out.stream() << g.week.to_string() << '\t' << format_double(g.internal_c) << '\t'
                 << format_double(g.external_c) << '\t' << format_double(g.gap) << '\t'
                 << format_double(percent_change(g.gap)) << '\n';
  }
  if (!out.stream()) throw Error(ErrorCode::kIo, "failed writing " + p.output.string());
  out.commit();
  const double mean_gap = cmp.gaps.empty() ? 0.0 : gap_sum / static_cast<double>(cmp.gaps.size());
  json report = {{"need", p.need},
                 {"geo", geo.to_string()},
                 {"external", external.label},
                 {"mode", cmp.mode},
                 {"correlation", correlation_json(cmp.correlation)},
                 {"weeks", cmp.gaps.size()},
                 {"mean_gap", mean_gap},
                 {"mean_gap_percent", percent_change(mean_gap)}};
  write_sidecar(p.output, report);

  auto& r = scope.record;
  r.inputs = {p.cube, p.external};
  if (!p.crosswalk.empty()) r.inputs.push_back(p.crosswalk);
  r.outputs = {p.output, sidecar_path(p.output)};
  r.parameters = {{"need", p.need},
                  {"geo", geo.to_string()},
                  {"mode", p.mode},
                  {"observation", obs_json(p.obs)},
                  {"windows", windows_json(p.windows)}};
  scope.commit(output_dir(p.output));
  return report;
}

json run_eval_precision(const PrecisionParams& p) {
  StageScope scope(p.stage);
  require_input_file(p.taxonomy, "taxonomy");
  require_input_file(p.corpus, "corpus");
  require_output(p.output);
  const CompiledMatcherSet matcher(load_taxonomy(p.taxonomy));
  const auto corpus = load_labeled_corpus(p.corpus);
  const auto rep = evaluate_precision(corpus, matcher);

  AtomicFileWriter out(p.output);
  out.stream() << "query\tclicked_url\ttrue_categories\tpredicted_categories\tscore\tweight\n";
  std::vector<std::uint32_t> hits;
  for (const auto& t : corpus) {
    matcher.match(t.query, t.clicked_url, hits);
    const auto pred = categories_of(hits, matcher.taxonomy());
    const int np = category_count(pred);
    const std::string score =
        np ? format_double(static_cast<double>(category_count(static_cast<CategorySet>(pred & t.true_categories))) / np)
           : std::string();
    out.stream() << t.query << '\t' << t.clicked_url.value_or("") << '\t'
                 << format_categories(t.true_categories) << '\t' << format_categories(pred) << '\t'
                 << score << '\t' << t.weight << '\n';
  }
  if (!out.stream()) throw Error(ErrorCode::kIo, "failed writing " + p.output.string());
  out.commit();
  json report = {{"precision", rep.precision},
                 {"tuples", rep.tuples},
                 {"predicted", rep.predicted},
                 {"interactions", rep.interactions},
                 {"predicted_interactions", rep.predicted_interactions},
                 {"imperfect", rep.imperfect.size()}};
  write_sidecar(p.output, report);

  auto& r = scope.record;
  r.inputs = {p.taxonomy, p.corpus};
  r.outputs = {p.output, sidecar_path(p.output)};
  r.taxonomy_version = matcher.taxonomy().version;
  scope.commit(output_dir(p.output));
  return report;
}

json run_eval_trends(const TrendAgreementParams& p) {
  StageScope scope(p.stage);
  require_input_file(p.table, "table");
  require_output(p.output);
  const auto rep = trend_agreement_file(p.table);
  AtomicFileWriter out(p.output);
  out.stream() << "keyword\tr\tp\tn\n";
  for (const auto& k : rep.keywords) {
    out.stream() << k.keyword << '\t' << format_double(k.result.r) << '\t' << format_double(k.result.p)
                 << '\t' << k.result.n << '\n';
  }
  if (!out.stream()) throw Error(ErrorCode::kIo, "failed writing " + p.output.string());
  out.commit();
  json report = {{"keywords", rep.keywords.size()}, {"median_r", opt_json(rep.median_r)},
                 {"warnings", rep.warnings}};
  write_sidecar(p.output, report);

  auto& r = scope.record;
  r.inputs = {p.table};
  r.outputs = {p.output, sidecar_path(p.output)};
  scope.commit(output_dir(p.output));
  return report;
}

json run_eval_clientrate(const ClientRateParams& p) {
  StageScope scope(p.stage);
  if (p.interactions.empty()) throw Error(ErrorCode::kConfig, "input: no interaction files given");
  for (const auto& in : p.interactions) require_input_file(in, "input");
  require_input_file(p.demographics, "demographics");
  require_output(p.output);
  std::vector<std::string> warnings;
  const auto profiles = build_zip_profiles(p.interactions, p.demographics, &warnings);
  const auto rep = client_rate_correlations(profiles);
  warnings.insert(warnings.end(), rep.warnings.begin(), rep.warnings.end());

  AtomicFileWriter out(p.output);
  out.stream() << "column\tr\tp\tn\n";
  for (const auto& c : rep.columns) {
    out.stream() << c.column << '\t' << format_double(c.result.r) << '\t' << format_double(c.result.p)
                 << '\t' << c.result.n << '\n';
  }
  if (!out.stream()) throw Error(ErrorCode::kIo, "failed writing " + p.output.string());
  out.commit();
  json report = {{"zips", profiles.size()}, {"columns", rep.columns.size()}, {"warnings", warnings}};
  write_sidecar(p.output, report);

  auto& r = scope.record;
  r.inputs = p.interactions;
  r.inputs.push_back(p.demographics);
  r.outputs = {p.output, sidecar_path(p.output)};
  scope.commit(output_dir(p.output));
  return report;
}

}  // namespace needscope
