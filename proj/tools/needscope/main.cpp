#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "needscope/needscope.h"

namespace {

struct ObservationArgs {
  std::string range_2019;
  std::string range_2020;
  std::int64_t anonymity_threshold = 0;

  void add(CLI::App* app) {
    app->add_option("--range-2019", range_2019, "2019 observation range (first:last)");
    app->add_option("--range-2020", range_2020, "2020 observation range (first:last)");
    app->add_option("--anonymity-threshold", anonymity_threshold,
                    "minimum interactions per ZIP and month (default 100)");
  }
  ns_observation get() const {
    ns_observation o{};
    o.range_2019 = range_2019.empty() ? nullptr : range_2019.c_str();
    o.range_2020 = range_2020.empty() ? nullptr : range_2020.c_str();
    o.anonymity_threshold = anonymity_threshold;
    return o;
  }
};

struct WindowArgs {
  std::string baseline;
  std::string pandemic_start;
  std::string initial;
  std::string longterm;

  void add(CLI::App* app) {
    app->add_option("--baseline", baseline, "2020 baseline window (default 2020-01-06:2020-02-23)");
    app->add_option("--pandemic-start", pandemic_start, "pandemic start date (default 2020-03-16)");
    app->add_option("--initial", initial, "initial window (default 2020-03-16:2020-04-12)");
    app->add_option("--longterm", longterm, "long-term window (default 2020-07-06:2020-08-02)");
  }
  ns_windows get() const {
    ns_windows w{};
    w.baseline = baseline.empty() ? nullptr : baseline.c_str();
    w.pandemic_start = pandemic_start.empty() ? nullptr : pandemic_start.c_str();
    w.initial = initial.empty() ? nullptr : initial.c_str();
    w.longterm = longterm.empty() ? nullptr : longterm.c_str();
    return w;
  }
};

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

std::vector<const char*> c_strings(const std::vector<std::string>& v) {
  std::vector<const char*> out;
  for (const auto& s : v) out.push_back(s.c_str());
  return out;
}

bool g_quiet = false;

int finish(ns_status status, char* report) {
  if (status != NS_OK) {
    std::fprintf(stderr, "needscope: %s: %s\n", ns_status_name(status), ns_last_error());
    return ns_exit_code(status);
  }
  if (report && !g_quiet) std::printf("%s\n", report);
  ns_string_free(report);
  return 0;
}

int taxonomy_command(const std::string& path, bool stats, bool strict) {
  ns_taxonomy* tax = nullptr;
  ns_status st = ns_taxonomy_load(path.c_str(), &tax);
  if (st != NS_OK) return finish(st, nullptr);
  char* report = nullptr;
  st = stats ? ns_taxonomy_stats(tax, &report) : ns_taxonomy_self_check(tax, &report);
  int code = 0;
  if (st == NS_OK && !stats) {
    const std::string text = report;
    const bool clean = text.find("\"issues\": []") != std::string::npos;
    if (!clean) {
      std::fprintf(stderr, "needscope: %s: some bundled examples do not classify to exactly their own detector\n",
                   strict ? "error" : "warning");
      if (strict) code = 1;
    }
  }
  ns_taxonomy_free(tax);
  const int rc = finish(st, report);
  return rc ? rc : code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"needscope: human needs in search logs and their relative change"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ns_version());
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (0: all cores)")->envname("NEEDSCOPE_THREADS");
  app.add_flag("--quiet", g_quiet, "do not print the JSON report");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic two-year log with ground truth");
  std::string gen_config, gen_out;
  std::uint64_t gen_seed = 0;
  gen->add_option("--config", gen_config, "generator config (JSON)")->required();
  gen->add_option("--out-dir", gen_out, "output directory")->required();
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "override the config seed");

  // classify
  auto* classify = app.add_subcommand("classify", "tag interactions with need detectors");
  std::string cl_tax, cl_out;
  std::vector<std::string> cl_inputs;
  ObservationArgs cl_obs;
  classify->add_option("--taxonomy", cl_tax, "taxonomy file")->required();
  classify->add_option("--input", cl_inputs, "interaction TSV files (.gz allowed)")->required();
  classify->add_option("--output", cl_out, "tagged TSV")->required();
  cl_obs.add(classify);

  // aggregate
  auto* aggregate = app.add_subcommand("aggregate", "count matched interactions and volume per need, date and geo");
  std::string ag_tax, ag_cross, ag_geo = "zip", ag_time = "day", ag_out;
  std::vector<std::string> ag_tagged;
  aggregate->add_option("--taxonomy", ag_tax, "taxonomy used to tag the input")->required();
  aggregate->add_option("--tagged", ag_tagged, "tagged TSV files")->required();
  aggregate->add_option("--crosswalk", ag_cross, "crosswalk CSV (zip,county_fips,state)");
  aggregate->add_option("--geo", ag_geo, "zip, county, state or national");
  aggregate->add_option("--time", ag_time, "day or week");
  aggregate->add_option("--output", ag_out, "cube TSV")->required();

  // trend
  auto* trend = app.add_subcommand("trend", "relative-change series for one need and geo");
  std::string tr_cube, tr_cross, tr_need, tr_geo = "US", tr_scheme, tr_out;
  int tr_smooth = 3, tr_boot = 500;
  double tr_level = 0.95, tr_laplace = 0.0;
  std::uint64_t tr_seed = 0;
  ObservationArgs tr_obs;
  WindowArgs tr_win;
  trend->add_option("--cube", tr_cube, "cube TSV")->required();
  trend->add_option("--need", tr_need, "detector id, category name or ALL")->required();
  trend->add_option("--geo", tr_geo, "US, state:XX, county:NNNNN or zip:NNNNN");
  trend->add_option("--crosswalk", tr_cross, "crosswalk CSV for geos coarser than the cube");
  trend->add_option("--smooth", tr_smooth, "moving-average half width in days");
  trend->add_option("--boot", tr_boot, "bootstrap replicates");
  trend->add_option("--level", tr_level, "confidence level");
  trend->add_option("--seed", tr_seed, "bootstrap seed");
  trend->add_option("--scheme", tr_scheme, "window bootstrap: window+baseline or window");
  trend->add_option("--laplace", tr_laplace, "additive smoothing of expression rates");
  trend->add_option("--output", tr_out, "series TSV; a .json sidecar is written next to it")->required();
  tr_obs.add(trend);
  tr_win.add(trend);

  // correlate
  auto* correlate = app.add_subcommand("correlate", "policy and external-series analyses");
  correlate->require_subcommand(1);
  auto* policy = correlate->add_subcommand("policy", "correlate state changes with shelter-in-place timing");
  std::string po_cube, po_cross, po_pol, po_need, po_out;
  double po_laplace = 0.0;
  ObservationArgs po_obs;
  WindowArgs po_win;
  policy->add_option("--cube", po_cube, "cube TSV")->required();
  policy->add_option("--policies", po_pol, "policy CSV (state,shelter_start,shelter_end)")->required();
  policy->add_option("--need", po_need, "need key")->required();
  policy->add_option("--crosswalk", po_cross, "crosswalk CSV");
  policy->add_option("--laplace", po_laplace, "additive smoothing of expression rates");
  policy->add_option("--output", po_out, "per-state TSV")->required();
  po_obs.add(policy);
  po_win.add(policy);

  auto* external = correlate->add_subcommand("external", "compare weekly change with an external series");
  std::string ex_cube, ex_cross, ex_file, ex_need, ex_geo = "US", ex_mode = "auto", ex_out;
  ObservationArgs ex_obs;
  WindowArgs ex_win;
  external->add_option("--cube", ex_cube, "cube TSV")->required();
  external->add_option("--external", ex_file, "external CSV (date,value)")->required();
  external->add_option("--need", ex_need, "need key")->required();
  external->add_option("--geo", ex_geo, "geo key");
  external->add_option("--mode", ex_mode, "auto or relative");
  external->add_option("--crosswalk", ex_cross, "crosswalk CSV");
  external->add_option("--output", ex_out, "weekly gap TSV")->required();
  ex_obs.add(external);
  ex_win.add(external);

  // eval
  auto* eval = app.add_subcommand("eval", "validation analyses");
  eval->require_subcommand(1);
  auto* precision = eval->add_subcommand("precision", "example-based precision on a labeled corpus");
  std::string pr_tax, pr_corpus, pr_out;
  precision->add_option("--taxonomy", pr_tax, "taxonomy file")->required();
  precision->add_option("--corpus", pr_corpus, "labeled TSV (query,clicked_url,categories,weight)")->required();
  precision->add_option("--output", pr_out, "per-tuple TSV")->required();

  auto* trends = eval->add_subcommand("trends", "per-keyword agreement with an external trend source");
  std::string et_table, et_out;
  trends->add_option("--table", et_table, "CSV (keyword,date,internal,external)")->required();
  trends->add_option("--output", et_out, "per-keyword TSV")->required();

  auto* clientrate = eval->add_subcommand("clientrate", "correlate client rate with demographics");
  std::vector<std::string> cr_inputs;
  std::string cr_demo, cr_out;
  clientrate->add_option("--input", cr_inputs, "interaction TSV files")->required();
  clientrate->add_option("--demographics", cr_demo, "CSV (zip,population,...)")->required();
  clientrate->add_option("--output", cr_out, "per-column TSV")->required();

  // taxonomy
  auto* taxonomy = app.add_subcommand("taxonomy", "inspect a taxonomy file");
  taxonomy->require_subcommand(1);
  std::string tx_path;
  bool tx_strict = false;
  auto* validate = taxonomy->add_subcommand("validate", "load, validate and self-check the bundled examples");
  validate->add_option("path", tx_path, "taxonomy file")->required();
  validate->add_flag("--strict", tx_strict, "fail when an example does not classify to exactly its detector");
  auto* stats = taxonomy->add_subcommand("stats", "detector counts and compiled automaton sizes");
  stats->add_option("path", tx_path, "taxonomy file")->required();

  // pipeline
  auto* pipeline = app.add_subcommand("pipeline", "run every stage from one config");
  std::string pl_config, pl_out;
  pipeline->add_option("--config", pl_config, "pipeline config (JSON)")->required();
  pipeline->add_option("--out-dir", pl_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (ns_set_threads(threads) != NS_OK) return finish(NS_E_INVALID_ARGUMENT, nullptr);
  ns_set_command_line(argc, argv);
  char* report = nullptr;

  if (*gen) {
    ns_gen_options o{};
    o.config = gen_config.c_str();
    o.out_dir = gen_out.c_str();
    o.override_seed = gen_seed_opt->count() > 0;
    o.seed = gen_seed;
    return finish(ns_stage_gen(&o, &report), report);
  }
  if (*classify) {
    auto inputs = c_strings(cl_inputs);
    ns_classify_options o{};
    o.taxonomy = cl_tax.c_str();
    o.inputs = inputs.data();
    o.n_inputs = inputs.size();
    o.observation = cl_obs.get();
    o.output = cl_out.c_str();
    return finish(ns_stage_classify(&o, &report), report);
  }
  if (*aggregate) {
    auto tagged = c_strings(ag_tagged);
    ns_aggregate_options o{};
    o.taxonomy = ag_tax.c_str();
    o.tagged = tagged.data();
    o.n_tagged = tagged.size();
    o.crosswalk = opt(ag_cross);
    o.geo = ag_geo.c_str();
    o.time = ag_time.c_str();
    o.output = ag_out.c_str();
    return finish(ns_stage_aggregate(&o, &report), report);
  }
  if (*trend) {
    ns_trend_options o{};
    o.cube = tr_cube.c_str();
    o.crosswalk = opt(tr_cross);
    o.need = tr_need.c_str();
    o.geo = tr_geo.c_str();
    o.observation = tr_obs.get();
    o.windows = tr_win.get();
    o.smooth = tr_smooth;
    o.n_boot = tr_boot;
    o.level = tr_level;
    o.seed = tr_seed;
    o.laplace = tr_laplace;
    o.scheme = opt(tr_scheme);
    o.output = tr_out.c_str();
    return finish(ns_stage_trend(&o, &report), report);
  }
  if (*policy) {
    ns_policy_options o{};
    o.cube = po_cube.c_str();
    o.crosswalk = opt(po_cross);
    o.policies = po_pol.c_str();
    o.need = po_need.c_str();
    o.observation = po_obs.get();
    o.windows = po_win.get();
    o.laplace = po_laplace;
    o.output = po_out.c_str();
    return finish(ns_stage_policy(&o, &report), report);
  }
  if (*external) {
    ns_external_options o{};
    o.cube = ex_cube.c_str();
    o.crosswalk = opt(ex_cross);
    o.external = ex_file.c_str();
    o.need = ex_need.c_str();
    o.geo = ex_geo.c_str();
    o.mode = ex_mode.c_str();
    o.observation = ex_obs.get();
    o.windows = ex_win.get();
    o.output = ex_out.c_str();
    return finish(ns_stage_external(&o, &report), report);
  }
  if (*precision) {
    ns_precision_options o{pr_tax.c_str(), pr_corpus.c_str(), pr_out.c_str()};
    return finish(ns_stage_eval_precision(&o, &report), report);
  }
  if (*trends) {
    ns_trend_agreement_options o{et_table.c_str(), et_out.c_str()};
    return finish(ns_stage_eval_trends(&o, &report), report);
  }
  if (*clientrate) {
    auto inputs = c_strings(cr_inputs);
    ns_clientrate_options o{inputs.data(), inputs.size(), cr_demo.c_str(), cr_out.c_str()};
    return finish(ns_stage_eval_clientrate(&o, &report), report);
  }
  if (*validate) return taxonomy_command(tx_path, false, tx_strict);
  if (*stats) return taxonomy_command(tx_path, true, false);
  if (*pipeline) return finish(ns_pipeline_run(pl_config.c_str(), pl_out.c_str(), &report), report);
  return 2;
}
