#include "synthgen/generator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include "core/error.hpp"
#include "core/parallel.hpp"
#include "core/random.hpp"
#include "core/text.hpp"
#include "json.hpp"
#include "trend/trend.hpp"

namespace needscope {

namespace {

using nlohmann::json;

const Date kSeasonOrigin = Date::from_ymd(2020, 1, 1);
const Date kDriftOrigin = Date::from_ymd(2019, 1, 1);

[[noreturn]] void config_error(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kConfig, "generator config: " + field + ": " + why);
}

template <typename T>
T get_field(const json& j, const std::string& field, const std::string& path) {
  try {
    return j.at(field).get<T>();
  } catch (const json::exception&) {
    config_error(path + field, "missing or wrong type");
  }
}

DateRange get_range(const json& j, const std::string& field, const std::string& path) {
  auto text = get_field<std::string>(j, field, path);
  try {
    return DateRange::parse(text);
  } catch (const Error& e) {
    config_error(path + field, e.what());
  }
}

Date get_date(const json& j, const std::string& field, const std::string& path) {
  auto text = get_field<std::string>(j, field, path);
  try {
    return Date::parse(text);
  } catch (const Error& e) {
    config_error(path + field, e.what());
  }
}

const std::vector<DetectorExample>& builtin_background() {
  static const std::vector<DetectorExample> pool = [] {
    std::vector<DetectorExample> v;
    auto add = [&](std::string q, std::optional<std::string> url = std::nullopt) {
      v.push_back(DetectorExample{std::move(q), std::move(url)});
    };
    add("weather tomorrow", "https://weather.com/weather/tenday");
    add("nba scores", "https://www.espn.com/nba/scoreboard");
    add("movie times near me");
    add("how tall is mount everest", "https://en.wikipedia.org/wiki/mount_everest");
    add("translate hello to spanish", "https://translate.google.com/");
    add("capital of australia");
    add("python list comprehension", "https://docs.python.org/3/tutorial/datastructures.html");
    add("time zone converter");
    add("lyrics yesterday beatles");
    add("define serendipity", "https://www.merriam-webster.com/dictionary/serendipity");
    add("sunset time today");
    add("convert cups to grams");
    add("nfl schedule", "https://www.nfl.com/schedules/");
    add("history of the roman empire", "https://en.wikipedia.org/wiki/roman_empire");
    add("how to tie a tie");
    add("cute cat videos", "https://www.youtube.com/results?search_query=cute+cat+videos");
    add("crossword clue river in france");
    add("distance from earth to moon");
    add("famous paintings by monet", "https://en.wikipedia.org/wiki/claude_monet");
    add("tv guide tonight");
    add("zip code lookup", "https://tools.usps.com/zip-code-lookup.htm");
    add("world cup 2018 winner");
    add("how many ounces in a pound");
    add("car wash near me");
    add("news", "https://www.cnn.com/");
    add("email", "https://outlook.live.com/");
    add("what year did the titanic sink");
    add("guitar chords for beginners");
    return v;
  }();
  return pool;
}

}  // namespace

GeneratorConfig parse_generator_config(std::string_view text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kConfig, std::string("generator config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::kConfig, "generator config must be a JSON object");

  GeneratorConfig cfg;
  cfg.seed = get_field<std::uint64_t>(j, "seed", "");
  if (j.contains("range_2019")) cfg.obs.range_2019 = get_range(j, "range_2019", "");
  if (j.contains("range_2020")) cfg.obs.range_2020 = get_range(j, "range_2020", "");
  if (j.contains("exact")) cfg.exact = get_field<bool>(j, "exact", "");
  if (j.contains("clients_per_zip")) cfg.clients_per_zip = get_field<int>(j, "clients_per_zip", "");
  if (j.contains("taxonomy")) {
    std::filesystem::path p = get_field<std::string>(j, "taxonomy", "");
    cfg.taxonomy = p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  }

  if (!j.contains("zips") || !j["zips"].is_array()) config_error("zips", "missing or not a list");
  for (std::size_t i = 0; i < j["zips"].size(); ++i) {
    const auto& z = j["zips"][i];
    const auto path = "zips[" + std::to_string(i) + "].";
    cfg.zips.push_back({get_field<std::string>(z, "zip", path), get_field<double>(z, "daily_volume", path)});
  }
  if (!j.contains("needs") || !j["needs"].is_array()) config_error("needs", "missing or not a list");
  for (std::size_t i = 0; i < j["needs"].size(); ++i) {
    const auto& n = j["needs"][i];
    const auto path = "needs[" + std::to_string(i) + "].";
    cfg.needs.push_back({get_field<std::string>(n, "detector", path), get_field<double>(n, "rate", path)});
  }
  if (j.contains("weekday_multipliers")) {
    auto w = get_field<std::vector<double>>(j, "weekday_multipliers", "");
    if (w.size() != 7) config_error("weekday_multipliers", "want 7 values, Monday first");
    std::copy(w.begin(), w.end(), cfg.weekday_multipliers.begin());
  }
  if (j.contains("seasonality")) {
    for (std::size_t i = 0; i < j["seasonality"].size(); ++i) {
      const auto& s = j["seasonality"][i];
      const auto path = "seasonality[" + std::to_string(i) + "].";
      SeasonalTerm t;
      t.amplitude = get_field<double>(s, "amplitude", path);
      if (s.contains("period_days")) t.period_days = get_field<double>(s, "period_days", path);
      if (s.contains("phase_days")) t.phase_days = get_field<double>(s, "phase_days", path);
      cfg.seasonality.push_back(t);
    }
  }
  if (j.contains("drift")) {
    const auto& d = j["drift"];
    if (d.contains("annual_growth")) cfg.annual_growth = get_field<double>(d, "annual_growth", "drift.");
    if (d.contains("steps")) {
      for (std::size_t i = 0; i < d["steps"].size(); ++i) {
        const auto path = "drift.steps[" + std::to_string(i) + "].";
        cfg.drift_steps.push_back({get_date(d["steps"][i], "from", path),
                                   get_field<double>(d["steps"][i], "factor", path)});
      }
    }
  }
  if (j.contains("shocks")) {
    for (std::size_t i = 0; i < j["shocks"].size(); ++i) {
      const auto& s = j["shocks"][i];
      const auto path = "shocks[" + std::to_string(i) + "].";
      Shock shock;
      shock.need = get_field<std::string>(s, "need", path);
      if (s.contains("zips")) shock.zips = get_field<std::vector<std::string>>(s, "zips", path);
      shock.window = DateRange{get_date(s, "from", path), get_date(s, "to", path)};
      shock.multiplier = get_field<double>(s, "multiplier", path);
      cfg.shocks.push_back(std::move(shock));
    }
  }
  if (j.contains("background")) {
    for (std::size_t i = 0; i < j["background"].size(); ++i) {
      const auto& b = j["background"][i];
      const auto path = "background[" + std::to_string(i) + "].";
      DetectorExample ex;
      ex.query = normalize_text(get_field<std::string>(b, "query", path));
      if (b.contains("url")) {
        auto url = normalize_text(get_field<std::string>(b, "url", path));
        if (!url.empty()) ex.clicked_url = std::move(url);
      }
      cfg.background.push_back(std::move(ex));
    }
  }
  cfg.validate();
  return cfg;
}

GeneratorConfig load_generator_config(const std::filesystem::path& path) {
  require_input_file(path, "generator config");
  return parse_generator_config(read_file(path), path.parent_path());
}

void GeneratorConfig::validate() const {
  try {
    obs.validate();
  } catch (const Error& e) {
    config_error("ranges", e.what());
  }
  if (clients_per_zip < 1) config_error("clients_per_zip", "must be at least 1");
  if (zips.empty()) config_error("zips", "at least one ZIP is required");
  std::set<std::string> seen_zips;
  for (const auto& z : zips) {
    if (!is_valid_zip(z.zip)) config_error("zips", "invalid ZIP '" + z.zip + "'");
    if (!seen_zips.insert(z.zip).second) config_error("zips", "ZIP " + z.zip + " listed twice");
    if (!(z.daily_volume > 0)) config_error("zips", z.zip + ": daily_volume must be > 0");
  }
  std::set<std::string> seen_needs;
  for (const auto& n : needs) {
    if (!(n.rate > 0 && n.rate < 1)) config_error("needs", n.detector + ": rate must lie in (0, 1)");
    if (!seen_needs.insert(n.detector).second) config_error("needs", n.detector + " listed twice");
  }
  for (double w : weekday_multipliers) {
    if (!(w > 0)) config_error("weekday_multipliers", "multipliers must be > 0");
  }
  double amplitude = 0.0;
  for (const auto& s : seasonality) {
    if (!(s.period_days > 0)) config_error("seasonality", "period_days must be > 0");
    amplitude += std::abs(s.amplitude);
  }
  if (!(amplitude < 1.0)) config_error("seasonality", "amplitudes must sum below 1");
  if (!(annual_growth > -1.0)) config_error("drift.annual_growth", "must exceed -1");
  for (const auto& s : drift_steps) {
    if (!(s.factor > 0)) config_error("drift.steps", "factors must be > 0");
  }
  for (const auto& s : shocks) {
    if (!seen_needs.count(s.need)) config_error("shocks", "need " + s.need + " is not configured");
    if (!(s.multiplier > 0)) config_error("shocks", s.need + ": multiplier must be > 0");
    if (s.window.empty() || !obs.range_2020.contains(s.window.first) ||
        !obs.range_2020.contains(s.window.last)) {
      config_error("shocks", s.need + ": window must lie within range_2020");
    }
    for (const auto& z : s.zips) {
      if (!seen_zips.count(z)) config_error("shocks", s.need + ": unknown ZIP " + z);
    }
  }
  // Total need share must stay below 1 on every day.
  for (const auto* range : {&obs.range_2019, &obs.range_2020}) {
    for (Date d = range->first; d <= range->last; ++d) {
      for (std::size_t z = 0; z < zips.size(); ++z) {
        double total = 0.0;
        for (std::size_t n = 0; n < needs.size(); ++n) total += need_share(n, z, d);
        if (!(total < 1.0)) {
          config_error("needs", "need shares reach " + format_double(total) + " on " +
                                    d.to_string() + " in ZIP " + zips[z].zip);
        }
      }
    }
  }
}

double GeneratorConfig::aligned_day(Date d) const {
  const Date a = obs.range_2019.contains(d) ? d + 364 : d;
  return static_cast<double>(a - kSeasonOrigin);
}

double GeneratorConfig::seasonal_multiplier(Date d) const {
  const double t = aligned_day(d);
  double m = 1.0;
  for (const auto& s : seasonality) {
    m += s.amplitude * std::sin(2.0 * std::numbers::pi * (t - s.phase_days) / s.period_days);
  }
  return m;
}

double GeneratorConfig::volume_multiplier(Date d) const {
  double m = std::pow(1.0 + annual_growth, static_cast<double>(d - kDriftOrigin) / 365.25);
  for (const auto& s : drift_steps) {
    if (d >= s.from) m *= s.factor;
  }
  return m;
}

double GeneratorConfig::expected_volume(std::size_t zip, Date d) const {
  return zips.at(zip).daily_volume * weekday_multipliers[d.iso_weekday() - 1] * volume_multiplier(d);
}

double GeneratorConfig::need_share(std::size_t need, std::size_t zip, Date d) const {
  double e = needs.at(need).rate * weekday_multipliers[d.iso_weekday() - 1] * seasonal_multiplier(d);
  for (const auto& s : shocks) {
    if (s.need != needs[need].detector || !s.window.contains(d)) continue;
    if (!s.zips.empty() && std::find(s.zips.begin(), s.zips.end(), zips[zip].zip) == s.zips.end()) {
      continue;
    }
    e *= s.multiplier;
  }
  return e;
}

std::int64_t GroundTruth::total_volume() const {
  std::int64_t t = 0;
  for (const auto& v : volumes) t += v.volume;
  return t;
}

std::int64_t GroundTruth::total_matched(std::uint32_t need) const {
  std::int64_t t = 0;
  for (const auto& c : cells) {
    if (c.need == need) t += c.matched;
  }
  return t;
}

double implied_change(const GeneratorConfig& cfg, std::string_view need,
                      const std::vector<std::string>& zips, DateRange t1, DateRange t2) {
  std::optional<std::size_t> n;
  for (std::size_t i = 0; i < cfg.needs.size(); ++i) {
    if (cfg.needs[i].detector == need) n = i;
  }
  if (!n) throw Error(ErrorCode::kInvalidArgument, "need " + std::string(need) + " is not configured");
  std::vector<std::size_t> zs;
  for (std::size_t z = 0; z < cfg.zips.size(); ++z) {
    if (zips.empty() || std::find(zips.begin(), zips.end(), cfg.zips[z].zip) != zips.end()) {
      zs.push_back(z);
    }
  }
  auto pooled = [&](DateRange w, int shift) {
    double m = 0.0, v = 0.0;
    for (Date d = w.first; d <= w.last; ++d) {
      if (!cfg.obs.range_2020.contains(d) || !cfg.obs.range_2019.contains(d - 364)) continue;
      const Date day = d - shift;
      for (auto z : zs) {
        const double vol = cfg.expected_volume(z, day);
        m += vol * cfg.need_share(*n, z, day);
        v += vol;
      }
    }
    if (!(v > 0)) throw Error(ErrorCode::kUndefined, "window " + w.to_string() + " has no paired days");
    return m / v;
  };
  return relative_change(pooled(t2, 0), pooled(t1, 0), pooled(t2, 364), pooled(t1, 364));
}

namespace {

struct ChunkPlan {
  int year;
  unsigned month;
  std::uint32_t zip;
  DateRange days;
};

struct ChunkResult {
  GeneratedChunk chunk;
  std::vector<GroundTruthCell> cells;
  std::vector<GroundTruthVolume> volumes;
  std::int64_t matched = 0;
};

std::int64_t draw(double mean, bool exact, Rng& rng) {
  if (!(mean > 0)) return 0;
  if (exact) return std::llround(mean);
  return std::poisson_distribution<std::int64_t>(mean)(rng);
}

ChunkResult generate_chunk(const GeneratorConfig& cfg, const ChunkPlan& plan,
                           const std::vector<std::vector<DetectorExample>>& templates,
                           const std::vector<DetectorExample>& background,
                           const std::vector<std::string>& clients) {
  ChunkResult out;
  out.chunk.year = plan.year;
  out.chunk.month = plan.month;
  out.chunk.zip = plan.zip;
  const std::string& zip = cfg.zips[plan.zip].zip;
  Rng rng(derive_seed(cfg.seed, zip, plan.year * 12 + static_cast<int>(plan.month)));
  std::uniform_int_distribution<int> second(0, 86399);
  std::uniform_int_distribution<std::size_t> client(0, clients.size() - 1);

  std::vector<std::pair<int, std::int32_t>> slots;  // (second, need index or -1)
  for (Date d = plan.days.first; d <= plan.days.last; ++d) {
    const double vol = cfg.expected_volume(plan.zip, d);
    double share_total = 0.0;
    std::int64_t day_volume = 0;
    slots.clear();
    for (std::uint32_t n = 0; n < cfg.needs.size(); ++n) {
      const double share = cfg.need_share(n, plan.zip, d);
      share_total += share;
      const double expected = vol * share;
      const std::int64_t m = draw(expected, cfg.exact, rng);
      out.cells.push_back(GroundTruthCell{n, d, plan.zip, expected, m});
      out.matched += m;
      day_volume += m;
      for (std::int64_t k = 0; k < m; ++k) slots.emplace_back(0, static_cast<std::int32_t>(n));
    }
    const std::int64_t b = draw(vol * (1.0 - share_total), cfg.exact, rng);
    day_volume += b;
    for (std::int64_t k = 0; k < b; ++k) slots.emplace_back(0, -1);
    out.volumes.push_back(GroundTruthVolume{d, plan.zip, vol, day_volume});

    for (auto& s : slots) s.first = second(rng);
    std::stable_sort(slots.begin(), slots.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [sec, kind] : slots) {
      const auto& pool = kind < 0 ? background : templates[kind];
      const auto& ex = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
      SearchInteraction r;
      r.timestamp = Timestamp::from_date(d, sec);
      r.query = ex.query;
      r.clicked_url = ex.clicked_url;
      r.zip = zip;
      r.client_hash = clients[client(rng)];
      out.chunk.records.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<ChunkPlan> plan_chunks(const GeneratorConfig& cfg) {
  std::vector<ChunkPlan> plans;
  const std::pair<int, DateRange> years[] = {{2019, cfg.obs.range_2019}, {2020, cfg.obs.range_2020}};
  for (const auto& [year, range] : years) {
    Date d = range.first;
    while (d <= range.last) {
      const unsigned month = d.month();
      Date end = d;
      while (end + 1 <= range.last && (end + 1).month() == month) ++end;
      for (std::uint32_t z = 0; z < cfg.zips.size(); ++z) {
        plans.push_back(ChunkPlan{year, month, z, DateRange{d, end}});
      }
      d = end + 1;
    }
  }
  return plans;
}

}  // namespace

GeneratorSummary generate(const GeneratorConfig& cfg, const CompiledMatcherSet& matcher,
                          const std::function<void(GeneratedChunk&&)>& sink) {
  cfg.validate();
  const auto& tax = matcher.taxonomy();
  GeneratorSummary summary;

  std::vector<std::vector<DetectorExample>> templates;
  std::vector<std::uint32_t> hits;
  for (const auto& n : cfg.needs) {
    auto idx = tax.find(n.detector);
    if (!idx) throw Error(ErrorCode::kConfig, "generator config: needs: " + n.detector + " is not in the taxonomy");
    std::vector<DetectorExample> pool;
    for (const auto& ex : tax.detectors[*idx].examples) {
      matcher.match(ex.query, ex.clicked_url, hits);
      if (hits.size() == 1 && hits[0] == *idx) pool.push_back(ex);
    }
    if (pool.empty()) {
      throw Error(ErrorCode::kConfig, "generator config: needs: " + n.detector +
                                          " has no example that classifies to exactly itself");
    }
    templates.push_back(std::move(pool));
  }
  std::vector<DetectorExample> background;
  for (const auto& ex : cfg.background.empty() ? builtin_background() : cfg.background) {
    matcher.match(ex.query, ex.clicked_url, hits);
    if (hits.empty()) {
      background.push_back(ex);
    } else {
      ++summary.rejected_background;
    }
  }
  if (background.empty()) {
    throw Error(ErrorCode::kConfig, "generator config: background: every template matches a detector");
  }
  summary.background_templates = background.size();
  if (summary.rejected_background) {
    summary.warnings.push_back(std::to_string(summary.rejected_background) +
                               " background template(s) matched a detector and were dropped");
  }

  std::vector<std::vector<std::string>> clients(cfg.zips.size());
  for (std::size_t z = 0; z < cfg.zips.size(); ++z) {
    for (int i = 0; i < cfg.clients_per_zip; ++i) {
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx",
                    static_cast<unsigned long long>(derive_seed(cfg.seed, "client", cfg.zips[z].zip, i)));
      clients[z].emplace_back(buf, 12);
    }
  }

  const auto plans = plan_chunks(cfg);
  const std::size_t block = std::max<std::size_t>(1, thread_limit()) * 2;
  std::vector<ChunkResult> results;
  for (std::size_t start = 0; start < plans.size(); start += block) {
    const std::size_t count = std::min(block, plans.size() - start);
    results.assign(count, ChunkResult{});
    parallel_for(count, [&](std::size_t i) {
      const auto& plan = plans[start + i];
      results[i] = generate_chunk(cfg, plan, templates, background, clients[plan.zip]);
    });
    for (auto& r : results) {
      const auto n = static_cast<std::int64_t>(r.chunk.records.size());
      (r.chunk.year == 2019 ? summary.interactions_2019 : summary.interactions_2020) += n;
      summary.matched += r.matched;
      if (n < cfg.obs.anonymity_threshold) {
        summary.warnings.push_back("ZIP " + cfg.zips[r.chunk.zip].zip + " has " + std::to_string(n) +
                                   " records in " + std::to_string(r.chunk.year) + "-" +
                                   std::to_string(r.chunk.month) +
                                   ", below the anonymity threshold");
      }
      summary.truth.cells.insert(summary.truth.cells.end(), r.cells.begin(), r.cells.end());
      summary.truth.volumes.insert(summary.truth.volumes.end(), r.volumes.begin(), r.volumes.end());
      sink(std::move(r.chunk));
    }
  }
  return summary;
}

GeneratorSummary generate_to_directory(const GeneratorConfig& cfg, const CompiledMatcherSet& matcher,
                                       const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot create " + out_dir.string() + ": " + ec.message());
  AtomicFileWriter w2019(out_dir / "interactions_2019.tsv");
  AtomicFileWriter w2020(out_dir / "interactions_2020.tsv");
  w2019.stream() << kInteractionHeader << '\n';
  w2020.stream() << kInteractionHeader << '\n';
  auto summary = generate(cfg, matcher, [&](GeneratedChunk&& chunk) {
    auto& out = chunk.year == 2019 ? w2019.stream() : w2020.stream();
    for (const auto& r : chunk.records) out << serialize_interaction(r) << '\n';
  });

  AtomicFileWriter truth(out_dir / "groundtruth.tsv");
  auto& out = truth.stream();
  out << kGroundTruthHeader << '\n';
  std::map<std::pair<Date, std::uint32_t>, const GroundTruthVolume*> volumes;
  for (const auto& v : summary.truth.volumes) volumes[{v.date, v.zip}] = &v;
  auto cells = summary.truth.cells;
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
    return std::tie(a.need, a.date, a.zip) < std::tie(b.need, b.date, b.zip);
  });
  for (const auto& c : cells) {
    const auto* v = volumes.at({c.date, c.zip});
    out << cfg.needs[c.need].detector << '\t' << c.date.to_string() << '\t' << cfg.zips[c.zip].zip
        << '\t' << format_double(c.expected_matched) << '\t' << c.matched << '\t'
        << format_double(v->expected_volume) << '\t' << v->volume << '\n';
  }
  for (auto* w : {&w2019, &w2020, &truth}) {
    if (!w->stream()) throw Error(ErrorCode::kIo, "failed writing generator output");
  }
  w2019.commit();
  w2020.commit();
  truth.commit();
  return summary;
}

}  // namespace needscope
