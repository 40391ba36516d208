#include "aggregation/aggregate.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <sstream>

#include "core/error.hpp"
#include "core/text.hpp"

namespace needscope {

std::string_view geo_level_name(GeoLevel level) {
  switch (level) {
    case GeoLevel::kZip: return "zip";
    case GeoLevel::kCounty: return "county";
    case GeoLevel::kState: return "state";
    case GeoLevel::kNational: return "national";
  }
  return "?";
}

std::optional<GeoLevel> parse_geo_level(std::string_view name) {
  for (auto l : {GeoLevel::kZip, GeoLevel::kCounty, GeoLevel::kState, GeoLevel::kNational}) {
    if (geo_level_name(l) == name) return l;
  }
  return std::nullopt;
}

std::string_view time_resolution_name(TimeResolution r) {
  return r == TimeResolution::kDay ? "day" : "week";
}

std::optional<TimeResolution> parse_time_resolution(std::string_view name) {
  if (name == "day") return TimeResolution::kDay;
  if (name == "week") return TimeResolution::kWeek;
  return std::nullopt;
}

bool is_valid_geo_code(GeoLevel level, std::string_view code) {
  auto digits = [&](std::size_t n) {
    return code.size() == n &&
           std::all_of(code.begin(), code.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  switch (level) {
    case GeoLevel::kZip: return digits(5);
    case GeoLevel::kCounty: return digits(5);
    case GeoLevel::kState:
      return code.size() == 2 && std::all_of(code.begin(), code.end(),
                                              [](char c) { return c >= 'A' && c <= 'Z'; });
    case GeoLevel::kNational: return code == "US";
  }
  return false;
}

GeoKey GeoKey::make(GeoLevel level, std::string code) {
  if (!is_valid_geo_code(level, code)) {
    throw Error(ErrorCode::kInvalidArgument, "malformed " + std::string(geo_level_name(level)) +
                                                 " code '" + code + "'");
  }
  return GeoKey{level, std::move(code)};
}

GeoKey GeoKey::parse(std::string_view text) {
  if (text == "US" || text == "national" || text == "national:US") return national();
  auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorCode::kInvalidArgument,
                "geo '" + std::string(text) + "' must be US or level:code");
  }
  auto level = parse_geo_level(text.substr(0, colon));
  if (!level) {
    throw Error(ErrorCode::kInvalidArgument,
                "unknown geo level '" + std::string(text.substr(0, colon)) + "'");
  }
  return make(*level, std::string(text.substr(colon + 1)));
}

std::string GeoKey::to_string() const {
  if (level == GeoLevel::kNational) return "US";
  return std::string(geo_level_name(level)) + ":" + code;
}

GeoCrosswalk GeoCrosswalk::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

GeoCrosswalk GeoCrosswalk::parse(std::string_view csv, std::string_view source) {
  GeoCrosswalk xw;
  std::size_t line_no = 0;
  for (auto raw : split(csv, '\n')) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line_no == 1 && starts_with(line, "zip")) continue;
    auto f = split(line, ',');
    auto where = std::string(source) + ":" + std::to_string(line_no);
    if (f.size() != 3) throw Error(ErrorCode::kParse, where + ": want zip,county_fips,state");
    auto zip = trim(f[0]), county = trim(f[1]), state = trim(f[2]);
    if (!is_valid_geo_code(GeoLevel::kZip, zip) || !is_valid_geo_code(GeoLevel::kCounty, county) ||
        !is_valid_geo_code(GeoLevel::kState, state)) {
      throw Error(ErrorCode::kParse, where + ": malformed zip, county or state code");
    }
    try {
      xw.add(zip, county, state);
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
  }
  return xw;
}

void GeoCrosswalk::add(std::string_view zip, std::string_view county, std::string_view state) {
  auto [zit, znew] = zip_county_.try_emplace(std::string(zip), std::string(county));
  if (!znew && zit->second != county) {
    throw Error(ErrorCode::kValidation, "ZIP " + std::string(zip) + " maps to two counties");
  }
  auto [cit, cnew] = county_state_.try_emplace(std::string(county), std::string(state));
  if (!cnew && cit->second != state) {
    throw Error(ErrorCode::kValidation, "county " + std::string(county) + " maps to two states");
  }
}

const std::string* GeoCrosswalk::county_of(std::string_view zip) const {
  auto it = zip_county_.find(std::string(zip));
  return it == zip_county_.end() ? nullptr : &it->second;
}

const std::string* GeoCrosswalk::state_of_county(std::string_view county) const {
  auto it = county_state_.find(std::string(county));
  return it == county_state_.end() ? nullptr : &it->second;
}

std::optional<std::string> GeoCrosswalk::lift(const GeoKey& from, GeoLevel to) const {
  if (to == from.level) return from.code;
  if (to == GeoLevel::kNational) return std::string("US");
  if (to < from.level) return std::nullopt;
  std::string county;
  if (from.level == GeoLevel::kZip) {
    const auto* c = county_of(from.code);
    if (!c) return std::nullopt;
    if (to == GeoLevel::kCounty) return *c;
    county = *c;
  } else {
    county = from.code;
  }
  const auto* s = state_of_county(county);
  if (!s) return std::nullopt;
  return *s;
}

namespace {

constexpr std::uint64_t kDateBits = 24;
constexpr std::uint64_t kGeoBits = 24;
constexpr std::uint64_t kDateMask = (1ULL << kDateBits) - 1;
constexpr std::uint64_t kGeoMask = (1ULL << kGeoBits) - 1;

std::uint64_t date_bits(Date date) {
  if (date.serial() < 0 || static_cast<std::uint64_t>(date.serial()) > kDateMask) {
    throw Error(ErrorCode::kOutOfRange, "date " + date.to_string() + " outside supported span");
  }
  return static_cast<std::uint64_t>(date.serial());
}

Date key_date(std::uint64_t key) { return Date::from_serial(static_cast<std::int32_t>(key & kDateMask)); }
std::uint32_t key_geo(std::uint64_t key) {
  return static_cast<std::uint32_t>((key >> kDateBits) & kGeoMask);
}
std::uint32_t key_need(std::uint64_t key) {
  return static_cast<std::uint32_t>(key >> (kDateBits + kGeoBits));
}

Date bucket(Date d, TimeResolution r) { return r == TimeResolution::kWeek ? d.iso_week_start() : d; }

}  // namespace

std::uint64_t AggregateTable::cell_key(std::uint32_t need, std::uint32_t geo, Date date) {
  return (static_cast<std::uint64_t>(need) << (kDateBits + kGeoBits)) |
         (static_cast<std::uint64_t>(geo) << kDateBits) | date_bits(date);
}

std::uint64_t AggregateTable::volume_key(std::uint32_t geo, Date date) {
  return (static_cast<std::uint64_t>(geo) << kDateBits) | date_bits(date);
}

std::uint32_t AggregateTable::need_id(std::string_view need) {
  auto [it, inserted] =
      need_index_.try_emplace(std::string(need), static_cast<std::uint32_t>(needs_.size()));
  if (inserted) {
    if (needs_.size() >= (1u << 16)) throw Error(ErrorCode::kOutOfRange, "too many need keys");
    needs_.emplace_back(need);
  }
  return it->second;
}

std::optional<std::uint32_t> AggregateTable::find_need(std::string_view need) const {
  auto it = need_index_.find(std::string(need));
  if (it == need_index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t AggregateTable::geo_id(const GeoKey& geo) {
  if (geo.level != level_) {
    throw Error(ErrorCode::kInvalidArgument, "geo " + geo.to_string() + " does not match a " +
                                                 std::string(geo_level_name(level_)) +
                                                 "-level table");
  }
  auto [it, inserted] = geo_index_.try_emplace(geo, static_cast<std::uint32_t>(geos_.size()));
  if (inserted) {
    if (geos_.size() > kGeoMask) throw Error(ErrorCode::kOutOfRange, "too many geo units");
    geos_.push_back(geo);
  }
  return it->second;
}

std::optional<std::uint32_t> AggregateTable::find_geo(const GeoKey& geo) const {
  auto it = geo_index_.find(geo);
  if (it == geo_index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t AggregateTable::zip_geo_id(std::string_view zip) {
  auto it = zip_cache_.find(std::string(zip));
  if (it != zip_cache_.end()) return it->second;
  auto id = geo_id(GeoKey::make(GeoLevel::kZip, std::string(zip)));
  zip_cache_.emplace(std::string(zip), id);
  return id;
}

void AggregateTable::register_need(std::string_view need) { need_id(need); }

void AggregateTable::register_taxonomy(const NeedTaxonomy& tax) {
  all_need_ = need_id(kAllNeedsKey);
  for (auto c : kAllCategories) need_id(category_name(c));
  detector_need_.clear();
  detector_category_need_.clear();
  for (const auto& d : tax.detectors) {
    detector_need_.push_back(need_id(d.id));
    detector_category_need_.push_back(need_id(category_name(d.category)));
  }
  registered_ = &tax;
}

void AggregateTable::add(const SearchInteraction& x, const std::vector<std::uint32_t>& detectors,
                         const NeedTaxonomy& tax) {
  if (level_ != GeoLevel::kZip) {
    throw Error(ErrorCode::kInvalidArgument, "interactions can only be added to a ZIP-level table");
  }
  if (registered_ != &tax) register_taxonomy(tax);
  const Date day = bucket(x.date(), resolution_);
  const std::uint32_t geo = zip_geo_id(x.zip);
  ++volume_[volume_key(geo, day)];
  if (detectors.empty()) return;
  ++matched_[cell_key(all_need_, geo, day)];
  std::array<std::uint32_t, 8> seen_categories{};
  std::size_t n_seen = 0;
  for (auto d : detectors) {
    ++matched_[cell_key(detector_need_.at(d), geo, day)];
    const std::uint32_t cat = detector_category_need_[d];
    if (std::find(seen_categories.begin(), seen_categories.begin() + n_seen, cat) ==
        seen_categories.begin() + n_seen) {
      seen_categories[n_seen++] = cat;
      ++matched_[cell_key(cat, geo, day)];
    }
  }
}

void AggregateTable::add_matched(std::string_view need, Date date, const GeoKey& geo,
                                 std::int64_t n) {
  auto key = cell_key(need_id(need), geo_id(geo), bucket(date, resolution_));
  if (n != 0) matched_[key] += n;
}

void AggregateTable::add_volume(Date date, const GeoKey& geo, std::int64_t n) {
  volume_[volume_key(geo_id(geo), bucket(date, resolution_))] += n;
}

void AggregateTable::merge(const AggregateTable& other) {
  if (other.level_ != level_ || other.resolution_ != resolution_) {
    throw Error(ErrorCode::kInvalidArgument, "cannot merge tables of different resolution");
  }
  for (const auto& n : other.needs_) need_id(n);
  for (const auto& [key, n] : other.matched_) {
    matched_[cell_key(need_id(other.needs_[key_need(key)]), geo_id(other.geos_[key_geo(key)]),
                      key_date(key))] += n;
  }
  for (const auto& [key, n] : other.volume_) {
    volume_[volume_key(geo_id(other.geos_[key_geo(key)]), key_date(key))] += n;
  }
}

std::int64_t AggregateTable::matched(std::string_view need, Date date, const GeoKey& geo) const {
  auto n = find_need(need);
  if (!n) throw Error(ErrorCode::kInvalidArgument, "unknown need key '" + std::string(need) + "'");
  auto g = find_geo(geo);
  if (!g) return 0;
  auto it = matched_.find(cell_key(*n, *g, bucket(date, resolution_)));
  return it == matched_.end() ? 0 : it->second;
}

std::int64_t AggregateTable::volume(Date date, const GeoKey& geo) const {
  auto g = find_geo(geo);
  if (!g) return 0;
  auto it = volume_.find(volume_key(*g, bucket(date, resolution_)));
  return it == volume_.end() ? 0 : it->second;
}

std::vector<Counts> AggregateTable::slice(std::string_view need, const GeoKey& geo,
                                          DateRange range) const {
  auto n = find_need(need);
  if (!n) throw Error(ErrorCode::kInvalidArgument, "unknown need key '" + std::string(need) + "'");
  const int step = resolution_ == TimeResolution::kWeek ? 7 : 1;
  std::vector<Counts> out;
  if (range.empty()) return out;
  auto g = find_geo(geo);
  for (Date d = bucket(range.first, resolution_); d <= range.last; d = d + step) {
    Counts c;
    if (g) {
      auto m = matched_.find(cell_key(*n, *g, d));
      if (m != matched_.end()) c.matched = m->second;
      auto v = volume_.find(volume_key(*g, d));
      if (v != volume_.end()) c.volume = v->second;
    }
    out.push_back(c);
  }
  return out;
}

std::vector<GeoKey> AggregateTable::geos() const {
  std::set<std::uint32_t> used;
  for (const auto& [key, n] : volume_) used.insert(key_geo(key));
  std::vector<GeoKey> out;
  for (auto g : used) out.push_back(geos_[g]);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Date> AggregateTable::dates() const {
  std::set<Date> used;
  for (const auto& [key, n] : volume_) used.insert(key_date(key));
  return {used.begin(), used.end()};
}

std::int64_t AggregateTable::total_volume() const {
  std::int64_t total = 0;
  for (const auto& [key, n] : volume_) total += n;
  return total;
}

std::vector<AggregateTable::Cell> AggregateTable::cells() const {
  std::vector<Cell> out;
  for (const auto& [key, n] : matched_) {
    if (n != 0) out.push_back(Cell{needs_[key_need(key)], key_date(key), geos_[key_geo(key)], n});
  }
  std::sort(out.begin(), out.end(), [](const Cell& a, const Cell& b) {
    return std::tie(a.need, a.date, a.geo) < std::tie(b.need, b.date, b.geo);
  });
  return out;
}

std::vector<std::pair<std::pair<Date, GeoKey>, std::int64_t>> AggregateTable::volumes() const {
  std::vector<std::pair<std::pair<Date, GeoKey>, std::int64_t>> out;
  for (const auto& [key, n] : volume_) {
    out.push_back({{key_date(key), geos_[key_geo(key)]}, n});
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool operator==(const AggregateTable& a, const AggregateTable& b) {
  if (a.level_ != b.level_ || a.resolution_ != b.resolution_) return false;
  std::set<std::string> na(a.needs_.begin(), a.needs_.end());
  std::set<std::string> nb(b.needs_.begin(), b.needs_.end());
  if (na != nb) return false;
  auto ca = a.cells(), cb = b.cells();
  if (ca.size() != cb.size()) return false;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    if (ca[i].need != cb[i].need || ca[i].date != cb[i].date || ca[i].geo != cb[i].geo ||
        ca[i].matched != cb[i].matched) {
      return false;
    }
  }
  return a.volumes() == b.volumes();
}

AggregateTable rollup(const AggregateTable& table, GeoLevel to_level, TimeResolution to_time,
                      const GeoCrosswalk* crosswalk) {
  if (to_level < table.level()) {
    throw Error(ErrorCode::kInvalidArgument,
                "cannot roll " + std::string(geo_level_name(table.level())) + " down to " +
                    std::string(geo_level_name(to_level)));
  }
  if (to_time == TimeResolution::kDay && table.resolution() == TimeResolution::kWeek) {
    throw Error(ErrorCode::kInvalidArgument, "cannot roll weekly counts down to days");
  }
  const bool needs_xwalk = to_level != table.level() && to_level != GeoLevel::kNational;
  if (needs_xwalk && !crosswalk) {
    throw Error(ErrorCode::kConfig, "a crosswalk is required to roll up to " +
                                        std::string(geo_level_name(to_level)));
  }

  AggregateTable out(to_level, to_time);
  for (const auto& n : table.needs()) out.register_need(n);

  std::map<GeoKey, std::optional<GeoKey>> lifted;
  std::set<std::string> missing;
  auto lift = [&](const GeoKey& g) -> const std::optional<GeoKey>& {
    auto it = lifted.find(g);
    if (it != lifted.end()) return it->second;
    std::optional<GeoKey> target;
    if (to_level == table.level()) {
      target = g;
    } else if (to_level == GeoLevel::kNational) {
      target = GeoKey::national();
    } else if (auto code = crosswalk->lift(g, to_level)) {
      target = GeoKey::make(to_level, *code);
    } else {
      missing.insert(g.to_string());
    }
    return lifted.emplace(g, std::move(target)).first->second;
  };

  for (const auto& [dg, n] : table.volumes()) {
    if (const auto& t = lift(dg.second)) out.add_volume(dg.first, *t, n);
  }
  for (const auto& c : table.cells()) {
    if (const auto& t = lift(c.geo)) out.add_matched(c.need, c.date, *t, c.matched);
  }
  if (!missing.empty()) {
    std::vector<std::string> list(missing.begin(), missing.end());
    throw Error(ErrorCode::kValidation,
                "crosswalk has no mapping for " + std::to_string(list.size()) + " unit(s): " +
                    join(list, ", "));
  }
  return out;
}

double expression_rate(const AggregateTable& table, std::string_view need, DateRange window,
                       const GeoKey& geo) {
  std::int64_t matched = 0, volume = 0;
  for (const auto& c : table.slice(need, geo, window)) {
    matched += c.matched;
    volume += c.volume;
  }
  if (volume <= 0) {
    throw Error(ErrorCode::kUndefined, "no query volume for " + geo.to_string() + " in " +
                                           window.to_string());
  }
  return static_cast<double>(matched) / static_cast<double>(volume);
}

void write_cube(const AggregateTable& table, std::ostream& out) {
  std::vector<std::string> needs = table.needs();
  std::sort(needs.begin(), needs.end());
  out << "#resolution=" << time_resolution_name(table.resolution()) << '\n';
  out << "#needs=" << join(needs, ";") << '\n';
  out << kCubeHeader << '\n';

  std::map<std::pair<Date, GeoKey>, std::pair<std::int64_t, std::vector<std::pair<std::string, std::int64_t>>>> rows;
  for (const auto& [dg, n] : table.volumes()) rows[dg].first = n;
  for (const auto& c : table.cells()) {
    if (c.need != kAllNeedsKey) rows[{c.date, c.geo}].second.emplace_back(c.need, c.matched);
  }
  const bool has_all = table.has_need(kAllNeedsKey);
  for (auto& [dg, entry] : rows) {
    auto& [volume, needs_here] = entry;
    const auto& [date, geo] = dg;
    const std::string suffix = '\t' + date.to_string() + '\t' +
                               std::string(geo_level_name(geo.level)) + '\t' + geo.code;
    auto write_row = [&](std::string_view need, std::int64_t matched) {
      out << need << suffix << '\t' << matched << '\t' << volume << '\n';
    };
    if (has_all) write_row(kAllNeedsKey, table.matched(kAllNeedsKey, date, geo));
    std::sort(needs_here.begin(), needs_here.end());
    for (const auto& [need, matched] : needs_here) write_row(need, matched);
  }
}

void write_cube_file(const AggregateTable& table, const std::filesystem::path& path) {
  AtomicFileWriter writer(path);
  write_cube(table, writer.stream());
  if (!writer.stream()) throw Error(ErrorCode::kIo, "failed writing " + path.string());
  writer.commit();
}

AggregateTable read_cube(std::istream& in, std::string_view source) {
  std::string line;
  std::size_t line_no = 0;
  TimeResolution resolution = TimeResolution::kDay;
  std::vector<std::string> declared;
  std::optional<AggregateTable> table;
  std::map<std::pair<Date, GeoKey>, std::int64_t> volumes;
  auto fail = [&](const std::string& why) -> Error {
    return Error(ErrorCode::kParse,
                 std::string(source) + ":" + std::to_string(line_no) + ": " + why);
  };
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (starts_with(line, "#resolution=")) {
        auto r = parse_time_resolution(std::string_view(line).substr(12));
        if (!r) throw fail("unknown resolution");
        resolution = *r;
      } else if (starts_with(line, "#needs=")) {
        for (auto n : split(std::string_view(line).substr(7), ';')) {
          if (!n.empty()) declared.emplace_back(n);
        }
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      if (line == kCubeHeader) continue;
    }
    auto f = split(line, '\t');
    if (f.size() != 6) throw fail("wrong field count (" + std::to_string(f.size()) + ", want 6)");
    auto level = parse_geo_level(f[2]);
    if (!level) throw fail("unknown geo level '" + std::string(f[2]) + "'");
    if (!table) {
      table.emplace(*level, resolution);
      for (const auto& n : declared) table->register_need(n);
    } else if (table->level() != *level) {
      throw fail("mixed geo levels in one cube");
    }
    Date date;
    GeoKey geo;
    std::int64_t matched = 0, volume = 0;
    try {
      date = Date::parse(f[1]);
      geo = GeoKey::make(*level, std::string(f[3]));
      matched = parse_int(f[4], "matched");
      volume = parse_int(f[5], "volume");
    } catch (const Error& e) {
      throw fail(e.what());
    }
    if (matched < 0 || volume < 0 || matched > volume) throw fail("inconsistent counts");
    auto [it, inserted] = volumes.try_emplace({date, geo}, volume);
    if (!inserted && it->second != volume) throw fail("volume disagrees with an earlier row");
    table->add_matched(f[0], date, geo, matched);
  }
  if (!table) {
    table.emplace(GeoLevel::kZip, resolution);
    for (const auto& n : declared) table->register_need(n);
  }
  for (const auto& [dg, n] : volumes) table->add_volume(dg.first, dg.second, n);
  return std::move(*table);
}

AggregateTable read_cube_file(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  return read_cube(in, path.string());
}

}  // namespace needscope
