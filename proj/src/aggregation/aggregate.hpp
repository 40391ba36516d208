#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "classifier/classifier.hpp"
#include "core/date.hpp"

namespace needscope {

enum class GeoLevel : std::uint8_t { kZip, kCounty, kState, kNational };

std::string_view geo_level_name(GeoLevel level);
std::optional<GeoLevel> parse_geo_level(std::string_view name);

struct GeoKey {
  GeoLevel level = GeoLevel::kNational;
  std::string code = "US";

  static GeoKey national() { return {}; }
  // Throws Error(kInvalidArgument) when `code` is malformed for `level`.
  static GeoKey make(GeoLevel level, std::string code);
  // "zip:98105", "county:53033", "state:WA" or "US".
  static GeoKey parse(std::string_view text);
  std::string to_string() const;

  friend auto operator<=>(const GeoKey&, const GeoKey&) = default;
};

bool is_valid_geo_code(GeoLevel level, std::string_view code);

class GeoCrosswalk {
 public:
  // CSV with header zip,county_fips,state. Throws Error(kParse) on malformed
  // rows and Error(kValidation) when a ZIP or county maps two ways.
  static GeoCrosswalk load(const std::filesystem::path& path);
  static GeoCrosswalk parse(std::string_view csv, std::string_view source = "<memory>");

  void add(std::string_view zip, std::string_view county, std::string_view state);
  const std::string* county_of(std::string_view zip) const;
  const std::string* state_of_county(std::string_view county) const;
  std::size_t zip_count() const { return zip_county_.size(); }

  // Code of `from` at the coarser `to` level, or nullopt when unmapped.
  std::optional<std::string> lift(const GeoKey& from, GeoLevel to) const;

 private:
  std::unordered_map<std::string, std::string> zip_county_;
  std::unordered_map<std::string, std::string> county_state_;
};

enum class TimeResolution : std::uint8_t { kDay, kWeek };

std::string_view time_resolution_name(TimeResolution r);
std::optional<TimeResolution> parse_time_resolution(std::string_view name);

struct Counts {
  std::int64_t matched = 0;
  std::int64_t volume = 0;
};

// Need-expression counts keyed by (need key, date, geo) plus total query
// volume keyed by (date, geo). Need keys are detector ids, category names,
// and "ALL" (any need). Weekly tables key each ISO week by its Monday.
// Merging adds cell-wise, so sharded builds merge to the serial result.
class AggregateTable {
 public:
  AggregateTable() = default;
  AggregateTable(GeoLevel level, TimeResolution resolution)
      : level_(level), resolution_(resolution) {}

  GeoLevel level() const { return level_; }
  TimeResolution resolution() const { return resolution_; }

  // Registers every detector id, every category name, and ALL so that
  // unmatched needs read back as zero rather than unknown.
  void register_taxonomy(const NeedTaxonomy& tax);
  void register_need(std::string_view need);
  bool has_need(std::string_view need) const { return need_index_.count(std::string(need)) > 0; }
  const std::vector<std::string>& needs() const { return needs_; }

  // One interaction: volume +1, +1 per detector, +1 per distinct category,
  // and ALL +1 when tagged at all. Requires a ZIP-level table.
  void add(const SearchInteraction& x, const std::vector<std::uint32_t>& detectors,
           const NeedTaxonomy& tax);
  void add(const TaggedInteraction& t, const NeedTaxonomy& tax) {
    add(t.interaction, t.detectors, tax);
  }

  void add_matched(std::string_view need, Date date, const GeoKey& geo, std::int64_t n);
  void add_volume(Date date, const GeoKey& geo, std::int64_t n);
  void merge(const AggregateTable& other);

  std::int64_t matched(std::string_view need, Date date, const GeoKey& geo) const;
  std::int64_t volume(Date date, const GeoKey& geo) const;
  // Dense per-day (or per-week) counts for one (need, geo) over `range`;
  // entry k is for range.first + k (weekly tables: + 7k from the Monday).
  std::vector<Counts> slice(std::string_view need, const GeoKey& geo, DateRange range) const;

  std::vector<GeoKey> geos() const;
  std::vector<Date> dates() const;
  std::int64_t total_volume() const;

  struct Cell {
    std::string need;
    Date date;
    GeoKey geo;
    std::int64_t matched;
  };
  // Non-zero matched cells in canonical order (need, date, geo).
  std::vector<Cell> cells() const;
  // Volume cells in canonical order (date, geo).
  std::vector<std::pair<std::pair<Date, GeoKey>, std::int64_t>> volumes() const;

  friend bool operator==(const AggregateTable& a, const AggregateTable& b);

 private:
  std::uint32_t need_id(std::string_view need);
  std::optional<std::uint32_t> find_need(std::string_view need) const;
  std::uint32_t geo_id(const GeoKey& geo);
  std::optional<std::uint32_t> find_geo(const GeoKey& geo) const;
  std::uint32_t zip_geo_id(std::string_view zip);
  static std::uint64_t cell_key(std::uint32_t need, std::uint32_t geo, Date date);
  static std::uint64_t volume_key(std::uint32_t geo, Date date);

  GeoLevel level_ = GeoLevel::kZip;
  TimeResolution resolution_ = TimeResolution::kDay;
  std::vector<std::string> needs_;
  std::unordered_map<std::string, std::uint32_t> need_index_;
  std::vector<GeoKey> geos_;
  std::map<GeoKey, std::uint32_t> geo_index_;
  std::unordered_map<std::string, std::uint32_t> zip_cache_;
  std::unordered_map<std::uint64_t, std::int64_t> matched_;
  std::unordered_map<std::uint64_t, std::int64_t> volume_;
  // Per detector index: need ids of the detector, its category, and ALL.
  std::vector<std::uint32_t> detector_need_;
  std::vector<std::uint32_t> detector_category_need_;
  std::uint32_t all_need_ = 0;
  const NeedTaxonomy* registered_ = nullptr;
};

// Sums fine cells into coarser geography and/or weeks. `to_level` must not be
// finer than the table's level; day→week is the only time change allowed.
// Throws Error(kValidation) listing every ZIP or county the crosswalk lacks.
AggregateTable rollup(const AggregateTable& table, GeoLevel to_level, TimeResolution to_time,
                      const GeoCrosswalk* crosswalk);

// Σ matched / Σ volume over the window. Throws Error(kUndefined) when the
// window has no volume.
double expression_rate(const AggregateTable& table, std::string_view need, DateRange window,
                       const GeoKey& geo);

// Columns need_key, date, geo_level, geo_code, matched, volume. The ALL row is
// always present for every (date, geo) with volume; other needs appear when
// matched > 0. A leading "#needs=" line lists the registered need keys.
void write_cube(const AggregateTable& table, std::ostream& out);
void write_cube_file(const AggregateTable& table, const std::filesystem::path& path);
AggregateTable read_cube(std::istream& in, std::string_view source = "<memory>");
AggregateTable read_cube_file(const std::filesystem::path& path);

inline constexpr std::string_view kCubeHeader =
    "need_key\tdate\tgeo_level\tgeo_code\tmatched\tvolume";

}  // namespace needscope
