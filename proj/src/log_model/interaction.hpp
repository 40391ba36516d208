#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "core/date.hpp"

namespace needscope {

// One deidentified search interaction. Query and URL are normalized on ingest
// (ASCII lowercase, whitespace runs collapsed); an empty URL field is "no click".
struct SearchInteraction {
  Timestamp timestamp;
  std::string query;
  std::optional<std::string> clicked_url;
  std::string zip;
  std::string client_hash;

  Date date() const { return timestamp.date(); }

  friend bool operator==(const SearchInteraction&, const SearchInteraction&) = default;
};

struct ObservationConfig {
  DateRange range_2019{Date::from_ymd(2019, 1, 1), Date::from_ymd(2019, 8, 2)};
  DateRange range_2020{Date::from_ymd(2020, 1, 1), Date::from_ymd(2020, 8, 2)};
  std::int64_t anonymity_threshold = 100;

  // Throws Error(kConfig) when a range is empty, the ranges overlap, or the
  // threshold is below 1.
  void validate() const;
  bool observed(Date d) const { return range_2019.contains(d) || range_2020.contains(d); }
};

inline constexpr std::string_view kInteractionHeader =
    "timestamp\tquery\tclicked_url\tzip\tclient_hash";

bool is_valid_zip(std::string_view zip);
bool is_interaction_header(std::string_view line);

// Parses one tab-separated record. Throws Error(kParse) with the line number on
// wrong field count, malformed timestamp, invalid ZIP, or empty query.
SearchInteraction parse_interaction(std::string_view line, std::size_t line_number = 0);
std::string serialize_interaction(const SearchInteraction& record);

// Streams every record of every file (plain or gzip) to `sink`, skipping an
// optional header line.
void read_interactions(const std::vector<std::filesystem::path>& paths,
                       const std::function<void(SearchInteraction&&)>& sink);

// Counts records per (ZIP, calendar month). Partial counters from shards merge
// by addition, so a sharded first pass yields the same admission decisions as
// a single pass.
class ZipMonthCounts {
 public:
  void add(const SearchInteraction& record) { ++counts_[key(record)]; }
  void add(std::string_view zip, Date date, std::int64_t n) { counts_[key(zip, date)] += n; }
  void merge(const ZipMonthCounts& other);
  std::int64_t count(std::string_view zip, Date date) const;
  bool admits(const SearchInteraction& record, std::int64_t threshold) const {
    return count(record.zip, record.date()) >= threshold;
  }

 private:
  static std::uint64_t key(std::string_view zip, Date date);
  static std::uint64_t key(const SearchInteraction& r) { return key(r.zip, r.date()); }
  std::unordered_map<std::uint64_t, std::int64_t> counts_;
};

// Keeps exactly the records whose (ZIP, calendar month) group holds at least
// cfg.anonymity_threshold records; relative order is preserved.
std::vector<SearchInteraction> apply_anonymity_filter(std::vector<SearchInteraction> records,
                                                      const ObservationConfig& cfg);

}  // namespace needscope
