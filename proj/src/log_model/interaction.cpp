#include "log_model/interaction.hpp"

#include <algorithm>

#include "core/error.hpp"
#include "core/text.hpp"

namespace needscope {

void ObservationConfig::validate() const {
  if (range_2019.empty() || range_2020.empty()) {
    throw Error(ErrorCode::kConfig, "observation ranges must be non-empty");
  }
  if (range_2019.overlaps(range_2020)) {
    throw Error(ErrorCode::kConfig, "observation ranges " + range_2019.to_string() + " and " +
                                        range_2020.to_string() + " overlap");
  }
  if (anonymity_threshold < 1) {
    throw Error(ErrorCode::kConfig, "anonymity threshold must be >= 1");
  }
}

bool is_valid_zip(std::string_view zip) {
  return zip.size() == 5 &&
         std::all_of(zip.begin(), zip.end(), [](char c) { return c >= '0' && c <= '9'; });
}

bool is_interaction_header(std::string_view line) { return starts_with(line, "timestamp\t"); }

SearchInteraction parse_interaction(std::string_view line, std::size_t line_number) {
  auto fail = [line_number](const std::string& why) -> SearchInteraction {
    throw Error(ErrorCode::kParse, "line " + std::to_string(line_number) + ": " + why);
  };
  auto fields = split(line, '\t');
  if (fields.size() != 5) {
    return fail("wrong field count (" + std::to_string(fields.size()) + ", want 5)");
  }
  SearchInteraction r;
  try {
    r.timestamp = Timestamp::parse(trim(fields[0]));
  } catch (const Error& e) {
    return fail(e.what());
  }
  r.query = normalize_text(fields[1]);
  if (r.query.empty()) return fail("empty query");
  std::string url = normalize_text(fields[2]);
  if (!url.empty()) r.clicked_url = std::move(url);
  auto zip = trim(fields[3]);
  if (!is_valid_zip(zip)) return fail("invalid ZIP '" + std::string(zip) + "'");
  r.zip = std::string(zip);
  auto client = trim(fields[4]);
  if (client.empty()) return fail("empty client hash");
  r.client_hash = std::string(client);
  return r;
}

std::string serialize_interaction(const SearchInteraction& record) {
  std::string out = record.timestamp.to_string();
  out.reserve(out.size() + record.query.size() + 64);
  out += '\t';
  out += record.query;
  out += '\t';
  if (record.clicked_url) out += *record.clicked_url;
  out += '\t';
  out += record.zip;
  out += '\t';
  out += record.client_hash;
  return out;
}

void read_interactions(const std::vector<std::filesystem::path>& paths,
                       const std::function<void(SearchInteraction&&)>& sink) {
  std::string line;
  for (const auto& path : paths) {
    LineReader reader(path);
    while (reader.next(line)) {
      if (reader.line_number() == 1 && is_interaction_header(line)) continue;
      if (trim(line).empty()) continue;
      try {
        sink(parse_interaction(line, reader.line_number()));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kParse) throw;
        throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
      }
    }
  }
}

std::uint64_t ZipMonthCounts::key(std::string_view zip, Date date) {
  std::uint64_t z = 0;
  for (char c : zip) z = z * 10 + static_cast<std::uint64_t>(c - '0');
  auto month_index = static_cast<std::uint64_t>(date.year() * 12 + static_cast<int>(date.month()));
  return (z << 24) | month_index;
}

void ZipMonthCounts::merge(const ZipMonthCounts& other) {
  for (const auto& [k, n] : other.counts_) counts_[k] += n;
}

std::int64_t ZipMonthCounts::count(std::string_view zip, Date date) const {
  auto it = counts_.find(key(zip, date));
  return it == counts_.end() ? 0 : it->second;
}

std::vector<SearchInteraction> apply_anonymity_filter(std::vector<SearchInteraction> records,
                                                      const ObservationConfig& cfg) {
  ZipMonthCounts counts;
  for (const auto& r : records) counts.add(r);
  std::erase_if(records, [&](const SearchInteraction& r) {
    return !counts.admits(r, cfg.anonymity_threshold);
  });
  return records;
}

}  // namespace needscope
