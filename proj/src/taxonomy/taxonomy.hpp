#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace needscope {

enum class NeedCategory : std::uint8_t {
  kSelfActualization,
  kCognitive,
  kLoveBelonging,
  kSafety,
  kPhysiological,
};

inline constexpr std::array<NeedCategory, 5> kAllCategories = {
    NeedCategory::kSelfActualization, NeedCategory::kCognitive, NeedCategory::kLoveBelonging,
    NeedCategory::kSafety, NeedCategory::kPhysiological};

std::string_view category_name(NeedCategory category);
std::optional<NeedCategory> parse_category(std::string_view name);

// Q: query only. D: clicked URL only. KD: both must match.
enum class DetectorLogic : std::uint8_t { kQuery, kDomain, kKeywordDomain };

std::string_view logic_name(DetectorLogic logic);
std::optional<DetectorLogic> parse_logic(std::string_view name);

struct DetectorExample {
  std::string query;
  std::optional<std::string> clicked_url;
};

struct NeedDetector {
  std::string id;
  NeedCategory category = NeedCategory::kSelfActualization;
  std::string subcategory;
  DetectorLogic logic = DetectorLogic::kQuery;
  std::optional<std::string> query_pattern;
  std::optional<std::string> url_pattern;
  std::vector<DetectorExample> examples;
};

struct NeedTaxonomy {
  std::string version;
  std::map<std::string, std::string> macros;  // expanded bodies
  std::vector<NeedDetector> detectors;

  // Throws Error(kValidation) naming the offending detector.
  void validate() const;
  std::optional<std::size_t> find(std::string_view id) const;
};

// Parses the `.needs` format (see docs/taxonomy_format.md) and validates the
// result. Errors carry `source` and the line number or detector id.
NeedTaxonomy parse_taxonomy(std::string_view text, std::string_view source = "<memory>");
NeedTaxonomy load_taxonomy(const std::filesystem::path& path);

// Reserved need keys used by aggregation; detector ids may not collide.
inline constexpr std::string_view kAllNeedsKey = "ALL";
bool is_valid_detector_id(std::string_view id);

}  // namespace needscope
