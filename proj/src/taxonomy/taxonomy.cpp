#include "taxonomy/taxonomy.hpp"

#include <set>

#include "core/error.hpp"
#include "core/text.hpp"
#include "taxonomy/regex.hpp"

namespace needscope {

std::string_view category_name(NeedCategory category) {
  switch (category) {
    case NeedCategory::kSelfActualization: return "SelfActualization";
    case NeedCategory::kCognitive: return "Cognitive";
    case NeedCategory::kLoveBelonging: return "LoveBelonging";
    case NeedCategory::kSafety: return "Safety";
    case NeedCategory::kPhysiological: return "Physiological";
  }
  return "?";
}

std::optional<NeedCategory> parse_category(std::string_view name) {
  for (auto c : kAllCategories) {
    if (category_name(c) == name) return c;
  }
  return std::nullopt;
}

std::string_view logic_name(DetectorLogic logic) {
  switch (logic) {
    case DetectorLogic::kQuery: return "Q";
    case DetectorLogic::kDomain: return "D";
    case DetectorLogic::kKeywordDomain: return "KD";
  }
  return "?";
}

std::optional<DetectorLogic> parse_logic(std::string_view name) {
  if (name == "Q") return DetectorLogic::kQuery;
  if (name == "D") return DetectorLogic::kDomain;
  if (name == "KD") return DetectorLogic::kKeywordDomain;
  return std::nullopt;
}

bool is_valid_detector_id(std::string_view id) {
  if (id.empty() || id.size() > 32) return false;
  auto alpha = [](char c) { return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z'); };
  if (!alpha(id.front())) return false;
  for (char c : id) {
    if (!alpha(c) && !(c >= '0' && c <= '9') && c != '_' && c != '-') return false;
  }
  return id != kAllNeedsKey && !parse_category(id);
}

std::optional<std::size_t> NeedTaxonomy::find(std::string_view id) const {
  for (std::size_t i = 0; i < detectors.size(); ++i) {
    if (detectors[i].id == id) return i;
  }
  return std::nullopt;
}

namespace {

void check_pattern(const NeedDetector& d, const std::string& pattern, std::string_view which) {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::kValidation,
                "detector " + d.id + ": " + std::string(which) + " pattern: " + why);
  };
  if (pattern.empty()) fail("empty pattern");
  rx::ParsedPattern parsed;
  try {
    parsed = rx::parse(pattern);
  } catch (const Error& e) {
    fail(e.what());
  }
  if (parsed.has_uppercase_literal) {
    fail("uppercase literal can never match lowercased input");
  }
}

}  // namespace

void NeedTaxonomy::validate() const {
  std::set<std::string_view> seen;
  for (const auto& d : detectors) {
    if (!is_valid_detector_id(d.id)) {
      throw Error(ErrorCode::kValidation, "detector id '" + d.id + "' is not a valid token");
    }
    if (!seen.insert(d.id).second) {
      throw Error(ErrorCode::kValidation, "duplicate detector id " + d.id);
    }
    if (d.subcategory.empty()) {
      throw Error(ErrorCode::kValidation, "detector " + d.id + ": missing subcategory");
    }
    const bool needs_query = d.logic != DetectorLogic::kDomain;
    const bool needs_url = d.logic != DetectorLogic::kQuery;
    if (needs_query != d.query_pattern.has_value() || needs_url != d.url_pattern.has_value()) {
      throw Error(ErrorCode::kValidation,
                  "detector " + d.id + ": logic " + std::string(logic_name(d.logic)) +
                      " requires " +
                      (d.logic == DetectorLogic::kQuery    ? "a query pattern and no url pattern"
                       : d.logic == DetectorLogic::kDomain ? "a url pattern and no query pattern"
                                                           : "both a query and a url pattern"));
    }
    if (d.query_pattern) check_pattern(d, *d.query_pattern, "query");
    if (d.url_pattern) check_pattern(d, *d.url_pattern, "url");
  }
}

namespace {

class TaxonomyParser {
 public:
  TaxonomyParser(std::string_view text, std::string_view source) : text_(text), source_(source) {}

  NeedTaxonomy run() {
    std::size_t line_no = 0;
    for (auto raw : split(text_, '\n')) {
      ++line_no;
      line_ = line_no;
      auto line = trim(raw);
      if (line.empty() || line.front() == '#') continue;
      auto space = line.find_first_of(" \t");
      auto keyword = line.substr(0, space);
      auto rest = space == std::string_view::npos ? std::string_view{} : trim(line.substr(space));
      handle(keyword, rest);
    }
    if (current_) fail("detector " + current_->id + " is missing 'end'");
    finish_query_url();
    return std::move(tax_);
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorCode::kValidation,
                std::string(source_) + ":" + std::to_string(line_) + ": " + why);
  }

  std::string expand(std::string_view pattern) const {
    std::string out;
    std::size_t i = 0;
    while (i < pattern.size()) {
      if (pattern.compare(i, 2, "${") == 0) {
        auto close = pattern.find('}', i);
        if (close == std::string_view::npos) fail("unterminated macro reference");
        std::string name(pattern.substr(i + 2, close - i - 2));
        auto it = tax_.macros.find(name);
        if (it == tax_.macros.end()) {
          fail((current_ ? "detector " + current_->id + ": " : std::string()) +
               "undefined macro '" + name + "'");
        }
        out += "(?:" + it->second + ")";
        i = close + 1;
      } else {
        out += pattern[i++];
      }
    }
    return out;
  }

  void handle(std::string_view keyword, std::string_view rest) {
    if (keyword == "version") {
      if (current_) fail("'version' inside a detector block");
      tax_.version = std::string(rest);
    } else if (keyword == "macro") {
      if (current_) fail("'macro' inside a detector block");
      auto eq = rest.find('=');
      if (eq == std::string_view::npos) fail("macro needs 'name = pattern'");
      std::string name(trim(rest.substr(0, eq)));
      if (name.empty()) fail("macro needs a name");
      if (tax_.macros.count(name)) fail("macro '" + name + "' defined twice");
      tax_.macros[name] = expand(trim(rest.substr(eq + 1)));
    } else if (keyword == "detector") {
      if (current_) fail("detector " + current_->id + " is missing 'end'");
      if (rest.empty()) fail("detector needs an id");
      current_ = NeedDetector{};
      current_->id = std::string(rest);
      category_set_ = logic_set_ = false;
      query_parts_.clear();
      url_parts_.clear();
    } else if (keyword == "end") {
      if (!current_) fail("'end' outside a detector block");
      if (!category_set_) fail("detector " + current_->id + ": missing category");
      if (!logic_set_) fail("detector " + current_->id + ": missing logic");
      finish_query_url();
      tax_.detectors.push_back(std::move(*current_));
      current_.reset();
    } else {
      if (!current_) fail("unexpected '" + std::string(keyword) + "' outside a detector block");
      if (keyword == "category") {
        auto c = parse_category(rest);
        if (!c) fail("detector " + current_->id + ": unknown category '" + std::string(rest) + "'");
        current_->category = *c;
        category_set_ = true;
      } else if (keyword == "subcategory") {
        current_->subcategory = std::string(rest);
      } else if (keyword == "logic") {
        auto l = parse_logic(rest);
        if (!l) fail("detector " + current_->id + ": logic must be Q, D or KD");
        current_->logic = *l;
        logic_set_ = true;
      } else if (keyword == "query") {
        if (rest.empty()) fail("detector " + current_->id + ": empty query pattern");
        query_parts_.push_back(expand(rest));
      } else if (keyword == "url") {
        if (rest.empty()) fail("detector " + current_->id + ": empty url pattern");
        url_parts_.push_back(expand(rest));
      } else if (keyword == "example") {
        DetectorExample ex;
        auto arrow = rest.find("=>");
        if (arrow == std::string_view::npos) {
          ex.query = normalize_text(rest);
        } else {
          ex.query = normalize_text(rest.substr(0, arrow));
          auto url = normalize_text(rest.substr(arrow + 2));
          if (!url.empty()) ex.clicked_url = std::move(url);
        }
        if (ex.query.empty()) fail("detector " + current_->id + ": example needs a query");
        current_->examples.push_back(std::move(ex));
      } else {
        fail("unknown keyword '" + std::string(keyword) + "'");
      }
    }
  }

  static std::optional<std::string> combine(const std::vector<std::string>& parts) {
    if (parts.empty()) return std::nullopt;
    if (parts.size() == 1) return parts.front();
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i) out += '|';
      out += "(?:" + parts[i] + ")";
    }
    return out;
  }

  void finish_query_url() {
    if (!current_) return;
    current_->query_pattern = combine(query_parts_);
    current_->url_pattern = combine(url_parts_);
  }

  std::string_view text_;
  std::string_view source_;
  std::size_t line_ = 0;
  NeedTaxonomy tax_;
  std::optional<NeedDetector> current_;
  bool category_set_ = false;
  bool logic_set_ = false;
  std::vector<std::string> query_parts_;
  std::vector<std::string> url_parts_;
};

}  // namespace

NeedTaxonomy parse_taxonomy(std::string_view text, std::string_view source) {
  NeedTaxonomy tax = TaxonomyParser(text, source).run();
  try {
    tax.validate();
  } catch (const Error& e) {
    throw Error(e.code(), std::string(source) + ": " + e.what());
  }
  return tax;
}

NeedTaxonomy load_taxonomy(const std::filesystem::path& path) {
  return parse_taxonomy(read_file(path), path.string());
}

}  // namespace needscope
