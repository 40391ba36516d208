#include "core/date.hpp"

#include <charconv>
#include <cstdio>

#include "core/error.hpp"

namespace needscope {

namespace {

using std::chrono::year_month_day;

bool parse_uint(std::string_view text, unsigned& out) {
  if (text.empty()) return false;
  for (char c : text) {
    if (c < '0' || c > '9') return false;
  }
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

}  // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                     std::chrono::day{day}};
  if (!ymd.ok()) {
    throw Error(ErrorCode::kParse, "invalid calendar date " + std::to_string(year) + "-" +
                                       std::to_string(month) + "-" + std::to_string(day));
  }
  return Date{std::chrono::sys_days{ymd}};
}

std::optional<Date> Date::try_parse(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
  unsigned y = 0, m = 0, d = 0;
  if (!parse_uint(text.substr(0, 4), y) || !parse_uint(text.substr(5, 2), m) ||
      !parse_uint(text.substr(8, 2), d)) {
    return std::nullopt;
  }
  year_month_day ymd{std::chrono::year{static_cast<int>(y)}, std::chrono::month{m},
                     std::chrono::day{d}};
  if (!ymd.ok()) return std::nullopt;
  return Date{std::chrono::sys_days{ymd}};
}

Date Date::parse(std::string_view text) {
  if (auto d = try_parse(text)) return *d;
  throw Error(ErrorCode::kParse, "malformed date '" + std::string(text) + "' (want YYYY-MM-DD)");
}

int Date::year() const { return static_cast<int>(year_month_day{sys_days()}.year()); }

unsigned Date::month() const { return static_cast<unsigned>(year_month_day{sys_days()}.month()); }

unsigned Date::day() const { return static_cast<unsigned>(year_month_day{sys_days()}.day()); }

unsigned Date::iso_weekday() const { return std::chrono::weekday{sys_days()}.iso_encoding(); }

int Date::day_of_year() const {
  return (*this - from_ymd(year(), 1, 1)) + 1;
}

std::string Date::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year(), month(), day());
  return buf;
}

DateRange DateRange::parse(std::string_view text) {
  auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw Error(ErrorCode::kParse, "malformed date range '" + std::string(text) +
                                       "' (want YYYY-MM-DD:YYYY-MM-DD)");
  }
  DateRange r{Date::parse(text.substr(0, colon)), Date::parse(text.substr(colon + 1))};
  if (r.empty()) {
    throw Error(ErrorCode::kParse, "date range '" + std::string(text) + "' ends before it starts");
  }
  return r;
}

Timestamp Timestamp::from_date(Date d, int second_of_day) {
  Timestamp t;
  t.seconds_ = static_cast<std::int64_t>(d.serial()) * 86400 + second_of_day;
  return t;
}

Timestamp Timestamp::parse(std::string_view text) {
  if (!text.empty() && text.back() == 'Z') text.remove_suffix(1);
  auto fail = [&]() -> Timestamp {
    throw Error(ErrorCode::kParse,
                "malformed timestamp '" + std::string(text) + "' (want YYYY-MM-DDTHH:MM:SS)");
  };
  if (text.size() != 19 || (text[10] != 'T' && text[10] != ' ') || text[13] != ':' ||
      text[16] != ':') {
    return fail();
  }
  auto date = Date::try_parse(text.substr(0, 10));
  unsigned hh = 0, mm = 0, ss = 0;
  if (!date || !parse_uint(text.substr(11, 2), hh) || !parse_uint(text.substr(14, 2), mm) ||
      !parse_uint(text.substr(17, 2), ss) || hh > 23 || mm > 59 || ss > 59) {
    return fail();
  }
  return from_date(*date, static_cast<int>(hh * 3600 + mm * 60 + ss));
}

Date Timestamp::date() const {
  auto days = seconds_ >= 0 ? seconds_ / 86400 : (seconds_ - 86399) / 86400;
  return Date::from_serial(static_cast<std::int32_t>(days));
}

int Timestamp::second_of_day() const {
  return static_cast<int>(seconds_ - static_cast<std::int64_t>(date().serial()) * 86400);
}

std::string Timestamp::to_string() const {
  int s = second_of_day();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02d", date().to_string().c_str(), s / 3600,
                (s / 60) % 60, s % 60);
  return buf;
}

}  // namespace needscope
