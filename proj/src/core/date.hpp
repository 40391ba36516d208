#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace needscope {

// Civil calendar day (proleptic Gregorian), stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::chrono::sys_days d)
      : serial_(static_cast<std::int32_t>(d.time_since_epoch().count())) {}

  static Date from_ymd(int year, unsigned month, unsigned day);
  static Date from_serial(std::int32_t serial) {
    Date d;
    d.serial_ = serial;
    return d;
  }
  // Strict YYYY-MM-DD. Throws Error(kParse).
  static Date parse(std::string_view text);
  static std::optional<Date> try_parse(std::string_view text);

  std::int32_t serial() const { return serial_; }
  std::chrono::sys_days sys_days() const {
    return std::chrono::sys_days{std::chrono::days{serial_}};
  }

  int year() const;
  unsigned month() const;
  unsigned day() const;
  // 1 = Monday ... 7 = Sunday.
  unsigned iso_weekday() const;
  // 1-based ordinal day within the year.
  int day_of_year() const;
  // Monday of the ISO week containing this date.
  Date iso_week_start() const { return *this - static_cast<int>(iso_weekday() - 1); }

  std::string to_string() const;

  Date operator+(int days) const { return from_serial(serial_ + days); }
  Date operator-(int days) const { return from_serial(serial_ - days); }
  Date& operator++() {
    ++serial_;
    return *this;
  }
  friend int operator-(Date a, Date b) { return a.serial_ - b.serial_; }
  friend auto operator<=>(Date, Date) = default;
  friend bool operator==(Date, Date) = default;

 private:
  std::int32_t serial_ = 0;
};

// Inclusive date interval.
struct DateRange {
  Date first;
  Date last;

  // "YYYY-MM-DD:YYYY-MM-DD". Throws Error(kParse) on malformed or reversed input.
  static DateRange parse(std::string_view text);

  bool contains(Date d) const { return first <= d && d <= last; }
  bool empty() const { return last < first; }
  int days() const { return empty() ? 0 : (last - first) + 1; }
  bool overlaps(const DateRange& other) const {
    return !(other.last < first || last < other.first);
  }
  std::string to_string() const { return first.to_string() + ":" + last.to_string(); }

  friend bool operator==(const DateRange&, const DateRange&) = default;
};

// Second-resolution UTC instant.
class Timestamp {
 public:
  constexpr Timestamp() = default;
  static Timestamp from_date(Date d, int second_of_day);
  // Accepts YYYY-MM-DDTHH:MM:SS with an optional trailing 'Z'.
  static Timestamp parse(std::string_view text);

  Date date() const;
  int second_of_day() const;
  std::int64_t epoch_seconds() const { return seconds_; }
  std::string to_string() const;

  friend auto operator<=>(Timestamp, Timestamp) = default;
  friend bool operator==(Timestamp, Timestamp) = default;

 private:
  std::int64_t seconds_ = 0;
};

}  // namespace needscope
