#pragma once

#include <compare>
#include <cstdint>
#include <string>

namespace dkstn {

/// Proleptic Gregorian calendar day, stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  static Date from_ymd(int year, unsigned month, unsigned day);
  static Date from_serial(std::int64_t days) { Date d; d.serial_ = days; return d; }
  static Date parse(const std::string& iso);  // YYYY-MM-DD

  std::int64_t serial() const noexcept { return serial_; }
  int year() const;
  unsigned month() const;
  unsigned day() const;
  std::string iso() const;

  Date operator+(std::int64_t days) const { return from_serial(serial_ + days); }
  Date operator-(std::int64_t days) const { return from_serial(serial_ - days); }
  std::int64_t operator-(Date other) const { return serial_ - other.serial_; }
  auto operator<=>(const Date&) const = default;

 private:
  std::int64_t serial_ = 0;
};

}  // namespace dkstn
