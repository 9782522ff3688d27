#include "dkstn/date.hpp"

#include <chrono>
#include <cstdio>

#include "dkstn/error.hpp"

namespace dkstn {

namespace {

std::chrono::year_month_day to_ymd(std::int64_t serial) {
  return std::chrono::year_month_day{std::chrono::sys_days{std::chrono::days{serial}}};
}

}  // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                        std::chrono::day{day}};
  if (!ymd.ok())
    fail(ErrorKind::parse, "invalid calendar date " + std::to_string(year) + "-" +
                               std::to_string(month) + "-" + std::to_string(day));
  return from_serial(std::chrono::sys_days{ymd}.time_since_epoch().count());
}

Date Date::parse(const std::string& iso) {
  int y = 0;
  unsigned m = 0, d = 0;
  char tail = 0;
  if (iso.size() != 10 || std::sscanf(iso.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3)
    fail(ErrorKind::parse, "expected ISO-8601 date YYYY-MM-DD, got '" + iso + "'");
  return from_ymd(y, m, d);
}

int Date::year() const { return static_cast<int>(to_ymd(serial_).year()); }
unsigned Date::month() const { return static_cast<unsigned>(to_ymd(serial_).month()); }
unsigned Date::day() const { return static_cast<unsigned>(to_ymd(serial_).day()); }

std::string Date::iso() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year(), month(), day());
  return buf;
}

}  // namespace dkstn
