#include "dengue/calendar.hpp"

#include <cstdio>

#include "dengue/error.hpp"

namespace dengue {

using namespace std::chrono;

std::string YearMonth::to_string() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
  return buf;
}

YearMonth month_of(const Date& date) {
  return {static_cast<int>(date.year()), static_cast<int>(static_cast<unsigned>(date.month()))};
}

Date parse_date(const std::string& text) {
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  char tail = 0;
  if (text.size() != 10 || std::sscanf(text.c_str(), "%4d-%2u-%2u%c", &y, &m, &d, &tail) != 3 || text[4] != '-' ||
      text[7] != '-') {
    throw Error(ErrorKind::Validation, "malformed date '" + text + "' (expected YYYY-MM-DD)");
  }
  const Date date{year{y}, month{m}, day{d}};
  if (!date.ok()) throw Error(ErrorKind::Validation, "invalid calendar date '" + text + "'");
  return date;
}

std::string format_date(const Date& date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(date.year()),
                static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
  return buf;
}

namespace {

sys_days iso_week1_monday(int iso_year) {
  // January 4th always falls in ISO week 1.
  const sys_days jan4{year{iso_year} / January / 4};
  const weekday wd{jan4};
  return jan4 - days{(wd.iso_encoding() - 1)};
}

}  // namespace

int iso_weeks_in_year(int iso_year) {
  const auto span = iso_week1_monday(iso_year + 1) - iso_week1_monday(iso_year);
  return static_cast<int>(span.count() / 7);
}

Date iso_week_thursday(int iso_year, int iso_week) {
  if (iso_week < 1 || iso_week > 53) {
    throw Error(ErrorKind::Validation, "ISO week " + std::to_string(iso_week) + " outside [1, 53]");
  }
  if (iso_week > iso_weeks_in_year(iso_year)) {
    throw Error(ErrorKind::Validation,
                "ISO year " + std::to_string(iso_year) + " has no week " + std::to_string(iso_week));
  }
  return Date{iso_week1_monday(iso_year) + days{7 * (iso_week - 1) + 3}};
}

}  // namespace dengue
