#pragma once

#include <chrono>
#include <compare>
#include <string>

namespace dengue {

/// A calendar month.
struct YearMonth {
  int year = 0;
  int month = 1;  // 1..12

  auto operator<=>(const YearMonth&) const = default;

  /// Months since year 0, so consecutive months differ by one.
  int ordinal() const noexcept { return year * 12 + (month - 1); }
  static YearMonth from_ordinal(int ordinal) { return {ordinal / 12, ordinal % 12 + 1}; }

  YearMonth next() const { return from_ordinal(ordinal() + 1); }
  YearMonth prev() const { return from_ordinal(ordinal() - 1); }

  bool valid() const noexcept { return month >= 1 && month <= 12; }
  std::string to_string() const;  // YYYY-MM
};

using Date = std::chrono::year_month_day;

YearMonth month_of(const Date& date);

/// Parses YYYY-MM-DD; throws ValidationError on malformed or impossible dates.
Date parse_date(const std::string& text);
std::string format_date(const Date& date);

/// Number of ISO weeks (52 or 53) in an ISO week-numbering year.
int iso_weeks_in_year(int iso_year);

/// Thursday of the given ISO week. Throws ValidationError when the week does
/// not exist in that year.
Date iso_week_thursday(int iso_year, int iso_week);

}  // namespace dengue
