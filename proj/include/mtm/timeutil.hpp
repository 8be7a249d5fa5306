#pragma once

#include <chrono>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>

namespace mtm {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

using Date = std::chrono::year_month_day;

/// "YYYY-MM-DDTHH:MM:SSZ". Throws ParseError on anything else.
Timestamp parse_iso8601(std::string_view text);
std::string format_iso8601(Timestamp t);

/// "YYYY-MM-DD".
Date parse_date(std::string_view text);
std::string format_date(const Date& d);

Date date_of(Timestamp t);
Timestamp midnight_of(const Date& d);

/// Calendar month key "YYYY-MM" of a UTC timestamp.
std::string month_key(Timestamp t);

bool is_weekend(const Date& d);

/// Weekends (Saturday/Sunday) plus an explicit holiday list.
class HolidayCalendar {
public:
    HolidayCalendar() = default;
    explicit HolidayCalendar(std::set<std::chrono::sys_days> holidays) : holidays_(std::move(holidays)) {}

    void add(const Date& d) { holidays_.insert(std::chrono::sys_days{d}); }
    bool is_holiday(const Date& d) const { return holidays_.contains(std::chrono::sys_days{d}); }
    bool is_rest_day(const Date& d) const { return is_weekend(d) || is_holiday(d); }
    bool is_rest_day(Timestamp t) const { return is_rest_day(date_of(t)); }
    const std::set<std::chrono::sys_days>& holidays() const { return holidays_; }

private:
    std::set<std::chrono::sys_days> holidays_;
};

/// One ISO date per line; blank lines and '#' comments ignored.
HolidayCalendar read_holidays(const std::string& path);
void write_holidays(const HolidayCalendar& cal, const std::string& path);

}  // namespace mtm
