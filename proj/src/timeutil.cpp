#include "mtm/timeutil.hpp"

#include "mtm/errors.hpp"

#include <cstdio>
#include <fstream>

namespace mtm {

namespace {

using namespace std::chrono;

int parse_digits(std::string_view text, std::size_t pos, std::size_t count) {
    int value = 0;
    for (std::size_t i = pos; i < pos + count; ++i) {
        const char c = text[i];
        if (c < '0' || c > '9') {
            throw ParseError("expected digit in '" + std::string(text) + "'");
        }
        value = value * 10 + (c - '0');
    }
    return value;
}

Date checked_date(int y, int m, int d, std::string_view text) {
    const Date date{year{y}, month{static_cast<unsigned>(m)}, day{static_cast<unsigned>(d)}};
    if (!date.ok()) {
        throw ParseError("invalid calendar date '" + std::string(text) + "'");
    }
    return date;
}

}  // namespace

Date parse_date(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
        throw ParseError("malformed date '" + std::string(text) + "'");
    }
    return checked_date(parse_digits(text, 0, 4), parse_digits(text, 5, 2), parse_digits(text, 8, 2), text);
}

std::string format_date(const Date& d) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(d.year()),
                  static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
    return buf;
}

Timestamp parse_iso8601(std::string_view text) {
    if (text.size() != 20 || text[10] != 'T' || text[13] != ':' || text[16] != ':' || text[19] != 'Z') {
        throw ParseError("malformed timestamp '" + std::string(text) + "'");
    }
    const Date d = parse_date(text.substr(0, 10));
    const int hh = parse_digits(text, 11, 2);
    const int mm = parse_digits(text, 14, 2);
    const int ss = parse_digits(text, 17, 2);
    if (hh > 23 || mm > 59 || ss > 59) {
        throw ParseError("time of day out of range in '" + std::string(text) + "'");
    }
    return midnight_of(d) + hh * 3600 + mm * 60 + ss;
}

std::string format_iso8601(Timestamp t) {
    const Date d = date_of(t);
    const Timestamp sec = t - midnight_of(d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%sT%02d:%02d:%02dZ", format_date(d).c_str(), static_cast<int>(sec / 3600),
                  static_cast<int>((sec / 60) % 60), static_cast<int>(sec % 60));
    return buf;
}

Date date_of(Timestamp t) {
    return Date{floor<days>(sys_seconds{seconds{t}})};
}

Timestamp midnight_of(const Date& d) {
    return duration_cast<seconds>(sys_days{d}.time_since_epoch()).count();
}

std::string month_key(Timestamp t) {
    return format_date(date_of(t)).substr(0, 7);
}

bool is_weekend(const Date& d) {
    const weekday wd{sys_days{d}};
    return wd == Saturday || wd == Sunday;
}

HolidayCalendar read_holidays(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open holiday list " + path);
    }
    HolidayCalendar cal;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        cal.add(parse_date(line));
    }
    return cal;
}

void write_holidays(const HolidayCalendar& cal, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write holiday list " + path);
    }
    for (const auto& d : cal.holidays()) {
        out << format_date(Date{d}) << '\n';
    }
}

}  // namespace mtm
