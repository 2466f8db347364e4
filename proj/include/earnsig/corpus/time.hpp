#pragma once

#include <chrono>
#include <cstdio>
#include <string>
#include <string_view>

#include "earnsig/common/csv.hpp"
#include "earnsig/common/error.hpp"

namespace earnsig::corpus {

using Date = std::chrono::sys_days;

// An instant plus the UTC offset it was expressed in.
struct Timestamp {
  std::chrono::sys_seconds utc{};
  int offset_minutes = 0;

  std::chrono::local_seconds local() const {
    return std::chrono::local_seconds{utc.time_since_epoch() + std::chrono::minutes(offset_minutes)};
  }
  Date local_date() const {
    return Date{std::chrono::floor<std::chrono::days>(local().time_since_epoch())};
  }
  std::chrono::seconds local_time_of_day() const {
    auto lt = local();
    return lt - std::chrono::floor<std::chrono::days>(lt);
  }
  friend bool operator==(const Timestamp&, const Timestamp&) = default;
};

inline Date parse_date(std::string_view text) {
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw Error(ErrorCode::ParseError, "bad date '" + std::string(text) + "'");
  }
  int y = csv::parse_int<int>(text.substr(0, 4));
  unsigned m = csv::parse_int<unsigned>(text.substr(5, 2));
  unsigned d = csv::parse_int<unsigned>(text.substr(8, 2));
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) throw Error(ErrorCode::ParseError, "invalid date '" + std::string(text) + "'");
  return Date{ymd};
}

inline std::string format_date(Date date) {
  std::chrono::year_month_day ymd{date};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

inline int year_of(Date date) { return static_cast<int>(std::chrono::year_month_day{date}.year()); }

// US Eastern offset for an instant. Rules: 2007+ (second Sunday of March to
// first Sunday of November), 1987-2006 (first Sunday of April to last Sunday
// of October), earlier years last Sunday of April to last Sunday of October.
// Transitions happen at 02:00 local, i.e. 07:00 UTC spring and 06:00 UTC fall.
inline int eastern_offset_minutes(std::chrono::sys_seconds utc) {
  using namespace std::chrono;
  const year y = year_month_day{floor<days>(utc)}.year();
  sys_days start, end;
  if (y >= year{2007}) {
    start = sys_days{y / March / Sunday[2]};
    end = sys_days{y / November / Sunday[1]};
  } else if (y >= year{1987}) {
    start = sys_days{y / April / Sunday[1]};
    end = sys_days{y / October / Sunday[last]};
  } else {
    start = sys_days{y / April / Sunday[last]};
    end = sys_days{y / October / Sunday[last]};
  }
  const sys_seconds dst_start = start + hours(7);
  const sys_seconds dst_end = end + hours(6);
  return (utc >= dst_start && utc < dst_end) ? -240 : -300;
}

inline Timestamp to_eastern(const Timestamp& ts) {
  return Timestamp{ts.utc, eastern_offset_minutes(ts.utc)};
}

// Builds an Eastern timestamp from exchange wall-clock fields. Nonexistent
// spring-forward times resolve with the standard offset.
inline Timestamp eastern_from_local(Date date, int hour, int minute, int second = 0) {
  using namespace std::chrono;
  const auto local_secs = date.time_since_epoch() + hours(hour) + minutes(minute) + seconds(second);
  for (int offset : {-240, -300}) {
    sys_seconds utc{duration_cast<seconds>(local_secs) - minutes(offset)};
    if (eastern_offset_minutes(utc) == offset) return Timestamp{utc, offset};
  }
  return Timestamp{sys_seconds{duration_cast<seconds>(local_secs) + minutes(300)}, -300};
}

// Accepts YYYY-MM-DDTHH:MM[:SS](Z|+HH:MM|-HH:MM|+HHMM). A zone is mandatory.
inline Timestamp parse_iso8601(std::string_view text) {
  auto fail = [&] { return Error(ErrorCode::ParseError, "bad timestamp '" + std::string(text) + "'"); };
  if (text.size() < 17 || (text[10] != 'T' && text[10] != ' ')) throw fail();
  const Date date = parse_date(text.substr(0, 10));
  if (text[13] != ':') throw fail();
  int h = csv::parse_int<int>(text.substr(11, 2));
  int m = csv::parse_int<int>(text.substr(14, 2));
  int s = 0;
  std::size_t pos = 16;
  if (pos < text.size() && text[pos] == ':') {
    if (pos + 3 > text.size()) throw fail();
    s = csv::parse_int<int>(text.substr(pos + 1, 2));
    pos += 3;
  }
  if (h > 23 || m > 59 || s > 60) throw fail();
  if (pos >= text.size()) throw Error(ErrorCode::ParseError, "timestamp lacks a zone: '" + std::string(text) + "'");
  int offset = 0;
  std::string_view zone = text.substr(pos);
  if (zone == "Z") {
    offset = 0;
  } else if ((zone[0] == '+' || zone[0] == '-') && (zone.size() == 6 || zone.size() == 5)) {
    int oh = csv::parse_int<int>(zone.substr(1, 2));
    int om = csv::parse_int<int>(zone.size() == 6 ? zone.substr(4, 2) : zone.substr(3, 2));
    if (zone.size() == 6 && zone[3] != ':') throw fail();
    offset = (zone[0] == '-' ? -1 : 1) * (oh * 60 + om);
  } else {
    throw fail();
  }
  using namespace std::chrono;
  const auto local_secs = date.time_since_epoch() + hours(h) + minutes(m) + seconds(s);
  return Timestamp{sys_seconds{duration_cast<seconds>(local_secs) - minutes(offset)}, offset};
}

inline std::string format_iso8601(const Timestamp& ts) {
  using namespace std::chrono;
  const auto lt = ts.local();
  const auto day = floor<days>(lt);
  const hh_mm_ss<seconds> tod{duration_cast<seconds>(lt - day)};
  const year_month_day ymd{sys_days{day.time_since_epoch()}};
  const int off = ts.offset_minutes < 0 ? -ts.offset_minutes : ts.offset_minutes;
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d%c%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()), ts.offset_minutes < 0 ? '-' : '+', off / 60, off % 60);
  return buf;
}

}  // namespace earnsig::corpus
