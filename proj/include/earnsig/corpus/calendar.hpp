#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "earnsig/corpus/time.hpp"

namespace earnsig::corpus {

class TradingCalendar {
 public:
  TradingCalendar() = default;

  explicit TradingCalendar(std::vector<Date> dates, std::string zone = "America/New_York")
      : dates_(std::move(dates)), zone_(std::move(zone)) {
    for (std::size_t i = 1; i < dates_.size(); ++i) {
      if (!(dates_[i - 1] < dates_[i])) {
        throw Error(ErrorCode::ParseError, "trading calendar must be strictly increasing at " +
                                               format_date(dates_[i]));
      }
    }
  }

  static TradingCalendar load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::vector<Date> dates;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      dates.push_back(parse_date(line));
    }
    return TradingCalendar(std::move(dates));
  }

  const std::vector<Date>& dates() const { return dates_; }
  const std::string& zone() const { return zone_; }
  bool empty() const { return dates_.empty(); }

  bool is_trading_day(Date d) const { return std::binary_search(dates_.begin(), dates_.end(), d); }

  Date first_on_or_after(Date d) const {
    check_start(d);
    auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
    if (it == dates_.end()) throw out_of_range(d);
    return *it;
  }

  Date first_after(Date d) const {
    check_start(d);
    auto it = std::upper_bound(dates_.begin(), dates_.end(), d);
    if (it == dates_.end()) throw out_of_range(d);
    return *it;
  }

  // Trading day `n` sessions before a trading date.
  Date previous(Date d, int n = 1) const {
    auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
    if (it == dates_.end() || *it != d) throw out_of_range(d);
    auto idx = std::distance(dates_.begin(), it);
    if (idx < n) throw out_of_range(d);
    return dates_[static_cast<std::size_t>(idx - n)];
  }

 private:
  void check_start(Date d) const {
    if (dates_.empty() || d < dates_.front()) throw out_of_range(d);
  }
  static Error out_of_range(Date d) {
    return Error(ErrorCode::CalendarOutOfRange, "calendar does not cover " + format_date(d));
  }

  std::vector<Date> dates_;
  std::string zone_ = "America/New_York";
};

inline constexpr std::chrono::seconds kMarketOpen{9 * 3600 + 30 * 60};
inline constexpr std::chrono::seconds kMarketClose{16 * 3600};

// Trading date whose close first reflects the announcement. Pre-open news
// lands on the same (or next) session, post-close news on the next session.
inline Date effective_trading_day(const Timestamp& announce_ts, const TradingCalendar& calendar) {
  const Timestamp et = to_eastern(announce_ts);
  const Date local_day = et.local_date();
  if (et.local_time_of_day() >= kMarketClose) return calendar.first_after(local_day);
  return calendar.first_on_or_after(local_day);
}

}  // namespace earnsig::corpus
