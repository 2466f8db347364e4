#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "earnsig/common/csv.hpp"
#include "earnsig/common/error.hpp"
#include "earnsig/corpus/documents.hpp"
#include "earnsig/corpus/time.hpp"

namespace earnsig::backtest {

using corpus::Date;

inline constexpr double kMaxRelativeSpread = 0.2;

struct QuoteSnapshot {
  Permno permno = 0;
  Date date{};
  double bid_0945 = 0.0;
  double ask_0945 = 0.0;
  double close = 0.0;
  double bid_close = 0.0;
  double ask_close = 0.0;

  double midquote() const { return 0.5 * (ask_0945 + bid_0945); }
  double relative_spread() const { return std::abs(ask_0945 - bid_0945) / midquote(); }
};

inline void validate(const QuoteSnapshot& q) {
  const bool positive = q.bid_0945 > 0 && q.ask_0945 > 0 && q.close > 0 && q.bid_close > 0 && q.ask_close > 0;
  if (!positive || q.bid_0945 > q.ask_0945 || q.bid_close > q.ask_close) {
    throw Error(ErrorCode::ParseError, "invalid quote for permno " + std::to_string(q.permno) + " on " +
                                           corpus::format_date(q.date));
  }
}

// Keep unless the 9:45 relative spread is at least 20% of the midquote.
inline bool spread_filter(const QuoteSnapshot& q) { return q.relative_spread() < kMaxRelativeSpread; }

enum class Direction { None, Long, Short };

inline Direction classify_signal(double surprise, double soft_mean) {
  if (surprise > 0 && soft_mean > 0) return Direction::Long;
  if (surprise < 0 && soft_mean < 0) return Direction::Short;
  return Direction::None;
}

enum class RankBy { Surprise, Soft };

inline std::string_view to_string(RankBy r) { return r == RankBy::Surprise ? "surprise" : "soft"; }

inline RankBy parse_rank_by(std::string_view s) {
  if (s == "surprise") return RankBy::Surprise;
  if (s == "soft") return RankBy::Soft;
  throw Error(ErrorCode::ConfigInvalid, "rank_by must be surprise or soft, got '" + std::string(s) + "'");
}

struct SignalRecord {
  Permno permno = 0;
  Date tau_eff{};
  double surprise = 0.0;
  double soft_mean = 0.0;
  double mktcap_tm1 = 0.0;

  Direction direction() const { return classify_signal(surprise, soft_mean); }
  double rank_value(RankBy r) const { return r == RankBy::Surprise ? surprise : soft_mean; }
};

struct Position {
  Permno permno = 0;
  double weight = 0.0;
};

// Index j in the return arrays is strategy j + 1.
struct LsPortfolioDay {
  Date date{};
  RankBy rank_by = RankBy::Surprise;
  std::vector<Position> longs;
  std::vector<Position> shorts;
  std::array<double, 2> ret_long{};
  std::array<double, 2> ret_short{};
  std::array<double, 2> ls{};
  std::size_t spread_excluded = 0;
  std::size_t unquoted = 0;
};

using DayQuotes = std::map<Permno, QuoteSnapshot>;

namespace detail {

inline std::vector<Position> cap_weights(const std::vector<const SignalRecord*>& picks) {
  double total = 0;
  for (const auto* s : picks) total += s->mktcap_tm1;
  std::vector<Position> out;
  for (const auto* s : picks) out.push_back({s->permno, s->mktcap_tm1 / total});
  return out;
}

}  // namespace detail

// Longs (both signals > 0) ranked by descending signal, shorts (both < 0) by
// ascending; min(|L|, |S|) of each, market-cap weighted within the leg. Ties
// go to the lower permno.
inline LsPortfolioDay build_day_portfolio(const std::vector<SignalRecord>& signals, const DayQuotes& quotes,
                                          RankBy rank_by) {
  LsPortfolioDay day;
  day.rank_by = rank_by;
  if (!signals.empty()) day.date = signals.front().tau_eff;
  std::vector<const SignalRecord*> L, S;
  for (const auto& s : signals) {
    if (s.tau_eff != day.date) throw Error(ErrorCode::DimMismatch, "signals for a portfolio day must share a date");
    const auto dir = s.direction();
    if (dir == Direction::None) continue;
    auto q = quotes.find(s.permno);
    if (q == quotes.end() || !(s.mktcap_tm1 > 0)) {
      ++day.unquoted;
      continue;
    }
    if (!spread_filter(q->second)) {
      ++day.spread_excluded;
      continue;
    }
    (dir == Direction::Long ? L : S).push_back(&s);
  }
  const std::size_t n = std::min(L.size(), S.size());
  if (n == 0) {
    throw Error(ErrorCode::EmptyDay, "no tradable long/short pair on " + corpus::format_date(day.date));
  }
  auto by = [rank_by](bool descending) {
    return [rank_by, descending](const SignalRecord* a, const SignalRecord* b) {
      const double x = a->rank_value(rank_by), y = b->rank_value(rank_by);
      if (x != y) return descending ? x > y : x < y;
      return a->permno < b->permno;
    };
  };
  std::sort(L.begin(), L.end(), by(true));
  std::sort(S.begin(), S.end(), by(false));
  L.resize(n);
  S.resize(n);
  day.longs = detail::cap_weights(L);
  day.shorts = detail::cap_weights(S);
  return day;
}

// Strategy 1 exits at the close; strategy 2 exits at the closing bid (long)
// or ask (short). Entries are at the 9:45 ask (long) or bid (short).
inline void leg_returns(LsPortfolioDay& day, const DayQuotes& quotes) {
  auto quote = [&](Permno p) -> const QuoteSnapshot& {
    auto it = quotes.find(p);
    if (it == quotes.end()) {
      throw Error(ErrorCode::MissingQuote, "no quote for permno " + std::to_string(p) + " on " +
                                               corpus::format_date(day.date));
    }
    return it->second;
  };
  day.ret_long = {0.0, 0.0};
  day.ret_short = {0.0, 0.0};
  for (const auto& p : day.longs) {
    const auto& q = quote(p.permno);
    day.ret_long[0] += p.weight * (q.close / q.ask_0945 - 1.0);
    day.ret_long[1] += p.weight * (q.bid_close / q.ask_0945 - 1.0);
  }
  for (const auto& p : day.shorts) {
    const auto& q = quote(p.permno);
    day.ret_short[0] += p.weight * (q.close / q.bid_0945 - 1.0);
    day.ret_short[1] += p.weight * (q.ask_close / q.bid_0945 - 1.0);
  }
  for (std::size_t j = 0; j < 2; ++j) day.ls[j] = day.ret_long[j] - day.ret_short[j];
}

struct SkippedDay {
  Date date{};
  std::string reason;
};

struct BacktestResult {
  RankBy rank_by = RankBy::Surprise;
  std::vector<LsPortfolioDay> days;  // date order
  std::vector<SkippedDay> skipped;
};

// One portfolio per signal date; days without a tradable pair are skipped.
inline BacktestResult run_backtest(const std::vector<SignalRecord>& signals,
                                   const std::map<Date, DayQuotes>& quotes, RankBy rank_by) {
  std::map<Date, std::vector<SignalRecord>> by_day;
  for (const auto& s : signals) by_day[s.tau_eff].push_back(s);
  BacktestResult r;
  r.rank_by = rank_by;
  static const DayQuotes kNone;
  for (const auto& [date, sigs] : by_day) {
    auto q = quotes.find(date);
    const auto& dq = q == quotes.end() ? kNone : q->second;
    try {
      auto day = build_day_portfolio(sigs, dq, rank_by);
      leg_returns(day, dq);
      r.days.push_back(std::move(day));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyDay) throw;
      r.skipped.push_back({date, e.what()});
    }
  }
  return r;
}

// (date, LS^j) pairs; strategy is 1 or 2.
inline std::vector<std::pair<Date, double>> ls_series(const BacktestResult& r, int strategy) {
  if (strategy != 1 && strategy != 2) throw Error(ErrorCode::ConfigInvalid, "strategy must be 1 or 2");
  std::vector<std::pair<Date, double>> out;
  for (const auto& d : r.days) out.emplace_back(d.date, d.ls[static_cast<std::size_t>(strategy - 1)]);
  return out;
}

// ---- files ------------------------------------------------------------------

inline std::map<Date, DayQuotes> read_quotes(const std::filesystem::path& path) {
  const auto t = csv::read_file(path);
  const auto c_permno = t.column("permno"), c_date = t.column("date"), c_bid = t.column("bid_0945"),
             c_ask = t.column("ask_0945"), c_close = t.column("close"), c_bclose = t.column("bid_close"),
             c_aclose = t.column("ask_close");
  std::map<Date, DayQuotes> out;
  for (const auto& row : t.rows) {
    QuoteSnapshot q;
    q.permno = csv::parse_int<Permno>(row[c_permno]);
    q.date = corpus::parse_date(row[c_date]);
    q.bid_0945 = csv::parse_double(row[c_bid]);
    q.ask_0945 = csv::parse_double(row[c_ask]);
    q.close = csv::parse_double(row[c_close]);
    q.bid_close = csv::parse_double(row[c_bclose]);
    q.ask_close = csv::parse_double(row[c_aclose]);
    validate(q);
    if (!out[q.date].emplace(q.permno, q).second) {
      throw Error(ErrorCode::ParseError, path.string() + ": duplicate quote for permno " + std::to_string(q.permno));
    }
  }
  return out;
}

inline void write_quotes(const std::filesystem::path& path, const std::map<Date, DayQuotes>& quotes) {
  csv::Writer w(path, {"permno", "date", "bid_0945", "ask_0945", "close", "bid_close", "ask_close"});
  for (const auto& [date, day] : quotes) {
    for (const auto& [p, q] : day) {
      w.row({csv::format(std::int64_t{p}), corpus::format_date(date), csv::format(q.bid_0945),
             csv::format(q.ask_0945), csv::format(q.close), csv::format(q.bid_close), csv::format(q.ask_close)});
    }
  }
}

inline void write_ls_series(const std::filesystem::path& path, const std::vector<BacktestResult>& results) {
  csv::Writer w(path, {"date", "ls1", "ls2", "n_long", "n_short", "rank_by"});
  for (const auto& r : results) {
    for (const auto& d : r.days) {
      w.row({corpus::format_date(d.date), csv::format(d.ls[0]), csv::format(d.ls[1]),
             csv::format(std::uint64_t{d.longs.size()}), csv::format(std::uint64_t{d.shorts.size()}),
             std::string(to_string(r.rank_by))});
    }
  }
}

}  // namespace earnsig::backtest
