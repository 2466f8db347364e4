#pragma once

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "earnsig/backtest/portfolio.hpp"

namespace earnsig::backtest {

inline constexpr std::size_t kMinAnnouncements = 20;
inline const std::vector<std::size_t> kPrecisionKs{1, 2, 3, 5, 10};

enum class PrecisionDirection { TopPositive, TopNegative };

inline std::string_view to_string(PrecisionDirection d) {
  return d == PrecisionDirection::TopPositive ? "top_positive" : "top_negative";
}

// Which stocks the realized-return top k is drawn from.
enum class TruthUniverse { Evaluated, AllAnnouncers };

struct DayEvent {
  Permno permno = 0;
  Date date{};
  double surprise = 0.0;
  double soft_mean = 0.0;
  double ret = 0.0;
};

struct PrecisionOptions {
  std::vector<std::size_t> ks = kPrecisionKs;
  std::size_t min_announcements = kMinAnnouncements;
  TruthUniverse truth = TruthUniverse::Evaluated;
};

struct PrecisionResult {
  PrecisionDirection direction = PrecisionDirection::TopPositive;
  RankBy rank_by = RankBy::Surprise;
  bool agreement = false;
  std::vector<std::size_t> ks;
  std::vector<double> precision;                   // per k, averaged over days
  std::vector<std::vector<double>> per_day;        // [k][day]
  std::vector<Date> days;
  std::size_t n_events = 0;                        // evaluated stocks over all days
  std::size_t truncated_days = 0;                  // fewer than max k evaluated stocks

  double at(std::size_t k) const {
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (ks[i] == k) return precision[i];
    }
    throw Error(ErrorCode::ConfigInvalid, "precision was not computed at k=" + std::to_string(k));
  }
  const std::vector<double>& day_values(std::size_t k) const {
    for (std::size_t i = 0; i < ks.size(); ++i) {
      if (ks[i] == k) return per_day[i];
    }
    throw Error(ErrorCode::ConfigInvalid, "precision was not computed at k=" + std::to_string(k));
  }
};

namespace detail {

// Permnos of the first k events ordered by value (descending for TopPositive),
// ties to the lower permno.
template <class Value>
std::set<Permno> top_k(std::vector<const DayEvent*> ev, std::size_t k, PrecisionDirection dir, Value value) {
  std::sort(ev.begin(), ev.end(), [&](const DayEvent* a, const DayEvent* b) {
    const double x = value(*a), y = value(*b);
    if (x != y) return dir == PrecisionDirection::TopPositive ? x > y : x < y;
    return a->permno < b->permno;
  });
  std::set<Permno> out;
  for (std::size_t i = 0; i < std::min(k, ev.size()); ++i) out.insert(ev[i]->permno);
  return out;
}

}  // namespace detail

// C/k for one day's events; k is the denominator even when fewer than k
// stocks are evaluated.
inline double day_precision(const std::vector<DayEvent>& day, RankBy rank_by, PrecisionDirection dir, std::size_t k,
                            bool agreement, TruthUniverse truth = TruthUniverse::Evaluated) {
  if (k == 0) throw Error(ErrorCode::ConfigInvalid, "precision k must be positive");
  std::vector<const DayEvent*> all, evaluated;
  for (const auto& e : day) {
    all.push_back(&e);
    if (!agreement || classify_signal(e.surprise, e.soft_mean) != Direction::None) evaluated.push_back(&e);
  }
  const auto predicted = detail::top_k(evaluated, k, dir, [rank_by](const DayEvent& e) {
    return rank_by == RankBy::Surprise ? e.surprise : e.soft_mean;
  });
  const auto realized =
      detail::top_k(truth == TruthUniverse::Evaluated ? evaluated : all, k, dir, [](const DayEvent& e) { return e.ret; });
  std::size_t c = 0;
  for (auto p : predicted) c += realized.count(p);
  return static_cast<double>(c) / static_cast<double>(k);
}

// Averages over days with at least `min_announcements` events (counted
// before agreement filtering).
inline PrecisionResult precision_at_k(const std::vector<DayEvent>& events, RankBy rank_by, PrecisionDirection dir,
                                      bool agreement, const PrecisionOptions& opt = {}) {
  if (opt.ks.empty()) throw Error(ErrorCode::ConfigInvalid, "no precision cutoffs configured");
  std::map<Date, std::vector<DayEvent>> by_day;
  for (const auto& e : events) by_day[e.date].push_back(e);
  PrecisionResult r;
  r.direction = dir;
  r.rank_by = rank_by;
  r.agreement = agreement;
  r.ks = opt.ks;
  r.per_day.assign(opt.ks.size(), {});
  const std::size_t kmax = *std::max_element(opt.ks.begin(), opt.ks.end());
  for (const auto& [date, day] : by_day) {
    if (day.size() < opt.min_announcements) continue;
    std::size_t evaluated = 0;
    for (const auto& e : day) {
      if (!agreement || classify_signal(e.surprise, e.soft_mean) != Direction::None) ++evaluated;
    }
    r.days.push_back(date);
    r.n_events += evaluated;
    if (evaluated < kmax) ++r.truncated_days;
    for (std::size_t i = 0; i < opt.ks.size(); ++i) {
      r.per_day[i].push_back(day_precision(day, rank_by, dir, opt.ks[i], agreement, opt.truth));
    }
  }
  r.precision.assign(opt.ks.size(), 0.0);
  for (std::size_t i = 0; i < opt.ks.size(); ++i) {
    double s = 0;
    for (double v : r.per_day[i]) s += v;
    r.precision[i] = r.days.empty() ? 0.0 : s / static_cast<double>(r.days.size());
  }
  return r;
}

struct PairedTest {
  double mean_diff = 0.0;
  double t = 0.0;
  double p_value = 1.0;  // H1: mean(a - b) > 0
  std::size_t n = 0;
};

inline PairedTest paired_one_sided_t(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimMismatch, "paired test needs equal-length samples");
  PairedTest r;
  r.n = a.size();
  if (r.n < 2) throw Error(ErrorCode::DegenerateYear, "paired test needs at least 2 pairs");
  double m = 0;
  for (std::size_t i = 0; i < r.n; ++i) m += a[i] - b[i];
  m /= static_cast<double>(r.n);
  double ss = 0;
  for (std::size_t i = 0; i < r.n; ++i) ss += (a[i] - b[i] - m) * (a[i] - b[i] - m);
  const double sd = std::sqrt(ss / static_cast<double>(r.n - 1));
  r.mean_diff = m;
  if (sd == 0) {
    r.t = m > 0 ? INFINITY : (m < 0 ? -INFINITY : 0.0);
    r.p_value = m > 0 ? 0.0 : (m < 0 ? 1.0 : 0.5);
    return r;
  }
  r.t = m / (sd / std::sqrt(static_cast<double>(r.n)));
  boost::math::students_t dist(static_cast<double>(r.n - 1));
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.t));
  return r;
}

inline void write_precision(const std::filesystem::path& path, const std::vector<PrecisionResult>& results) {
  csv::Writer w(path, {"direction", "rank_by", "agreement", "k", "precision", "n_days"});
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.ks.size(); ++i) {
      w.row({std::string(to_string(r.direction)), std::string(to_string(r.rank_by)), r.agreement ? "1" : "0",
             csv::format(std::uint64_t{r.ks[i]}), csv::format(r.precision[i]),
             csv::format(std::uint64_t{r.days.size()})});
    }
  }
}

}  // namespace earnsig::backtest
