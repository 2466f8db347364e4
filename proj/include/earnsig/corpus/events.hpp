#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "earnsig/corpus/documents.hpp"

namespace earnsig::corpus {

struct EarningsEvent {
  Permno permno = 0;
  Timestamp announce_ts;
  double eps_actual = 0.0;
  double eps_consensus = 0.0;
  double price_tm5 = 0.0;
  double surprise = 0.0;
  double ret_day = 0.0;
  double ret_prev_day = 0.0;
  double mktcap_tm1 = 0.0;
  Date tau_eff{};
};

struct AnalystForecast {
  Permno permno = 0;
  std::string analyst_id;
  Date issue_date{};
  double eps_forecast = 0.0;
};

inline constexpr int kConsensusWindowDays = 90;

// Median across analysts of each analyst's latest forecast issued within the
// 90 calendar days up to and including the announcement date. Later entries
// win ties on issue date.
inline double consensus_eps(std::span<const AnalystForecast> forecasts, Date announce_date) {
  const Date window_start = announce_date - std::chrono::days(kConsensusWindowDays);
  std::map<std::string, const AnalystForecast*> latest;
  for (const auto& f : forecasts) {
    if (f.issue_date < window_start || f.issue_date > announce_date) continue;
    auto [it, inserted] = latest.try_emplace(f.analyst_id, &f);
    if (!inserted && !(f.issue_date < it->second->issue_date)) it->second = &f;
  }
  if (latest.empty()) {
    throw Error(ErrorCode::NoForecast, "no analyst forecast within " + std::to_string(kConsensusWindowDays) +
                                           " days before " + format_date(announce_date));
  }
  std::vector<double> values;
  values.reserve(latest.size());
  for (const auto& [id, f] : latest) values.push_back(f->eps_forecast);
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

inline double compute_surprise(double eps_actual, double eps_consensus, double price_tm5) {
  if (!(price_tm5 > 0.0)) {
    throw Error(ErrorCode::NonPositivePrice, "price five days before announcement must be positive");
  }
  return (eps_actual - eps_consensus) / price_tm5;
}

}  // namespace earnsig::corpus
