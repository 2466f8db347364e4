#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <vector>

#include "earnsig/common/csv.hpp"
#include "earnsig/common/error.hpp"
#include "earnsig/corpus/time.hpp"

namespace earnsig::econometrics {

inline constexpr int kQuintiles = 5;

// Calendar quarter label, e.g. 20153 for 2015 Q3.
inline int quarter_label(corpus::Date d) {
  const std::chrono::year_month_day ymd{d};
  return static_cast<int>(ymd.year()) * 10 + (static_cast<int>(static_cast<unsigned>(ymd.month())) - 1) / 3 + 1;
}

// Average ranks (1-based; ties share the mean of their positions).
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> rank(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  return rank;
}

// Bucket floor(5 rank / (n + 1)) in 0..4.
inline std::vector<int> quintile_buckets(const std::vector<double>& v) {
  const auto r = average_ranks(v);
  const double n1 = static_cast<double>(v.size()) + 1.0;
  std::vector<int> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::min(kQuintiles - 1, static_cast<int>(std::floor(kQuintiles * r[i] / n1)));
  }
  return out;
}

struct HeatmapGrid {
  // [surprise quintile][soft quintile]
  std::array<std::array<double, kQuintiles>, kQuintiles> mean{};
  std::array<std::array<std::size_t, kQuintiles>, kQuintiles> count{};
  std::array<std::array<double, kQuintiles>, kQuintiles> sd{};
  std::size_t n = 0;
  std::vector<int> skipped_quarters;  // fewer than 5 observations
};

inline HeatmapGrid quintile_heatmap(const std::vector<double>& soft, const std::vector<double>& surprise,
                                    const std::vector<double>& ret, const std::vector<int>& quarter) {
  const std::size_t n = soft.size();
  if (surprise.size() != n || ret.size() != n || quarter.size() != n) {
    throw Error(ErrorCode::DimMismatch, "heatmap inputs differ in length");
  }
  std::map<int, std::vector<std::size_t>> by_q;
  for (std::size_t i = 0; i < n; ++i) by_q[quarter[i]].push_back(i);
  HeatmapGrid g;
  std::array<std::array<double, kQuintiles>, kQuintiles> sum{}, sumsq{};
  for (const auto& [q, rows] : by_q) {
    if (rows.size() < static_cast<std::size_t>(kQuintiles)) {
      g.skipped_quarters.push_back(q);
      continue;
    }
    std::vector<double> s, x;
    for (auto i : rows) {
      s.push_back(surprise[i]);
      x.push_back(soft[i]);
    }
    const auto bs = quintile_buckets(s), bx = quintile_buckets(x);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto a = static_cast<std::size_t>(bs[k]), b = static_cast<std::size_t>(bx[k]);
      const double r = ret[rows[k]];
      sum[a][b] += r;
      sumsq[a][b] += r * r;
      ++g.count[a][b];
      ++g.n;
    }
  }
  for (std::size_t a = 0; a < kQuintiles; ++a) {
    for (std::size_t b = 0; b < kQuintiles; ++b) {
      const double c = static_cast<double>(g.count[a][b]);
      if (c == 0) continue;
      g.mean[a][b] = sum[a][b] / c;
      g.sd[a][b] = c > 1 ? std::sqrt(std::max(0.0, (sumsq[a][b] - c * g.mean[a][b] * g.mean[a][b]) / (c - 1))) : 0.0;
    }
  }
  return g;
}

inline void write_heatmap(const std::filesystem::path& path, const HeatmapGrid& g) {
  csv::Writer w(path, {"surprise_quintile", "soft_quintile", "mean_ret", "count"});
  for (int a = 0; a < kQuintiles; ++a) {
    for (int b = 0; b < kQuintiles; ++b) {
      const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
      w.row({csv::format(a + 1), csv::format(b + 1), csv::format(g.mean[ua][ub]), csv::format(std::uint64_t{g.count[ua][ub]})});
    }
  }
}

}  // namespace earnsig::econometrics
