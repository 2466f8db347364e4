#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "earnsig/common/error.hpp"
#include "earnsig/corpus/time.hpp"

namespace earnsig::econometrics {

// ---- winsorization ----------------------------------------------------------

// Linear-interpolation percentile of sorted data (numpy's default method).
inline double percentile_sorted(const std::vector<double>& sorted, double pct) {
  if (sorted.empty()) throw Error(ErrorCode::DimMismatch, "percentile of empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * pct / 100.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

struct WinsorBounds {
  double lo = 0.0;
  double hi = 0.0;
};

inline WinsorBounds winsor_bounds(const std::vector<double>& x, double lo_pct = 1.0, double hi_pct = 99.0) {
  if (!(lo_pct >= 0 && lo_pct <= hi_pct && hi_pct <= 100)) {
    throw Error(ErrorCode::ConfigInvalid, "winsorize percentiles must satisfy 0 <= lo <= hi <= 100");
  }
  std::vector<double> s(x);
  std::sort(s.begin(), s.end());
  return {percentile_sorted(s, lo_pct), percentile_sorted(s, hi_pct)};
}

inline std::vector<double> clamp_to(const std::vector<double>& x, const WinsorBounds& b) {
  std::vector<double> out(x);
  for (auto& v : out) v = std::clamp(v, b.lo, b.hi);
  return out;
}

inline std::vector<double> winsorize(const std::vector<double>& x, double lo_pct = 1.0, double hi_pct = 99.0) {
  return clamp_to(x, winsor_bounds(x, lo_pct, hi_pct));
}

// ---- regression -------------------------------------------------------------

struct RegressionResult {
  std::vector<std::string> names;
  Eigen::VectorXd coef;
  Eigen::VectorXd se;
  Eigen::MatrixXd vcov;
  Eigen::VectorXd residuals;
  double r2 = 0.0;  // 1 - SSR/SST with SST about the mean of y
  std::size_t n = 0;
  std::string se_kind;
  std::size_t clusters_firm = 0;
  std::size_t clusters_date = 0;
  bool variance_clamped = false;

  Eigen::Index index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (names[i] == name) return static_cast<Eigen::Index>(i);
    }
    throw Error(ErrorCode::DimMismatch, "no regressor named '" + std::string(name) + "'");
  }
  double coef_of(std::string_view name) const { return coef(index_of(name)); }
  double se_of(std::string_view name) const { return se(index_of(name)); }
  double t_of(std::string_view name) const {
    const auto i = index_of(name);
    return se(i) > 0 ? coef(i) / se(i) : 0.0;
  }
};

// Two-sided normal p-value.
inline double p_value(double t) { return std::erfc(std::abs(t) / std::sqrt(2.0)); }

inline std::string stars(double t) {
  const double p = p_value(t);
  if (p < 0.01) return "***";
  if (p < 0.05) return "**";
  if (p < 0.1) return "*";
  return "";
}

namespace detail {

struct OlsCore {
  Eigen::VectorXd beta;
  Eigen::MatrixXd bread;  // (X'X)^-1
  Eigen::VectorXd u;
  double r2 = 0.0;
};

inline OlsCore ols_core(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (y.size() != n) throw Error(ErrorCode::DimMismatch, "regression: y and X row counts differ");
  if (n <= d) throw Error(ErrorCode::Singular, "regression needs N > d");
  if (!X.allFinite() || !y.allFinite()) throw Error(ErrorCode::DimMismatch, "regression: non-finite input");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < d) throw Error(ErrorCode::Singular, "design matrix is rank deficient");
  OlsCore c;
  c.beta = qr.solve(y);
  const Eigen::MatrixXd XtX = X.transpose() * X;
  c.bread = XtX.ldlt().solve(Eigen::MatrixXd::Identity(d, d));
  c.u = y - X * c.beta;
  const double sst = (y.array() - y.mean()).square().sum();
  c.r2 = sst > 0 ? 1.0 - c.u.squaredNorm() / sst : (c.u.squaredNorm() == 0 ? 1.0 : 0.0);
  return c;
}

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

template <class Key>
Eigen::MatrixXd cluster_variance(const Eigen::MatrixXd& X, const Eigen::VectorXd& u, const Eigen::MatrixXd& bread,
                                 const std::vector<Key>& labels, std::size_t& groups) {
  const Eigen::Index n = X.rows(), d = X.cols();
  std::map<Key, Eigen::Index> index;
  for (const auto& l : labels) index.emplace(l, 0);
  Eigen::Index g = 0;
  for (auto& [k, v] : index) v = g++;
  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(g, d);
  for (Eigen::Index i = 0; i < n; ++i) scores.row(index.at(labels[static_cast<std::size_t>(i)])) += X.row(i) * u(i);
  groups = static_cast<std::size_t>(g);
  if (g < 2) throw Error(ErrorCode::Singular, "clustered variance needs at least 2 clusters");
  const double gd = static_cast<double>(g), nd = static_cast<double>(n), dd = static_cast<double>(d);
  const double factor = gd / (gd - 1.0) * (nd - 1.0) / (nd - dd);
  return symmetrize(factor * bread * (scores.transpose() * scores) * bread);
}

inline RegressionResult finish(std::vector<std::string> names, const OlsCore& c, Eigen::MatrixXd V,
                               std::string kind) {
  RegressionResult r;
  if (names.empty()) {
    for (Eigen::Index j = 0; j < c.beta.size(); ++j) names.push_back("x" + std::to_string(j));
  }
  if (static_cast<Eigen::Index>(names.size()) != c.beta.size()) {
    throw Error(ErrorCode::DimMismatch, "regressor names do not match columns");
  }
  r.names = std::move(names);
  r.coef = c.beta;
  r.vcov = std::move(V);
  r.se = r.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  r.residuals = c.u;
  r.r2 = c.r2;
  r.n = static_cast<std::size_t>(c.u.size());
  r.se_kind = std::move(kind);
  return r;
}

}  // namespace detail

// OLS with Cameron-Gelbach-Miller two-way clustered variance
// V_firm + V_date - V_firm&date, each with G/(G-1)(N-1)/(N-d). A negative
// diagonal entry of the combination is replaced by the larger one-way
// variance and flagged.
inline RegressionResult ols_two_way_clustered(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                              const std::vector<std::int64_t>& firm,
                                              const std::vector<std::int64_t>& date,
                                              std::vector<std::string> names = {}) {
  if (firm.size() != static_cast<std::size_t>(X.rows()) || date.size() != static_cast<std::size_t>(X.rows())) {
    throw Error(ErrorCode::DimMismatch, "cluster labels must cover every row");
  }
  const auto c = detail::ols_core(y, X);
  std::vector<std::pair<std::int64_t, std::int64_t>> both(firm.size());
  for (std::size_t i = 0; i < firm.size(); ++i) both[i] = {firm[i], date[i]};
  std::size_t gf = 0, gd = 0, gb = 0;
  const Eigen::MatrixXd Vf = detail::cluster_variance(X, c.u, c.bread, firm, gf);
  const Eigen::MatrixXd Vd = detail::cluster_variance(X, c.u, c.bread, date, gd);
  const Eigen::MatrixXd Vb = detail::cluster_variance(X, c.u, c.bread, both, gb);
  Eigen::MatrixXd V = Vf + Vd - Vb;
  bool clamped = false;
  for (Eigen::Index j = 0; j < V.rows(); ++j) {
    if (V(j, j) < 0) {
      V(j, j) = std::max(Vf(j, j), Vd(j, j));
      clamped = true;
    }
  }
  auto r = detail::finish(std::move(names), c, std::move(V), "cluster_firm_date");
  r.clusters_firm = gf;
  r.clusters_date = gd;
  r.variance_clamped = clamped;
  return r;
}

// OLS with heteroskedasticity-robust HC1 variance.
inline RegressionResult ols_hc1(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, std::vector<std::string> names = {}) {
  const auto c = detail::ols_core(y, X);
  const double n = static_cast<double>(X.rows()), d = static_cast<double>(X.cols());
  const Eigen::MatrixXd meat = X.transpose() * c.u.array().square().matrix().asDiagonal() * X;
  return detail::finish(std::move(names), c, detail::symmetrize(n / (n - d) * c.bread * meat * c.bread), "hc1");
}

// OLS with Newey-West (Bartlett kernel) variance; rows must be in time order.
inline RegressionResult ols_hac(const Eigen::VectorXd& y, const Eigen::MatrixXd& X, int lag,
                                std::vector<std::string> names = {}) {
  if (lag < 0) throw Error(ErrorCode::ConfigInvalid, "HAC lag must be >= 0");
  const auto c = detail::ols_core(y, X);
  const Eigen::MatrixXd s = X.array().colwise() * c.u.array();  // per-row scores
  Eigen::MatrixXd S = s.transpose() * s;
  for (int l = 1; l <= lag && l < s.rows(); ++l) {
    const double wl = 1.0 - static_cast<double>(l) / (lag + 1.0);
    const Eigen::MatrixXd G = s.bottomRows(s.rows() - l).transpose() * s.topRows(s.rows() - l);
    S += wl * (G + G.transpose());
  }
  return detail::finish(std::move(names), c, detail::symmetrize(c.bread * S * c.bread),
                        "hac" + std::to_string(lag));
}

// ---- alpha regressions ------------------------------------------------------

struct FactorRow {
  double mkt_rf = 0.0;
  double smb = 0.0;
  double hml = 0.0;
  double rf = 0.0;
};

// LS on a constant (mean with HAC SE) or on constant, Mkt-rf, HML and SMB.
inline RegressionResult alpha_regression(const std::vector<std::pair<corpus::Date, double>>& ls,
                                         const std::map<corpus::Date, FactorRow>& factors, bool with_factors,
                                         int hac_lag = 5) {
  std::vector<std::pair<corpus::Date, double>> rows;
  for (const auto& p : ls) {
    if (!with_factors || factors.count(p.first)) rows.push_back(p);
  }
  std::sort(rows.begin(), rows.end());
  if (rows.empty()) throw Error(ErrorCode::NoOverlapDates, "long-short series and factor file share no dates");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd X(n, with_factors ? 4 : 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y(i) = rows[static_cast<std::size_t>(i)].second;
    X(i, 0) = 1.0;
    if (with_factors) {
      const auto& f = factors.at(rows[static_cast<std::size_t>(i)].first);
      X(i, 1) = f.mkt_rf;
      X(i, 2) = f.hml;
      X(i, 3) = f.smb;
    }
  }
  std::vector<std::string> names{"alpha"};
  if (with_factors) names.insert(names.end(), {"mkt_rf", "hml", "smb"});
  if (n <= X.cols()) throw Error(ErrorCode::NoOverlapDates, "too few overlapping dates for the alpha regression");
  return ols_hac(y, X, hac_lag, std::move(names));
}

}  // namespace earnsig::econometrics
