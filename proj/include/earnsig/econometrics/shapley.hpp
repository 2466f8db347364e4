#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "earnsig/common/error.hpp"

namespace earnsig::econometrics {

inline constexpr int kMaxEnumDim = 12;

// I_j = mean |SHAP_j| over samples; I_hat_j = 100 I_j / sum_k I_k (all zero
// when every I_j is zero).
struct ShapleyReport {
  std::vector<std::string> names;
  Eigen::VectorXd I;
  Eigen::VectorXd I_hat;
  Eigen::VectorXd background;
};

inline ShapleyReport summarize_shap(const Eigen::MatrixXd& phi, const Eigen::VectorXd& background,
                                    std::vector<std::string> names = {}) {
  ShapleyReport r;
  r.names = std::move(names);
  r.background = background;
  r.I = phi.cwiseAbs().colwise().mean().transpose();
  const double total = r.I.sum();
  r.I_hat = total > 0 ? Eigen::VectorXd(100.0 * r.I / total) : Eigen::VectorXd::Zero(r.I.size());
  return r;
}

// Per-sample SHAP of a linear model: phi_ij = w_j (x_ij - background_j).
inline Eigen::MatrixXd linear_shap_values(const Eigen::VectorXd& w, const Eigen::MatrixXd& X,
                                          const Eigen::VectorXd& background) {
  if (X.cols() != w.size() || background.size() != w.size()) {
    throw Error(ErrorCode::DimMismatch, "shapley: weight, sample and background dimensions differ");
  }
  return (X.rowwise() - background.transpose()).array().rowwise() * w.transpose().array();
}

inline ShapleyReport shapley_linear(const Eigen::VectorXd& w, const Eigen::MatrixXd& X,
                                    const Eigen::VectorXd& background, std::vector<std::string> names = {}) {
  return summarize_shap(linear_shap_values(w, X, background), background, std::move(names));
}

using PredictFn = std::function<double(const Eigen::VectorXd&)>;

// Exact Shapley values of f at x; features outside a coalition are set to the
// background value. Every coalition is evaluated once.
inline Eigen::VectorXd shapley_enum(const PredictFn& f, const Eigen::VectorXd& x, const Eigen::VectorXd& background) {
  const auto d = static_cast<int>(x.size());
  if (background.size() != x.size()) throw Error(ErrorCode::DimMismatch, "shapley: background dimension differs");
  if (d > kMaxEnumDim) {
    throw Error(ErrorCode::DimensionTooLarge, "exact Shapley enumeration supports at most " +
                                                  std::to_string(kMaxEnumDim) + " features");
  }
  const std::size_t masks = std::size_t{1} << d;
  std::vector<double> value(masks);
  Eigen::VectorXd z(d);
  for (std::size_t m = 0; m < masks; ++m) {
    for (int j = 0; j < d; ++j) z(j) = (m >> j) & 1U ? x(j) : background(j);
    value[m] = f(z);
  }
  std::vector<double> fact(static_cast<std::size_t>(d) + 1, 1.0);
  for (int k = 1; k <= d; ++k) fact[static_cast<std::size_t>(k)] = fact[static_cast<std::size_t>(k) - 1] * k;
  Eigen::VectorXd phi = Eigen::VectorXd::Zero(d);
  for (std::size_t m = 0; m < masks; ++m) {
    const int s = std::popcount(m);
    for (int j = 0; j < d; ++j) {
      if ((m >> j) & 1U) continue;
      const double weight = fact[static_cast<std::size_t>(s)] * fact[static_cast<std::size_t>(d - s - 1)] /
                            fact[static_cast<std::size_t>(d)];
      phi(j) += weight * (value[m | (std::size_t{1} << j)] - value[m]);
    }
  }
  return phi;
}

inline ShapleyReport shapley_enum_report(const PredictFn& f, const Eigen::MatrixXd& X,
                                         const Eigen::VectorXd& background, std::vector<std::string> names = {}) {
  Eigen::MatrixXd phi(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) phi.row(i) = shapley_enum(f, X.row(i).transpose(), background);
  return summarize_shap(phi, background, std::move(names));
}

}  // namespace earnsig::econometrics
