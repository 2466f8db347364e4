#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "earnsig/common/error.hpp"

namespace earnsig::scoring {

struct LassoOptions {
  double lambda = 1e-5;
  double tol = 1e-7;  // on the max coordinate change of a sweep
  int max_iters = 10000;
  bool standardize = true;
  bool fit_intercept = true;
};

// Weights live in standardized space: prediction is
// intercept + sum_j w_j (x_j - center_j) / scale_j.
struct LassoFit {
  std::string kind;
  int train_year = 0;
  Eigen::VectorXd w;
  double intercept = 0.0;
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
  double lambda = 1e-5;
  double tol = 1e-7;
  int iterations = 0;
  bool converged = false;
  bool polished = false;
  double kkt_residual = 0.0;
  std::size_t n_obs = 0;
  std::vector<double> objective_history;  // after each sweep

  Eigen::Index dim() const { return w.size(); }

  Eigen::VectorXd raw_weights() const { return w.cwiseQuotient(scale); }

  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
    if (x.size() != w.size()) throw Error(ErrorCode::DimMismatch, "lasso predict: feature dimension mismatch");
    return intercept + ((x.transpose() - center).cwiseQuotient(scale)).dot(w);
  }

  Eigen::VectorXd predict(const Eigen::MatrixXd& X) const {
    if (X.cols() != w.size()) throw Error(ErrorCode::DimMismatch, "lasso predict: feature dimension mismatch");
    return ((X.rowwise() - center.transpose()).array().rowwise() / scale.transpose().array()).matrix() * w +
           Eigen::VectorXd::Constant(X.rows(), intercept);
  }
};

namespace detail {

inline double soft_threshold(double rho, double lambda) {
  if (rho > lambda) return rho - lambda;
  if (rho < -lambda) return rho + lambda;
  return 0.0;
}

inline int sign(double v) { return (v > 0) - (v < 0); }

// Quadratic-form pieces of (1/2N)||Xs w - yc||^2 with G = Xs'Xs/N, c = Xs'yc/N.
struct Gram {
  Eigen::MatrixXd G;
  Eigen::VectorXd c;
  double yy = 0.0;
  std::vector<bool> usable;

  double objective(const Eigen::VectorXd& w, const Eigen::VectorXd& g, double lambda) const {
    return 0.5 * (yy - c.dot(w) - g.dot(w)) + lambda * w.lpNorm<1>();
  }
};

// Largest violation of the subgradient conditions at w given g = c - G w.
inline double kkt_violation(const Gram& q, const Eigen::VectorXd& w, const Eigen::VectorXd& g, double lambda) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    if (!q.usable[static_cast<std::size_t>(j)]) continue;
    const double v = w(j) != 0.0 ? std::abs(g(j) - lambda * sign(w(j))) : std::max(0.0, std::abs(g(j)) - lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

enum class PolishOutcome { None, Partial, Solved };

inline Eigen::VectorXd solve_spd(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double slack, bool& ok) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  Eigen::VectorXd x;
  if (ldlt.info() == Eigen::Success) x = ldlt.solve(b);
  if (x.size() != b.size() || !x.allFinite() || (A * x - b).lpNorm<Eigen::Infinity>() > slack) {
    // Minimum-norm solution when the support is collinear.
    x = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(A).solve(b);
  }
  ok = x.allFinite() && (A * x - b).lpNorm<Eigen::Infinity>() <= slack;
  return x;
}

// Feature-sign search from the current iterate: solve the stationarity
// equations on the support with signs fixed (plus violating zeros with the
// sign of their gradient), then take the best point on the segment among its
// zero crossings. Ends when the optimality conditions hold or no step lowers
// the objective.
inline PolishOutcome polish(const Gram& q, Eigen::VectorXd& w, Eigen::VectorXd& g, double lambda, double slack,
                            int max_steps = 50) {
  const Eigen::Index d = w.size();
  const double tight = std::min(slack, 1e-10);
  bool moved = false;
  for (int step = 0; step < max_steps; ++step) {
    std::vector<Eigen::Index> act;
    std::vector<double> theta;
    bool optimal = true;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (!q.usable[static_cast<std::size_t>(j)]) continue;
      if (w(j) != 0.0) {
        act.push_back(j);
        theta.push_back(sign(w(j)));
        if (std::abs(g(j) - lambda * sign(w(j))) > tight) optimal = false;
      } else if (std::abs(g(j)) > lambda + tight) {
        act.push_back(j);
        theta.push_back(sign(g(j)));
        optimal = false;
      }
    }
    if (optimal) return PolishOutcome::Solved;
    const auto m = static_cast<Eigen::Index>(act.size());
    Eigen::MatrixXd Gaa(m, m);
    Eigen::VectorXd rhs(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      rhs(a) = q.c(act[a]) - lambda * theta[static_cast<std::size_t>(a)];
      for (Eigen::Index b = 0; b < m; ++b) Gaa(a, b) = q.G(act[a], act[b]);
    }
    bool ok = false;
    const Eigen::VectorXd x = solve_spd(Gaa, rhs, slack, ok);
    if (!ok) break;
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(d);
    for (Eigen::Index a = 0; a < m; ++a) delta(act[a]) = x(a) - w(act[a]);
    // Smooth part along w + t delta: f0 - t g'delta + t^2/2 delta'G delta.
    const Eigen::VectorXd Gd = q.G * delta;
    const double lin = g.dot(delta), quad = delta.dot(Gd);
    auto objective_at = [&](double t) {
      double l1 = 0;
      for (Eigen::Index j = 0; j < d; ++j) l1 += std::abs(w(j) + t * delta(j));
      return -t * lin + 0.5 * t * t * quad + lambda * l1;
    };
    std::vector<double> ts{1.0};
    for (Eigen::Index j = 0; j < d; ++j) {
      if (w(j) != 0.0 && delta(j) != 0.0) {
        const double t = -w(j) / delta(j);
        if (t > 0.0 && t < 1.0) ts.push_back(t);
      }
    }
    const double base = objective_at(0.0);
    double best_t = 0.0, best = base;
    for (double t : ts) {
      const double v = objective_at(t);
      if (v < best) {
        best = v;
        best_t = t;
      }
    }
    if (best_t == 0.0) break;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (delta(j) == 0.0) continue;
      const double prev = w(j);
      double v = prev + best_t * delta(j);
      if (prev != 0.0 && -prev / delta(j) == best_t) v = 0.0;
      w(j) = v;
    }
    g = q.c - q.G * w;
    moved = true;
  }
  if (kkt_violation(q, w, g, lambda) <= slack) return PolishOutcome::Solved;
  return moved ? PolishOutcome::Partial : PolishOutcome::None;
}

}  // namespace detail

// Minimizes (1/2N)||Xw - y||^2 + lambda ||w||_1 by cyclic coordinate descent
// (covariance updates) on centered and scaled columns. Zero-variance columns
// get weight 0 and scale 1. Not converging is reported through the flag.
inline LassoFit fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const LassoOptions& opt = {}) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (n < 2) throw Error(ErrorCode::DegenerateYear, "lasso needs at least 2 observations");
  if (y.size() != n) throw Error(ErrorCode::DimMismatch, "lasso: X and y row counts differ");
  if (!(opt.lambda >= 0) || !(opt.tol > 0) || opt.max_iters < 1) {
    throw Error(ErrorCode::ConfigInvalid, "lasso: lambda >= 0, tol > 0, max_iters >= 1 required");
  }
  if (!X.allFinite() || !y.allFinite()) throw Error(ErrorCode::DimMismatch, "lasso: non-finite input");

  LassoFit fit;
  fit.lambda = opt.lambda;
  fit.tol = opt.tol;
  fit.n_obs = static_cast<std::size_t>(n);
  const double nd = static_cast<double>(n);
  fit.center = opt.fit_intercept ? Eigen::VectorXd(X.colwise().mean().transpose()) : Eigen::VectorXd::Zero(d);
  fit.scale = Eigen::VectorXd::Ones(d);
  detail::Gram q;
  q.usable.assign(static_cast<std::size_t>(d), true);
  Eigen::MatrixXd Xs = X.rowwise() - fit.center.transpose();
  for (Eigen::Index j = 0; j < d; ++j) {
    const double sd = std::sqrt(Xs.col(j).squaredNorm() / nd);
    const double ref = std::max(1.0, std::abs(fit.center(j)));
    if (sd <= 1e-12 * ref) {
      q.usable[static_cast<std::size_t>(j)] = false;
      Xs.col(j).setZero();
      continue;
    }
    if (opt.standardize) {
      fit.scale(j) = sd;
      Xs.col(j) /= sd;
    }
  }
  fit.intercept = opt.fit_intercept ? y.mean() : 0.0;
  const Eigen::VectorXd yc = y.array() - fit.intercept;
  q.G = (Xs.transpose() * Xs) / nd;
  q.c = (Xs.transpose() * yc) / nd;
  q.yy = yc.squaredNorm() / nd;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd g = q.c;
  // Small problems take a Newton step every few sweeps; large ones on a
  // doubling schedule.
  const bool small_problem = d <= 64;
  int next_polish = small_problem ? 5 : 25;
  for (int it = 1; it <= opt.max_iters; ++it) {
    double max_delta = 0.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      if (!q.usable[static_cast<std::size_t>(j)]) continue;
      const double gjj = q.G(j, j);
      const double wj = detail::soft_threshold(g(j) + gjj * w(j), opt.lambda) / gjj;
      const double delta = wj - w(j);
      if (delta != 0.0) {
        g.noalias() -= q.G.col(j) * delta;
        w(j) = wj;
        max_delta = std::max(max_delta, std::abs(delta));
      }
    }
    g = q.c - q.G * w;
    fit.iterations = it;
    fit.objective_history.push_back(q.objective(w, g, opt.lambda));
    const bool small = max_delta < opt.tol;
    if (small || it == next_polish) {
      const auto outcome = detail::polish(q, w, g, opt.lambda, opt.tol);
      if (outcome != detail::PolishOutcome::None) {
        fit.objective_history.back() = std::min(fit.objective_history.back(), q.objective(w, g, opt.lambda));
      }
      if (outcome == detail::PolishOutcome::Solved) {
        fit.polished = true;
        fit.converged = true;
        break;
      }
      if (it == next_polish) next_polish = small_problem ? next_polish + 5 : next_polish * 2;
      if (outcome == detail::PolishOutcome::Partial) continue;
    }
    if (small) {
      fit.converged = true;
      break;
    }
  }
  fit.w = w;
  fit.kkt_residual = detail::kkt_violation(q, w, g, opt.lambda);
  return fit;
}

// ---- lasso_fit_<kind>_<year>.json -------------------------------------------

inline nlohmann::json to_json(const LassoFit& f) {
  nlohmann::json nz = nlohmann::json::array();
  for (Eigen::Index j = 0; j < f.w.size(); ++j) {
    if (f.w(j) != 0.0) nz.push_back({j, f.w(j)});
  }
  return {{"kind", f.kind},
          {"train_year", f.train_year},
          {"lambda", f.lambda},
          {"tol", f.tol},
          {"dim", f.w.size()},
          {"n_obs", f.n_obs},
          {"intercept", f.intercept},
          {"nonzero", nz},
          {"center", std::vector<double>(f.center.data(), f.center.data() + f.center.size())},
          {"scale", std::vector<double>(f.scale.data(), f.scale.data() + f.scale.size())},
          {"weight_space", "standardized"},
          {"iterations", f.iterations},
          {"converged", f.converged},
          {"polished", f.polished},
          {"kkt_residual", f.kkt_residual},
          {"final_objective", f.objective_history.empty() ? 0.0 : f.objective_history.back()}};
}

inline LassoFit lasso_fit_from_json(const nlohmann::json& j) {
  try {
    LassoFit f;
    f.kind = j.at("kind").get<std::string>();
    f.train_year = j.at("train_year").get<int>();
    f.lambda = j.at("lambda").get<double>();
    f.tol = j.value("tol", 1e-7);
    const auto d = j.at("dim").get<Eigen::Index>();
    f.n_obs = j.value("n_obs", std::size_t{0});
    f.intercept = j.at("intercept").get<double>();
    f.w = Eigen::VectorXd::Zero(d);
    for (const auto& p : j.at("nonzero")) {
      const auto idx = p.at(0).get<Eigen::Index>();
      if (idx < 0 || idx >= d) throw Error(ErrorCode::ParseError, "lasso fit weight index out of range");
      f.w(idx) = p.at(1).get<double>();
    }
    const auto c = j.at("center").get<std::vector<double>>();
    const auto s = j.at("scale").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(c.size()) != d || static_cast<Eigen::Index>(s.size()) != d) {
      throw Error(ErrorCode::ParseError, "lasso fit center/scale length differs from dim");
    }
    f.center = Eigen::Map<const Eigen::VectorXd>(c.data(), d);
    f.scale = Eigen::Map<const Eigen::VectorXd>(s.data(), d);
    f.iterations = j.value("iterations", 0);
    f.converged = j.value("converged", false);
    f.polished = j.value("polished", false);
    f.kkt_residual = j.value("kkt_residual", 0.0);
    if (j.contains("final_objective")) f.objective_history.push_back(j["final_objective"].get<double>());
    return f;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("lasso fit: ") + e.what());
  }
}

inline void write_lasso_fit(const std::filesystem::path& path, const LassoFit& f) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << to_json(f).dump(2) << '\n';
}

inline LassoFit read_lasso_fit(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  return lasso_fit_from_json(j);
}

inline std::filesystem::path lasso_fit_path(const std::filesystem::path& dir, std::string_view kind, int year) {
  return dir / ("lasso_fit_" + std::string(kind) + "_" + std::to_string(year) + ".json");
}

}  // namespace earnsig::scoring
