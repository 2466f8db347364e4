// Fits a Lasso score on two years of planted features, scores the next
// year out of sample, and splits the explained return between the hard
// surprise and the soft score.

#include <cstdio>
#include <random>

#include "earnsig/econometrics/report.hpp"
#include "earnsig/scoring/lasso.hpp"

using namespace earnsig;

int main() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> z;
  const int n = 1500, d = 40;
  Eigen::VectorXd w_true = Eigen::VectorXd::Zero(d);
  w_true.head(4) << 0.02, -0.015, 0.01, 0.005;

  auto draw = [&](Eigen::MatrixXd& X, Eigen::VectorXd& surprise, Eigen::VectorXd& ret) {
    X.resize(n, d);
    surprise.resize(n);
    ret.resize(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) X(i, j) = z(rng);
      surprise(i) = 0.02 * z(rng);
      ret(i) = 0.8 * surprise(i) + X.row(i).dot(w_true) + 0.02 * z(rng);
    }
  };

  Eigen::MatrixXd X_train, X_test;
  Eigen::VectorXd s_train, r_train, s_test, r_test;
  draw(X_train, s_train, r_train);
  draw(X_test, s_test, r_test);

  scoring::LassoOptions opt;
  opt.lambda = 1e-3;
  const auto fit = scoring::fit_lasso(X_train, r_train, opt);
  std::size_t nz = 0;
  for (int j = 0; j < d; ++j) nz += fit.w(j) != 0;
  std::printf("lasso: %zu of %d weights nonzero, %d sweeps, KKT residual %.2e\n", nz, d, fit.iterations,
              fit.kkt_residual);

  const Eigen::VectorXd soft = fit.predict(X_test);
  Eigen::MatrixXd R(n, 2);
  R.col(0) = s_test;
  R.col(1) = soft;
  std::vector<std::int64_t> firm(n), date(n);
  for (int i = 0; i < n; ++i) {
    firm[static_cast<std::size_t>(i)] = i % 300;
    date[static_cast<std::size_t>(i)] = i / 25;
  }
  econometrics::RegressionTable t{"Out-of-sample return regression", {}};
  t.columns.push_back(econometrics::clustered_column("Ret", r_test, R.leftCols(1), {"Surprise"}, firm, date));
  t.columns.push_back(econometrics::clustered_column("Ret", r_test, R, {"Surprise", "Soft"}, firm, date));
  std::fputs(econometrics::render_text(t).c_str(), stdout);
}
