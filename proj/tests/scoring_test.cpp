#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "earnsig/scoring/lasso.hpp"
#include "earnsig/scoring/rolling.hpp"

using namespace earnsig;
using namespace earnsig::scoring;

namespace {

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int n, int d) {
  std::normal_distribution<double> z;
  Eigen::MatrixXd X(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) X(i, j) = z(rng);
  return X;
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> z;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = z(rng);
  return v;
}

// Gradient of the smooth part at the fit, recomputed from scratch.
Eigen::VectorXd standardized_gradient(const LassoFit& f, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const Eigen::Index n = X.rows();
  Eigen::VectorXd r = y - f.predict(X);
  Eigen::VectorXd g(X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    double s = 0;
    for (Eigen::Index i = 0; i < n; ++i) s += (X(i, j) - f.center(j)) / f.scale(j) * r(i);
    g(j) = s / static_cast<double>(n);
  }
  return g;
}

features::DesignMatrix make_matrix(int year, const Eigen::MatrixXd& X, const Eigen::VectorXd& y, DocId first_id) {
  features::DesignMatrix m;
  m.X = X;
  m.y = y;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    m.doc_ids.push_back(first_id + static_cast<DocId>(i));
    m.permnos.push_back(10000 + i);
    m.dates.push_back(corpus::Date{std::chrono::year{year} / 3 / 1} + std::chrono::days{i % 200});
  }
  return m;
}

corpus::AlignedEvent make_event(DocId id, int year, int day, double surprise, double ret) {
  corpus::AlignedEvent e;
  e.doc_id = id;
  e.event.permno = static_cast<Permno>(id);
  e.event.surprise = surprise;
  e.event.ret_day = ret;
  e.event.tau_eff = corpus::Date{std::chrono::year{year} / 1 / 2} + std::chrono::days{day};
  return e;
}

}  // namespace

TEST(FitLasso, UnivariateSoftThreshold) {
  Eigen::MatrixXd X(2, 1);
  X << 1, -1;
  Eigen::VectorXd y(2);
  y << 1, -1;
  LassoOptions o;
  o.lambda = 0.5;
  o.standardize = false;
  const auto f = fit_lasso(X, y, o);
  EXPECT_NEAR(f.w(0), 0.5, 1e-10);
  EXPECT_TRUE(f.converged);
  o.fit_intercept = false;
  EXPECT_NEAR(fit_lasso(X, y, o).w(0), 0.5, 1e-10);
}

TEST(FitLasso, KillConditionGivesExactZero) {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const Eigen::MatrixXd X = random_matrix(rng, 30, 4);
    const Eigen::VectorXd y = random_vector(rng, 30);
    const double lmax = (X.transpose() * y).cwiseAbs().maxCoeff() / 30.0;
    LassoOptions o;
    o.standardize = false;
    o.fit_intercept = false;
    o.lambda = lmax;
    const auto f = fit_lasso(X, y, o);
    for (Eigen::Index j = 0; j < 4; ++j) EXPECT_EQ(f.w(j), 0.0);
    o.lambda = lmax * 0.999;
    EXPECT_GT(fit_lasso(X, y, o).w.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(FitLasso, KillConditionStandardized) {
  std::mt19937_64 rng(12);
  const Eigen::MatrixXd X = random_matrix(rng, 40, 3) * 7.0;
  const Eigen::VectorXd y = random_vector(rng, 40);
  double lmax = 0;
  for (int j = 0; j < 3; ++j) {
    const double m = X.col(j).mean();
    const double sd = std::sqrt((X.col(j).array() - m).square().mean());
    const double c = ((X.col(j).array() - m) / sd * (y.array() - y.mean())).mean();
    lmax = std::max(lmax, std::abs(c));
  }
  LassoOptions o;
  o.lambda = lmax * (1 + 1e-12);
  const auto f = fit_lasso(X, y, o);
  EXPECT_TRUE(f.w.isZero(0.0));
  EXPECT_DOUBLE_EQ(f.intercept, y.mean());
}

TEST(FitLasso, ZeroLambdaMatchesNormalEquations) {
  std::mt19937_64 rng(13);
  for (int rep = 0; rep < 50; ++rep) {
    const Eigen::MatrixXd X = random_matrix(rng, 20, 3);
    const Eigen::VectorXd y = random_vector(rng, 20);
    Eigen::MatrixXd A(20, 4);
    A.col(0).setOnes();
    A.rightCols(3) = X;
    const Eigen::VectorXd beta = (A.transpose() * A).llt().solve(A.transpose() * y);
    LassoOptions o;
    o.lambda = 0.0;
    const auto f = fit_lasso(X, y, o);
    const Eigen::VectorXd raw = f.raw_weights();
    const double b0 = f.intercept - raw.dot(f.center);
    EXPECT_NEAR(b0, beta(0), 1e-8);
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(raw(j), beta(j + 1), 1e-8);
  }
}

TEST(FitLasso, KktHoldsOnRandomFits) {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<int> dn(2, 70), dd(1, 12);
  std::uniform_real_distribution<double> lam(-6, -0.5);
  for (int rep = 0; rep < 200; ++rep) {
    const int d = dd(rng), n = d + dn(rng);
    Eigen::MatrixXd X = random_matrix(rng, n, d);
    if (d > 2) X.col(2) = X.col(0) * 0.9 + X.col(1) * 0.1 + random_vector(rng, n) * 0.05;
    const Eigen::VectorXd y = X.col(0) * 0.3 + random_vector(rng, n);
    LassoOptions o;
    o.lambda = std::pow(10.0, lam(rng));
    const auto f = fit_lasso(X, y, o);
    ASSERT_TRUE(f.converged) << "rep " << rep;
    const Eigen::VectorXd g = standardized_gradient(f, X, y);
    double worst = 0;
    for (int j = 0; j < d; ++j) {
      if (f.w(j) != 0) {
        worst = std::max(worst, std::abs(std::abs(g(j)) - o.lambda));
        EXPECT_EQ(g(j) > 0, f.w(j) > 0);
      } else {
        worst = std::max(worst, std::abs(g(j)) - o.lambda);
      }
    }
    EXPECT_LE(worst, 10 * o.tol) << "rep " << rep;
    EXPECT_LE(f.kkt_residual, 10 * o.tol);
  }
}

TEST(FitLasso, UnderdeterminedFitReportsItsResidual) {
  std::mt19937_64 rng(18);
  const Eigen::MatrixXd X = random_matrix(rng, 6, 12);
  const Eigen::VectorXd y = random_vector(rng, 6);
  const auto f = fit_lasso(X, y);
  const Eigen::VectorXd g = standardized_gradient(f, X, y);
  double worst = 0;
  for (int j = 0; j < 12; ++j) {
    const double sj = f.w(j) > 0 ? 1.0 : -1.0;
    worst = std::max(worst, f.w(j) != 0 ? std::abs(g(j) - f.lambda * sj) : std::abs(g(j)) - f.lambda);
  }
  EXPECT_NEAR(f.kkt_residual, worst, 1e-9);
  if (f.converged) {
    EXPECT_LE(f.kkt_residual, 10 * f.tol);
  }
}

TEST(FitLasso, ObjectiveNonIncreasing) {
  std::mt19937_64 rng(15);
  for (int rep = 0; rep < 30; ++rep) {
    Eigen::MatrixXd X = random_matrix(rng, 60, 10);
    for (int j = 1; j < 10; ++j) X.col(j) = 0.6 * X.col(j - 1) + 0.4 * X.col(j);
    const Eigen::VectorXd y = X.col(3) - 0.5 * X.col(7) + random_vector(rng, 60);
    LassoOptions o;
    o.lambda = 0.01;
    const auto f = fit_lasso(X, y, o);
    const auto& h = f.objective_history;
    ASSERT_FALSE(h.empty());
    for (std::size_t k = 1; k < h.size(); ++k) EXPECT_LE(h[k], h[k - 1] + 1e-15 * std::abs(h[k - 1]));
  }
}

TEST(FitLasso, ZeroVarianceColumnGetsZeroWeightAndUnitScale) {
  std::mt19937_64 rng(16);
  Eigen::MatrixXd X = random_matrix(rng, 25, 3);
  X.col(1).setConstant(0.37);
  const Eigen::VectorXd y = X.col(0) + X.col(2);
  const auto f = fit_lasso(X, y);
  EXPECT_EQ(f.w(1), 0.0);
  EXPECT_EQ(f.scale(1), 1.0);
  EXPECT_GT(f.w(0), 0.5);
}

TEST(FitLasso, NotConvergedReturnsIterateWithFlag) {
  std::mt19937_64 rng(17);
  Eigen::MatrixXd X = random_matrix(rng, 50, 6);
  for (int j = 1; j < 6; ++j) X.col(j) = 0.95 * X.col(j - 1) + 0.05 * X.col(j);
  const Eigen::VectorXd y = random_vector(rng, 50);
  LassoOptions o;
  o.max_iters = 1;
  const auto f = fit_lasso(X, y, o);
  EXPECT_FALSE(f.converged);
  EXPECT_EQ(f.iterations, 1);
  EXPECT_TRUE(f.w.allFinite());
}

TEST(FitLasso, RejectsBadInput) {
  Eigen::MatrixXd X(1, 1);
  X << 1;
  Eigen::VectorXd y(1);
  y << 1;
  EXPECT_THROW(fit_lasso(X, y), Error);
  Eigen::MatrixXd X2(3, 1);
  X2 << 1, 2, 3;
  EXPECT_THROW(fit_lasso(X2, y), Error);
}

TEST(Rolling, PlantedIdentityZeroLambda) {
  std::mt19937_64 rng(21);
  std::map<int, features::DesignMatrix> years;
  for (int t = 2010; t <= 2011; ++t) {
    const Eigen::MatrixXd X = random_matrix(rng, 80, 4);
    years.emplace(t, make_matrix(t, X, X.col(0), static_cast<DocId>(t) * 1000));
  }
  LassoOptions o;
  o.lambda = 0.0;
  const auto r = rolling_scores("bkmx", years, o);
  ASSERT_EQ(r.scores.size(), 80u);
  ASSERT_EQ(r.fits.count(2010), 1u);
  const auto& next = years.at(2011);
  for (const auto& s : r.scores) {
    EXPECT_EQ(s.score_year, 2011);
    const auto i = static_cast<Eigen::Index>(s.doc_id - 2011000);
    EXPECT_NEAR(s.value, next.X(i, 0), 1e-6);
  }
}

TEST(Rolling, PlantedIdentityDefaultLambdaShrinksByLambda) {
  std::mt19937_64 rng(22);
  std::map<int, features::DesignMatrix> years;
  for (int t = 2010; t <= 2011; ++t) {
    const Eigen::MatrixXd X = random_matrix(rng, 120, 5) * 0.02;
    years.emplace(t, make_matrix(t, X, X.col(0), static_cast<DocId>(t) * 1000));
  }
  const auto r = rolling_scores("olda", years);
  const auto& train = years.at(2010).X;
  const double c = train.col(0).mean();
  const double s = std::sqrt((train.col(0).array() - c).square().mean());
  const double lambda = LassoOptions{}.lambda;
  const auto& next = years.at(2011);
  for (const auto& sc : r.scores) {
    const double x = next.X(static_cast<Eigen::Index>(sc.doc_id - 2011000), 0);
    EXPECT_NEAR(sc.value, x - lambda * (x - c) / s, 1e-10);
  }
}

TEST(Rolling, HugeLambdaScoresEqualTrainMean) {
  std::mt19937_64 rng(23);
  std::map<int, features::DesignMatrix> years;
  for (int t = 2010; t <= 2011; ++t) {
    const Eigen::MatrixXd X = random_matrix(rng, 30, 3);
    years.emplace(t, make_matrix(t, X, random_vector(rng, 30), static_cast<DocId>(t) * 1000));
  }
  LassoOptions o;
  o.lambda = 1e6;
  const auto r = rolling_scores("bert", years, o);
  const double ybar = years.at(2010).y.mean();
  for (const auto& s : r.scores) EXPECT_DOUBLE_EQ(s.value, ybar);
}

TEST(Rolling, ScoringWithoutPriorFitFails) {
  std::map<int, LassoFit> fits;
  features::DesignMatrix m;
  try {
    score_year(fits, 2012, m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingVintage);
  }
}

TEST(Rolling, NonConsecutiveYearIsNotScored) {
  std::mt19937_64 rng(24);
  std::map<int, features::DesignMatrix> years;
  for (int t : {2010, 2012}) {
    const Eigen::MatrixXd X = random_matrix(rng, 20, 2);
    years.emplace(t, make_matrix(t, X, X.col(0), static_cast<DocId>(t) * 1000));
  }
  const auto r = rolling_scores("bkmx", years);
  EXPECT_TRUE(r.scores.empty());
  EXPECT_TRUE(r.fits.empty());
}

TEST(Rolling, PerturbingYearReturnsLeavesItsScoresUnchanged) {
  std::mt19937_64 rng(25);
  std::map<int, features::DesignMatrix> years;
  for (int t = 2010; t <= 2013; ++t) {
    const Eigen::MatrixXd X = random_matrix(rng, 50, 6);
    years.emplace(t, make_matrix(t, X, X * random_vector(rng, 6) * 0.01 + random_vector(rng, 50) * 0.02,
                                 static_cast<DocId>(t) * 1000));
  }
  const auto base = rolling_scores("mpnet", years);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int t = 2011; t <= 2013; ++t) {
    auto perturbed = years;
    for (Eigen::Index i = 0; i < perturbed.at(t).y.size(); ++i) perturbed.at(t).y(i) += u(rng);
    const auto p = rolling_scores("mpnet", perturbed);
    ASSERT_EQ(p.scores.size(), base.scores.size());
    bool later_changed = false;
    for (std::size_t i = 0; i < p.scores.size(); ++i) {
      if (base.scores[i].score_year <= t) {
        EXPECT_EQ(p.scores[i].value, base.scores[i].value);
      } else if (p.scores[i].value != base.scores[i].value) {
        later_changed = true;
      }
    }
    if (t < 2013) {
      EXPECT_TRUE(later_changed);
    }
  }
}

TEST(OosSurprise, IdentityAndAffine) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> z(0, 0.02);
  std::vector<corpus::AlignedEvent> ev, ev2;
  DocId id = 1;
  for (int t = 2010; t <= 2012; ++t) {
    for (int i = 0; i < 40; ++i, ++id) {
      const double s = z(rng);
      ev.push_back(make_event(id, t, i, s, s));
      ev2.push_back(make_event(id, t, i, s, 2 * s + 0.01));
    }
  }
  const auto r = oos_surprise(ev);
  ASSERT_EQ(r.scores.size(), 80u);
  std::map<DocId, double> surprise;
  for (const auto& e : ev) surprise[e.doc_id] = e.event.surprise;
  for (const auto& s : r.scores) EXPECT_NEAR(s.value, surprise[s.doc_id], 1e-12);
  const auto r2 = oos_surprise(ev2);
  for (const auto& s : r2.scores) {
    EXPECT_NEAR(s.value, 2 * surprise[s.doc_id] + 0.01, 1e-10);
    EXPECT_EQ(s.kind, "oos_surprise");
  }
  EXPECT_NEAR(r2.fits.at(2011).slope, 2.0, 1e-10);
}

TEST(OosSurprise, ConstantSurpriseYearIsDegenerate) {
  std::vector<corpus::AlignedEvent> ev;
  for (int i = 0; i < 10; ++i) ev.push_back(make_event(i + 1, 2010, i, 0.01, 0.001 * i));
  for (int i = 0; i < 10; ++i) ev.push_back(make_event(i + 11, 2011, i, 0.001 * i, 0.001 * i));
  try {
    oos_surprise(ev);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateYear);
  }
}

namespace {

std::map<std::string, std::vector<SoftScore>> five_kinds(const std::array<double, 5>& v, DocId id = 7) {
  std::map<std::string, std::vector<SoftScore>> m;
  for (std::size_t k = 0; k < 5; ++k) {
    m[std::string(kSoftKinds[k])].push_back(
        {id, 42, corpus::Date{std::chrono::year{2015} / 4 / 20}, std::string(kSoftKinds[k]), 2015, v[k]});
  }
  return m;
}

}  // namespace

TEST(SoftMean, Examples) {
  auto r = soft_mean(five_kinds({0.01, 0.02, 0.03, 0.04, 0.05}));
  ASSERT_EQ(r.scores.size(), 1u);
  EXPECT_NEAR(r.scores[0].value, 0.03, 1e-15);
  EXPECT_EQ(r.scores[0].kind, "mean");
  EXPECT_EQ(r.scores[0].score_year, 2015);
  r = soft_mean(five_kinds({0.7, 0.7, 0.7, 0.7, 0.7}));
  EXPECT_DOUBLE_EQ(r.scores[0].value, 0.7);
}

TEST(SoftMean, MissingKindExcludedAndListed) {
  auto m = five_kinds({1, 2, 3, 4, 5});
  m.erase("olda");
  auto other = five_kinds({1, 1, 1, 1, 1}, 8);
  for (auto& [k, v] : other) m[k].insert(m[k].end(), v.begin(), v.end());
  const auto r = soft_mean(m);
  ASSERT_EQ(r.scores.size(), 1u);
  EXPECT_EQ(r.scores[0].doc_id, 8u);
  ASSERT_EQ(r.excluded.size(), 1u);
  EXPECT_EQ(r.excluded[0].doc_id, 7u);
  EXPECT_EQ(r.excluded[0].missing_kinds, std::vector<std::string>{"olda"});
}

TEST(SoftMean, PermutationInvariant) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> z(0, 0.03);
  for (int rep = 0; rep < 500; ++rep) {
    std::array<double, 5> v{};
    for (auto& x : v) x = z(rng);
    const double base = soft_mean(five_kinds(v)).scores[0].value;
    std::shuffle(v.begin(), v.end(), rng);
    EXPECT_EQ(soft_mean(five_kinds(v)).scores[0].value, base);
  }
}

TEST(ScoringIo, SoftsRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "earnsig_scoring_io";
  std::filesystem::create_directories(dir);
  std::vector<SoftScore> s{{5, 10001, corpus::parse_date("2012-02-03"), "bkmx", 2012, 0.1 + 1e-17},
                           {6, 10002, corpus::parse_date("2012-02-04"), "bkmx", 2012, -3.25e-9}};
  write_softs(softs_path(dir, "bkmx"), s);
  const auto back = read_softs(softs_path(dir, "bkmx"), "bkmx");
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].doc_id, s[i].doc_id);
    EXPECT_EQ(back[i].permno, s[i].permno);
    EXPECT_EQ(back[i].tau_eff, s[i].tau_eff);
    EXPECT_EQ(back[i].score_year, s[i].score_year);
    EXPECT_EQ(back[i].value, s[i].value);
  }
  std::filesystem::remove_all(dir);
}

TEST(ScoringIo, FitJsonRoundTrip) {
  std::mt19937_64 rng(51);
  const Eigen::MatrixXd X = random_matrix(rng, 40, 5);
  const Eigen::VectorXd y = X.col(1) * 0.2 + random_vector(rng, 40) * 0.1;
  LassoOptions o;
  o.lambda = 0.02;
  auto f = fit_lasso(X, y, o);
  f.kind = "finbert";
  f.train_year = 2014;
  const auto dir = std::filesystem::temp_directory_path() / "earnsig_fit_io";
  std::filesystem::create_directories(dir);
  const auto p = lasso_fit_path(dir, "finbert", 2014);
  EXPECT_EQ(p.filename(), "lasso_fit_finbert_2014.json");
  write_lasso_fit(p, f);
  const auto g = read_lasso_fit(p);
  EXPECT_EQ(g.kind, "finbert");
  EXPECT_EQ(g.train_year, 2014);
  EXPECT_EQ(g.w, f.w);
  EXPECT_EQ(g.center, f.center);
  EXPECT_EQ(g.scale, f.scale);
  EXPECT_EQ(g.intercept, f.intercept);
  EXPECT_EQ(g.predict(X), f.predict(X));
  std::filesystem::remove_all(dir);
}
