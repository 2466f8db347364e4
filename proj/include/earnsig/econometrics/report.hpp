#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "earnsig/common/csv.hpp"
#include "earnsig/econometrics/regression.hpp"
#include "earnsig/econometrics/shapley.hpp"

namespace earnsig::econometrics {

inline constexpr std::string_view kInterceptName = "Intercept";

struct TableColumn {
  std::string label;
  RegressionResult reg;
  std::optional<ShapleyReport> shap;  // over the non-intercept regressors
};

struct RegressionTable {
  std::string title;
  std::vector<TableColumn> columns;
  std::string note = "Two-way clustered (firm, date) standard errors in parentheses.";
};

// Regression of y on an intercept plus the columns of X with two-way
// clustered SEs, and linear SHAP importance against the sample means.
inline TableColumn clustered_column(std::string label, const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                    const std::vector<std::string>& names, const std::vector<std::int64_t>& firm,
                                    const std::vector<std::int64_t>& date) {
  Eigen::MatrixXd A(X.rows(), X.cols() + 1);
  A.leftCols(X.cols()) = X;
  A.col(X.cols()).setOnes();
  auto all = names;
  all.emplace_back(kInterceptName);
  TableColumn c{std::move(label), ols_two_way_clustered(y, A, firm, date, all), std::nullopt};
  const Eigen::VectorXd mean = X.colwise().mean().transpose();
  c.shap = shapley_linear(c.reg.coef.head(X.cols()), X, mean, names);
  return c;
}

namespace detail {

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline std::vector<std::string> term_order(const RegressionTable& t) {
  std::vector<std::string> terms;
  bool intercept = false;
  for (const auto& c : t.columns) {
    for (const auto& n : c.reg.names) {
      if (n == kInterceptName) {
        intercept = true;
      } else if (std::find(terms.begin(), terms.end(), n) == terms.end()) {
        terms.push_back(n);
      }
    }
  }
  if (intercept) terms.emplace_back(kInterceptName);
  return terms;
}

inline std::optional<Eigen::Index> find_name(const std::vector<std::string>& names, const std::string& n) {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == n) return static_cast<Eigen::Index>(i);
  }
  return std::nullopt;
}

}  // namespace detail

// Coefficient with stars, SE in parentheses below, then R^2, N and SHAP rows.
inline std::string render_text(const RegressionTable& t) {
  const auto terms = detail::term_order(t);
  std::vector<std::vector<std::string>> lines;
  std::vector<std::string> head{""};
  std::vector<std::string> nums{""};
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    head.push_back(t.columns[i].label);
    nums.push_back("(" + std::to_string(i + 1) + ")");
  }
  lines.push_back(head);
  lines.push_back(nums);
  for (const auto& term : terms) {
    std::vector<std::string> coef{term}, se{""};
    for (const auto& c : t.columns) {
      const auto j = detail::find_name(c.reg.names, term);
      if (!j) {
        coef.emplace_back();
        se.emplace_back();
        continue;
      }
      const double tv = c.reg.se(*j) > 0 ? c.reg.coef(*j) / c.reg.se(*j) : 0.0;
      coef.push_back(detail::fmt("%.4f", c.reg.coef(*j)) + stars(tv));
      se.push_back("(" + detail::fmt("%.4f", c.reg.se(*j)) + ")");
    }
    lines.push_back(coef);
    lines.push_back(se);
  }
  std::vector<std::string> r2{"R^2"}, n{"N"};
  for (const auto& c : t.columns) {
    r2.push_back(detail::fmt("%.3f", c.reg.r2));
    n.push_back(std::to_string(c.reg.n));
  }
  lines.push_back(r2);
  lines.push_back(n);
  const bool any_shap = std::any_of(t.columns.begin(), t.columns.end(), [](const auto& c) { return c.shap.has_value(); });
  for (const auto& term : terms) {
    if (term == kInterceptName || !any_shap) continue;
    std::vector<std::string> row{"SHAP(" + term + ")"};
    for (const auto& c : t.columns) {
      if (!c.shap) {
        row.emplace_back();
        continue;
      }
      const auto j = detail::find_name(c.shap->names, term);
      row.push_back(j ? detail::fmt("%.2f", c.shap->I_hat(*j)) : "");
    }
    lines.push_back(row);
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& l : lines) {
    for (std::size_t i = 0; i < l.size(); ++i) width[i] = std::max(width[i], l[i].size());
  }
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  std::ostringstream out;
  if (!t.title.empty()) out << t.title << '\n';
  out << std::string(total, '=') << '\n';
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const auto& l = lines[li];
    for (std::size_t i = 0; i < l.size(); ++i) {
      const std::string pad(width[i] - l[i].size(), ' ');
      out << (i == 0 ? l[i] + pad : pad + l[i]) << "  ";
    }
    out << '\n';
    if (li == 1) out << std::string(total, '-') << '\n';
  }
  out << std::string(total, '=') << '\n';
  out << t.note << " *** p<0.01, ** p<0.05, * p<0.1\n";
  return out.str();
}

inline void write_table_csv(const std::filesystem::path& path, const RegressionTable& t) {
  csv::Writer w(path, {"column", "label", "term", "coef", "se", "t", "stars", "r2", "n", "shap_pct"});
  for (std::size_t i = 0; i < t.columns.size(); ++i) {
    const auto& c = t.columns[i];
    for (std::size_t j = 0; j < c.reg.names.size(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      const double tv = c.reg.se(jj) > 0 ? c.reg.coef(jj) / c.reg.se(jj) : 0.0;
      std::string shap;
      if (c.shap) {
        if (auto k = detail::find_name(c.shap->names, c.reg.names[j])) shap = csv::format(c.shap->I_hat(*k));
      }
      w.row({csv::format(static_cast<int>(i + 1)), c.label, c.reg.names[j], csv::format(c.reg.coef(jj)),
             csv::format(c.reg.se(jj)), csv::format(tv), stars(tv), csv::format(c.reg.r2),
             csv::format(std::uint64_t{c.reg.n}), shap});
    }
  }
}

inline void write_table_text(const std::filesystem::path& path, const RegressionTable& t) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << render_text(t);
}

}  // namespace earnsig::econometrics
