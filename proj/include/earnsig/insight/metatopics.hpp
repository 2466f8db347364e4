#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "earnsig/common/csv.hpp"
#include "earnsig/common/error.hpp"
#include "earnsig/scoring/lasso.hpp"

namespace earnsig::insight {

inline constexpr std::string_view kOtherCategory = "Other";

// Topic index -> metatopic name for one topic kind ("bkmx" or "olda").
// Topics mapped to "Other" carry no metatopic.
struct MetatopicMap {
  std::string kind;
  std::vector<std::string> topic_metatopic;

  std::size_t dim() const { return topic_metatopic.size(); }

  // Distinct names in first-seen order, without "Other".
  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& m : topic_metatopic) {
      if (m == kOtherCategory) continue;
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    return out;
  }

  std::vector<std::size_t> members(const std::string& name) const {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < topic_metatopic.size(); ++k) {
      if (topic_metatopic[k] == name) out.push_back(k);
    }
    return out;
  }
};

inline void write_metatopic_map(const std::filesystem::path& path, const MetatopicMap& m) {
  nlohmann::json j;
  j["kind"] = m.kind;
  j["metatopics"] = m.topic_metatopic;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline MetatopicMap read_metatopic_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    MetatopicMap m{j.at("kind").get<std::string>(), j.at("metatopics").get<std::vector<std::string>>()};
    for (const auto& name : m.topic_metatopic) {
      if (name.empty()) throw Error(ErrorCode::ConfigInvalid, path.string() + ": empty metatopic name");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
}

inline std::filesystem::path metatopic_map_path(const std::filesystem::path& dir, std::string_view kind) {
  return dir / ("metatopics_" + std::string(kind) + ".json");
}

namespace detail {

inline void check_fit(const scoring::LassoFit& fit, const MetatopicMap& map) {
  if (fit.kind != map.kind) {
    throw Error(ErrorCode::KindMismatch, "fit kind '" + fit.kind + "' does not match metatopic map kind '" +
                                             map.kind + "'");
  }
  if (static_cast<std::size_t>(fit.dim()) != map.dim()) {
    throw Error(ErrorCode::DimMismatch, "metatopic map covers " + std::to_string(map.dim()) + " topics, fit has " +
                                            std::to_string(fit.dim()));
  }
}

}  // namespace detail

// w_M = sum of raw (attention-scale) topic weights in M, in names() order.
inline std::vector<double> metatopic_weight(const scoring::LassoFit& fit, const MetatopicMap& map) {
  detail::check_fit(fit, map);
  const Eigen::VectorXd w = fit.raw_weights();
  std::vector<double> out;
  for (const auto& name : map.names()) {
    double s = 0;
    for (auto k : map.members(name)) s += w(static_cast<Eigen::Index>(k));
    out.push_back(s);
  }
  return out;
}

// h(M) = w_M' Cov(f_M) w_M over the attention rows F (N x K), normalized to
// 100 across metatopics. Weights are raw; covariance uses N - 1.
inline std::vector<double> explained_variance(const Eigen::MatrixXd& F, const scoring::LassoFit& fit,
                                              const MetatopicMap& map) {
  detail::check_fit(fit, map);
  if (F.cols() != fit.dim()) throw Error(ErrorCode::DimMismatch, "attention columns differ from fit dimension");
  if (F.rows() < 2) throw Error(ErrorCode::DegenerateDenominator, "explained variance needs at least 2 documents");
  const Eigen::MatrixXd C = F.rowwise() - F.colwise().mean();
  const Eigen::MatrixXd cov = C.transpose() * C / static_cast<double>(F.rows() - 1);
  const Eigen::VectorXd w = fit.raw_weights();
  std::vector<double> h;
  double total = 0;
  for (const auto& name : map.names()) {
    double s = 0;
    const auto idx = map.members(name);
    for (auto i : idx) {
      for (auto j : idx) {
        const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
        s += w(a) * w(b) * cov(a, b);
      }
    }
    h.push_back(s);
    total += s;
  }
  if (total == 0 || !std::isfinite(total)) {
    throw Error(ErrorCode::DegenerateDenominator, map.kind + ": every metatopic variance term is zero");
  }
  for (auto& v : h) v = 100.0 * v / total;
  return h;
}

inline int polarity(double w_m) { return (w_m > 0) - (w_m < 0); }

// sign(w_M) per fit train year, in names() order.
inline std::map<int, std::vector<int>> polarity_series(const std::map<int, scoring::LassoFit>& fits,
                                                       const MetatopicMap& map) {
  std::map<int, std::vector<int>> out;
  for (const auto& [year, fit] : fits) {
    auto& signs = out[year];
    for (double w : metatopic_weight(fit, map)) signs.push_back(polarity(w));
  }
  return out;
}

struct MetatopicRow {
  int year = 0;  // year of the attentions; weights come from year - 1
  std::string metatopic;
  double w_m = 0.0;
  double h = 0.0;
  int polarity = 0;
};

struct MetatopicReport {
  std::string kind;
  std::vector<MetatopicRow> rows;
  std::vector<int> degenerate_years;
};

// Attention matrices by year and fits by train year; year t pairs with fit t-1.
inline MetatopicReport metatopic_report(const std::map<int, Eigen::MatrixXd>& attention_by_year,
                                        const std::map<int, scoring::LassoFit>& fits, const MetatopicMap& map) {
  MetatopicReport r{map.kind, {}, {}};
  const auto names = map.names();
  for (const auto& [year, F] : attention_by_year) {
    auto it = fits.find(year - 1);
    if (it == fits.end()) continue;
    const auto w = metatopic_weight(it->second, map);
    std::vector<double> h;
    try {
      h = explained_variance(F, it->second, map);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateDenominator) throw;
      r.degenerate_years.push_back(year);
      h.assign(names.size(), 0.0);
    }
    for (std::size_t m = 0; m < names.size(); ++m) r.rows.push_back({year, names[m], w[m], h[m], polarity(w[m])});
  }
  return r;
}

inline void write_metatopic_report(const std::filesystem::path& path, const std::vector<MetatopicReport>& reports) {
  csv::Writer w(path, {"kind", "year", "metatopic", "w_m", "h", "polarity"});
  for (const auto& r : reports) {
    for (const auto& row : r.rows) {
      w.row({r.kind, csv::format(row.year), row.metatopic, csv::format(row.w_m), csv::format(row.h),
             csv::format(row.polarity)});
    }
  }
}

}  // namespace earnsig::insight
