#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "earnsig/common/csv.hpp"
#include "earnsig/features/features.hpp"
#include "earnsig/scoring/lasso.hpp"

namespace earnsig::scoring {

inline constexpr std::array<std::string_view, 5> kSoftKinds = {"bkmx", "olda", "bert", "mpnet", "finbert"};
inline constexpr std::string_view kMeanKind = "mean";
inline constexpr std::string_view kOosSurpriseKind = "oos_surprise";

// A score for a score_year document, produced by a model of score_year - 1.
struct SoftScore {
  DocId doc_id = 0;
  Permno permno = 0;
  corpus::Date tau_eff{};
  std::string kind;
  int score_year = 0;
  double value = 0.0;
};

inline bool score_order(const SoftScore& a, const SoftScore& b) {
  if (a.tau_eff != b.tau_eff) return a.tau_eff < b.tau_eff;
  if (a.permno != b.permno) return a.permno < b.permno;
  return a.doc_id < b.doc_id;
}

inline std::vector<SoftScore> score_year(const std::map<int, LassoFit>& fits, int year,
                                         const features::DesignMatrix& m) {
  auto it = fits.find(year - 1);
  if (it == fits.end()) {
    throw Error(ErrorCode::MissingVintage, "no lasso fit for train year " + std::to_string(year - 1));
  }
  const Eigen::VectorXd pred = it->second.predict(m.X);
  std::vector<SoftScore> out;
  out.reserve(m.doc_ids.size());
  for (std::size_t i = 0; i < m.doc_ids.size(); ++i) {
    out.push_back({m.doc_ids[i], m.permnos[i], m.dates[i], it->second.kind, year, pred(static_cast<Eigen::Index>(i))});
  }
  return out;
}

struct RollingResult {
  std::map<int, LassoFit> fits;  // by train year
  std::vector<SoftScore> scores;
};

// Fits on each year t that has a successor t+1 in `by_year` and scores t+1.
inline RollingResult rolling_scores(std::string_view kind, const std::map<int, features::DesignMatrix>& by_year,
                                    const LassoOptions& opt = {}) {
  RollingResult r;
  for (auto it = by_year.begin(); it != by_year.end(); ++it) {
    auto next = std::next(it);
    if (next == by_year.end() || next->first != it->first + 1) continue;
    LassoFit fit = fit_lasso(it->second.X, it->second.y, opt);
    fit.kind = std::string(kind);
    fit.train_year = it->first;
    r.fits.emplace(it->first, std::move(fit));
    auto s = score_year(r.fits, next->first, next->second);
    r.scores.insert(r.scores.end(), s.begin(), s.end());
  }
  std::sort(r.scores.begin(), r.scores.end(), score_order);
  return r;
}

struct OosFit {
  int train_year = 0;
  double intercept = 0.0;
  double slope = 0.0;
  std::size_t n = 0;
};

struct OosResult {
  std::map<int, OosFit> fits;
  std::vector<SoftScore> scores;
};

// Univariate OLS of ret_day on surprise in year t, applied to year t+1.
inline OosResult oos_surprise(std::span<const corpus::AlignedEvent> events) {
  std::map<int, std::vector<const corpus::AlignedEvent*>> by_year;
  for (const auto& e : events) by_year[e.year()].push_back(&e);
  OosResult r;
  for (auto it = by_year.begin(); it != by_year.end(); ++it) {
    auto next = std::next(it);
    if (next == by_year.end() || next->first != it->first + 1) continue;
    const auto& rows = it->second;
    const double n = static_cast<double>(rows.size());
    double mx = 0, my = 0;
    for (const auto* e : rows) {
      mx += e->event.surprise;
      my += e->event.ret_day;
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (const auto* e : rows) {
      sxx += (e->event.surprise - mx) * (e->event.surprise - mx);
      sxy += (e->event.surprise - mx) * (e->event.ret_day - my);
    }
    if (rows.size() < 2 || !(std::sqrt(sxx / n) > 1e-12 * std::abs(mx))) {
      throw Error(ErrorCode::DegenerateYear, "surprise has no variance in " + std::to_string(it->first));
    }
    OosFit f{it->first, 0.0, sxy / sxx, rows.size()};
    f.intercept = my - f.slope * mx;
    r.fits.emplace(it->first, f);
    for (const auto* e : next->second) {
      r.scores.push_back({e->doc_id, e->event.permno, e->event.tau_eff, std::string(kOosSurpriseKind), next->first,
                          f.intercept + f.slope * e->event.surprise});
    }
  }
  std::sort(r.scores.begin(), r.scores.end(), score_order);
  return r;
}

struct SoftMeanExclusion {
  DocId doc_id = 0;
  std::vector<std::string> missing_kinds;
};

struct SoftMeanResult {
  std::vector<SoftScore> scores;
  std::vector<SoftMeanExclusion> excluded;
};

// Mean of the five kinds per document; documents missing any kind are
// excluded and listed. Values are summed in sorted order so the result does
// not depend on input order.
inline SoftMeanResult soft_mean(const std::map<std::string, std::vector<SoftScore>>& by_kind) {
  struct Slot {
    const SoftScore* any = nullptr;
    std::array<std::optional<double>, kSoftKinds.size()> v;
  };
  std::map<DocId, Slot> docs;
  for (std::size_t k = 0; k < kSoftKinds.size(); ++k) {
    auto it = by_kind.find(std::string(kSoftKinds[k]));
    if (it == by_kind.end()) continue;
    for (const auto& s : it->second) {
      auto& slot = docs[s.doc_id];
      if (!slot.any) slot.any = &s;
      slot.v[k] = s.value;
    }
  }
  SoftMeanResult r;
  for (const auto& [id, slot] : docs) {
    SoftMeanExclusion ex{id, {}};
    std::array<double, kSoftKinds.size()> vals{};
    for (std::size_t k = 0; k < kSoftKinds.size(); ++k) {
      if (!slot.v[k]) {
        ex.missing_kinds.emplace_back(kSoftKinds[k]);
      } else {
        vals[k] = *slot.v[k];
      }
    }
    if (!ex.missing_kinds.empty()) {
      r.excluded.push_back(std::move(ex));
      continue;
    }
    std::sort(vals.begin(), vals.end());
    double sum = 0;
    for (double v : vals) sum += v;
    r.scores.push_back({id, slot.any->permno, slot.any->tau_eff, std::string(kMeanKind), slot.any->score_year,
                        sum / static_cast<double>(vals.size())});
  }
  std::sort(r.scores.begin(), r.scores.end(), score_order);
  return r;
}

// ---- softs_<kind>.csv -------------------------------------------------------

inline void write_softs(const std::filesystem::path& path, const std::vector<SoftScore>& scores) {
  csv::Writer w(path, {"doc_id", "permno", "tau_eff", "score_year", "value"});
  for (const auto& s : scores) {
    w.row({csv::format(s.doc_id), csv::format(s.permno), corpus::format_date(s.tau_eff), csv::format(s.score_year),
           csv::format(s.value)});
  }
}

inline std::vector<SoftScore> read_softs(const std::filesystem::path& path, std::string_view kind) {
  const auto t = csv::read_file(path);
  const auto c_id = t.column("doc_id"), c_p = t.column("permno"), c_d = t.column("tau_eff"),
             c_y = t.column("score_year"), c_v = t.column("value");
  std::vector<SoftScore> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    out.push_back({csv::parse_int<DocId>(row[c_id]), csv::parse_int<Permno>(row[c_p]), corpus::parse_date(row[c_d]),
                   std::string(kind), csv::parse_int<int>(row[c_y]), csv::parse_double(row[c_v])});
  }
  return out;
}

inline std::filesystem::path softs_path(const std::filesystem::path& dir, std::string_view kind) {
  return dir / ("softs_" + std::string(kind) + ".csv");
}

}  // namespace earnsig::scoring
