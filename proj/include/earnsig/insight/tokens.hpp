#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <map>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include "earnsig/common/csv.hpp"
#include "earnsig/corpus/html_clean.hpp"
#include "earnsig/features/features.hpp"
#include "earnsig/insight/metatopics.hpp"
#include "earnsig/scoring/lasso.hpp"

namespace earnsig::insight {

inline constexpr std::array<std::string_view, 5> kSpecialTokens = {"[CLS]", "[SEP]", "[PAD]", "[MASK]", "[UNK]"};
inline constexpr std::size_t kTopTokens = 5;

enum class WeightSpace { Raw, Standardized };

struct TokenImportance {
  DocId doc_id = 0;
  std::vector<std::string> tokens;  // non-padding rows only
  std::vector<double> is;
  std::vector<bool> retained;
  std::vector<std::size_t> top_pos;  // indices into tokens
  std::vector<std::size_t> top_neg;
};

// Keep whole-word tokens with at least two characters and one letter.
inline bool keep_token(std::string_view t) {
  if (t.substr(0, 2) == "##") return false;
  for (auto s : kSpecialTokens) {
    if (t == s) return false;
  }
  if (corpus::count_code_points(t) < 2) return false;
  return std::any_of(t.begin(), t.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
  });
}

inline std::vector<bool> filter_tokens(const std::vector<std::string>& tokens) {
  std::vector<bool> keep(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) keep[i] = keep_token(tokens[i]);
  return keep;
}

// n largest positive and n most negative scores among retained tokens. A
// repeated token string only counts at its first retained occurrence; ties
// keep token order.
inline void top_signed_tokens(TokenImportance& ti, std::size_t n = kTopTokens) {
  std::vector<std::size_t> firsts;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < ti.tokens.size(); ++i) {
    if (ti.retained[i] && seen.insert(ti.tokens[i]).second) firsts.push_back(i);
  }
  std::vector<std::size_t> pos, neg;
  for (auto i : firsts) {
    if (ti.is[i] > 0) pos.push_back(i);
    if (ti.is[i] < 0) neg.push_back(i);
  }
  std::stable_sort(pos.begin(), pos.end(), [&](auto a, auto b) { return ti.is[a] > ti.is[b]; });
  std::stable_sort(neg.begin(), neg.end(), [&](auto a, auto b) { return ti.is[a] < ti.is[b]; });
  if (pos.size() > n) pos.resize(n);
  if (neg.size() > n) neg.resize(n);
  ti.top_pos = std::move(pos);
  ti.top_neg = std::move(neg);
}

inline Eigen::VectorXd importance_weights(const scoring::LassoFit& fit, WeightSpace space) {
  return space == WeightSpace::Raw ? fit.raw_weights() : fit.w;
}

// IS = E w over the non-padding rows of one document.
inline TokenImportance token_importance(const features::TokenEmbeddingMatrix& m, const Eigen::VectorXd& w,
                                        std::size_t n = kTopTokens) {
  if (static_cast<Eigen::Index>(m.dim) != w.size()) {
    throw Error(ErrorCode::DimMismatch, "token matrix width " + std::to_string(m.dim) + " differs from weights " +
                                            std::to_string(w.size()));
  }
  TokenImportance ti;
  ti.doc_id = m.doc_id;
  for (std::size_t r = 0; r < m.tokens.size(); ++r) {
    if (m.is_padding(r)) continue;
    const Eigen::Map<const Eigen::VectorXf> e(m.row(r), m.dim);
    ti.tokens.push_back(m.tokens[r]);
    ti.is.push_back(e.cast<double>().dot(w));
  }
  ti.retained = filter_tokens(ti.tokens);
  top_signed_tokens(ti, n);
  return ti;
}

inline TokenImportance token_importance(const features::TokenEmbeddingMatrix& m, const scoring::LassoFit& fit,
                                        WeightSpace space = WeightSpace::Raw) {
  return token_importance(m, importance_weights(fit, space));
}

// ---- classification shares ------------------------------------------------

struct ClassificationRow {
  std::string model;
  std::string sign;  // "pos" or "neg"
  std::string category;
  std::size_t count = 0;
  double share = 0.0;
};

// Token counts per category over all documents' top lists; "Other" and
// unlabeled tokens are dropped and the rest normalized to 100 within model.
inline std::vector<ClassificationRow> token_classification(const std::string& model,
                                                           const std::vector<TokenImportance>& docs,
                                                           const std::map<std::string, std::string>& labels,
                                                           const std::vector<std::string>& categories) {
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  std::size_t total = 0;
  auto tally = [&](const TokenImportance& d, const std::vector<std::size_t>& idx, const char* sign) {
    for (auto i : idx) {
      auto it = labels.find(d.tokens[i]);
      if (it == labels.end() || it->second == kOtherCategory) continue;
      ++counts[{sign, it->second}];
      ++total;
    }
  };
  for (const auto& d : docs) {
    tally(d, d.top_pos, "pos");
    tally(d, d.top_neg, "neg");
  }
  std::vector<ClassificationRow> out;
  for (const char* sign : {"pos", "neg"}) {
    for (const auto& c : categories) {
      if (c == kOtherCategory) continue;
      auto it = counts.find({sign, c});
      const std::size_t n = it == counts.end() ? 0 : it->second;
      out.push_back({model, sign, c, n, total ? 100.0 * static_cast<double>(n) / static_cast<double>(total) : 0.0});
    }
  }
  return out;
}

inline void write_token_classification(const std::filesystem::path& path, const std::vector<ClassificationRow>& rows) {
  csv::Writer w(path, {"model", "sign", "category", "count", "share"});
  for (const auto& r : rows) {
    w.row({r.model, r.sign, r.category, csv::format(std::uint64_t{r.count}), csv::format(r.share)});
  }
}

// Distinct top-list tokens across documents, in first-seen order.
inline std::vector<std::string> top_token_vocabulary(const std::vector<TokenImportance>& docs) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& d : docs) {
    for (const auto* idx : {&d.top_pos, &d.top_neg}) {
      for (auto i : *idx) {
        if (seen.insert(d.tokens[i]).second) out.push_back(d.tokens[i]);
      }
    }
  }
  return out;
}

}  // namespace earnsig::insight
