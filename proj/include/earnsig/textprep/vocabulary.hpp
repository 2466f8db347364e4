#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "earnsig/common/csv.hpp"
#include "earnsig/common/error.hpp"
#include "earnsig/textprep/tokens.hpp"

namespace earnsig::textprep {

// Document frequency counts over a set of token streams. Mergeable.
struct DocumentFrequencies {
  std::map<std::string, std::size_t> df;
  std::size_t n_docs = 0;

  void add(const TokenStream& stream) {
    std::set<std::string_view> seen(stream.tokens.begin(), stream.tokens.end());
    for (auto t : seen) df[std::string(t)] += 1;
    n_docs += 1;
  }

  void merge(const DocumentFrequencies& other) {
    for (const auto& [t, n] : other.df) df[t] += n;
    n_docs += other.n_docs;
  }
};

struct VocabOptions {
  std::size_t min_df = 5;
  double max_df_ratio = 0.5;
  std::size_t max_size = 50'000;
};

class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(int version_year, std::vector<std::string> terms, std::vector<std::size_t> df)
      : version_year_(version_year), terms_(std::move(terms)), df_(std::move(df)) {
    if (df_.size() != terms_.size()) throw Error(ErrorCode::DimMismatch, "vocabulary df size mismatch");
    index_.reserve(terms_.size());
    for (std::size_t i = 0; i < terms_.size(); ++i) {
      if (!index_.emplace(terms_[i], static_cast<std::uint32_t>(i)).second) {
        throw Error(ErrorCode::ParseError, "duplicate vocabulary term '" + terms_[i] + "'");
      }
    }
  }

  int version_year() const { return version_year_; }
  std::size_t size() const { return terms_.size(); }
  bool empty() const { return terms_.empty(); }
  const std::string& term(std::size_t i) const { return terms_.at(i); }
  std::size_t df(std::size_t i) const { return df_.at(i); }
  const std::vector<std::string>& terms() const { return terms_; }

  std::optional<std::uint32_t> find(std::string_view term) const {
    auto it = index_.find(std::string(term));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  int version_year_ = 0;
  std::vector<std::string> terms_;
  std::vector<std::size_t> df_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

namespace detail {

// Eligible terms ordered by descending df, ties by term.
inline std::vector<std::pair<std::string, std::size_t>> ranked_candidates(const DocumentFrequencies& freqs,
                                                                          const VocabOptions& opts) {
  const double max_df = opts.max_df_ratio * static_cast<double>(freqs.n_docs);
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& [t, n] : freqs.df) {
    if (n >= opts.min_df && static_cast<double>(n) <= max_df) out.emplace_back(t, n);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

}  // namespace detail

// Terms with df in [min_df, max_df_ratio * D], truncated to max_size by
// descending df (ties by term). Indices follow term order.
inline Vocabulary build_vocabulary(const DocumentFrequencies& freqs, const VocabOptions& opts, int version_year) {
  auto ranked = detail::ranked_candidates(freqs, opts);
  if (ranked.size() > opts.max_size) ranked.resize(opts.max_size);
  std::sort(ranked.begin(), ranked.end());
  if (ranked.empty()) throw Error(ErrorCode::EmptyVocabulary, "no term passes the document-frequency filters");
  std::vector<std::string> terms;
  std::vector<std::size_t> df;
  for (auto& [t, n] : ranked) {
    terms.push_back(std::move(t));
    df.push_back(n);
  }
  return Vocabulary(version_year, std::move(terms), std::move(df));
}

inline Vocabulary build_vocabulary(const std::vector<TokenStream>& streams, const VocabOptions& opts,
                                   int version_year) {
  DocumentFrequencies freqs;
  for (const auto& s : streams) freqs.add(s);
  return build_vocabulary(freqs, opts, version_year);
}

// Next vintage: every term of `prev` keeps its index; newly eligible terms
// from the cumulative counts are appended (in term order) until max_size.
inline Vocabulary extend_vocabulary(const Vocabulary& prev, const DocumentFrequencies& cumulative,
                                    const VocabOptions& opts, int version_year) {
  std::vector<std::string> terms = prev.terms();
  std::vector<std::size_t> df(terms.size());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    auto it = cumulative.df.find(terms[i]);
    df[i] = it == cumulative.df.end() ? prev.df(i) : it->second;
  }
  std::vector<std::pair<std::string, std::size_t>> fresh;
  const std::size_t room = opts.max_size > terms.size() ? opts.max_size - terms.size() : 0;
  for (auto& cand : detail::ranked_candidates(cumulative, opts)) {
    if (fresh.size() >= room) break;
    if (!prev.find(cand.first)) fresh.push_back(std::move(cand));
  }
  std::sort(fresh.begin(), fresh.end());
  for (auto& [t, n] : fresh) {
    terms.push_back(std::move(t));
    df.push_back(n);
  }
  if (terms.empty()) throw Error(ErrorCode::EmptyVocabulary, "no term passes the document-frequency filters");
  return Vocabulary(version_year, std::move(terms), std::move(df));
}

struct DocTermCounts {
  DocId doc_id = 0;
  int vocab_year = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> entries;  // (index, count), index ascending

  std::uint64_t total() const {
    std::uint64_t n = 0;
    for (const auto& e : entries) n += e.second;
    return n;
  }

  // Counts over the first `v` vocabulary indices only.
  DocTermCounts restricted(std::size_t v) const {
    DocTermCounts out{doc_id, vocab_year, {}};
    for (const auto& e : entries) {
      if (e.first < v) out.entries.push_back(e);
    }
    return out;
  }
};

inline DocTermCounts count_vectorize(const TokenStream& stream, const Vocabulary& vocab) {
  std::map<std::uint32_t, std::uint32_t> counts;
  for (const auto& t : stream.tokens) {
    if (auto idx = vocab.find(t)) counts[*idx] += 1;
  }
  DocTermCounts out{stream.doc_id, vocab.version_year(), {}};
  out.entries.assign(counts.begin(), counts.end());
  return out;
}

// ---- artifact IO ----------------------------------------------------------

inline void write_vocabulary(const std::filesystem::path& path, const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (std::size_t i = 0; i < vocab.size(); ++i) out << vocab.term(i) << '\t' << i << '\t' << vocab.df(i) << '\n';
}

inline Vocabulary read_vocabulary(const std::filesystem::path& path, int version_year) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::string> terms;
  std::vector<std::size_t> df;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto t1 = line.find('\t');
    auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw Error(ErrorCode::ParseError, path.string() + ": bad line '" + line + "'");
    auto idx = csv::parse_int<std::size_t>(std::string_view(line).substr(t1 + 1, t2 - t1 - 1));
    if (idx != terms.size()) throw Error(ErrorCode::ParseError, path.string() + ": indices not dense");
    terms.push_back(line.substr(0, t1));
    df.push_back(csv::parse_int<std::size_t>(std::string_view(line).substr(t2 + 1)));
  }
  return Vocabulary(version_year, std::move(terms), std::move(df));
}

inline void write_dtm(const std::filesystem::path& path, const std::vector<DocTermCounts>& docs) {
  csv::Writer w(path, {"doc_id", "index", "count"});
  for (const auto& d : docs) {
    for (const auto& [idx, n] : d.entries) w.row({csv::format(d.doc_id), csv::format(idx), csv::format(n)});
  }
}

// Documents without any in-vocabulary token have no rows; callers supply the
// doc order so they come back as empty count vectors.
inline std::vector<DocTermCounts> read_dtm(const std::filesystem::path& path, int vocab_year,
                                           const std::vector<DocId>& doc_order) {
  const auto table = csv::read_file(path);
  const auto c_doc = table.column("doc_id"), c_idx = table.column("index"), c_n = table.column("count");
  std::unordered_map<DocId, std::size_t> pos;
  std::vector<DocTermCounts> out;
  for (auto id : doc_order) {
    pos.emplace(id, out.size());
    out.push_back({id, vocab_year, {}});
  }
  for (const auto& row : table.rows) {
    const auto id = csv::parse_int<DocId>(row[c_doc]);
    auto it = pos.find(id);
    if (it == pos.end()) throw Error(ErrorCode::UnknownDoc, path.string() + ": doc " + row[c_doc] + " not in corpus");
    out[it->second].entries.emplace_back(csv::parse_int<std::uint32_t>(row[c_idx]),
                                         csv::parse_int<std::uint32_t>(row[c_n]));
  }
  for (auto& d : out) std::sort(d.entries.begin(), d.entries.end());
  return out;
}

}  // namespace earnsig::textprep
