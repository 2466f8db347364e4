#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <unordered_map>
#include <vector>

#include "earnsig/common/csv.hpp"
#include "earnsig/topics/olda.hpp"

namespace earnsig::topics {

enum class AttentionKind { Olda, Taxonomy };

inline std::string_view to_string(AttentionKind k) { return k == AttentionKind::Olda ? "olda" : "taxonomy"; }

// f_i = (tokens assigned to topic i) / (assigned tokens); all-zero when the
// document has no assigned token.
struct TopicAttention {
  DocId doc_id = 0;
  std::vector<double> f;
  AttentionKind kind = AttentionKind::Olda;
};

inline std::vector<double> normalize_counts(std::vector<double> counts) {
  double total = 0;
  for (double c : counts) total += c;
  if (total > 0) {
    for (auto& c : counts) c /= total;
  }
  return counts;
}

inline TopicAttention infer_attention(const TopicModelState& state, const DocTermCounts& doc,
                                      const Eigen::MatrixXd& exp_beta) {
  return {doc.doc_id, normalize_counts(assign_counts(state, doc, exp_beta)), AttentionKind::Olda};
}

inline TopicAttention infer_attention(const TopicModelState& state, const DocTermCounts& doc) {
  return infer_attention(state, doc, detail::exp_elog_beta(state.lambda));
}

inline std::vector<TopicAttention> infer_attention(const TopicModelState& state, std::span<const DocTermCounts> docs) {
  const Eigen::MatrixXd exp_beta = detail::exp_elog_beta(state.lambda);
  std::vector<TopicAttention> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back(infer_attention(state, d, exp_beta));
  return out;
}

// ---- taxonomy -------------------------------------------------------------

struct TaxonomyTopic {
  std::string name;
  std::vector<std::string> phrases;
  std::string metatopic;
};

class Taxonomy {
 public:
  Taxonomy() = default;

  // Phrases are run through the same token pipeline as documents; a phrase
  // that reduces to no tokens is ignored.
  Taxonomy(std::vector<TaxonomyTopic> topics, const textprep::TextPipeline& pipeline) : topics_(std::move(topics)) {
    nodes_.emplace_back();
    for (std::size_t t = 0; t < topics_.size(); ++t) {
      if (topics_[t].phrases.empty()) {
        throw Error(ErrorCode::ConfigInvalid, "taxonomy topic '" + topics_[t].name + "' has no phrases");
      }
      if (topics_[t].metatopic.empty()) {
        throw Error(ErrorCode::ConfigInvalid, "taxonomy topic '" + topics_[t].name + "' has no metatopic");
      }
      for (const auto& phrase : topics_[t].phrases) {
        auto toks = pipeline.tokens(phrase);
        if (toks.empty()) {
          ignored_.push_back(phrase);
          continue;
        }
        std::size_t node = 0;
        for (const auto& tok : toks) {
          auto it = nodes_[node].next.find(tok);
          if (it == nodes_[node].next.end()) {
            nodes_.emplace_back();
            it = nodes_[node].next.emplace(tok, nodes_.size() - 1).first;
          }
          node = it->second;
        }
        auto& ts = nodes_[node].topics;
        if (std::find(ts.begin(), ts.end(), t) == ts.end()) ts.push_back(t);
        ++phrase_count_;
      }
    }
  }

  static Taxonomy load(const std::filesystem::path& path, const textprep::TextPipeline& pipeline) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    std::vector<TaxonomyTopic> topics;
    for (const auto& t : j.at("topics")) {
      topics.push_back({t.at("name").get<std::string>(), t.at("phrases").get<std::vector<std::string>>(),
                        t.value("metatopic", std::string())});
    }
    return Taxonomy(std::move(topics), pipeline);
  }

  std::size_t size() const { return topics_.size(); }
  const std::vector<TaxonomyTopic>& topics() const { return topics_; }
  std::size_t phrase_count() const { return phrase_count_; }
  const std::vector<std::string>& ignored_phrases() const { return ignored_; }

  // Longest-match-first, non-overlapping phrase counts per topic.
  std::vector<double> count(const std::vector<std::string>& tokens) const {
    std::vector<double> counts(topics_.size(), 0.0);
    std::size_t i = 0;
    while (i < tokens.size()) {
      std::size_t node = 0, best_len = 0, best_node = 0;
      for (std::size_t j = i; j < tokens.size(); ++j) {
        auto it = nodes_[node].next.find(tokens[j]);
        if (it == nodes_[node].next.end()) break;
        node = it->second;
        if (!nodes_[node].topics.empty()) {
          best_len = j - i + 1;
          best_node = node;
        }
      }
      if (best_len == 0) {
        ++i;
        continue;
      }
      for (auto t : nodes_[best_node].topics) counts[t] += 1.0;
      i += best_len;
    }
    return counts;
  }

 private:
  struct Node {
    std::unordered_map<std::string, std::size_t> next;
    std::vector<std::size_t> topics;
  };
  std::vector<TaxonomyTopic> topics_;
  std::vector<Node> nodes_;
  std::vector<std::string> ignored_;
  std::size_t phrase_count_ = 0;
};

inline TopicAttention taxonomy_vectorize(const textprep::TokenStream& stream, const Taxonomy& taxonomy) {
  return {stream.doc_id, normalize_counts(taxonomy.count(stream.tokens)), AttentionKind::Taxonomy};
}

// ---- vintages ---------------------------------------------------------------

// Trained states keyed by the last year they have seen.
class ModelHistory {
 public:
  void put(int year, TopicModelState state) { states_.insert_or_assign(year, std::move(state)); }
  bool has(int year) const { return states_.count(year) > 0; }

  const TopicModelState& trained_through(int year) const {
    auto it = states_.find(year);
    if (it == states_.end()) {
      throw Error(ErrorCode::MissingVintage, "no topic model trained through " + std::to_string(year));
    }
    return it->second;
  }

 private:
  std::map<int, TopicModelState> states_;
};

struct YearResult {
  std::vector<TopicAttention> attention;
  TopicModelState updated;
};

// Scores year-t docs with the vintage trained through t-1 (columns beyond
// that vintage's vocabulary are ignored), then continues training on the
// year-t docs with the year-t vocabulary. `passes` full passes are made.
inline YearResult vectorize_year(int year, std::span<const DocTermCounts> docs, const textprep::Vocabulary& vocab,
                                 const ModelHistory& history, int passes = 1) {
  const auto& prev = history.trained_through(year - 1);
  std::vector<DocTermCounts> restricted;
  restricted.reserve(docs.size());
  for (const auto& d : docs) restricted.push_back(d.restricted(prev.V()));
  YearResult r{infer_attention(prev, restricted), prev};
  extend_vocabulary(r.updated, vocab);
  for (int p = 0; p < passes; ++p) olda_fit_pass(r.updated, docs);
  return r;
}

// ---- attention_<kind>_<year>.csv --------------------------------------------

inline void write_attention(const std::filesystem::path& path, const std::vector<TopicAttention>& rows, std::size_t dim) {
  std::vector<std::string> header{"doc_id"};
  for (std::size_t i = 0; i < dim; ++i) header.push_back("i_" + std::to_string(i));
  csv::Writer w(path, header);
  std::vector<std::string> fields;
  for (const auto& a : rows) {
    if (a.f.size() != dim) throw Error(ErrorCode::DimMismatch, "attention vector of unexpected size");
    fields.assign(1, csv::format(a.doc_id));
    for (double v : a.f) fields.push_back(csv::format(v));
    w.row(fields);
  }
}

inline std::vector<TopicAttention> read_attention(const std::filesystem::path& path, AttentionKind kind) {
  const auto table = csv::read_file(path);
  if (table.header.empty() || table.header[0] != "doc_id") {
    throw Error(ErrorCode::ParseError, path.string() + ": first column must be doc_id");
  }
  std::vector<TopicAttention> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    TopicAttention a{csv::parse_int<DocId>(row[0]), {}, kind};
    for (std::size_t i = 1; i < row.size(); ++i) a.f.push_back(csv::parse_double(row[i]));
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace earnsig::topics
