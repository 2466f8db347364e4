#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "earnsig/common/error.hpp"
#include "earnsig/corpus/documents.hpp"
#include "earnsig/textprep/normalize.hpp"

namespace earnsig::textprep {

struct TokenStream {
  DocId doc_id = 0;
  std::vector<std::string> tokens;
};

namespace detail {

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

}  // namespace detail

// Exception table first, then plural-noun suffix rules.
class Lemmatizer {
 public:
  Lemmatizer() = default;
  explicit Lemmatizer(std::unordered_map<std::string, std::string> exceptions) : exceptions_(std::move(exceptions)) {}

  static Lemmatizer load(const std::filesystem::path& path) {
    std::unordered_map<std::string, std::string> table;
    for (const auto& line : detail::read_lines(path)) {
      auto tab = line.find('\t');
      if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
        throw Error(ErrorCode::ParseError, path.string() + ": bad exception line '" + line + "'");
      }
      table[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return Lemmatizer(std::move(table));
  }

  std::string lemmatize(std::string_view token) const {
    if (auto it = exceptions_.find(std::string(token)); it != exceptions_.end()) return it->second;
    return apply_rules(token);
  }

  std::vector<std::string> lemmatize(const std::vector<std::string>& tokens) const {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(lemmatize(t));
    return out;
  }

  const std::unordered_map<std::string, std::string>& exceptions() const { return exceptions_; }

  static std::string apply_rules(std::string_view t) {
    using detail::ends_with;
    if (t.size() <= 3) return std::string(t);
    if (ends_with(t, "ies") && t.size() > 4) return std::string(t.substr(0, t.size() - 3)) + "y";
    if (ends_with(t, "sses")) return std::string(t.substr(0, t.size() - 2));
    if (ends_with(t, "xes") || ends_with(t, "ches") || ends_with(t, "shes")) {
      return std::string(t.substr(0, t.size() - 2));
    }
    if (ends_with(t, "ss") || ends_with(t, "us") || ends_with(t, "is")) return std::string(t);
    if (ends_with(t, "s")) return std::string(t.substr(0, t.size() - 1));
    return std::string(t);
  }

 private:
  std::unordered_map<std::string, std::string> exceptions_;
};

class Stopwords {
 public:
  Stopwords() = default;
  explicit Stopwords(std::unordered_set<std::string> words) : words_(std::move(words)) {}

  static Stopwords load(const std::filesystem::path& path) {
    std::unordered_set<std::string> words;
    for (const auto& line : detail::read_lines(path)) words.insert(line);
    return Stopwords(std::move(words));
  }

  bool contains(std::string_view w) const { return words_.count(std::string(w)) > 0; }
  std::size_t size() const { return words_.size(); }

 private:
  std::unordered_set<std::string> words_;
};

// Removes stopwords, then collapses runs of an identical token to one.
inline std::vector<std::string> drop_stopwords_and_repeats(const std::vector<std::string>& lemmas,
                                                          const Stopwords& stopwords) {
  std::vector<std::string> out;
  out.reserve(lemmas.size());
  for (const auto& w : lemmas) {
    if (stopwords.contains(w)) continue;
    if (!out.empty() && out.back() == w) continue;
    out.push_back(w);
  }
  return out;
}

// Shared resources for the full text -> tokens pipeline.
struct TextPipeline {
  Lemmatizer lemmatizer;
  Stopwords stopwords;

  static TextPipeline load(const std::filesystem::path& data_dir) {
    return {Lemmatizer::load(data_dir / "lemma_exceptions.tsv"), Stopwords::load(data_dir / "stopwords_en.txt")};
  }

  std::vector<std::string> tokens(std::string_view text) const {
    return drop_stopwords_and_repeats(lemmatizer.lemmatize(tokenize(normalize_text(text))), stopwords);
  }

  TokenStream stream(DocId doc_id, std::string_view text) const { return {doc_id, tokens(text)}; }
};

// Token streams file: one document per line, "doc_id<TAB>space-joined tokens".
inline void write_token_streams(const std::filesystem::path& path, const std::vector<TokenStream>& streams) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& s : streams) {
    out << s.doc_id << '\t';
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      if (i) out << ' ';
      out << s.tokens[i];
    }
    out << '\n';
  }
}

inline std::vector<TokenStream> read_token_streams(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<TokenStream> streams;
  std::string line;
  while (std::getline(in, line)) {
    auto tab = line.find('\t');
    if (tab == std::string::npos) throw Error(ErrorCode::ParseError, path.string() + ": missing tab");
    TokenStream s;
    s.doc_id = std::stoull(line.substr(0, tab));
    std::string_view rest = std::string_view(line).substr(tab + 1);
    std::size_t i = 0;
    while (i < rest.size()) {
      std::size_t j = rest.find(' ', i);
      if (j == std::string_view::npos) j = rest.size();
      if (j > i) s.tokens.emplace_back(rest.substr(i, j - i));
      i = j + 1;
    }
    streams.push_back(std::move(s));
  }
  return streams;
}

}  // namespace earnsig::textprep
