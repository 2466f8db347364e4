#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "earnsig/common/error.hpp"
#include "earnsig/common/hash.hpp"
#include "earnsig/insight/metatopics.hpp"

namespace earnsig::insight {

inline constexpr std::size_t kLabelChunk = 500;

inline const std::vector<std::string>& default_categories() {
  static const std::vector<std::string> c{"Corporate Announcements", "Financial Metrics",
                                          "Financial Performance",   "Financial Reports",
                                          "Market / Economic Factors", "Operations / Cost Management",
                                          "Regulatory",              "Sector-Specific News",
                                          "Time-Specific Reports"};
  return c;
}

using LabelMap = std::map<std::string, std::string>;
using KeywordTable = std::vector<std::pair<std::string, std::string>>;

// Maps each item to one of `categories` or "Other".
class Labeler {
 public:
  virtual ~Labeler() = default;
  virtual std::string id() const = 0;
  virtual LabelMap label(const std::vector<std::string>& items, const std::vector<std::string>& categories) = 0;
};

namespace detail {

inline std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

inline bool contains_word(std::string_view text, std::string_view word) {
  if (word.empty()) return false;
  for (auto pos = text.find(word); pos != std::string_view::npos; pos = text.find(word, pos + 1)) {
    const bool left = pos == 0 || !word_char(text[pos - 1]);
    const auto end = pos + word.size();
    const bool right = end == text.size() || !word_char(text[end]);
    if (left && right) return true;
  }
  return false;
}

}  // namespace detail

// Keyword table lookup: the first keyword (file order) occurring as a whole
// word in the lower-cased item decides the category.
class StubLabeler : public Labeler {
 public:
  StubLabeler() = default;
  explicit StubLabeler(KeywordTable table) {
    for (auto& [k, c] : table) table_.emplace_back(detail::lower(k), std::move(c));
  }

  // keyword<TAB>category per line; '#' starts a comment line.
  static StubLabeler load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    KeywordTable table;
    std::string line;
    std::size_t no = 0;
    while (std::getline(in, line)) {
      ++no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
        throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(no) + ": expected keyword<TAB>category");
      }
      table.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return StubLabeler(std::move(table));
  }

  std::string id() const override {
    Sha256 h;
    for (const auto& [k, c] : table_) h.update(k + '\t' + c + '\n');
    return "stub:" + h.hex().substr(0, 16);
  }

  LabelMap label(const std::vector<std::string>& items, const std::vector<std::string>& categories) override {
    LabelMap out;
    for (const auto& item : items) {
      const auto text = detail::lower(item);
      std::string cat(kOtherCategory);
      for (const auto& [k, c] : table_) {
        if (detail::contains_word(text, k)) {
          if (std::find(categories.begin(), categories.end(), c) != categories.end()) cat = c;
          break;
        }
      }
      out[item] = cat;
    }
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::string>> table_;
};

// One JSON file per request, named by the SHA-256 of labeler id, categories
// and items. Writes go through a temp file and rename.
class LabelCache {
 public:
  explicit LabelCache(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

  static std::string key(const std::string& labeler_id, const std::vector<std::string>& items,
                         const std::vector<std::string>& categories) {
    nlohmann::json j{{"labeler", labeler_id}, {"categories", categories}, {"items", items}};
    return sha256_hex(j.dump());
  }

  std::optional<LabelMap> get(const std::string& key) const {
    std::ifstream in(dir_ / (key + ".json"));
    if (!in) return std::nullopt;
    try {
      return nlohmann::json::parse(in).get<LabelMap>();
    } catch (const nlohmann::json::exception&) {
      return std::nullopt;
    }
  }

  void put(const std::string& key, const LabelMap& labels) const {
    const auto final_path = dir_ / (key + ".json");
    const auto tmp = dir_ / (key + ".json.tmp");
    {
      std::ofstream out(tmp);
      if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
      out << nlohmann::json(labels).dump() << '\n';
    }
    std::filesystem::rename(tmp, final_path);
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

struct LabelResult {
  LabelMap labels;
  std::size_t requests = 0;    // labeler calls made
  std::size_t cache_hits = 0;  // chunks served from the cache
  std::size_t fallbacks = 0;   // chunks answered by the fallback labeler
};

namespace detail {

inline LabelMap cached_call(Labeler& labeler, const std::vector<std::string>& chunk,
                            const std::vector<std::string>& categories, LabelCache* cache, LabelResult& r) {
  std::string key;
  if (cache) {
    key = LabelCache::key(labeler.id(), chunk, categories);
    if (auto hit = cache->get(key)) {
      ++r.cache_hits;
      return *hit;
    }
  }
  auto labels = labeler.label(chunk, categories);
  ++r.requests;
  if (cache) cache->put(key, labels);
  return labels;
}

}  // namespace detail

// Labels distinct items in chunks of at most `chunk` per request. Answers
// outside the category list, and items the labeler skipped, become "Other".
// When the primary labeler is unavailable the fallback, if given, answers.
inline LabelResult label_items(const std::vector<std::string>& items, const std::vector<std::string>& categories,
                               Labeler& labeler, LabelCache* cache = nullptr, Labeler* fallback = nullptr,
                               std::size_t chunk = kLabelChunk) {
  if (chunk == 0 || chunk > kLabelChunk) {
    throw Error(ErrorCode::ConfigInvalid, "label chunk size must be in 1..500");
  }
  std::vector<std::string> distinct;
  std::unordered_set<std::string> seen;
  for (const auto& it : items) {
    if (seen.insert(it).second) distinct.push_back(it);
  }
  LabelResult r;
  for (std::size_t start = 0; start < distinct.size(); start += chunk) {
    const std::vector<std::string> part(distinct.begin() + static_cast<std::ptrdiff_t>(start),
                                        distinct.begin() + static_cast<std::ptrdiff_t>(std::min(distinct.size(), start + chunk)));
    LabelMap got;
    try {
      got = detail::cached_call(labeler, part, categories, cache, r);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::LabelerUnavailable || !fallback) throw;
      got = detail::cached_call(*fallback, part, categories, cache, r);
      ++r.fallbacks;
    }
    for (const auto& item : part) {
      auto f = got.find(item);
      const bool valid = f != got.end() &&
                         std::find(categories.begin(), categories.end(), f->second) != categories.end();
      r.labels[item] = valid ? f->second : std::string(kOtherCategory);
    }
  }
  return r;
}

}  // namespace earnsig::insight
