#pragma once

#include <cctype>
#include <filesystem>
#include <fstream>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "earnsig/common/error.hpp"

namespace earnsig::corpus {

// One case-insensitive cleanup rule. `DropParagraph` removes the whole block
// when the pattern occurs anywhere in it; `DropMatch` deletes only the match.
struct BoilerplateRule {
  enum class Action { DropParagraph, DropMatch };
  Action action;
  std::string pattern;
  std::regex regex;
};

class BoilerplateRules {
 public:
  BoilerplateRules() = default;

  void add(BoilerplateRule::Action action, const std::string& pattern) {
    rules_.push_back({action, pattern,
                      std::regex(pattern, std::regex::ECMAScript | std::regex::icase | std::regex::optimize)});
  }

  // Format: one rule per line, "<action>\t<regex>"; '#' starts a comment.
  static BoilerplateRules load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    BoilerplateRules rules;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos) {
        throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) + ": missing tab");
      }
      std::string action = line.substr(0, tab);
      std::string pattern = line.substr(tab + 1);
      try {
        if (action == "drop_paragraph") {
          rules.add(BoilerplateRule::Action::DropParagraph, pattern);
        } else if (action == "drop_match") {
          rules.add(BoilerplateRule::Action::DropMatch, pattern);
        } else {
          throw Error(ErrorCode::ParseError, path.string() + ":" + std::to_string(lineno) +
                                                 ": unknown action '" + action + "'");
        }
      } catch (const std::regex_error& e) {
        throw Error(ErrorCode::ParseError,
                    path.string() + ":" + std::to_string(lineno) + ": bad regex: " + e.what());
      }
    }
    return rules;
  }

  const std::vector<BoilerplateRule>& rules() const { return rules_; }

 private:
  std::vector<BoilerplateRule> rules_;
};

inline std::size_t count_code_points(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

namespace detail {

inline bool iequals_prefix(std::string_view text, std::size_t pos, std::string_view prefix) {
  if (pos + prefix.size() > text.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[pos + i])) != prefix[i]) return false;
  }
  return true;
}

inline std::size_t ifind(std::string_view text, std::string_view needle, std::size_t from = 0) {
  for (std::size_t i = from; i + needle.size() <= text.size(); ++i) {
    if (iequals_prefix(text, i, needle)) return i;
  }
  return std::string_view::npos;
}

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

inline std::string collapse_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending = false;
  for (char c : text) {
    if (is_space(c)) {
      pending = !out.empty();
    } else {
      if (pending) out += ' ';
      pending = false;
      out += c;
    }
  }
  return out;
}

inline std::string decode_space_entities(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (text[i] == '&') {
      bool matched = false;
      for (std::string_view ent : {"&nbsp;", "&#160;", "&#xa0;"}) {
        if (iequals_prefix(text, i, ent)) {
          out += ' ';
          i += ent.size();
          matched = true;
          break;
        }
      }
      if (matched) continue;
    }
    if (static_cast<unsigned char>(text[i]) == 0xC2 && i + 1 < text.size() &&
        static_cast<unsigned char>(text[i + 1]) == 0xA0) {
      out += ' ';
      i += 2;
      continue;
    }
    out += text[i++];
  }
  return out;
}

inline bool is_block_tag(std::string_view name) {
  static constexpr std::string_view kBlocks[] = {
      "p",     "div",     "br",     "tr",   "li",     "ul",      "ol",   "h1",  "h2",     "h3",
      "h4",    "h5",      "h6",     "hr",   "table",  "blockquote", "pre", "center", "section", "article",
      "header", "footer", "dl",    "dt",   "dd",     "form",    "title", "caption", "address", "body"};
  for (auto b : kBlocks) {
    if (name == b) return true;
  }
  return false;
}

inline bool is_raw_text_tag(std::string_view name) {
  return name == "script" || name == "style" || name == "head" || name == "noscript" || name == "title";
}

// Tolerant HTML scan producing text blocks. Tables are skipped entirely;
// blank lines inside text nodes also split blocks.
inline std::vector<std::string> extract_blocks(std::string_view html) {
  std::string_view region = html;
  std::size_t body = std::string_view::npos;
  for (std::size_t pos = ifind(html, "<body"); pos != std::string_view::npos; pos = ifind(html, "<body", pos + 1)) {
    char next = pos + 5 < html.size() ? html[pos + 5] : '>';
    if (next == '>' || is_space(next) || next == '/') {
      body = pos;
      break;
    }
  }
  if (body != std::string_view::npos) {
    auto open_end = html.find('>', body);
    std::size_t start = open_end == std::string_view::npos ? html.size() : open_end + 1;
    auto close = ifind(html, "</body", start);
    region = html.substr(start, (close == std::string_view::npos ? html.size() : close) - start);
  }

  std::vector<std::string> blocks;
  std::string current;
  int table_depth = 0;
  auto flush = [&] {
    if (!current.empty()) blocks.push_back(std::move(current));
    current.clear();
  };

  std::size_t i = 0;
  while (i < region.size()) {
    char c = region[i];
    if (c == '<') {
      if (region.compare(i, 4, "<!--") == 0) {
        auto end = region.find("-->", i + 4);
        i = end == std::string_view::npos ? region.size() : end + 3;
        continue;
      }
      if (i + 1 < region.size() && (region[i + 1] == '!' || region[i + 1] == '?')) {
        auto end = region.find('>', i);
        i = end == std::string_view::npos ? region.size() : end + 1;
        continue;
      }
      bool closing = i + 1 < region.size() && region[i + 1] == '/';
      std::size_t name_start = i + (closing ? 2 : 1);
      if (name_start < region.size() && std::isalpha(static_cast<unsigned char>(region[name_start]))) {
        std::size_t name_end = name_start;
        while (name_end < region.size() && (std::isalnum(static_cast<unsigned char>(region[name_end])) ||
                                             region[name_end] == ':' || region[name_end] == '-')) {
          ++name_end;
        }
        std::string name(region.substr(name_start, name_end - name_start));
        for (auto& ch : name) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        // Skip attributes, honoring quotes.
        std::size_t j = name_end;
        char quote = 0;
        while (j < region.size()) {
          char d = region[j];
          if (quote) {
            if (d == quote) quote = 0;
          } else if (d == '"' || d == '\'') {
            quote = d;
          } else if (d == '>') {
            break;
          }
          ++j;
        }
        bool self_closing = j > 0 && j < region.size() && region[j - 1] == '/';
        i = j < region.size() ? j + 1 : region.size();
        if (closing) {
          if (name == "table") table_depth = table_depth > 0 ? table_depth - 1 : 0;
          if (is_block_tag(name)) flush();
          continue;
        }
        if (is_raw_text_tag(name) && !self_closing) {
          auto end = ifind(region, "</" + name, i);
          if (end == std::string_view::npos) {
            i = region.size();
          } else {
            auto gt = region.find('>', end);
            i = gt == std::string_view::npos ? region.size() : gt + 1;
          }
          flush();
          continue;
        }
        if (name == "table" && !self_closing) ++table_depth;
        if (is_block_tag(name)) flush();
        continue;
      }
      // A bare '<' is text.
    }
    if (table_depth == 0) {
      if (c == '\n') {
        // Blank line => block break.
        std::size_t k = i + 1;
        while (k < region.size() && (region[k] == ' ' || region[k] == '\t' || region[k] == '\r')) ++k;
        if (k < region.size() && region[k] == '\n') {
          flush();
          i = k + 1;
          continue;
        }
      }
      current += c;
    }
    ++i;
  }
  flush();
  return blocks;
}

// Applies the rule list to one block until nothing changes. Returns false
// when the block is dropped.
inline bool apply_rules(std::string& block, const BoilerplateRules& rules) {
  for (int iteration = 0; iteration < 16; ++iteration) {
    bool changed = false;
    for (const auto& rule : rules.rules()) {
      if (rule.action == BoilerplateRule::Action::DropParagraph) {
        if (std::regex_search(block, rule.regex)) return false;
      } else {
        std::string replaced = collapse_whitespace(std::regex_replace(block, rule.regex, " "));
        if (replaced != block) {
          block = std::move(replaced);
          changed = true;
        }
      }
      if (block.empty()) return false;
    }
    if (!changed) return true;
  }
  return !block.empty();
}

}  // namespace detail

inline constexpr std::string_view kParagraphSeparator = "\n\n";

// HTML filing -> body text with tables and boilerplate removed. Blocks are
// separated by a blank line; whitespace inside a block is collapsed.
inline std::string clean_press_release(std::string_view raw_html, const BoilerplateRules& rules) {
  std::string out;
  for (auto& block : detail::extract_blocks(raw_html)) {
    std::string text = detail::collapse_whitespace(detail::decode_space_entities(block));
    if (text.empty() || !detail::apply_rules(text, rules)) continue;
    if (!out.empty()) out += kParagraphSeparator;
    out += text;
  }
  if (out.empty()) throw Error(ErrorCode::EmptyBody, "no body text survived cleaning");
  return out;
}

}  // namespace earnsig::corpus
