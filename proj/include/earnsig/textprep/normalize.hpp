#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace earnsig::textprep {

namespace detail {

struct NamedEntity {
  std::string_view name;
  char32_t code_point;
};

// Entities that show up in filings. Unknown names are left verbatim.
inline constexpr std::array<NamedEntity, 62> kNamedEntities{{
    {"amp", U'&'},       {"lt", U'<'},        {"gt", U'>'},        {"quot", U'"'},      {"apos", U'\''},
    {"nbsp", 0xA0},      {"copy", 0xA9},      {"reg", 0xAE},       {"trade", 0x2122},   {"mdash", 0x2014},
    {"ndash", 0x2013},   {"lsquo", 0x2018},   {"rsquo", 0x2019},   {"ldquo", 0x201C},   {"rdquo", 0x201D},
    {"sbquo", 0x201A},   {"bdquo", 0x201E},   {"hellip", 0x2026},  {"bull", 0x2022},    {"middot", 0xB7},
    {"cent", 0xA2},      {"pound", 0xA3},     {"euro", 0x20AC},    {"yen", 0xA5},       {"sect", 0xA7},
    {"para", 0xB6},      {"deg", 0xB0},       {"plusmn", 0xB1},    {"times", 0xD7},     {"divide", 0xF7},
    {"frac12", 0xBD},    {"frac14", 0xBC},    {"frac34", 0xBE},    {"sup1", 0xB9},      {"sup2", 0xB2},
    {"sup3", 0xB3},      {"laquo", 0xAB},     {"raquo", 0xBB},     {"iexcl", 0xA1},     {"iquest", 0xBF},
    {"dagger", 0x2020},  {"Dagger", 0x2021},  {"permil", 0x2030},  {"prime", 0x2032},   {"ensp", 0x2002},
    {"emsp", 0x2003},    {"thinsp", 0x2009},  {"shy", 0xAD},       {"eacute", 0xE9},    {"egrave", 0xE8},
    {"aacute", 0xE1},    {"agrave", 0xE0},    {"oacute", 0xF3},    {"uuml", 0xFC},      {"ouml", 0xF6},
    {"auml", 0xE4},      {"ccedil", 0xE7},    {"ntilde", 0xF1},    {"iacute", 0xED},    {"uacute", 0xFA},
    {"Eacute", 0xC9},    {"szlig", 0xDF},
}};

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

// Decodes one UTF-8 sequence at text[i]; invalid bytes come back as U+FFFD
// with length 1.
inline char32_t decode_utf8(std::string_view text, std::size_t i, std::size_t& len) {
  const auto b0 = static_cast<unsigned char>(text[i]);
  auto cont = [&](std::size_t k) {
    return i + k < text.size() && (static_cast<unsigned char>(text[i + k]) & 0xC0) == 0x80;
  };
  auto byte = [&](std::size_t k) { return static_cast<char32_t>(static_cast<unsigned char>(text[i + k]) & 0x3F); };
  if (b0 < 0x80) {
    len = 1;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0 && cont(1)) {
    len = 2;
    return (static_cast<char32_t>(b0 & 0x1F) << 6) | byte(1);
  }
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    len = 3;
    return (static_cast<char32_t>(b0 & 0x0F) << 12) | (byte(1) << 6) | byte(2);
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    len = 4;
    return (static_cast<char32_t>(b0 & 0x07) << 18) | (byte(1) << 12) | (byte(2) << 6) | byte(3);
  }
  len = 1;
  return 0xFFFD;
}

inline bool is_ascii_alpha(char32_t c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
inline bool is_ascii_digit(char32_t c) { return c >= '0' && c <= '9'; }
inline bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

inline bool ends_with_tld(std::string_view host) {
  static constexpr std::string_view kTlds[] = {".com", ".net", ".org", ".gov", ".edu", ".io",
                                               ".co",  ".us",  ".biz", ".info", ".int", ".uk"};
  for (auto tld : kTlds) {
    if (host.size() > tld.size() && host.substr(host.size() - tld.size()) == tld) return true;
  }
  return false;
}

inline char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

// A whitespace-delimited chunk that is a URL, bare domain or e-mail address.
inline bool is_link_chunk(std::string_view chunk) {
  while (!chunk.empty() && std::string_view("([<\"'").find(chunk.front()) != std::string_view::npos) {
    chunk.remove_prefix(1);
  }
  while (!chunk.empty() && std::string_view(".,;:!?)]>\"'").find(chunk.back()) != std::string_view::npos) {
    chunk.remove_suffix(1);
  }
  if (chunk.empty()) return false;
  std::string lower(chunk);
  for (auto& c : lower) c = ascii_lower(c);
  if (lower.find("://") != std::string::npos || lower.starts_with("www.") || lower.starts_with("mailto:")) {
    return true;
  }
  auto at = lower.find('@');
  if (at != std::string::npos && at > 0 && lower.find('.', at) != std::string::npos) return true;
  std::string_view host(lower);
  if (auto slash = host.find('/'); slash != std::string_view::npos) host = host.substr(0, slash);
  if (host.find('.') == std::string_view::npos) return false;
  for (char c : host) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-')) return false;
  }
  return ends_with_tld(host);
}

}  // namespace detail

// Decodes named, decimal and hex character references. Malformed or unknown
// references are kept as written.
inline std::string unescape_html(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    if (text[i] != '&') {
      out += text[i++];
      continue;
    }
    auto semi = text.find(';', i + 1);
    if (semi == std::string_view::npos || semi - i > 12) {
      out += text[i++];
      continue;
    }
    std::string_view name = text.substr(i + 1, semi - i - 1);
    char32_t cp = 0;
    bool ok = false;
    if (name.size() >= 2 && name[0] == '#') {
      bool hex = name[1] == 'x' || name[1] == 'X';
      std::string_view digits = name.substr(hex ? 2 : 1);
      ok = !digits.empty();
      for (char c : digits) {
        int v;
        if (c >= '0' && c <= '9') {
          v = c - '0';
        } else if (hex && c >= 'a' && c <= 'f') {
          v = c - 'a' + 10;
        } else if (hex && c >= 'A' && c <= 'F') {
          v = c - 'A' + 10;
        } else {
          ok = false;
          break;
        }
        cp = cp * (hex ? 16 : 10) + static_cast<char32_t>(v);
        if (cp > 0x10FFFF) {
          ok = false;
          break;
        }
      }
      if (ok && (cp == 0 || (cp >= 0xD800 && cp <= 0xDFFF))) cp = 0xFFFD;
    } else {
      for (const auto& e : detail::kNamedEntities) {
        if (e.name == name) {
          cp = e.code_point;
          ok = true;
          break;
        }
      }
    }
    if (!ok) {
      out += text[i++];
      continue;
    }
    detail::append_utf8(out, cp);
    i = semi + 1;
  }
  return out;
}

// Bag-of-words normalization: unescape entities, drop links and e-mail
// addresses, delete digits, '&' and in-word hyphens/apostrophes, turn every
// other symbol into a space, lowercase and collapse whitespace.
inline std::string normalize_text(std::string_view text) {
  std::string unescaped = unescape_html(text);
  // Unicode spaces act as chunk separators like ASCII whitespace.
  for (std::string_view sp : {"\xC2\xA0", "\xE2\x80\x82", "\xE2\x80\x83", "\xE2\x80\x89"}) {
    for (auto at = unescaped.find(sp); at != std::string::npos; at = unescaped.find(sp, at + 1)) {
      unescaped.replace(at, sp.size(), " ");
    }
  }
  std::string out;
  out.reserve(unescaped.size());
  std::string_view src(unescaped);

  std::size_t pos = 0;
  while (pos < src.size()) {
    if (detail::is_ascii_space(src[pos])) {
      ++pos;
      continue;
    }
    std::size_t end = pos;
    while (end < src.size() && !detail::is_ascii_space(src[end])) ++end;
    std::string_view chunk = src.substr(pos, end - pos);
    pos = end;
    if (detail::is_link_chunk(chunk)) continue;

    // Decode the chunk so neighbours of a hyphen can be inspected.
    std::vector<char32_t> cps;
    cps.reserve(chunk.size());
    for (std::size_t i = 0; i < chunk.size();) {
      std::size_t len = 1;
      cps.push_back(detail::decode_utf8(chunk, i, len));
      i += len;
    }
    if (!out.empty() && out.back() != ' ') out += ' ';
    for (std::size_t k = 0; k < cps.size(); ++k) {
      const char32_t c = cps[k];
      if (detail::is_ascii_alpha(c)) {
        out += detail::ascii_lower(static_cast<char>(c));
        continue;
      }
      if (detail::is_ascii_digit(c) || c == U'&' || c == 0xAD) continue;
      const bool prev_alnum = k > 0 && (detail::is_ascii_alpha(cps[k - 1]) || detail::is_ascii_digit(cps[k - 1]));
      const bool next_alnum =
          k + 1 < cps.size() && (detail::is_ascii_alpha(cps[k + 1]) || detail::is_ascii_digit(cps[k + 1]));
      const bool joiner = c == U'-' || c == U'\'' || c == 0x2019 || c == 0x2010 || c == 0x2011;
      if (joiner && prev_alnum && next_alnum) continue;
      if (!out.empty() && out.back() != ' ') out += ' ';
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

// Splits normalized text on spaces and drops single-character residues.
inline std::vector<std::string> tokenize(std::string_view normalized) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < normalized.size()) {
    while (i < normalized.size() && normalized[i] == ' ') ++i;
    std::size_t j = i;
    while (j < normalized.size() && normalized[j] != ' ') ++j;
    if (j - i >= 2) tokens.emplace_back(normalized.substr(i, j - i));
    i = j;
  }
  return tokens;
}

}  // namespace earnsig::textprep
