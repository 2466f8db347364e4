#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "earnsig/corpus/calendar.hpp"
#include "earnsig/corpus/html_clean.hpp"
#include "earnsig/corpus/time.hpp"

namespace earnsig {

using DocId = std::uint64_t;
using Permno = std::int64_t;

}  // namespace earnsig

namespace earnsig::corpus {

struct PressReleaseDoc {
  DocId doc_id = 0;
  Permno permno = 0;
  Timestamp announce_ts;
  std::string raw_html;
  std::optional<std::string> clean_text;
  std::size_t char_count_raw = 0;
  std::size_t char_count_clean = 0;
};

inline constexpr std::size_t kMinChars = 100;
inline constexpr std::size_t kMaxChars = 1'000'000;

enum class RetentionReason {
  Keep,
  TooShortRaw,
  TooLongRaw,
  TooShortClean,
  TooLongClean,
  EmptyBody,
  MarketHours,
};

constexpr std::string_view to_string(RetentionReason r) {
  switch (r) {
    case RetentionReason::Keep: return "keep";
    case RetentionReason::TooShortRaw: return "too_short_raw";
    case RetentionReason::TooLongRaw: return "too_long_raw";
    case RetentionReason::TooShortClean: return "too_short";
    case RetentionReason::TooLongClean: return "too_long";
    case RetentionReason::EmptyBody: return "empty_body";
    case RetentionReason::MarketHours: return "market_hours";
  }
  return "unknown";
}

struct RetentionDecision {
  bool keep = false;
  RetentionReason reason = RetentionReason::Keep;
};

// Runs the cleaner and fills clean_text and both character counts.
inline void clean_document(PressReleaseDoc& doc, const BoilerplateRules& rules) {
  doc.char_count_raw = count_code_points(doc.raw_html);
  try {
    doc.clean_text = clean_press_release(doc.raw_html, rules);
    doc.char_count_clean = count_code_points(*doc.clean_text);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyBody) throw;
    doc.clean_text.reset();
    doc.char_count_clean = 0;
  }
}

// Length bounds on raw and cleaned text, then the after-hours window:
// kept iff local ET time is >= 16:00 or < 09:30.
inline RetentionDecision retain_document(const PressReleaseDoc& doc) {
  auto drop = [](RetentionReason r) { return RetentionDecision{false, r}; };
  if (doc.char_count_raw < kMinChars) return drop(RetentionReason::TooShortRaw);
  if (doc.char_count_raw > kMaxChars) return drop(RetentionReason::TooLongRaw);
  if (!doc.clean_text) return drop(RetentionReason::EmptyBody);
  if (doc.char_count_clean < kMinChars) return drop(RetentionReason::TooShortClean);
  if (doc.char_count_clean > kMaxChars) return drop(RetentionReason::TooLongClean);
  const auto tod = to_eastern(doc.announce_ts).local_time_of_day();
  if (tod >= kMarketOpen && tod < kMarketClose) return drop(RetentionReason::MarketHours);
  return {true, RetentionReason::Keep};
}

}  // namespace earnsig::corpus
