#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace earnsig {

enum class ErrorCode {
  // corpus
  EmptyBody,
  CalendarOutOfRange,
  NoForecast,
  NonPositivePrice,
  // textprep / topics
  EmptyVocabulary,
  EmptyBatch,
  MissingVintage,
  // features
  BadMagic,
  DimMismatch,
  UnknownDoc,
  NoOverlap,
  MissingFeature,
  // scoring / econometrics
  NotConverged,
  DegenerateYear,
  Singular,
  DimensionTooLarge,
  NoOverlapDates,
  // insight
  KindMismatch,
  DegenerateDenominator,
  LabelerUnavailable,
  // backtest
  EmptyDay,
  MissingQuote,
  // pipeline
  ConfigInvalid,
  MissingUpstream,
  ParseError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyBody: return "EmptyBody";
    case ErrorCode::CalendarOutOfRange: return "CalendarOutOfRange";
    case ErrorCode::NoForecast: return "NoForecast";
    case ErrorCode::NonPositivePrice: return "NonPositivePrice";
    case ErrorCode::EmptyVocabulary: return "EmptyVocabulary";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::MissingVintage: return "MissingVintage";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::UnknownDoc: return "UnknownDoc";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::MissingFeature: return "MissingFeature";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::DegenerateYear: return "DegenerateYear";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::DimensionTooLarge: return "DimensionTooLarge";
    case ErrorCode::NoOverlapDates: return "NoOverlapDates";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::LabelerUnavailable: return "LabelerUnavailable";
    case ErrorCode::EmptyDay: return "EmptyDay";
    case ErrorCode::MissingQuote: return "MissingQuote";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::MissingUpstream: return "MissingUpstream";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Process exit code for the CLI: 2 config, 3 data, 4 numerical.
constexpr int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigInvalid:
      return 2;
    case ErrorCode::NotConverged:
    case ErrorCode::DegenerateYear:
    case ErrorCode::Singular:
    case ErrorCode::DimensionTooLarge:
    case ErrorCode::DegenerateDenominator:
      return 4;
    default:
      return 3;
  }
}

}  // namespace earnsig
