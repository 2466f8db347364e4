#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "earnsig/backtest/precision.hpp"
#include "earnsig/common/error.hpp"
#include "earnsig/common/hash.hpp"
#include "earnsig/scoring/lasso.hpp"
#include "earnsig/textprep/vocabulary.hpp"
#include "earnsig/topics/olda.hpp"

#ifndef EARNSIG_DATA_DIR
#define EARNSIG_DATA_DIR "data"
#endif

namespace earnsig::pipeline {

namespace fs = std::filesystem;

// Independent 64-bit stream seed for a named stochastic component.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  const auto hex = sha256_hex(std::to_string(seed) + ":" + std::string(stream));
  return std::stoull(hex.substr(0, 16), nullptr, 16);
}

struct SynthConfig {
  fs::path out_dir;
  int first_year = 2010;
  int years = 8;
  int firms = 500;
  int announce_days_per_quarter = 20;
  double b0 = 0.8;
  double b1 = 0.6;
  double surprise_sd = 0.02;
  double soft_sd = 0.025;
  double noise_sd = 0.02;
  double topic_alpha = 0.3;
  int doc_words_min = 80;
  int doc_words_max = 140;
  double topic_word_share = 0.6;
  int latent_factors = 10;
  std::map<std::string, double> embedding_noise{{"bert", 1.0}, {"mpnet", 1.5}, {"finbert", 0.7}};
  int token_docs_per_year = 8;
  int token_rows = 48;
  double spread_median = 0.004;
  double wide_spread_share = 0.02;
  double market_hours_share = 0.01;
  double consensus_missing_share = 0.2;
  double open_capture = 0.8;
};

struct LabelerConfig {
  std::string kind = "stub";  // stub | http
  fs::path table;             // stub keyword table for tokens
  fs::path topic_table;       // stub keyword table for oLDA topics
  std::string url;
  std::string path = "/label";
  int timeout_seconds = 30;
  bool fallback_to_stub = true;
  fs::path cache_dir;
};

struct PipelineConfig {
  fs::path config_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  fs::path output_dir;
  fs::path data_dir;

  // inputs
  fs::path manifest, events, forecasts, calendar, quotes, factors, taxonomy, embedding_dir;
  std::map<std::string, fs::path> metatopic_maps;

  int first_year = 0;
  int last_year = 0;

  textprep::VocabOptions vocab;
  topics::OldaConfig olda;
  int olda_passes = 1;
  scoring::LassoOptions lasso;
  double winsor_lo = 1.0;
  double winsor_hi = 99.0;
  LabelerConfig labeler;
  std::size_t top_tokens = 10;  // per oLDA topic, for labeling
  backtest::PrecisionOptions precision;
  int hac_lag = 5;

  SynthConfig synth;
  nlohmann::json raw;

  std::vector<int> years() const {
    std::vector<int> out;
    for (int y = first_year; y <= last_year; ++y) out.push_back(y);
    return out;
  }

  void validate() const {
    auto bad = [](const std::string& m) { throw Error(ErrorCode::ConfigInvalid, m); };
    if (!seed_set) bad("config must set an explicit seed");
    if (output_dir.empty()) bad("output_dir is required");
    if (first_year <= 0 || last_year < first_year) bad("years: need first <= last");
    if (last_year - first_year < 2) bad("years: need at least three years for rolling scores");
    olda.validate();
    if (olda_passes < 1) bad("olda.passes must be >= 1");
    if (!(lasso.lambda >= 0) || !(lasso.tol > 0) || lasso.max_iters < 1) bad("lasso: invalid options");
    if (!(winsor_lo >= 0 && winsor_lo < winsor_hi && winsor_hi <= 100)) bad("winsor: need 0 <= lo < hi <= 100");
    if (labeler.kind != "stub" && labeler.kind != "http") bad("labeler.kind must be stub or http");
    if (labeler.kind == "http" && labeler.url.empty()) bad("labeler.url is required for the http labeler");
    if (precision.ks.empty()) bad("precision.ks must not be empty");
    for (auto k : precision.ks) {
      if (k == 0) bad("precision.ks entries must be positive");
    }
    if (hac_lag < 0) bad("hac_lag must be >= 0");
  }
};

namespace detail {

template <class T>
void get_to(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      j.at(key).get_to(out);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ConfigInvalid, std::string("config key '") + key + "': " + e.what());
    }
  }
}

inline fs::path resolve(const fs::path& base, const nlohmann::json& j, const char* key, const fs::path& fallback = {}) {
  if (!j.contains(key)) return fallback;
  fs::path p(j.at(key).get<std::string>());
  return (p.is_relative() ? base / p : p).lexically_normal();
}

}  // namespace detail

inline PipelineConfig config_from_json(const nlohmann::json& j, const fs::path& config_dir) {
  using detail::get_to;
  using detail::resolve;
  PipelineConfig c;
  c.raw = j;
  c.config_dir = config_dir;
  if (j.contains("seed")) {
    get_to(j, "seed", c.seed);
    c.seed_set = true;
  }
  c.output_dir = resolve(config_dir, j, "output_dir");
  c.data_dir = resolve(config_dir, j, "data_dir", fs::path(EARNSIG_DATA_DIR));

  const auto in = j.value("inputs", nlohmann::json::object());
  c.manifest = resolve(config_dir, in, "manifest");
  c.events = resolve(config_dir, in, "events");
  c.forecasts = resolve(config_dir, in, "forecasts");
  c.calendar = resolve(config_dir, in, "calendar");
  c.quotes = resolve(config_dir, in, "quotes");
  c.factors = resolve(config_dir, in, "factors");
  c.taxonomy = resolve(config_dir, in, "taxonomy", c.data_dir / "taxonomy_mini.json");
  c.embedding_dir = resolve(config_dir, in, "embedding_dir");
  if (in.contains("metatopic_maps")) {
    for (const auto& [kind, p] : in.at("metatopic_maps").items()) {
      fs::path path(p.get<std::string>());
      c.metatopic_maps[kind] = path.is_relative() ? config_dir / path : path;
    }
  }

  const auto years = j.value("years", nlohmann::json::object());
  get_to(years, "first", c.first_year);
  get_to(years, "last", c.last_year);

  const auto v = j.value("vocab", nlohmann::json::object());
  get_to(v, "min_df", c.vocab.min_df);
  get_to(v, "max_df_ratio", c.vocab.max_df_ratio);
  get_to(v, "max_size", c.vocab.max_size);

  const auto o = j.value("olda", nlohmann::json::object());
  get_to(o, "K", c.olda.K);
  get_to(o, "alpha", c.olda.alpha);
  get_to(o, "eta", c.olda.eta);
  get_to(o, "tau0", c.olda.tau0);
  get_to(o, "kappa", c.olda.kappa);
  get_to(o, "minibatch_size", c.olda.minibatch_size);
  get_to(o, "e_step_tol", c.olda.e_step_tol);
  get_to(o, "e_step_max_iters", c.olda.e_step_max_iters);
  get_to(o, "passes", c.olda_passes);
  get_to(o, "top_tokens", c.top_tokens);

  const auto l = j.value("lasso", nlohmann::json::object());
  get_to(l, "lambda", c.lasso.lambda);
  get_to(l, "tol", c.lasso.tol);
  get_to(l, "max_iters", c.lasso.max_iters);
  get_to(l, "standardize", c.lasso.standardize);
  get_to(l, "fit_intercept", c.lasso.fit_intercept);

  const auto w = j.value("winsor", nlohmann::json::object());
  get_to(w, "lo", c.winsor_lo);
  get_to(w, "hi", c.winsor_hi);

  const auto lb = j.value("labeler", nlohmann::json::object());
  get_to(lb, "kind", c.labeler.kind);
  c.labeler.table = resolve(config_dir, lb, "table", c.data_dir / "stub_labels.tsv");
  c.labeler.topic_table = resolve(config_dir, lb, "topic_table", c.data_dir / "stub_topic_labels.tsv");
  get_to(lb, "url", c.labeler.url);
  get_to(lb, "path", c.labeler.path);
  get_to(lb, "timeout_seconds", c.labeler.timeout_seconds);
  get_to(lb, "fallback_to_stub", c.labeler.fallback_to_stub);
  c.labeler.cache_dir = resolve(config_dir, lb, "cache_dir", c.output_dir / "label_cache");

  const auto p = j.value("precision", nlohmann::json::object());
  get_to(p, "ks", c.precision.ks);
  get_to(p, "min_announcements", c.precision.min_announcements);
  if (p.contains("truth")) {
    const auto t = p.at("truth").get<std::string>();
    if (t == "evaluated") {
      c.precision.truth = backtest::TruthUniverse::Evaluated;
    } else if (t == "all") {
      c.precision.truth = backtest::TruthUniverse::AllAnnouncers;
    } else {
      throw Error(ErrorCode::ConfigInvalid, "precision.truth must be evaluated or all");
    }
  }
  get_to(j.value("backtest", nlohmann::json::object()), "hac_lag", c.hac_lag);

  const auto s = j.value("synth", nlohmann::json::object());
  auto& sc = c.synth;
  sc.out_dir = resolve(config_dir, s, "out_dir", config_dir / "synthetic");
  get_to(s, "first_year", sc.first_year);
  get_to(s, "years", sc.years);
  get_to(s, "firms", sc.firms);
  get_to(s, "announce_days_per_quarter", sc.announce_days_per_quarter);
  get_to(s, "b0", sc.b0);
  get_to(s, "b1", sc.b1);
  get_to(s, "surprise_sd", sc.surprise_sd);
  get_to(s, "soft_sd", sc.soft_sd);
  get_to(s, "noise_sd", sc.noise_sd);
  get_to(s, "topic_alpha", sc.topic_alpha);
  get_to(s, "doc_words_min", sc.doc_words_min);
  get_to(s, "doc_words_max", sc.doc_words_max);
  get_to(s, "topic_word_share", sc.topic_word_share);
  get_to(s, "latent_factors", sc.latent_factors);
  get_to(s, "embedding_noise", sc.embedding_noise);
  get_to(s, "token_docs_per_year", sc.token_docs_per_year);
  get_to(s, "token_rows", sc.token_rows);
  get_to(s, "spread_median", sc.spread_median);
  get_to(s, "wide_spread_share", sc.wide_spread_share);
  get_to(s, "market_hours_share", sc.market_hours_share);
  get_to(s, "consensus_missing_share", sc.consensus_missing_share);
  get_to(s, "open_capture", sc.open_capture);
  return c;
}

inline PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigInvalid, path.string() + ": " + e.what());
  }
  return config_from_json(j, fs::absolute(path).parent_path());
}

}  // namespace earnsig::pipeline
