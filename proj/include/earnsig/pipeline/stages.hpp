#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "earnsig/backtest/portfolio.hpp"
#include "earnsig/backtest/precision.hpp"
#include "earnsig/corpus/calendar.hpp"
#include "earnsig/corpus/html_clean.hpp"
#include "earnsig/corpus/ingest.hpp"
#include "earnsig/econometrics/heatmap.hpp"
#include "earnsig/econometrics/regression.hpp"
#include "earnsig/econometrics/report.hpp"
#include "earnsig/features/features.hpp"
#include "earnsig/insight/labeler.hpp"
#include "earnsig/insight/metatopics.hpp"
#include "earnsig/insight/tokens.hpp"
#include "earnsig/pipeline/config.hpp"
#include "earnsig/pipeline/ledger.hpp"
#include "earnsig/scoring/lasso.hpp"
#include "earnsig/scoring/rolling.hpp"
#include "earnsig/textprep/tokens.hpp"
#include "earnsig/textprep/vocabulary.hpp"
#include "earnsig/topics/attention.hpp"
#include "earnsig/topics/olda.hpp"

#include "earnsig/insight/http_labeler.hpp"

namespace earnsig::pipeline {

struct StageContext {
  const PipelineConfig& cfg;
  fs::path dir;
  std::vector<fs::path> outputs;
  std::vector<std::string> warnings;

  fs::path out(const std::string& name) {
    outputs.push_back(dir / name);
    return dir / name;
  }
  void warn(std::string w) { warnings.push_back(std::move(w)); }

  // At most `limit` messages, then a count of the rest.
  void warn_all(const std::vector<std::string>& ws, std::size_t limit = 20) {
    for (std::size_t i = 0; i < ws.size() && i < limit; ++i) warn(ws[i]);
    if (ws.size() > limit) warn("... and " + std::to_string(ws.size() - limit) + " more");
  }
};

struct Stage {
  std::string name;
  std::function<std::vector<InputRef>(const PipelineConfig&)> inputs;
  std::function<nlohmann::json(const PipelineConfig&)> settings;
  std::function<void(StageContext&)> run;
};

inline const std::vector<std::string>& stage_order() {
  static const std::vector<std::string> order = {"ingest", "prep",    "topics",   "features", "score",
                                                 "regress", "insight", "backtest", "precision"};
  return order;
}

// ---- artifact paths -------------------------------------------------------------

inline InputRef artifact(const PipelineConfig& c, const std::string& rel) { return {rel, c.output_dir / rel, {}}; }
inline fs::path artifact_path(const PipelineConfig& c, const std::string& rel) { return c.output_dir / rel; }

inline std::string year_file(std::string_view stem, int year, std::string_view ext) {
  return std::string(stem) + "_" + std::to_string(year) + std::string(ext);
}

inline std::string attention_file(std::string_view kind, int year) {
  return "topics/" + year_file("attention_" + std::string(kind), year, ".csv");
}

inline fs::path embedding_file(const PipelineConfig& c, std::string_view prefix, std::string_view kind, int year) {
  return c.embedding_dir / year_file(std::string(prefix) + "_" + std::string(kind), year, ".bin");
}

// Years with a feature vector for `kind`; oLDA attention needs a prior vintage.
inline std::vector<int> feature_years(const PipelineConfig& c, std::string_view kind) {
  std::vector<int> out;
  for (int y = c.first_year + (kind == "olda" ? 1 : 0); y <= c.last_year; ++y) out.push_back(y);
  return out;
}

inline std::vector<InputRef> feature_inputs(const PipelineConfig& c) {
  std::vector<InputRef> in;
  for (auto kind : scoring::kSoftKinds) {
    for (int y : feature_years(c, kind)) {
      if (kind == "bkmx" || kind == "olda") {
        in.push_back(artifact(c, attention_file(kind, y)));
      } else {
        in.push_back(file_input(embedding_file(c, "emb", kind, y)));
      }
    }
  }
  return in;
}

inline std::size_t taxonomy_dim(const PipelineConfig& c) {
  std::ifstream in(c.taxonomy);
  if (!in) throw Error(ErrorCode::MissingUpstream, "missing taxonomy " + c.taxonomy.string());
  return nlohmann::json::parse(in).at("topics").size();
}

inline features::FeatureSchema feature_schema(const PipelineConfig& c) {
  return {static_cast<std::uint32_t>(taxonomy_dim(c)), static_cast<std::uint32_t>(c.olda.K)};
}

inline features::FeatureTable load_features(const PipelineConfig& c, std::string_view kind_name, int year) {
  const auto kind = features::parse_kind(kind_name);
  const auto dim = feature_schema(c).dim(kind);
  if (kind == features::FeatureKind::Bkmx || kind == features::FeatureKind::Olda) {
    const auto akind = kind == features::FeatureKind::Olda ? topics::AttentionKind::Olda : topics::AttentionKind::Taxonomy;
    features::FeatureTable t(kind, dim);
    for (auto& a : topics::read_attention(artifact_path(c, attention_file(kind_name, year)), akind)) t.add(a.doc_id, std::move(a.f));
    return t;
  }
  const auto path = embedding_file(c, "emb", kind_name, year);
  const auto f = features::read_embeddings(path);
  if (f.kind != kind) throw Error(ErrorCode::KindMismatch, path.string() + ": header kind differs from file name");
  if (f.dim != dim) throw Error(ErrorCode::DimMismatch, path.string() + ": dimension " + std::to_string(f.dim));
  return features::to_table(f);
}

inline std::map<int, std::vector<DocId>> docs_by_year(const std::vector<corpus::AlignedEvent>& events) {
  std::map<int, std::vector<DocId>> out;
  for (const auto& e : events) out[e.year()].push_back(e.doc_id);
  for (auto& [y, ids] : out) std::sort(ids.begin(), ids.end());
  return out;
}

inline std::map<corpus::Date, econometrics::FactorRow> read_factors(const fs::path& path) {
  const auto t = csv::read_file(path);
  const auto cd = t.column("date"), cm = t.column("mkt_rf"), cs = t.column("smb"), ch = t.column("hml"),
             cr = t.column("rf");
  std::map<corpus::Date, econometrics::FactorRow> out;
  for (const auto& r : t.rows) {
    out[corpus::parse_date(r[cd])] = {csv::parse_double(r[cm]), csv::parse_double(r[cs]), csv::parse_double(r[ch]),
                                      csv::parse_double(r[cr])};
  }
  return out;
}

inline std::unordered_map<DocId, double> soft_values(const PipelineConfig& c, std::string_view kind) {
  std::unordered_map<DocId, double> out;
  for (const auto& s : scoring::read_softs(artifact_path(c, "score/softs_" + std::string(kind) + ".csv"), kind)) {
    out.emplace(s.doc_id, s.value);
  }
  return out;
}

// ---- ingest ---------------------------------------------------------------------

inline std::vector<InputRef> ingest_inputs(const PipelineConfig& c) {
  if (c.manifest.empty() || c.events.empty() || c.calendar.empty()) {
    throw Error(ErrorCode::ConfigInvalid, "inputs.manifest, inputs.events and inputs.calendar are required");
  }
  std::vector<InputRef> in{file_input(c.manifest)};
  if (!fs::exists(c.manifest)) throw Error(ErrorCode::MissingUpstream, "missing manifest " + c.manifest.string());
  InputRef html{"html:" + c.manifest.lexically_normal().string(), c.manifest, {}};
  for (const auto& m : corpus::read_manifest(c.manifest)) html.members.push_back(m.html_path);
  in.push_back(std::move(html));
  in.push_back(file_input(c.events));
  if (!c.forecasts.empty()) in.push_back(file_input(c.forecasts));
  in.push_back(file_input(c.calendar));
  in.push_back(file_input(c.data_dir / "boilerplate_rules.txt"));
  return in;
}

inline void run_ingest(StageContext& ctx) {
  const auto& c = ctx.cfg;
  const auto calendar = corpus::TradingCalendar::load(c.calendar);
  if (calendar.empty() || corpus::year_of(calendar.dates().front()) > c.first_year ||
      corpus::year_of(calendar.dates().back()) < c.last_year) {
    throw Error(ErrorCode::ConfigInvalid, "years " + std::to_string(c.first_year) + "-" + std::to_string(c.last_year) +
                                              " are not covered by the trading calendar");
  }
  const auto rules = corpus::BoilerplateRules::load(c.data_dir / "boilerplate_rules.txt");
  auto manifest = corpus::read_manifest(c.manifest);
  std::sort(manifest.begin(), manifest.end(), [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });

  std::map<DocId, std::string> status;
  std::vector<corpus::CleanDoc> docs;
  std::vector<std::string> warnings;
  for (const auto& m : manifest) {
    std::ifstream in(m.html_path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingUpstream, "missing document " + m.html_path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    corpus::PressReleaseDoc doc{m.doc_id, m.permno, m.announce_ts, ss.str(), std::nullopt, 0, 0};
    corpus::clean_document(doc, rules);
    const auto decision = corpus::retain_document(doc);
    if (!decision.keep) {
      status[m.doc_id] = std::string(corpus::to_string(decision.reason));
      continue;
    }
    corpus::CleanDoc d{doc.doc_id, doc.permno, doc.announce_ts, {}, doc.char_count_raw, doc.char_count_clean,
                       std::move(*doc.clean_text)};
    try {
      d.tau_eff = corpus::effective_trading_day(d.announce_ts, calendar);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::CalendarOutOfRange) throw;
      status[m.doc_id] = "calendar_out_of_range";
      continue;
    }
    if (d.year() < c.first_year || d.year() > c.last_year) {
      status[m.doc_id] = "outside_years";
      continue;
    }
    docs.push_back(std::move(d));
  }

  std::vector<corpus::AnalystForecast> forecasts;
  if (!c.forecasts.empty()) forecasts = corpus::read_forecasts(c.forecasts);
  auto load = corpus::read_events(c.events, calendar, forecasts);
  warnings.insert(warnings.end(), load.warnings.begin(), load.warnings.end());
  std::erase_if(load.events, [&](const corpus::EarningsEvent& e) {
    const int y = corpus::year_of(e.tau_eff);
    return y < c.first_year || y > c.last_year;
  });
  auto join = corpus::join_documents(docs, load.events);
  warnings.insert(warnings.end(), join.warnings.begin(), join.warnings.end());
  for (auto id : join.unmatched_docs) status[id] = "unmatched";
  for (auto id : join.superseded_docs) status[id] = "superseded";
  std::set<DocId> aligned;
  for (const auto& a : join.aligned) {
    aligned.insert(a.doc_id);
    status[a.doc_id] = "aligned";
  }
  std::erase_if(docs, [&](const corpus::CleanDoc& d) { return !aligned.count(d.doc_id); });
  if (docs.empty()) throw Error(ErrorCode::EmptyBatch, "no document joined an earnings event");
  for (const auto& [y, s] : corpus::corpus_stats(docs)) {
    if (s.article_count == 0) throw Error(ErrorCode::EmptyBatch, "no documents in " + std::to_string(y));
  }
  for (int y = c.first_year; y <= c.last_year; ++y) {
    if (!corpus::corpus_stats(docs).count(y)) {
      throw Error(ErrorCode::ConfigInvalid, "no aligned documents in configured year " + std::to_string(y));
    }
  }
  if (!join.superseded_docs.empty()) {
    warnings.push_back(std::to_string(join.superseded_docs.size()) + " shorter same-event documents superseded");
  }

  corpus::write_corpus(ctx.out("corpus.jsonl"), docs);
  corpus::write_aligned_events(ctx.out("aligned_events.csv"), join.aligned);
  corpus::write_corpus_stats(ctx.out("corpus_stats.csv"), corpus::corpus_stats(docs));
  csv::Writer w(ctx.out("retention.csv"), {"doc_id", "status"});
  for (const auto& [id, s] : status) w.row({csv::format(id), s});
  ctx.warn_all(warnings);
}

// ---- prep -----------------------------------------------------------------------

inline std::vector<InputRef> prep_inputs(const PipelineConfig& c) {
  return {artifact(c, "ingest/corpus.jsonl"), file_input(c.data_dir / "stopwords_en.txt"),
          file_input(c.data_dir / "lemma_exceptions.tsv")};
}

inline void run_prep(StageContext& ctx) {
  const auto& c = ctx.cfg;
  auto docs = corpus::read_corpus(artifact_path(c, "ingest/corpus.jsonl"));
  std::sort(docs.begin(), docs.end(), [](const auto& a, const auto& b) { return a.doc_id < b.doc_id; });
  const auto pipeline = textprep::TextPipeline::load(c.data_dir);
  std::vector<textprep::TokenStream> streams;
  std::map<int, std::vector<std::size_t>> by_year;
  for (const auto& d : docs) {
    by_year[d.year()].push_back(streams.size());
    streams.push_back(pipeline.stream(d.doc_id, d.clean_text));
  }
  textprep::write_token_streams(ctx.out("tokens.tsv"), streams);

  textprep::DocumentFrequencies cumulative;
  textprep::Vocabulary vocab;
  for (int y = c.first_year; y <= c.last_year; ++y) {
    for (auto i : by_year[y]) cumulative.add(streams[i]);
    vocab = y == c.first_year ? textprep::build_vocabulary(cumulative, c.vocab, y)
                              : textprep::extend_vocabulary(vocab, cumulative, c.vocab, y);
    textprep::write_vocabulary(ctx.out(year_file("vocab", y, ".tsv")), vocab);
    std::vector<textprep::DocTermCounts> dtm;
    for (auto i : by_year[y]) dtm.push_back(textprep::count_vectorize(streams[i], vocab));
    textprep::write_dtm(ctx.out(year_file("dtm", y, ".csv")), dtm);
  }
}

// ---- topics ---------------------------------------------------------------------

inline std::vector<InputRef> topics_inputs(const PipelineConfig& c) {
  std::vector<InputRef> in{artifact(c, "prep/tokens.tsv"), artifact(c, "ingest/aligned_events.csv")};
  for (int y = c.first_year; y <= c.last_year; ++y) {
    in.push_back(artifact(c, "prep/" + year_file("vocab", y, ".tsv")));
    in.push_back(artifact(c, "prep/" + year_file("dtm", y, ".csv")));
  }
  in.push_back(file_input(c.taxonomy));
  in.push_back(file_input(c.data_dir / "stopwords_en.txt"));
  in.push_back(file_input(c.data_dir / "lemma_exceptions.tsv"));
  return in;
}

inline void run_topics(StageContext& ctx) {
  const auto& c = ctx.cfg;
  const auto events = corpus::read_aligned_events(artifact_path(c, "ingest/aligned_events.csv"));
  const auto ids = docs_by_year(events);
  const auto pipeline = textprep::TextPipeline::load(c.data_dir);
  const auto taxonomy = topics::Taxonomy::load(c.taxonomy, pipeline);
  for (const auto& p : taxonomy.ignored_phrases()) ctx.warn("taxonomy phrase '" + p + "' reduces to no tokens");
  std::unordered_map<DocId, textprep::TokenStream> streams;
  for (auto& s : textprep::read_token_streams(artifact_path(c, "prep/tokens.tsv"))) streams[s.doc_id] = std::move(s);

  for (int y = c.first_year; y <= c.last_year; ++y) {
    std::vector<topics::TopicAttention> rows;
    for (auto id : ids.at(y)) {
      auto it = streams.find(id);
      if (it == streams.end()) throw Error(ErrorCode::UnknownDoc, "doc " + std::to_string(id) + " has no token stream");
      rows.push_back(topics::taxonomy_vectorize(it->second, taxonomy));
    }
    topics::write_attention(ctx.out("attention_bkmx_" + std::to_string(y) + ".csv"), rows, taxonomy.size());
  }

  topics::ModelHistory history;
  csv::Writer summary(ctx.out("olda_summary.csv"), {"year", "docs", "vocab_size", "heldout_perplexity", "updates"});
  for (int y = c.first_year; y <= c.last_year; ++y) {
    const auto vocab = textprep::read_vocabulary(artifact_path(c, "prep/" + year_file("vocab", y, ".tsv")), y);
    const auto dtm = textprep::read_dtm(artifact_path(c, "prep/" + year_file("dtm", y, ".csv")), y, ids.at(y));
    topics::TopicModelState state;
    std::string heldout;
    if (y == c.first_year) {
      state = topics::olda_init(c.olda, vocab, derive_seed(c.seed, "olda"));
      for (int p = 0; p < c.olda_passes; ++p) topics::olda_fit_pass(state, dtm);
    } else {
      const auto& prev = history.trained_through(y - 1);
      std::vector<textprep::DocTermCounts> restricted;
      for (const auto& d : dtm) restricted.push_back(d.restricted(prev.V()));
      heldout = csv::format(topics::perplexity(prev, restricted));
      auto r = topics::vectorize_year(y, dtm, vocab, history, c.olda_passes);
      topics::write_attention(ctx.out("attention_olda_" + std::to_string(y) + ".csv"), r.attention,
                              static_cast<std::size_t>(c.olda.K));
      state = std::move(r.updated);
    }
    topics::write_state(ctx.out(year_file("olda_state", y, ".bin")), state);
    summary.row({csv::format(y), csv::format(std::uint64_t{dtm.size()}), csv::format(std::uint64_t{vocab.size()}),
                 heldout, csv::format(state.update_count)});
    history.put(y, std::move(state));
  }
}

// ---- features -------------------------------------------------------------------

inline std::vector<InputRef> features_inputs(const PipelineConfig& c) {
  auto in = feature_inputs(c);
  in.push_back(artifact(c, "ingest/aligned_events.csv"));
  in.push_back(file_input(c.taxonomy));
  return in;
}

inline void run_features(StageContext& ctx) {
  const auto& c = ctx.cfg;
  const auto events = corpus::read_aligned_events(artifact_path(c, "ingest/aligned_events.csv"));
  std::map<int, std::size_t> per_year;
  for (const auto& e : events) per_year[e.year()] += 1;
  csv::Writer cov(ctx.out("coverage.csv"), {"kind", "year", "dim", "events", "with_features", "missing", "max_sum_error"});
  for (auto kind : scoring::kSoftKinds) {
    for (int y : feature_years(c, kind)) {
      const auto t = load_features(c, kind, y);
      std::size_t have = 0;
      double max_err = 0;
      for (const auto& e : events) {
        if (e.year() != y) continue;
        const auto* v = t.find(e.doc_id);
        if (!v) continue;
        ++have;
        if (kind == "bkmx" || kind == "olda") {
          double s = 0;
          for (double x : *v) s += x;
          if (s != 0) max_err = std::max(max_err, std::abs(s - 1.0));
        }
      }
      const std::size_t n = per_year.count(y) ? per_year.at(y) : 0;
      if (have < n) ctx.warn(std::string(kind) + " " + std::to_string(y) + ": " + std::to_string(n - have) + " events without features");
      cov.row({std::string(kind), csv::format(y), csv::format(std::uint64_t{t.dim()}), csv::format(std::uint64_t{n}),
               csv::format(std::uint64_t{have}), csv::format(std::uint64_t{n - have}), csv::format(max_err)});
    }
  }
  csv::Writer cw(ctx.out("cosine.csv"), {"year", "kind_a", "kind_b", "n", "mean", "std", "min", "max"});
  for (int y = c.first_year; y <= c.last_year; ++y) {
    std::vector<features::FeatureTable> t;
    for (auto k : features::kEmbeddingKinds) t.push_back(load_features(c, features::to_string(k), y));
    for (std::size_t a = 0; a < t.size(); ++a) {
      for (std::size_t b = a + 1; b < t.size(); ++b) {
        const auto s = features::cosine_stats(t[a], t[b]);
        cw.row({csv::format(y), std::string(features::to_string(t[a].kind())), std::string(features::to_string(t[b].kind())),
                csv::format(std::uint64_t{s.n}), csv::format(s.mean), csv::format(s.std), csv::format(s.min),
                csv::format(s.max)});
      }
    }
  }
}

// ---- score ----------------------------------------------------------------------

inline std::vector<InputRef> score_inputs(const PipelineConfig& c) {
  auto in = feature_inputs(c);
  in.push_back(artifact(c, "ingest/aligned_events.csv"));
  in.push_back(artifact(c, "features/coverage.csv"));
  in.push_back(file_input(c.taxonomy));
  return in;
}

inline void run_score(StageContext& ctx) {
  const auto& c = ctx.cfg;
  const auto events = corpus::read_aligned_events(artifact_path(c, "ingest/aligned_events.csv"));
  std::map<std::string, std::vector<scoring::SoftScore>> by_kind;
  csv::Writer fits(ctx.out("fit_summary.csv"), {"kind", "train_year", "n_obs", "nonzero", "iterations", "converged",
                                                 "polished", "kkt_residual", "lambda"});
  for (auto kind : scoring::kSoftKinds) {
    std::map<int, features::DesignMatrix> by_year;
    for (int y : feature_years(c, kind)) {
      auto m = features::assemble_matrix(load_features(c, kind, y), events, y, true);
      if (!m.dropped.empty()) {
        ctx.warn(std::string(kind) + " " + std::to_string(y) + ": " + std::to_string(m.dropped.size()) +
                 " events dropped without features");
      }
      by_year.emplace(y, std::move(m));
    }
    auto r = scoring::rolling_scores(kind, by_year, c.lasso);
    for (const auto& [y, f] : r.fits) {
      scoring::write_lasso_fit(ctx.out(scoring::lasso_fit_path("", kind, y).string()), f);
      std::size_t nz = 0;
      for (Eigen::Index j = 0; j < f.w.size(); ++j) nz += f.w(j) != 0;
      fits.row({std::string(kind), csv::format(y), csv::format(std::uint64_t{f.n_obs}), csv::format(std::uint64_t{nz}),
                csv::format(f.iterations), f.converged ? "1" : "0", f.polished ? "1" : "0", csv::format(f.kkt_residual),
                csv::format(f.lambda)});
    }
    scoring::write_softs(ctx.out("softs_" + std::string(kind) + ".csv"), r.scores);
    by_kind.emplace(std::string(kind), std::move(r.scores));
  }
  const auto mean = scoring::soft_mean(by_kind);
  scoring::write_softs(ctx.out("softs_mean.csv"), mean.scores);
  csv::Writer ex(ctx.out("soft_mean_excluded.csv"), {"doc_id", "missing_kinds"});
  for (const auto& e : mean.excluded) {
    std::string kinds;
    for (const auto& k : e.missing_kinds) kinds += (kinds.empty() ? "" : ";") + k;
    ex.row({csv::format(e.doc_id), kinds});
  }
  const auto oos = scoring::oos_surprise(events);
  scoring::write_softs(ctx.out("softs_oos_surprise.csv"), oos.scores);
}

// ---- regress --------------------------------------------------------------------

inline const std::map<std::string, std::string>& soft_labels() {
  static const std::map<std::string, std::string> m = {{"bkmx", "Soft^BKMX"},   {"olda", "Soft^OLDA"},
                                                       {"bert", "Soft^BERT"},   {"mpnet", "Soft^MPNET"},
                                                       {"finbert", "Soft^FINBERT"}, {"mean", "Soft^Mean"}};
  return m;
}

inline std::vector<InputRef> regress_inputs(const PipelineConfig& c) {
  std::vector<InputRef> in{artifact(c, "ingest/aligned_events.csv")};
  for (auto k : scoring::kSoftKinds) in.push_back(artifact(c, "score/softs_" + std::string(k) + ".csv"));
  in.push_back(artifact(c, "score/softs_mean.csv"));
  in.push_back(artifact(c, "score/softs_oos_surprise.csv"));
  return in;
}

// Events carrying every soft score and the out-of-sample surprise, in
// (tau_eff, permno) order; surprise winsorized over this sample.
struct RegressionSample {
  std::vector<const corpus::AlignedEvent*> rows;
  std::map<std::string, Eigen::VectorXd> var;
  std::vector<std::int64_t> firm, date;
  econometrics::WinsorBounds bounds;

  Eigen::MatrixXd design(const std::vector<std::string>& names) const {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(names.size()));
    for (std::size_t j = 0; j < names.size(); ++j) X.col(static_cast<Eigen::Index>(j)) = var.at(names[j]);
    return X;
  }
};

inline RegressionSample regression_sample(const PipelineConfig& c, const std::vector<corpus::AlignedEvent>& events) {
  std::map<std::string, std::unordered_map<DocId, double>> softs;
  for (auto k : scoring::kSoftKinds) softs[soft_labels().at(std::string(k))] = soft_values(c, k);
  softs["Soft^Mean"] = soft_values(c, "mean");
  softs["OOS-Surprise"] = soft_values(c, scoring::kOosSurpriseKind);
  RegressionSample s;
  for (const auto& e : events) {
    bool all = true;
    for (const auto& [name, m] : softs) all = all && m.count(e.doc_id);
    if (all) s.rows.push_back(&e);
  }
  std::sort(s.rows.begin(), s.rows.end(), [](const auto* a, const auto* b) {
    if (a->event.tau_eff != b->event.tau_eff) return a->event.tau_eff < b->event.tau_eff;
    return a->event.permno < b->event.permno;
  });
  if (s.rows.size() < 10) throw Error(ErrorCode::DegenerateYear, "regression sample has fewer than 10 events");
  const auto n = static_cast<Eigen::Index>(s.rows.size());
  std::vector<double> surprise;
  for (const auto* e : s.rows) surprise.push_back(e->event.surprise);
  s.bounds = econometrics::winsor_bounds(surprise, c.winsor_lo, c.winsor_hi);
  const auto sw = econometrics::clamp_to(surprise, s.bounds);
  s.var["Surprise"] = Eigen::Map<const Eigen::VectorXd>(sw.data(), n);
  s.var["Ret"].resize(n);
  s.var["Ret(t-1)"].resize(n);
  for (auto& [name, m] : softs) s.var[name].resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto* e = s.rows[static_cast<std::size_t>(i)];
    s.var["Ret"](i) = e->event.ret_day;
    s.var["Ret(t-1)"](i) = e->event.ret_prev_day;
    for (auto& [name, m] : softs) s.var[name](i) = m.at(e->doc_id);
    s.firm.push_back(e->event.permno);
    s.date.push_back(e->event.tau_eff.time_since_epoch().count());
  }
  return s;
}

struct ColumnSpec {
  std::string dependent;
  std::vector<std::string> regressors;
};

inline econometrics::RegressionTable regression_table(const RegressionSample& s, std::string title,
                                                      const std::vector<ColumnSpec>& cols) {
  econometrics::RegressionTable t{std::move(title), {}};
  for (std::size_t i = 0; i < cols.size(); ++i) {
    t.columns.push_back(econometrics::clustered_column(cols[i].dependent,
                                                       s.var.at(cols[i].dependent), s.design(cols[i].regressors),
                                                       cols[i].regressors, s.firm, s.date));
  }
  return t;
}

inline void run_regress(StageContext& ctx) {
  const auto& c = ctx.cfg;
  const auto events = corpus::read_aligned_events(artifact_path(c, "ingest/aligned_events.csv"));
  const auto s = regression_sample(c, events);

  std::vector<ColumnSpec> single{{"Ret", {"Surprise"}}};
  for (auto k : scoring::kSoftKinds) single.push_back({"Ret", {"Surprise", soft_labels().at(std::string(k))}});
  std::vector<ColumnSpec> combined;
  for (auto k : {"bkmx", "olda", "bert", "mpnet"}) combined.push_back({"Ret", {"Surprise", soft_labels().at(k), "Soft^FINBERT"}});
  combined.push_back({"Ret", {"Surprise", "Soft^BKMX", "Soft^OLDA", "Soft^BERT", "Soft^MPNET", "Soft^FINBERT"}});
  const std::vector<ColumnSpec> oos{{"Ret", {"Surprise", "Soft^Mean"}},
                                    {"Ret", {"OOS-Surprise", "Soft^FINBERT"}},
                                    {"Ret", {"OOS-Surprise", "Soft^Mean"}},
                                    {"Ret(t-1)", {"Surprise", "Soft^FINBERT"}}};

  const std::vector<std::pair<std::string, econometrics::RegressionTable>> tables = {
      {"reg_single", regression_table(s, "Announcement-day return on surprise and one soft variable", single)},
      {"reg_combined", regression_table(s, "Announcement-day return on combined soft variables", combined)},
      {"reg_oos", regression_table(s, "Out-of-sample surprise and prior-day return", oos)}};
  for (const auto& [stem, t] : tables) {
    econometrics::write_table_csv(ctx.out(stem + ".csv"), t);
    econometrics::write_table_text(ctx.out(stem + ".txt"), t);
    for (const auto& col : t.columns) {
      if (col.reg.variance_clamped) ctx.warn(stem + " " + col.label + ": two-way variance clamped");
    }
  }

  csv::Writer wb(ctx.out("winsor_bounds.csv"), {"variable", "lo_pct", "hi_pct", "lo_value", "hi_value", "n"});
  wb.row({"Surprise", csv::format(c.winsor_lo), csv::format(c.winsor_hi), csv::format(s.bounds.lo),
          csv::format(s.bounds.hi), csv::format(std::uint64_t{s.rows.size()})});

  std::vector<double> soft, surprise, ret;
  std::vector<int> quarter;
  for (const auto* e : s.rows) {
    surprise.push_back(e->event.surprise);
    ret.push_back(e->event.ret_day);
    quarter.push_back(econometrics::quarter_label(e->event.tau_eff));
  }
  const auto& sm = s.var.at("Soft^Mean");
  soft.assign(sm.data(), sm.data() + sm.size());
  const auto grid = econometrics::quintile_heatmap(soft, surprise, ret, quarter);
  econometrics::write_heatmap(ctx.out("heatmap.csv"), grid);
  for (int q : grid.skipped_quarters) ctx.warn("heatmap: quarter " + std::to_string(q) + " has fewer than 5 events");
}

// ---- insight --------------------------------------------------------------------

inline std::vector<int> fit_years(const PipelineConfig& c, std::string_view kind) {
  auto y = feature_years(c, kind);
  y.pop_back();
  return y;
}

inline std::vector<std::pair<std::string, int>> token_files(const PipelineConfig& c) {
  std::vector<std::pair<std::string, int>> out;
  for (auto k : features::kEmbeddingKinds) {
    for (int y = c.first_year + 1; y <= c.last_year; ++y) {
      if (fs::exists(embedding_file(c, "tok", features::to_string(k), y))) out.emplace_back(features::to_string(k), y);
    }
  }
  return out;
}

inline std::vector<InputRef> insight_inputs(const PipelineConfig& c) {
  std::vector<InputRef> in;
  for (auto kind : {"bkmx", "olda"}) {
    for (int y : feature_years(c, kind)) in.push_back(artifact(c, attention_file(kind, y)));
  }
  for (auto kind : scoring::kSoftKinds) {
    for (int y : fit_years(c, kind)) in.push_back(artifact(c, "score/" + scoring::lasso_fit_path("", kind, y).string()));
  }
  in.push_back(artifact(c, "topics/" + year_file("olda_state", c.last_year, ".bin")));
  in.push_back(artifact(c, "prep/" + year_file("vocab", c.last_year, ".tsv")));
  in.push_back(file_input(c.taxonomy));
  in.push_back(file_input(c.data_dir / "stopwords_en.txt"));
  in.push_back(file_input(c.data_dir / "lemma_exceptions.tsv"));
  if (c.labeler.kind == "stub" || c.labeler.fallback_to_stub) {
    in.push_back(file_input(c.labeler.table));
    in.push_back(file_input(c.labeler.topic_table));
  }
  for (const auto& [kind, p] : c.metatopic_maps) in.push_back(file_input(p));
  for (const auto& [kind, y] : token_files(c)) in.push_back(file_input(embedding_file(c, "tok", kind, y)));
  return in;
}

// Labeler for one item family: the configured endpoint or stub, with an
// optional stub fallback reading `table`.
struct LabelerSet {
  std::unique_ptr<insight::Labeler> primary, fallback;

  LabelerSet(const LabelerConfig& l, const fs::path& table) {
    if (l.kind == "http") {
      primary = std::make_unique<insight::HttpLabeler>(l.url, l.path, std::chrono::seconds(l.timeout_seconds));
      if (l.fallback_to_stub) fallback = std::make_unique<insight::StubLabeler>(insight::StubLabeler::load(table));
    } else {
      primary = std::make_unique<insight::StubLabeler>(insight::StubLabeler::load(table));
    }
  }
};

inline std::vector<std::string> metatopic_names(const insight::MetatopicMap& m) {
  std::set<std::string> names(m.topic_metatopic.begin(), m.topic_metatopic.end());
  names.erase(std::string(insight::kOtherCategory));
  return {names.begin(), names.end()};
}

inline void run_insight(StageContext& ctx) {
  const auto& c = ctx.cfg;
  const LabelerSet token_labeler(c.labeler, c.labeler.table), topic_labeler(c.labeler, c.labeler.topic_table);
  insight::LabelCache cache(c.labeler.cache_dir);
  auto label = [&](const LabelerSet& l, const std::vector<std::string>& items, const std::vector<std::string>& categories,
                   const std::string& what) {
    auto r = insight::label_items(items, categories, *l.primary, &cache, l.fallback.get());
    if (r.fallbacks) ctx.warn(what + ": " + std::to_string(r.fallbacks) + " chunks answered by the stub fallback");
    return r.labels;
  };
  const auto& categories = insight::default_categories();

  // metatopic maps
  std::map<std::string, insight::MetatopicMap> maps;
  for (const auto& [kind, p] : c.metatopic_maps) maps[kind] = insight::read_metatopic_map(p);
  if (!maps.count("bkmx")) {
    const auto taxonomy = topics::Taxonomy::load(c.taxonomy, textprep::TextPipeline::load(c.data_dir));
    insight::MetatopicMap m{"bkmx", {}};
    for (const auto& t : taxonomy.topics()) m.topic_metatopic.push_back(t.metatopic);
    maps["bkmx"] = m;
  }
  {
    const auto vocab = textprep::read_vocabulary(artifact_path(c, "prep/" + year_file("vocab", c.last_year, ".tsv")), c.last_year);
    const auto state = topics::read_state(artifact_path(c, "topics/" + year_file("olda_state", c.last_year, ".bin")), c.olda,
                                          c.last_year);
    std::vector<std::string> items;
    for (int k = 0; k < state.K(); ++k) {
      std::string s;
      for (const auto& t : topics::top_tokens(state, vocab, k, c.top_tokens)) s += (s.empty() ? "" : " ") + t;
      items.push_back(s);
    }
    if (!maps.count("olda")) {
      const auto labels = label(topic_labeler, items, metatopic_names(maps.at("bkmx")), "olda topics");
      insight::MetatopicMap m{"olda", {}};
      for (const auto& it : items) m.topic_metatopic.push_back(labels.at(it));
      maps["olda"] = m;
    }
    csv::Writer w(ctx.out("olda_topics.csv"), {"topic", "top_tokens", "metatopic"});
    for (std::size_t k = 0; k < items.size(); ++k) {
      w.row({csv::format(std::uint64_t{k}), items[k], maps.at("olda").topic_metatopic.at(k)});
    }
  }
  std::vector<insight::MetatopicReport> reports;
  for (auto kind : {"bkmx", "olda"}) {
    insight::write_metatopic_map(ctx.out("metatopics_" + std::string(kind) + ".json"), maps.at(kind));
    std::map<int, Eigen::MatrixXd> attention;
    for (int y : feature_years(c, kind)) {
      const auto t = load_features(c, kind, y);
      const auto ids = t.ids();
      Eigen::MatrixXd F(static_cast<Eigen::Index>(ids.size()), t.dim());
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto& v = *t.find(ids[i]);
        for (std::uint32_t j = 0; j < t.dim(); ++j) F(static_cast<Eigen::Index>(i), j) = v[j];
      }
      attention.emplace(y, std::move(F));
    }
    std::map<int, scoring::LassoFit> fits;
    for (int y : fit_years(c, kind)) {
      fits.emplace(y, scoring::read_lasso_fit(artifact_path(c, "score/" + scoring::lasso_fit_path("", kind, y).string())));
    }
    reports.push_back(insight::metatopic_report(attention, fits, maps.at(kind)));
    for (int y : reports.back().degenerate_years) ctx.warn(std::string(kind) + " " + std::to_string(y) + ": zero explained variance");
  }
  insight::write_metatopic_report(ctx.out("metatopic_report.csv"), reports);

  // token importance
  std::map<std::string, std::vector<insight::TokenImportance>> by_model;
  csv::Writer ti(ctx.out("token_importance.csv"), {"model", "year", "doc_id", "sign", "rank", "token", "importance"});
  for (const auto& [kind, y] : token_files(c)) {
    const auto fit = scoring::read_lasso_fit(artifact_path(c, "score/" + scoring::lasso_fit_path("", kind, y - 1).string()));
    const auto file = features::read_token_matrices(embedding_file(c, "tok", kind, y));
    for (const auto& m : file.matrices) {
      auto imp = insight::token_importance(m, fit);
      for (const auto& [sign, idx] : {std::pair{"pos", &imp.top_pos}, std::pair{"neg", &imp.top_neg}}) {
        for (std::size_t r = 0; r < idx->size(); ++r) {
          ti.row({kind, csv::format(y), csv::format(m.doc_id), sign, csv::format(std::uint64_t{r + 1}),
                  imp.tokens[(*idx)[r]], csv::format(imp.is[(*idx)[r]])});
        }
      }
      by_model[kind].push_back(std::move(imp));
    }
  }
  std::vector<insight::TokenImportance> all;
  for (const auto& [m, docs] : by_model) all.insert(all.end(), docs.begin(), docs.end());
  const auto vocab = insight::top_token_vocabulary(all);
  const auto labels = label(token_labeler, vocab, categories, "tokens");
  csv::Writer tl(ctx.out("token_labels.csv"), {"token", "category"});
  for (const auto& t : vocab) tl.row({t, labels.at(t)});
  std::vector<insight::ClassificationRow> rows;
  for (auto k : features::kEmbeddingKinds) {
    const std::string model(features::to_string(k));
    auto it = by_model.find(model);
    if (it == by_model.end()) continue;
    auto r = insight::token_classification(model, it->second, labels, categories);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  insight::write_token_classification(ctx.out("token_classification.csv"), rows);
  if (by_model.empty()) ctx.warn("no token matrices found; token classification is empty");
}

// ---- backtest -------------------------------------------------------------------

inline std::vector<InputRef> backtest_inputs(const PipelineConfig& c) {
  if (c.quotes.empty() || c.factors.empty()) throw Error(ErrorCode::ConfigInvalid, "inputs.quotes and inputs.factors are required");
  return {artifact(c, "ingest/aligned_events.csv"), artifact(c, "score/softs_mean.csv"), file_input(c.quotes),
          file_input(c.factors)};
}

inline void run_backtest(StageContext& ctx) {
  const auto& c = ctx.cfg;
  const auto events = corpus::read_aligned_events(artifact_path(c, "ingest/aligned_events.csv"));
  const auto mean = soft_values(c, "mean");
  std::vector<backtest::SignalRecord> signals;
  for (const auto& e : events) {
    auto it = mean.find(e.doc_id);
    if (it == mean.end()) continue;
    signals.push_back({e.event.permno, e.event.tau_eff, e.event.surprise, it->second, e.event.mktcap_tm1});
  }
  const auto quotes = backtest::read_quotes(c.quotes);
  const auto factors = read_factors(c.factors);
  std::vector<backtest::BacktestResult> results;
  for (auto rb : {backtest::RankBy::Surprise, backtest::RankBy::Soft}) results.push_back(backtest::run_backtest(signals, quotes, rb));
  backtest::write_ls_series(ctx.out("ls_series.csv"), results);

  csv::Writer days(ctx.out("backtest_days.csv"),
                   {"rank_by", "date", "status", "n_long", "n_short", "spread_excluded", "unquoted"});
  econometrics::RegressionTable alpha{
      "Long-short alpha", {},
      "Newey-West (lag " + std::to_string(c.hac_lag) + ") standard errors in parentheses."};
  for (const auto& r : results) {
    const std::string rb(backtest::to_string(r.rank_by));
    for (const auto& d : r.days) {
      days.row({rb, corpus::format_date(d.date), "traded", csv::format(std::uint64_t{d.longs.size()}),
                csv::format(std::uint64_t{d.shorts.size()}), csv::format(std::uint64_t{d.spread_excluded}),
                csv::format(std::uint64_t{d.unquoted})});
    }
    for (const auto& d : r.skipped) days.row({rb, corpus::format_date(d.date), "skipped", "0", "0", "", ""});
    for (int strategy : {1, 2}) {
      for (bool wf : {false, true}) {
        const auto series = backtest::ls_series(r, strategy);
        const std::string label = rb + " LS" + std::to_string(strategy) + (wf ? " factors" : " mean");
        try {
          alpha.columns.push_back({label, econometrics::alpha_regression(series, factors, wf, c.hac_lag), std::nullopt});
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NoOverlapDates) throw;
          ctx.warn(label + ": " + e.what());
        }
      }
    }
  }
  econometrics::write_table_csv(ctx.out("alpha.csv"), alpha);
  econometrics::write_table_text(ctx.out("alpha.txt"), alpha);
}

// ---- precision ------------------------------------------------------------------

inline std::vector<InputRef> precision_inputs(const PipelineConfig& c) {
  return {artifact(c, "ingest/aligned_events.csv"), artifact(c, "score/softs_mean.csv")};
}

inline void run_precision(StageContext& ctx) {
  const auto& c = ctx.cfg;
  const auto events = corpus::read_aligned_events(artifact_path(c, "ingest/aligned_events.csv"));
  const auto mean = soft_values(c, "mean");
  std::vector<backtest::DayEvent> day_events;
  for (const auto& e : events) {
    auto it = mean.find(e.doc_id);
    if (it == mean.end()) continue;
    day_events.push_back({e.event.permno, e.event.tau_eff, e.event.surprise, it->second, e.event.ret_day});
  }
  std::vector<backtest::PrecisionResult> results;
  csv::Writer tests(ctx.out("precision_tests.csv"), {"direction", "rank_by", "k", "agreement", "single", "mean_diff", "t",
                                                     "p_value", "n_days", "truncated_days"});
  for (auto dir : {backtest::PrecisionDirection::TopPositive, backtest::PrecisionDirection::TopNegative}) {
    for (auto rb : {backtest::RankBy::Surprise, backtest::RankBy::Soft}) {
      auto single = backtest::precision_at_k(day_events, rb, dir, false, c.precision);
      auto agree = backtest::precision_at_k(day_events, rb, dir, true, c.precision);
      if (agree.truncated_days) {
        ctx.warn(std::string(backtest::to_string(dir)) + "/" + std::string(backtest::to_string(rb)) + ": " +
                 std::to_string(agree.truncated_days) + " days with fewer agreeing stocks than the largest k");
      }
      for (std::size_t i = 0; i < c.precision.ks.size() && agree.days.size() >= 2; ++i) {
        const auto k = c.precision.ks[i];
        const auto t = backtest::paired_one_sided_t(agree.day_values(k), single.day_values(k));
        tests.row({std::string(backtest::to_string(dir)), std::string(backtest::to_string(rb)), csv::format(std::uint64_t{k}),
                   csv::format(agree.at(k)), csv::format(single.at(k)), csv::format(t.mean_diff), csv::format(t.t),
                   csv::format(t.p_value), csv::format(std::uint64_t{t.n}), csv::format(std::uint64_t{agree.truncated_days})});
      }
      results.push_back(std::move(single));
      results.push_back(std::move(agree));
    }
  }
  if (results.front().days.empty()) ctx.warn("no day has enough announcements for precision");
  backtest::write_precision(ctx.out("precision.csv"), results);
}

// ---- registry -------------------------------------------------------------------

inline std::vector<Stage> build_stages() {
  auto years = [](const PipelineConfig& c) { return nlohmann::json{{"first", c.first_year}, {"last", c.last_year}}; };
  return {
      {"ingest", ingest_inputs, years, run_ingest},
      {"prep", prep_inputs,
       [=](const PipelineConfig& c) {
         return nlohmann::json{{"years", years(c)},
                               {"min_df", c.vocab.min_df},
                               {"max_df_ratio", c.vocab.max_df_ratio},
                               {"max_size", c.vocab.max_size}};
       },
       run_prep},
      {"topics", topics_inputs,
       [=](const PipelineConfig& c) {
         const auto& o = c.olda;
         return nlohmann::json{{"years", years(c)}, {"seed", c.seed},   {"K", o.K},
                               {"alpha", o.alpha},  {"eta", o.eta},     {"tau0", o.tau0},
                               {"kappa", o.kappa},  {"mb", o.minibatch_size}, {"tol", o.e_step_tol},
                               {"iters", o.e_step_max_iters}, {"passes", c.olda_passes}};
       },
       run_topics},
      {"features", features_inputs, [=](const PipelineConfig& c) { return nlohmann::json{{"years", years(c)}, {"K", c.olda.K}}; },
       run_features},
      {"score", score_inputs,
       [=](const PipelineConfig& c) {
         const auto& l = c.lasso;
         return nlohmann::json{{"years", years(c)}, {"K", c.olda.K},           {"lambda", l.lambda},
                               {"tol", l.tol},      {"max_iters", l.max_iters}, {"standardize", l.standardize},
                               {"intercept", l.fit_intercept}};
       },
       run_score},
      {"regress", regress_inputs,
       [=](const PipelineConfig& c) { return nlohmann::json{{"years", years(c)}, {"lo", c.winsor_lo}, {"hi", c.winsor_hi}}; },
       run_regress},
      {"insight", insight_inputs,
       [=](const PipelineConfig& c) {
         const auto& l = c.labeler;
         return nlohmann::json{{"years", years(c)},  {"K", c.olda.K},         {"top_tokens", c.top_tokens},
                               {"labeler", l.kind},  {"url", l.url + l.path}, {"fallback", l.fallback_to_stub},
                               {"categories", insight::default_categories()}};
       },
       run_insight},
      {"backtest", backtest_inputs,
       [=](const PipelineConfig& c) { return nlohmann::json{{"years", years(c)}, {"hac_lag", c.hac_lag}}; }, run_backtest},
      {"precision", precision_inputs,
       [=](const PipelineConfig& c) {
         return nlohmann::json{{"years", years(c)},
                               {"ks", c.precision.ks},
                               {"min_announcements", c.precision.min_announcements},
                               {"truth", c.precision.truth == backtest::TruthUniverse::Evaluated ? "evaluated" : "all"}};
       },
       run_precision},
  };
}

}  // namespace earnsig::pipeline
