#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <random>
#include <string>
#include <vector>

#include "earnsig/backtest/portfolio.hpp"
#include "earnsig/common/csv.hpp"
#include "earnsig/corpus/calendar.hpp"
#include "earnsig/features/features.hpp"
#include "earnsig/pipeline/config.hpp"

namespace earnsig::pipeline {

struct PlantedTopic {
  std::string name;
  std::string metatopic;
  int sign = 0;  // contribution to the soft latent
  std::vector<std::string> words;
};

inline const std::vector<PlantedTopic>& planted_topics() {
  static const std::vector<PlantedTopic> topics = {
      {"growth", "Performance", +1,
       {"record", "strong", "growth", "exceeded", "robust", "momentum", "expansion", "accelerate", "outperform",
        "milestone", "gain", "improved", "surge", "favorable", "tailwind", "strength", "increase", "profitable",
        "upside", "breakthrough"}},
      {"decline", "Performance", -1,
       {"decline", "weak", "impairment", "shortfall", "headwind", "restructuring", "writedown", "downturn",
        "slowdown", "deteriorate", "pressure", "disappointing", "loss", "challenging", "delay", "downgrade",
        "softness", "charge", "reduction", "layoff"}},
      {"energy", "Macro", 0,
       {"oil", "crude", "drilling", "refinery", "pipeline", "barrel", "upstream", "offshore", "exploration",
        "petroleum", "rig", "reservoir", "gasoline", "diesel", "shale", "midstream", "fuel", "propane", "wellhead",
        "hydrocarbon"}},
      {"rates", "Macro", 0,
       {"interest", "treasury", "yield", "bond", "coupon", "refinancing", "debt", "credit", "facility", "lender",
        "borrowing", "maturity", "leverage", "covenant", "liquidity", "spread", "notional", "hedge", "swap",
        "tranche"}},
      {"guidance", "Guidance", 0,
       {"guidance", "outlook", "forecast", "expect", "anticipate", "projection", "target", "reaffirm", "estimate",
        "range", "midpoint", "preliminary", "visibility", "trajectory", "backlog", "horizon", "prospect", "plan",
        "commitment", "scenario"}},
      {"capital", "Capital", 0,
       {"dividend", "repurchase", "buyback", "shareholder", "payout", "distribution", "authorization", "capital",
        "allocation", "special", "declared", "payable", "accretive", "equity", "cash", "redeem", "split",
        "reinvestment", "tender", "premium"}},
  };
  return topics;
}

// Pronounceable non-words; none ends in 's' so lemmatization leaves them alone.
inline std::vector<std::string> filler_words(std::size_t n = 300) {
  static constexpr std::string_view C = "bcdfghklmnprtvz", V = "aeiou", E = "nrtlmk";
  const std::size_t total = C.size() * V.size() * C.size() * V.size() * E.size();
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t x = (i * 109) % total;
    std::string w;
    w += C[x % C.size()];
    x /= C.size();
    w += V[x % V.size()];
    x /= V.size();
    w += C[x % C.size()];
    x /= C.size();
    w += V[x % V.size()];
    x /= V.size();
    w += E[x % E.size()];
    out.push_back(w);
  }
  return out;
}

// Two taxonomy topics per planted tone topic, one per neutral topic.
inline nlohmann::json synthetic_taxonomy() {
  const auto& p = planted_topics();
  auto slice = [](const PlantedTopic& t, std::size_t a, std::size_t b) {
    return std::vector<std::string>(t.words.begin() + static_cast<std::ptrdiff_t>(a),
                                    t.words.begin() + static_cast<std::ptrdiff_t>(b));
  };
  nlohmann::json topics = nlohmann::json::array();
  topics.push_back({{"name", "growth"}, {"metatopic", p[0].metatopic}, {"phrases", slice(p[0], 0, 5)}});
  topics.push_back({{"name", "momentum"}, {"metatopic", p[0].metatopic}, {"phrases", slice(p[0], 5, 10)}});
  topics.push_back({{"name", "decline"}, {"metatopic", p[1].metatopic}, {"phrases", slice(p[1], 0, 5)}});
  topics.push_back({{"name", "restructuring"}, {"metatopic", p[1].metatopic}, {"phrases", slice(p[1], 5, 10)}});
  for (std::size_t k = 2; k < p.size(); ++k) {
    topics.push_back({{"name", p[k].name}, {"metatopic", p[k].metatopic}, {"phrases", slice(p[k], 0, 6)}});
  }
  return {{"topics", topics}};
}

// Weekdays except Jan 1, Jul 4 and Dec 25.
inline std::vector<corpus::Date> synthetic_calendar(corpus::Date from, corpus::Date to) {
  using namespace std::chrono;
  std::vector<corpus::Date> out;
  for (auto d = from; d <= to; d += days(1)) {
    const weekday wd{d};
    if (wd == Saturday || wd == Sunday) continue;
    const year_month_day ymd{d};
    const auto m = static_cast<unsigned>(ymd.month()), dd = static_cast<unsigned>(ymd.day());
    if ((m == 1 && dd == 1) || (m == 7 && dd == 4) || (m == 12 && dd == 25)) continue;
    out.push_back(d);
  }
  return out;
}

struct SynthSummary {
  std::size_t documents = 0;
  std::size_t events = 0;
  std::size_t market_hours_docs = 0;
  std::size_t quote_rows = 0;
  std::vector<std::filesystem::path> files;
};

namespace detail {

struct Firm {
  Permno permno = 0;
  std::string ticker;
  double price = 0;
  double shares = 0;
};

struct SynthEvent {
  DocId doc_id = 0;
  Permno permno = 0;
  corpus::Timestamp announce_ts;
  corpus::Date tau{};
  int year = 0;
  bool market_hours = false;
  std::array<double, 6> theta{};
  std::vector<double> u;
  double surprise = 0, latent = 0, noise = 0, ret = 0, ret_prev = 0, price = 0, cap = 0, consensus = 0,
         actual = 0;
  bool consensus_blank = false;
  std::vector<std::string> words;
};

inline std::string month_name(unsigned m) {
  static constexpr const char* kNames[] = {"January", "February", "March",     "April",   "May",      "June",
                                           "July",    "August",   "September", "October", "November", "December"};
  return kNames[(m - 1) % 12];
}

inline std::string render_html(const SynthEvent& e, const Firm& f, std::mt19937_64& rng) {
  using namespace std::chrono;
  const year_month_day ymd{e.announce_ts.local_date()};
  std::string html = "<html><head><title>" + f.ticker + " reports results</title></head><body>\n";
  html += "<p>FOR IMMEDIATE RELEASE</p>\n";
  char buf[256];
  std::snprintf(buf, sizeof buf, "<p>NEW YORK, %s %u, %d -- %s Corp. (NYSE: %s) today announced results.</p>\n",
                month_name(static_cast<unsigned>(ymd.month())).c_str(), static_cast<unsigned>(ymd.day()),
                static_cast<int>(ymd.year()), f.ticker.c_str(), f.ticker.c_str());
  html += buf;
  std::uniform_int_distribution<int> sentence_len(8, 14);
  std::size_t i = 0;
  int sentences = 0;
  html += "<p>";
  while (i < e.words.size()) {
    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(sentence_len(rng)), e.words.size() - i);
    std::string s;
    for (std::size_t k = 0; k < n; ++k) s += (k ? " " : "") + e.words[i + k];
    s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
    html += s + ". ";
    i += n;
    if (++sentences % 3 == 0 && i < e.words.size()) html += "</p>\n<p>";
  }
  html += "</p>\n";
  std::snprintf(buf, sizeof buf, "<table><tr><td>Revenue</td><td>%.1f</td></tr><tr><td>EPS</td><td>%.2f</td></tr></table>\n",
                e.cap / 1e7, e.actual);
  html += buf;
  if (e.doc_id % 2 == 0) {
    html += "<p>Forward-looking statements: this release contains statements about future events that involve "
            "risks and uncertainties.</p>\n";
  }
  html += "</body></html>\n";
  return html;
}

}  // namespace detail

// Writes a complete fixture dataset under cfg.out_dir: manifest and HTML,
// events, forecasts, calendar, quotes, factors, taxonomy, EMB1/TOK1 files and
// a truth table with the planted latents.
inline SynthSummary make_synthetic(const SynthConfig& cfg, std::uint64_t seed) {
  using namespace std::chrono;
  namespace fs = std::filesystem;
  if (cfg.years < 1 || cfg.firms < 2 || cfg.announce_days_per_quarter < 1 || cfg.doc_words_min < 1 ||
      cfg.doc_words_max < cfg.doc_words_min || cfg.token_rows < 3 ||
      cfg.token_rows > static_cast<int>(features::kMaxTokenRows)) {
    throw Error(ErrorCode::ConfigInvalid, "synth: invalid sizes");
  }
  const auto& topics = planted_topics();
  const std::size_t K = topics.size();
  const auto filler = filler_words();
  const int last_year = cfg.first_year + cfg.years - 1;

  fs::create_directories(cfg.out_dir / "html");
  fs::create_directories(cfg.out_dir / "embeddings");
  SynthSummary summary;
  auto track = [&](const fs::path& p) { summary.files.push_back(p); };

  const auto cal = synthetic_calendar(sys_days{year{cfg.first_year - 1} / December / 1},
                                      sys_days{year{last_year + 1} / January / 31});
  const corpus::TradingCalendar calendar(cal);
  {
    std::ofstream out(cfg.out_dir / "calendar.txt", std::ios::binary);
    for (auto d : cal) out << corpus::format_date(d) << '\n';
    track(cfg.out_dir / "calendar.txt");
  }

  std::mt19937_64 rng_firm(derive_seed(seed, "synth.firms"));
  std::mt19937_64 rng_days(derive_seed(seed, "synth.days"));
  std::mt19937_64 rng_event(derive_seed(seed, "synth.events"));
  std::mt19937_64 rng_text(derive_seed(seed, "synth.text"));
  std::normal_distribution<double> N01;
  std::uniform_real_distribution<double> U01;

  std::vector<detail::Firm> firms;
  for (int f = 0; f < cfg.firms; ++f) {
    detail::Firm firm;
    firm.permno = 10001 + f;
    firm.ticker = "F" + std::to_string(10000 + f + 1).substr(1);
    firm.price = std::exp(std::log(40.0) + 0.5 * N01(rng_firm));
    firm.shares = std::exp(std::log(5e7) + 1.0 * N01(rng_firm));
    firms.push_back(firm);
  }

  // Symmetric Dirichlet: sd of theta_i - theta_j is sqrt(2 / (K (K alpha + 1))).
  const double diff_sd = std::sqrt(2.0 / (static_cast<double>(K) * (static_cast<double>(K) * cfg.topic_alpha + 1.0)));
  const double c_latent = cfg.soft_sd / diff_sd;
  std::gamma_distribution<double> gamma(cfg.topic_alpha, 1.0);

  std::vector<detail::SynthEvent> events;
  std::vector<corpus::AnalystForecast> forecasts;
  DocId next_id = 1;
  for (int y = cfg.first_year; y <= last_year; ++y) {
    for (int q = 0; q < 4; ++q) {
      const sys_days q_start{year{y} / month{static_cast<unsigned>(3 * q + 1)} / 1};
      std::vector<corpus::Date> window;
      for (auto d : cal) {
        if (d >= q_start + days(20) && d <= q_start + days(65)) window.push_back(d);
      }
      std::shuffle(window.begin(), window.end(), rng_days);
      window.resize(std::min<std::size_t>(window.size(), static_cast<std::size_t>(cfg.announce_days_per_quarter)));
      std::sort(window.begin(), window.end());
      std::uniform_int_distribution<std::size_t> pick_day(0, window.size() - 1);
      for (const auto& firm : firms) {
        detail::SynthEvent e;
        e.doc_id = next_id++;
        e.permno = firm.permno;
        e.tau = window[pick_day(rng_days)];
        e.year = y;
        const double u = U01(rng_event);
        std::uniform_int_distribution<int> minute(0, 59);
        if (u < cfg.market_hours_share) {
          e.market_hours = true;
          e.announce_ts = corpus::eastern_from_local(e.tau, 11, minute(rng_event));
        } else if (u < cfg.market_hours_share + 0.35) {
          std::uniform_int_distribution<int> hour(6, 8);
          e.announce_ts = corpus::eastern_from_local(e.tau, hour(rng_event), minute(rng_event));
        } else {
          std::uniform_int_distribution<int> hour(16, 19);
          const int h = hour(rng_event);
          e.announce_ts = corpus::eastern_from_local(calendar.previous(e.tau), h, h == 16 ? 5 + minute(rng_event) % 55
                                                                                         : minute(rng_event));
        }
        double total = 0;
        for (std::size_t k = 0; k < K; ++k) total += (e.theta[k] = gamma(rng_event));
        if (total <= 0) {
          e.theta.fill(1.0 / static_cast<double>(K));
        } else {
          for (auto& t : e.theta) t /= total;
        }
        for (int r = 0; r < cfg.latent_factors; ++r) e.u.push_back(N01(rng_event));
        for (std::size_t k = 0; k < K; ++k) e.latent += c_latent * topics[k].sign * e.theta[k];
        e.surprise = cfg.surprise_sd * N01(rng_event);
        e.noise = cfg.noise_sd * N01(rng_event);
        e.ret = cfg.b0 * e.surprise + cfg.b1 * e.latent + e.noise;
        e.ret_prev = 0.02 * N01(rng_event);
        e.price = firm.price * std::exp(0.05 * N01(rng_event));
        e.cap = e.price * firm.shares;
        const double eps0 = e.price * (0.012 + 0.004 * N01(rng_event));
        const corpus::Date ann_date = e.announce_ts.local_date();
        std::array<double, 3> f{};
        for (int a = 0; a < 3; ++a) {
          f[static_cast<std::size_t>(a)] = std::round((eps0 + 0.001 * e.price * N01(rng_event)) * 1e4) / 1e4;
          std::uniform_int_distribution<int> lag(5, 15);
          forecasts.push_back({firm.permno, "A" + std::to_string(firm.permno) + "_" + std::to_string(a + 1),
                               ann_date - days(lag(rng_event)), f[static_cast<std::size_t>(a)]});
        }
        std::sort(f.begin(), f.end());
        e.consensus = f[1];
        e.actual = e.consensus + e.surprise * e.price;
        e.consensus_blank = U01(rng_event) < cfg.consensus_missing_share;

        std::uniform_int_distribution<int> len(cfg.doc_words_min, cfg.doc_words_max);
        std::discrete_distribution<std::size_t> topic_of(e.theta.begin(), e.theta.end());
        std::uniform_int_distribution<std::size_t> topic_word(0, topics[0].words.size() - 1), filler_word(0, filler.size() - 1);
        const int n = len(rng_text);
        for (int w = 0; w < n; ++w) {
          if (U01(rng_text) < cfg.topic_word_share) {
            e.words.push_back(topics[topic_of(rng_text)].words[topic_word(rng_text)]);
          } else {
            e.words.push_back(filler[filler_word(rng_text)]);
          }
        }
        events.push_back(std::move(e));
      }
    }
  }

  // ---- documents -------------------------------------------------------------
  std::map<Permno, const detail::Firm*> firm_of;
  for (const auto& f : firms) firm_of[f.permno] = &f;
  {
    csv::Writer manifest(cfg.out_dir / "manifest.csv", {"doc_id", "permno", "announce_ts", "html_path"});
    for (const auto& e : events) {
      const fs::path rel = fs::path("html") / std::to_string(e.year) / (std::to_string(e.doc_id) + ".html");
      fs::create_directories((cfg.out_dir / rel).parent_path());
      std::ofstream out(cfg.out_dir / rel, std::ios::binary);
      out << detail::render_html(e, *firm_of.at(e.permno), rng_text);
      manifest.row({csv::format(e.doc_id), csv::format(e.permno), corpus::format_iso8601(e.announce_ts), rel.string()});
      summary.market_hours_docs += e.market_hours;
    }
    summary.documents = events.size();
    track(cfg.out_dir / "manifest.csv");
  }

  // ---- events, forecasts, truth -----------------------------------------------
  {
    csv::Writer w(cfg.out_dir / "events.csv", {"permno", "announce_ts", "eps_actual", "eps_consensus", "price_tm5",
                                               "ret_day", "ret_prev_day", "mktcap_tm1"});
    csv::Writer t(cfg.out_dir / "truth.csv",
                  {"doc_id", "permno", "tau_eff", "surprise", "soft_latent", "noise", "ret_day"});
    for (const auto& e : events) {
      w.row({csv::format(e.permno), corpus::format_iso8601(e.announce_ts), csv::format(e.actual),
             e.consensus_blank ? std::string() : csv::format(e.consensus), csv::format(e.price), csv::format(e.ret),
             csv::format(e.ret_prev), csv::format(e.cap)});
      t.row({csv::format(e.doc_id), csv::format(e.permno), corpus::format_date(e.tau), csv::format(e.surprise),
             csv::format(e.latent), csv::format(e.noise), csv::format(e.ret)});
    }
    summary.events = events.size();
    csv::Writer fw(cfg.out_dir / "forecasts.csv", {"permno", "analyst_id", "issue_date", "eps_forecast"});
    for (const auto& f : forecasts) {
      fw.row({csv::format(f.permno), f.analyst_id, corpus::format_date(f.issue_date), csv::format(f.eps_forecast)});
    }
    track(cfg.out_dir / "events.csv");
    track(cfg.out_dir / "truth.csv");
    track(cfg.out_dir / "forecasts.csv");
  }

  // ---- quotes and factors -------------------------------------------------------
  {
    std::mt19937_64 rng(derive_seed(seed, "synth.quotes"));
    std::map<corpus::Date, backtest::DayQuotes> quotes;
    for (const auto& e : events) {
      backtest::QuoteSnapshot q;
      q.permno = e.permno;
      q.date = e.tau;
      const double c0 = e.price;
      const double mid = c0 * (1.0 + cfg.open_capture * e.ret + 0.002 * N01(rng));
      const double s = U01(rng) < cfg.wide_spread_share ? 0.2 + 0.15 * U01(rng)
                                                        : cfg.spread_median * std::exp(0.5 * N01(rng));
      q.bid_0945 = mid * (1.0 - s / 2);
      q.ask_0945 = mid * (1.0 + s / 2);
      q.close = c0 * (1.0 + e.ret);
      const double sc = 0.5 * std::min(s, 0.05);
      q.bid_close = q.close * (1.0 - sc / 2);
      q.ask_close = q.close * (1.0 + sc / 2);
      quotes[q.date][q.permno] = q;
      ++summary.quote_rows;
    }
    backtest::write_quotes(cfg.out_dir / "quotes.csv", quotes);
    track(cfg.out_dir / "quotes.csv");

    std::mt19937_64 rf(derive_seed(seed, "synth.factors"));
    csv::Writer w(cfg.out_dir / "factors.csv", {"date", "mkt_rf", "smb", "hml", "rf"});
    for (auto d : cal) {
      const double mkt = 0.0003 + 0.01 * N01(rf), smb = 0.005 * N01(rf), hml = 0.005 * N01(rf);
      w.row({corpus::format_date(d), csv::format(mkt), csv::format(smb), csv::format(hml), csv::format(0.00005)});
    }
    track(cfg.out_dir / "factors.csv");
  }

  {
    std::ofstream out(cfg.out_dir / "taxonomy.json", std::ios::binary);
    out << synthetic_taxonomy().dump(2) << '\n';
    track(cfg.out_dir / "taxonomy.json");
  }

  // ---- embeddings ---------------------------------------------------------------
  // x = A [theta; u] + sigma * noise. Token rows of planted words carry the
  // loading of their topic; other tokens are noise.
  const std::uint32_t dim = features::kEmbeddingDim;
  const std::size_t R = K + static_cast<std::size_t>(cfg.latent_factors);
  std::map<std::string, std::size_t> topic_index;
  for (std::size_t k = 0; k < K; ++k) {
    for (const auto& w : topics[k].words) topic_index.emplace(w, k);
  }
  for (auto kind : features::kEmbeddingKinds) {
    const std::string name(features::to_string(kind));
    auto it = cfg.embedding_noise.find(name);
    const double sigma = it == cfg.embedding_noise.end() ? 1.0 : it->second;
    std::mt19937_64 rng(derive_seed(seed, "synth.embeddings." + name));
    Eigen::MatrixXd A(dim, R);
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      for (Eigen::Index j = 0; j < A.cols(); ++j) A(i, j) = N01(rng);
    }
    std::map<int, std::vector<features::EmbeddingRecord>> by_year;
    std::map<int, std::vector<features::TokenEmbeddingMatrix>> tok_by_year;
    Eigen::VectorXd z(static_cast<Eigen::Index>(R));
    for (const auto& e : events) {
      for (std::size_t k = 0; k < K; ++k) z(static_cast<Eigen::Index>(k)) = e.theta[k];
      for (std::size_t r = 0; r < e.u.size(); ++r) z(static_cast<Eigen::Index>(K + r)) = 0.3 * e.u[r];
      const Eigen::VectorXd x = A * z;
      features::EmbeddingRecord rec{e.doc_id, std::vector<float>(dim)};
      for (std::uint32_t i = 0; i < dim; ++i) rec.vector[i] = static_cast<float>(x(i) + sigma * N01(rng));
      by_year[e.year].push_back(std::move(rec));

      auto& toks = tok_by_year[e.year];
      if (e.market_hours || toks.size() >= static_cast<std::size_t>(cfg.token_docs_per_year)) continue;
      features::TokenEmbeddingMatrix m;
      m.doc_id = e.doc_id;
      m.rows = static_cast<std::uint32_t>(cfg.token_rows);
      m.dim = dim;
      m.E.assign(static_cast<std::size_t>(m.rows) * dim, 0.0f);
      m.tokens.push_back("[CLS]");
      for (std::size_t w = 0; w < e.words.size() && m.tokens.size() + 1 < m.rows; ++w) m.tokens.push_back(e.words[w]);
      m.tokens.push_back("[SEP]");
      for (std::size_t r = 0; r < m.tokens.size(); ++r) {
        auto ti = topic_index.find(m.tokens[r]);
        for (std::uint32_t i = 0; i < dim; ++i) {
          const double signal = ti == topic_index.end() ? 0.0 : A(i, static_cast<Eigen::Index>(ti->second));
          m.E[r * dim + i] = static_cast<float>(signal + 0.3 * sigma * N01(rng));
        }
      }
      toks.push_back(std::move(m));
    }
    for (const auto& [y, recs] : by_year) {
      const auto p = cfg.out_dir / "embeddings" / ("emb_" + name + "_" + std::to_string(y) + ".bin");
      features::write_embeddings(p, kind, dim, recs);
      track(p);
    }
    for (const auto& [y, mats] : tok_by_year) {
      const auto p = cfg.out_dir / "embeddings" / ("tok_" + name + "_" + std::to_string(y) + ".bin");
      features::write_token_matrices(p, kind, static_cast<std::uint32_t>(cfg.token_rows), dim, mats);
      track(p);
    }
  }
  std::sort(summary.files.begin(), summary.files.end());
  return summary;
}

}  // namespace earnsig::pipeline
