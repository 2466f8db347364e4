#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "earnsig/common/csv.hpp"
#include "earnsig/corpus/events.hpp"

namespace earnsig::corpus {

struct ManifestEntry {
  DocId doc_id = 0;
  Permno permno = 0;
  Timestamp announce_ts;
  std::filesystem::path html_path;
};

// html_path entries are resolved against the manifest's directory.
inline std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  const auto c_id = table.column("doc_id"), c_permno = table.column("permno"),
             c_ts = table.column("announce_ts"), c_html = table.column("html_path");
  std::vector<ManifestEntry> entries;
  std::set<DocId> seen;
  for (const auto& row : table.rows) {
    ManifestEntry e;
    e.doc_id = csv::parse_int<DocId>(row[c_id]);
    e.permno = csv::parse_int<Permno>(row[c_permno]);
    e.announce_ts = to_eastern(parse_iso8601(row[c_ts]));
    e.html_path = std::filesystem::path(row[c_html]);
    if (e.html_path.is_relative()) e.html_path = path.parent_path() / e.html_path;
    if (!seen.insert(e.doc_id).second) {
      throw Error(ErrorCode::ParseError, "duplicate doc_id " + std::to_string(e.doc_id) + " in manifest");
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

inline std::vector<AnalystForecast> read_forecasts(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  const auto c_permno = table.column("permno"), c_analyst = table.column("analyst_id"),
             c_date = table.column("issue_date"), c_eps = table.column("eps_forecast");
  std::vector<AnalystForecast> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    out.push_back({csv::parse_int<Permno>(row[c_permno]), row[c_analyst], parse_date(row[c_date]),
                   csv::parse_double(row[c_eps])});
  }
  return out;
}

struct EventLoad {
  std::vector<EarningsEvent> events;
  std::vector<std::string> warnings;
};

// Reads events.csv, normalizes timestamps to Eastern, fills a missing
// consensus from the forecasts, and computes surprise and tau_eff.
inline EventLoad read_events(const std::filesystem::path& path, const TradingCalendar& calendar,
                             std::span<const AnalystForecast> forecasts = {}) {
  const auto table = csv::read_file(path);
  const auto c_permno = table.column("permno"), c_ts = table.column("announce_ts"),
             c_actual = table.column("eps_actual"), c_price = table.column("price_tm5"),
             c_ret = table.column("ret_day"), c_prev = table.column("ret_prev_day"),
             c_cap = table.column("mktcap_tm1");
  const std::optional<std::size_t> c_cons =
      table.has_column("eps_consensus") ? std::optional(table.column("eps_consensus")) : std::nullopt;

  std::map<Permno, std::vector<AnalystForecast>> by_firm;
  for (const auto& f : forecasts) by_firm[f.permno].push_back(f);

  EventLoad load;
  for (const auto& row : table.rows) {
    EarningsEvent ev;
    ev.permno = csv::parse_int<Permno>(row[c_permno]);
    ev.announce_ts = to_eastern(parse_iso8601(row[c_ts]));
    ev.eps_actual = csv::parse_double(row[c_actual]);
    ev.price_tm5 = csv::parse_double(row[c_price]);
    ev.ret_day = csv::parse_double(row[c_ret]);
    ev.ret_prev_day = csv::parse_double(row[c_prev]);
    ev.mktcap_tm1 = csv::parse_double(row[c_cap]);
    const std::string tag = "event permno=" + std::to_string(ev.permno) + " ts=" + row[c_ts];
    try {
      if (c_cons && !row[*c_cons].empty()) {
        ev.eps_consensus = csv::parse_double(row[*c_cons]);
      } else {
        auto it = by_firm.find(ev.permno);
        std::span<const AnalystForecast> firm_forecasts;
        if (it != by_firm.end()) firm_forecasts = it->second;
        ev.eps_consensus = consensus_eps(firm_forecasts, ev.announce_ts.local_date());
      }
      ev.surprise = compute_surprise(ev.eps_actual, ev.eps_consensus, ev.price_tm5);
      ev.tau_eff = effective_trading_day(ev.announce_ts, calendar);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NoForecast || e.code() == ErrorCode::NonPositivePrice ||
          e.code() == ErrorCode::CalendarOutOfRange) {
        load.warnings.push_back(tag + ": " + e.what());
        continue;
      }
      throw;
    }
    if (!(ev.ret_day > -1.0)) {
      load.warnings.push_back(tag + ": ret_day <= -1 dropped");
      continue;
    }
    load.events.push_back(ev);
  }
  return load;
}

// Retained, cleaned document with its effective trading day.
struct CleanDoc {
  DocId doc_id = 0;
  Permno permno = 0;
  Timestamp announce_ts;
  Date tau_eff{};
  std::size_t char_count_raw = 0;
  std::size_t char_count_clean = 0;
  std::string clean_text;

  int year() const { return year_of(tau_eff); }
};

struct AlignedEvent {
  DocId doc_id = 0;
  EarningsEvent event;

  int year() const { return year_of(event.tau_eff); }
};

struct JoinResult {
  std::vector<AlignedEvent> aligned;        // ordered by (tau_eff, permno)
  std::vector<DocId> unmatched_docs;        // no event for (permno, tau_eff)
  std::vector<DocId> superseded_docs;       // shorter duplicates for one event
  std::vector<std::string> warnings;
};

// Joins on (permno, tau_eff). With several documents for one event the
// longest cleaned text wins (ties: smaller doc_id).
inline JoinResult join_documents(std::span<const CleanDoc> docs, std::span<const EarningsEvent> events) {
  using Key = std::pair<Date, Permno>;
  JoinResult result;
  std::map<Key, const EarningsEvent*> event_index;
  for (const auto& ev : events) {
    auto [it, inserted] = event_index.try_emplace(Key{ev.tau_eff, ev.permno}, &ev);
    if (!inserted) {
      result.warnings.push_back("duplicate event for permno " + std::to_string(ev.permno) + " on " +
                                format_date(ev.tau_eff) + "; keeping first");
    }
  }
  std::map<Key, const CleanDoc*> chosen;
  for (const auto& doc : docs) {
    Key key{doc.tau_eff, doc.permno};
    if (!event_index.count(key)) {
      result.unmatched_docs.push_back(doc.doc_id);
      continue;
    }
    auto [it, inserted] = chosen.try_emplace(key, &doc);
    if (inserted) continue;
    const CleanDoc* other = it->second;
    bool better = doc.char_count_clean > other->char_count_clean ||
                  (doc.char_count_clean == other->char_count_clean && doc.doc_id < other->doc_id);
    result.superseded_docs.push_back(better ? other->doc_id : doc.doc_id);
    if (better) it->second = &doc;
  }
  for (const auto& [key, doc] : chosen) {
    result.aligned.push_back({doc->doc_id, *event_index.at(key)});
  }
  std::sort(result.unmatched_docs.begin(), result.unmatched_docs.end());
  std::sort(result.superseded_docs.begin(), result.superseded_docs.end());
  return result;
}

struct YearStats {
  std::size_t article_count = 0;
  std::size_t distinct_stock_count = 0;
  double mean_char_count = 0.0;
};

// Per calendar year of tau_eff; years without documents are absent.
inline std::map<int, YearStats> corpus_stats(std::span<const CleanDoc> docs) {
  std::map<int, std::set<Permno>> firms;
  std::map<int, double> chars;
  std::map<int, YearStats> stats;
  for (const auto& d : docs) {
    const int y = d.year();
    stats[y].article_count += 1;
    firms[y].insert(d.permno);
    chars[y] += static_cast<double>(d.char_count_clean);
  }
  for (auto& [y, s] : stats) {
    s.distinct_stock_count = firms[y].size();
    s.mean_char_count = chars[y] / static_cast<double>(s.article_count);
  }
  return stats;
}

// ---- artifact IO ---------------------------------------------------------

inline nlohmann::json to_json(const CleanDoc& d) {
  return {{"doc_id", d.doc_id},
          {"permno", d.permno},
          {"announce_ts", format_iso8601(d.announce_ts)},
          {"tau_eff", format_date(d.tau_eff)},
          {"char_count_raw", d.char_count_raw},
          {"char_count_clean", d.char_count_clean},
          {"clean_text", d.clean_text}};
}

inline void write_corpus(const std::filesystem::path& path, std::span<const CleanDoc> docs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  for (const auto& d : docs) out << to_json(d).dump() << '\n';
}

inline std::vector<CleanDoc> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<CleanDoc> docs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    CleanDoc d;
    d.doc_id = j.at("doc_id").get<DocId>();
    d.permno = j.at("permno").get<Permno>();
    d.announce_ts = parse_iso8601(j.at("announce_ts").get<std::string>());
    d.tau_eff = parse_date(j.at("tau_eff").get<std::string>());
    d.char_count_raw = j.at("char_count_raw").get<std::size_t>();
    d.char_count_clean = j.at("char_count_clean").get<std::size_t>();
    d.clean_text = j.at("clean_text").get<std::string>();
    docs.push_back(std::move(d));
  }
  return docs;
}

inline const std::vector<std::string>& aligned_event_header() {
  static const std::vector<std::string> h = {"doc_id",    "permno",   "announce_ts", "tau_eff",
                                             "eps_actual", "eps_consensus", "price_tm5", "surprise",
                                             "ret_day",   "ret_prev_day", "mktcap_tm1"};
  return h;
}

inline void write_aligned_events(const std::filesystem::path& path, std::span<const AlignedEvent> events) {
  csv::Writer w(path);
  w.row(aligned_event_header());
  for (const auto& a : events) {
    const auto& e = a.event;
    w.row({csv::format(a.doc_id), csv::format(e.permno), format_iso8601(e.announce_ts), format_date(e.tau_eff),
           csv::format(e.eps_actual), csv::format(e.eps_consensus), csv::format(e.price_tm5),
           csv::format(e.surprise), csv::format(e.ret_day), csv::format(e.ret_prev_day),
           csv::format(e.mktcap_tm1)});
  }
}

inline std::vector<AlignedEvent> read_aligned_events(const std::filesystem::path& path) {
  const auto t = csv::read_file(path);
  std::vector<std::size_t> c;
  for (const auto& name : aligned_event_header()) c.push_back(t.column(name));
  std::vector<AlignedEvent> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) {
    AlignedEvent a;
    a.doc_id = csv::parse_int<DocId>(r[c[0]]);
    auto& e = a.event;
    e.permno = csv::parse_int<Permno>(r[c[1]]);
    e.announce_ts = parse_iso8601(r[c[2]]);
    e.tau_eff = parse_date(r[c[3]]);
    e.eps_actual = csv::parse_double(r[c[4]]);
    e.eps_consensus = csv::parse_double(r[c[5]]);
    e.price_tm5 = csv::parse_double(r[c[6]]);
    e.surprise = csv::parse_double(r[c[7]]);
    e.ret_day = csv::parse_double(r[c[8]]);
    e.ret_prev_day = csv::parse_double(r[c[9]]);
    e.mktcap_tm1 = csv::parse_double(r[c[10]]);
    out.push_back(a);
  }
  return out;
}

inline void write_corpus_stats(const std::filesystem::path& path, const std::map<int, YearStats>& stats) {
  csv::Writer w(path);
  w.row({"year", "article_count", "distinct_stock_count", "mean_char_count"});
  for (const auto& [y, s] : stats) {
    w.row({csv::format(y), csv::format(static_cast<std::uint64_t>(s.article_count)),
           csv::format(static_cast<std::uint64_t>(s.distinct_stock_count)), csv::format(s.mean_char_count)});
  }
}

}  // namespace earnsig::corpus
