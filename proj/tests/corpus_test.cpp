#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "earnsig/corpus/ingest.hpp"

namespace {

using namespace earnsig;
using namespace earnsig::corpus;

const std::filesystem::path kFixtures = EARNSIG_FIXTURE_DIR;

const BoilerplateRules& rules() {
  static const BoilerplateRules r = BoilerplateRules::load(std::filesystem::path(EARNSIG_DATA_DIR) /
                                                           "boilerplate_rules.txt");
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(CleanPressRelease, RemovesTables) {
  EXPECT_EQ(clean_press_release("<body><p>Revenue grew.</p><table><tr><td>9</td></tr></table></body>", rules()),
            "Revenue grew.");
}

TEST(CleanPressRelease, RemovesExhibitHeader) {
  EXPECT_EQ(clean_press_release("<body>Exhibit 99.1\nACME reports record profit.</body>", rules()),
            "ACME reports record profit.");
}

TEST(CleanPressRelease, MatchesHandAuditedGolden) {
  const auto html = slurp(kFixtures / "8k_sample_01.html");
  const auto golden = slurp(kFixtures / "8k_sample_01.txt");
  EXPECT_EQ(clean_press_release(html, rules()), golden);
}

TEST(CleanPressRelease, EmptyBodyIsAnError) {
  try {
    clean_press_release("<html><body><table><tr><td>1</td></tr></table></body></html>", rules());
    FAIL() << "expected EmptyBody";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyBody);
  }
}

TEST(CleanPressRelease, ToleratesMalformedMarkup) {
  // Unclosed tags, stray '<', missing </body>.
  const std::string html = "<html><body><p>Sales rose <b>sharply in Q3<p>Margins were 3 < 4 points<div>Done";
  EXPECT_EQ(clean_press_release(html, rules()), "Sales rose sharply in Q3\n\nMargins were 3 < 4 points\n\nDone");
}

TEST(CleanPressRelease, DropsScriptsCommentsAndPhoneNumbers) {
  const std::string html =
      "<body><script>var x = '<p>no</p>';</script><!-- <p>hidden</p> --><p>Call 1-800-555-0199 today for details"
      " on results.</p></body>";
  EXPECT_EQ(clean_press_release(html, rules()), "Call today for details on results.");
}

// Random HTML built from a grammar of blocks, inline tags, tables and
// boilerplate fragments.
std::string random_html(std::mt19937_64& rng) {
  static const std::vector<std::string> words = {
      "revenue", "grew", "Exhibit 99.2", "net", "income", "&amp;", "&nbsp;", "For immediate release", "(212) 555-0100",
      "3 < 4", "margin", "forward-looking statements", "Q3", "loss", "\n", "\n\n", "a-b", "Contact:", "page 2 of 9"};
  static const std::vector<std::string> open = {"<p>", "<div>", "<b>", "<font size=2>", "<br/>", "<table><tr><td>",
                                                "</td></tr></table>", "</p>", "<li>", "<i>"};
  std::uniform_int_distribution<int> coin(0, 2);
  std::string html = "<html><body>";
  const int n = std::uniform_int_distribution<int>(1, 40)(rng);
  for (int i = 0; i < n; ++i) {
    if (coin(rng) == 0) {
      html += open[std::uniform_int_distribution<std::size_t>(0, open.size() - 1)(rng)];
    } else {
      html += words[std::uniform_int_distribution<std::size_t>(0, words.size() - 1)(rng)];
      html += ' ';
    }
  }
  return html + "</body></html>";
}

TEST(CleanPressRelease, IdempotentOnWrappedOutput) {
  std::mt19937_64 rng(20240611);
  int checked = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const std::string html = random_html(rng);
    std::string once;
    try {
      once = clean_press_release(html, rules());
    } catch (const Error&) {
      continue;
    }
    ++checked;
    ASSERT_EQ(clean_press_release("<body>" + once + "</body>", rules()), once) << html;
  }
  EXPECT_GT(checked, 500);
}

PressReleaseDoc doc_with(std::size_t clean_chars, const std::string& ts) {
  PressReleaseDoc d;
  d.doc_id = 1;
  d.permno = 1;
  d.announce_ts = parse_iso8601(ts);
  d.raw_html = "<body>" + std::string(std::max<std::size_t>(clean_chars, 120), 'x') + "</body>";
  d.char_count_raw = count_code_points(d.raw_html);
  d.clean_text = std::string(clean_chars, 'x');
  d.char_count_clean = clean_chars;
  return d;
}

TEST(RetainDocument, TooShortCleanText) {
  auto decision = retain_document(doc_with(99, "2010-01-05T17:00:00-05:00"));
  EXPECT_FALSE(decision.keep);
  EXPECT_EQ(decision.reason, RetentionReason::TooShortClean);
  EXPECT_TRUE(retain_document(doc_with(100, "2010-01-05T17:00:00-05:00")).keep);
}

TEST(RetainDocument, OpeningBellBoundary) {
  EXPECT_TRUE(retain_document(doc_with(5000, "2010-01-05T09:29:59-05:00")).keep);
  auto at_open = retain_document(doc_with(5000, "2010-01-05T09:30:00-05:00"));
  EXPECT_FALSE(at_open.keep);
  EXPECT_EQ(at_open.reason, RetentionReason::MarketHours);
}

TEST(RetainDocument, ClosingBellIsAfterHours) {
  EXPECT_TRUE(retain_document(doc_with(5000, "2010-01-05T16:00:00-05:00")).keep);
  EXPECT_FALSE(retain_document(doc_with(5000, "2010-01-05T15:59:59-05:00")).keep);
}

TEST(RetainDocument, UsesEasternWallClockForUtcInput) {
  // 14:45Z in January is 09:45 EST; in July 13:45Z is 09:45 EDT.
  EXPECT_FALSE(retain_document(doc_with(5000, "2010-01-05T14:45:00Z")).keep);
  EXPECT_FALSE(retain_document(doc_with(5000, "2010-07-06T13:45:00Z")).keep);
  EXPECT_TRUE(retain_document(doc_with(5000, "2010-07-06T13:15:00Z")).keep);
}

TEST(RetainDocument, RawLengthAlsoChecked) {
  auto d = doc_with(5000, "2010-01-05T17:00:00-05:00");
  d.char_count_raw = 1'000'001;
  EXPECT_EQ(retain_document(d).reason, RetentionReason::TooLongRaw);
  d.char_count_raw = 99;
  EXPECT_EQ(retain_document(d).reason, RetentionReason::TooShortRaw);
  d = doc_with(5000, "2010-01-05T17:00:00-05:00");
  d.char_count_clean = 1'000'001;
  EXPECT_EQ(retain_document(d).reason, RetentionReason::TooLongClean);
}

TEST(RetainDocument, IsAPurePredicate) {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 500; ++i) {
    const int minute = std::uniform_int_distribution<int>(0, 24 * 60 - 1)(rng);
    char ts[40];
    std::snprintf(ts, sizeof(ts), "2011-03-15T%02d:%02d:00-04:00", minute / 60, minute % 60);
    auto d = doc_with(std::uniform_int_distribution<std::size_t>(50, 300)(rng), ts);
    const auto a = retain_document(d);
    const auto b = retain_document(d);
    EXPECT_EQ(a.keep, b.keep);
    EXPECT_EQ(a.reason, b.reason);
    EXPECT_EQ(a.keep, a.reason == RetentionReason::Keep);
  }
}

TradingCalendar weekday_calendar(Date from, Date to) {
  std::vector<Date> days;
  for (Date d = from; d <= to; d += std::chrono::days(1)) {
    std::chrono::weekday wd{d};
    if (wd != std::chrono::Saturday && wd != std::chrono::Sunday) days.push_back(d);
  }
  return TradingCalendar(days);
}

TEST(EffectiveTradingDay, AfterCloseMapsToNextSession) {
  auto cal = weekday_calendar(parse_date("2010-03-01"), parse_date("2010-03-31"));
  // 2010-03-02 is a Tuesday.
  EXPECT_EQ(effective_trading_day(parse_iso8601("2010-03-02T17:00:00-05:00"), cal), parse_date("2010-03-03"));
  EXPECT_EQ(effective_trading_day(parse_iso8601("2010-03-03T08:00:00-05:00"), cal), parse_date("2010-03-03"));
  EXPECT_EQ(effective_trading_day(parse_iso8601("2010-03-05T18:00:00-05:00"), cal), parse_date("2010-03-08"));
  EXPECT_EQ(effective_trading_day(parse_iso8601("2010-03-06T08:00:00-05:00"), cal), parse_date("2010-03-08"));
  EXPECT_EQ(effective_trading_day(parse_iso8601("2010-03-02T16:00:00-05:00"), cal), parse_date("2010-03-03"));
}

TEST(EffectiveTradingDay, ConvertsZoneBeforeBucketing) {
  auto cal = weekday_calendar(parse_date("2010-03-01"), parse_date("2010-03-31"));
  // 21:30Z on Mar 2 is 16:30 EST.
  EXPECT_EQ(effective_trading_day(parse_iso8601("2010-03-02T21:30:00Z"), cal), parse_date("2010-03-03"));
  // After the DST switch (Mar 14 2010) 20:30Z is 16:30 EDT.
  EXPECT_EQ(effective_trading_day(parse_iso8601("2010-03-16T20:30:00Z"), cal), parse_date("2010-03-17"));
  EXPECT_EQ(effective_trading_day(parse_iso8601("2010-03-16T19:30:00Z"), cal), parse_date("2010-03-16"));
}

TEST(EffectiveTradingDay, OutOfRange) {
  auto cal = weekday_calendar(parse_date("2010-03-01"), parse_date("2010-03-31"));
  for (const char* ts : {"2010-03-31T17:00:00-04:00", "2010-02-26T17:00:00-05:00"}) {
    try {
      effective_trading_day(parse_iso8601(ts), cal);
      FAIL() << ts;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::CalendarOutOfRange);
    }
  }
}

TEST(Timestamps, EasternOffsetsAcrossRuleChanges) {
  // 2006 used the April/October rule, 2007+ the March/November rule.
  EXPECT_EQ(eastern_offset_minutes(parse_iso8601("2006-03-20T12:00:00Z").utc), -300);
  EXPECT_EQ(eastern_offset_minutes(parse_iso8601("2007-03-20T12:00:00Z").utc), -240);
  EXPECT_EQ(eastern_offset_minutes(parse_iso8601("2006-10-30T12:00:00Z").utc), -300);
  EXPECT_EQ(eastern_offset_minutes(parse_iso8601("2007-10-30T12:00:00Z").utc), -240);
  EXPECT_EQ(eastern_offset_minutes(parse_iso8601("2010-11-07T05:59:59Z").utc), -240);
  EXPECT_EQ(eastern_offset_minutes(parse_iso8601("2010-11-07T06:00:00Z").utc), -300);
}

TEST(Timestamps, RoundTripAndZoneRequired) {
  const auto ts = parse_iso8601("2012-05-01T16:05:00-04:00");
  EXPECT_EQ(format_iso8601(ts), "2012-05-01T16:05:00-04:00");
  EXPECT_EQ(format_iso8601(to_eastern(parse_iso8601("2012-05-01T20:05Z"))), "2012-05-01T16:05:00-04:00");
  EXPECT_THROW(parse_iso8601("2012-05-01T16:05:00"), Error);
  const auto local = eastern_from_local(parse_date("2012-01-10"), 16, 30);
  EXPECT_EQ(format_iso8601(local), "2012-01-10T16:30:00-05:00");
}

TEST(ConsensusEps, MedianOfLatestPerAnalyst) {
  const Date ann = parse_date("2010-04-20");
  auto f = [](std::string id, const char* date, double eps) {
    return AnalystForecast{1, std::move(id), parse_date(date), eps};
  };
  std::vector<AnalystForecast> odd = {f("A", "2010-04-01", 1.0), f("B", "2010-04-02", 1.2), f("C", "2010-04-03", 0.8)};
  EXPECT_DOUBLE_EQ(consensus_eps(odd, ann), 1.0);

  std::vector<AnalystForecast> revised = {f("A", "2010-03-01", 0.9), f("A", "2010-04-10", 1.1)};
  EXPECT_DOUBLE_EQ(consensus_eps(revised, ann), 1.1);

  std::vector<AnalystForecast> even = {f("A", "2010-04-01", 1.0), f("B", "2010-04-01", 2.0)};
  EXPECT_DOUBLE_EQ(consensus_eps(even, ann), 1.5);
}

TEST(ConsensusEps, WindowIsNinetyDays) {
  const Date ann = parse_date("2010-04-20");
  std::vector<AnalystForecast> stale = {{1, "A", parse_date("2010-01-19"), 1.0}};
  try {
    consensus_eps(stale, ann);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoForecast);
  }
  std::vector<AnalystForecast> edge = {{1, "A", parse_date("2010-01-20"), 1.0}, {1, "B", parse_date("2010-04-21"), 9.0}};
  EXPECT_DOUBLE_EQ(consensus_eps(edge, ann), 1.0);
}

TEST(ComputeSurprise, KnownValues) {
  EXPECT_NEAR(compute_surprise(0.55, 0.50, 10.0), 0.005, 1e-15);
  EXPECT_EQ(compute_surprise(1.00, 1.00, 37.5), 0.0);
  EXPECT_NEAR(compute_surprise(0.40, 0.50, 20.0), -0.005, 1e-15);
  EXPECT_THROW(compute_surprise(1.0, 1.0, 0.0), Error);
  EXPECT_THROW(compute_surprise(1.0, 1.0, -3.0), Error);
}

TEST(ComputeSurprise, StoredValueRecomputesBitForBit) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> eps(-2, 3), price(1, 400);
  const auto path = std::filesystem::temp_directory_path() / "earnsig_events_roundtrip.csv";
  std::vector<AlignedEvent> events;
  for (int i = 0; i < 200; ++i) {
    AlignedEvent a;
    a.doc_id = static_cast<DocId>(i);
    a.event.permno = 10000 + i;
    a.event.announce_ts = parse_iso8601("2010-01-05T17:00:00-05:00");
    a.event.tau_eff = parse_date("2010-01-06");
    a.event.eps_actual = eps(rng);
    a.event.eps_consensus = eps(rng);
    a.event.price_tm5 = price(rng);
    a.event.surprise = compute_surprise(a.event.eps_actual, a.event.eps_consensus, a.event.price_tm5);
    events.push_back(a);
  }
  write_aligned_events(path, events);
  for (const auto& a : read_aligned_events(path)) {
    const double again = compute_surprise(a.event.eps_actual, a.event.eps_consensus, a.event.price_tm5);
    EXPECT_EQ(std::bit_cast<std::uint64_t>(again), std::bit_cast<std::uint64_t>(a.event.surprise));
  }
  std::filesystem::remove(path);
}

CleanDoc clean_doc(DocId id, Permno permno, const char* tau, std::size_t chars) {
  CleanDoc d;
  d.doc_id = id;
  d.permno = permno;
  d.tau_eff = parse_date(tau);
  d.char_count_clean = chars;
  return d;
}

TEST(CorpusStats, GroupsByYear) {
  std::vector<CleanDoc> docs = {clean_doc(1, 1, "2010-02-01", 100), clean_doc(2, 2, "2010-05-01", 200),
                                clean_doc(3, 1, "2010-08-01", 300), clean_doc(4, 1, "2012-08-01", 50)};
  auto stats = corpus_stats(docs);
  ASSERT_EQ(stats.size(), 2u);
  EXPECT_EQ(stats.at(2010).article_count, 3u);
  EXPECT_EQ(stats.at(2010).distinct_stock_count, 2u);
  EXPECT_DOUBLE_EQ(stats.at(2010).mean_char_count, 200.0);
  EXPECT_EQ(stats.count(2011), 0u);
}

TEST(CorpusStats, FixtureCorpusMatchesIndependentRecount) {
  const auto dir = kFixtures / "corpus_small";
  const auto calendar = TradingCalendar::load(dir / "calendar.txt");
  std::vector<CleanDoc> kept;
  for (const auto& entry : read_manifest(dir / "manifest.csv")) {
    PressReleaseDoc doc{entry.doc_id, entry.permno, entry.announce_ts, slurp(entry.html_path), {}, 0, 0};
    clean_document(doc, rules());
    if (!retain_document(doc).keep) continue;
    kept.push_back({doc.doc_id, doc.permno, doc.announce_ts, effective_trading_day(doc.announce_ts, calendar),
                    doc.char_count_raw, doc.char_count_clean, *doc.clean_text});
  }
  ASSERT_EQ(kept.size(), 5u);
  const auto stats = corpus_stats(kept);
  const auto golden = csv::read_file(dir / "golden_stats.csv");
  ASSERT_EQ(golden.rows.size(), stats.size());
  for (const auto& row : golden.rows) {
    const auto& s = stats.at(csv::parse_int<int>(row[0]));
    EXPECT_EQ(s.article_count, csv::parse_int<std::size_t>(row[1]));
    EXPECT_EQ(s.distinct_stock_count, csv::parse_int<std::size_t>(row[2]));
    EXPECT_DOUBLE_EQ(s.mean_char_count, csv::parse_double(row[3]));
  }
}

TEST(JoinDocuments, LongestDocumentWinsAndUnmatchedReported) {
  EarningsEvent ev;
  ev.permno = 7;
  ev.tau_eff = parse_date("2010-02-03");
  std::vector<EarningsEvent> events = {ev};
  std::vector<CleanDoc> docs = {clean_doc(1, 7, "2010-02-03", 500), clean_doc(2, 7, "2010-02-03", 900),
                                clean_doc(3, 8, "2010-02-03", 900), clean_doc(4, 7, "2010-02-04", 900)};
  const auto joined = join_documents(docs, events);
  ASSERT_EQ(joined.aligned.size(), 1u);
  EXPECT_EQ(joined.aligned[0].doc_id, 2u);
  EXPECT_EQ(joined.superseded_docs, std::vector<DocId>({1}));
  EXPECT_EQ(joined.unmatched_docs, std::vector<DocId>({3, 4}));
  // Every retained doc is either aligned, superseded or reported unmatched.
  EXPECT_EQ(joined.aligned.size() + joined.superseded_docs.size() + joined.unmatched_docs.size(), docs.size());
}

}  // namespace
