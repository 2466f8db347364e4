#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "earnsig/textprep/vocabulary.hpp"

namespace {

using namespace earnsig;
using namespace earnsig::textprep;

const std::filesystem::path kData = EARNSIG_DATA_DIR;
const std::filesystem::path kFixtures = std::filesystem::path(EARNSIG_FIXTURE_DIR) / "textprep";

const TextPipeline& pipeline() {
  static const TextPipeline p = TextPipeline::load(kData);
  return p;
}

using Tokens = std::vector<std::string>;

TEST(NormalizeText, Examples) {
  EXPECT_EQ(unescape_html("AT&amp;T up"), "AT&T up");
  EXPECT_EQ(normalize_text("AT&amp;T up"), "att up");
  EXPECT_EQ(normalize_text("see https://x.co now"), "see now");
  EXPECT_EQ(normalize_text("Q3 EPS was 1.25"), "q eps was");
}

TEST(NormalizeText, LinksAndAddresses) {
  EXPECT_EQ(normalize_text("Visit www.acme.com/ir, (acme.com) or ir@acme.com."), "visit or");
  EXPECT_EQ(normalize_text("mailto:x@y.org and http://a.b/c?d=1 done"), "and done");
  EXPECT_EQ(normalize_text("ACME&nbsp;https://acme.com"), "acme");
}

TEST(NormalizeText, HyphensApostrophesAndSymbols) {
  EXPECT_EQ(normalize_text("year-over-year company's"), "yearoveryear companys");
  EXPECT_EQ(normalize_text("company\xE2\x80\x99s - results -- (GAAP)"), "companys results gaap");
  EXPECT_EQ(normalize_text("R&amp;D&nbsp;spending:&#36;4.2 billion &mdash; up"), "rd spending billion up");
  EXPECT_EQ(normalize_text("caf\xC3\xA9 10-K"), "caf k");
  EXPECT_EQ(normalize_text("  line one\n\n\tline   two  "), "line one line two");
}

TEST(NormalizeText, NumericReferences) {
  EXPECT_EQ(unescape_html("&#8220;hi&#x201D; &bogus; &#xZZ; &"), "\xE2\x80\x9Chi\xE2\x80\x9D &bogus; &#xZZ; &");
}

TEST(Tokenize, DropsSingleCharacterResidues) {
  EXPECT_EQ(tokenize("q eps was"), (Tokens{"eps", "was"}));
  EXPECT_EQ(tokenize(""), Tokens{});
}

TEST(Lemmatize, Examples) {
  const auto& lem = pipeline().lemmatizer;
  EXPECT_EQ(lem.exceptions().at("earnings"), "earning");
  EXPECT_EQ(lem.exceptions().at("grew"), "grow");
  EXPECT_EQ(lem.lemmatize("earnings"), "earning");
  EXPECT_EQ(lem.lemmatize("grew"), "grow");
  EXPECT_EQ(lem.lemmatize("revenue"), "revenue");
}

TEST(Lemmatize, SuffixRules) {
  EXPECT_EQ(Lemmatizer::apply_rules("companies"), "company");
  EXPECT_EQ(Lemmatizer::apply_rules("losses"), "loss");
  EXPECT_EQ(Lemmatizer::apply_rules("businesses"), "business");
  EXPECT_EQ(Lemmatizer::apply_rules("taxes"), "tax");
  EXPECT_EQ(Lemmatizer::apply_rules("branches"), "branch");
  EXPECT_EQ(Lemmatizer::apply_rules("sizes"), "size");
  EXPECT_EQ(Lemmatizer::apply_rules("sales"), "sale");
  EXPECT_EQ(Lemmatizer::apply_rules("status"), "status");
  EXPECT_EQ(Lemmatizer::apply_rules("basis"), "basis");
  EXPECT_EQ(Lemmatizer::apply_rules("gross"), "gross");
  EXPECT_EQ(Lemmatizer::apply_rules("its"), "its");
  const auto& lem = pipeline().lemmatizer;
  EXPECT_EQ(lem.lemmatize("series"), "series");
  EXPECT_EQ(lem.lemmatize("analyses"), "analysis");
}

TEST(Lemmatize, ExceptionTargetsAreFixedPoints) {
  // Lemmatizing twice changes nothing for every table entry.
  const auto& lem = pipeline().lemmatizer;
  for (const auto& [surface, lemma] : lem.exceptions()) {
    EXPECT_EQ(lem.lemmatize(lemma), lemma) << surface;
  }
}

TEST(DropStopwordsAndRepeats, Examples) {
  const auto& sw = pipeline().stopwords;
  EXPECT_EQ(drop_stopwords_and_repeats({"the", "year", "year", "end"}, sw), (Tokens{"year", "end"}));
  EXPECT_EQ(drop_stopwords_and_repeats({"month", "month", "month"}, sw), (Tokens{"month"}));
  EXPECT_EQ(drop_stopwords_and_repeats({"net", "income"}, sw), (Tokens{"net", "income"}));
  EXPECT_EQ(drop_stopwords_and_repeats({"year", "the", "year"}, sw), (Tokens{"year"}));
}

TEST(TextPipeline, HandDerivedSentences) {
  const auto& p = pipeline();
  EXPECT_EQ(p.tokens("The company's net income grew 12% year-over-year, see www.acme.com or email ir@acme.com."),
            (Tokens{"company", "net", "income", "grow", "yearoveryear", "see", "email"}));
  EXPECT_EQ(p.tokens("Sales sales rose; the year the year ended."), (Tokens{"sale", "rise", "year", "ended"}));
  EXPECT_EQ(p.tokens("R&amp;D&nbsp;spending:&#36;4.2 billion &mdash; up"), (Tokens{"rd", "spending", "billion"}));
}

std::string random_text(std::mt19937_64& rng) {
  static const std::vector<std::string> pieces = {
      "The",   "year",   "year",  "EPS",        "$1.25", "&amp;",       "Q4",   "www.x.com", "a@b.co", "-",
      "net-",  "income", "it's",  "\xE2\x80\x94", "&nbsp;", "companies", "grew", "10-K",      "(",      ")",
      "sales", "of",     "%",     "\n",         "the",   "month",       "caf\xC3\xA9", "\xFF", "&#8217;", "s"};
  std::string s;
  const int n = std::uniform_int_distribution<int>(0, 60)(rng);
  for (int i = 0; i < n; ++i) {
    s += pieces[std::uniform_int_distribution<std::size_t>(0, pieces.size() - 1)(rng)];
    if (std::uniform_int_distribution<int>(0, 3)(rng)) s += ' ';
  }
  return s;
}

TEST(TextPipeline, StreamInvariantsOnRandomText) {
  std::mt19937_64 rng(99);
  const auto& p = pipeline();
  for (int trial = 0; trial < 3000; ++trial) {
    const auto text = random_text(rng);
    const auto norm = normalize_text(text);
    ASSERT_EQ(normalize_text(norm), norm) << text;
    for (char c : norm) ASSERT_TRUE((c >= 'a' && c <= 'z') || c == ' ') << text;
    const auto toks = p.tokens(text);
    ASSERT_EQ(p.tokens(text), toks);
    for (std::size_t i = 0; i < toks.size(); ++i) {
      ASSERT_GE(toks[i].size(), 2u);
      ASSERT_FALSE(p.stopwords.contains(toks[i])) << toks[i];
      if (i) {
        ASSERT_NE(toks[i], toks[i - 1]) << text;
      }
    }
  }
}

struct FixtureCorpus {
  std::map<int, std::vector<TokenStream>> by_year;
};

FixtureCorpus load_fixture() {
  FixtureCorpus c;
  std::ifstream in(kFixtures / "streams.tsv");
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    int year;
    DocId id;
    ls >> year >> id;
    TokenStream s{id, {}};
    for (std::string t; ls >> t;) s.tokens.push_back(t);
    c.by_year[year].push_back(std::move(s));
  }
  return c;
}

TEST(BuildVocabulary, RuleExamples) {
  std::vector<TokenStream> three = {{1, {"all", "x"}}, {2, {"all", "x"}}, {3, {"all", "y"}}};
  const auto v = build_vocabulary(three, {.min_df = 1, .max_df_ratio = 0.5, .max_size = 10}, 2010);
  EXPECT_FALSE(v.find("all"));
  EXPECT_FALSE(v.find("x"));  // 2 > 1.5
  EXPECT_TRUE(v.find("y"));
  std::vector<TokenStream> pair = {{1, {"once", "twice"}}, {2, {"twice"}}, {3, {"z"}}, {4, {"z"}}};
  const auto w = build_vocabulary(pair, {.min_df = 2, .max_df_ratio = 0.5, .max_size = 10}, 2010);
  EXPECT_FALSE(w.find("once"));
  EXPECT_TRUE(w.find("twice"));
  EXPECT_THROW(build_vocabulary(three, {.min_df = 5, .max_df_ratio = 0.5, .max_size = 10}, 2010), Error);
}

TEST(BuildVocabulary, TruncationTiesByTerm) {
  std::vector<TokenStream> docs;
  for (DocId i = 0; i < 10; ++i) docs.push_back({i, {"pad" + std::to_string(i)}});
  docs[0].tokens.insert(docs[0].tokens.end(), {"b", "c", "a"});
  docs[1].tokens.insert(docs[1].tokens.end(), {"b", "c", "a", "d"});
  docs[2].tokens.insert(docs[2].tokens.end(), {"d"});
  const auto v = build_vocabulary(docs, {.min_df = 2, .max_df_ratio = 0.5, .max_size = 3}, 2010);
  EXPECT_EQ(v.terms(), (Tokens{"a", "b", "c"}));
}

TEST(BuildVocabulary, FixtureMatchesIndependentCount) {
  const auto corpus = load_fixture();
  const VocabOptions opts{.min_df = 2, .max_df_ratio = 0.5, .max_size = 14};
  DocumentFrequencies cumulative;
  std::optional<Vocabulary> prev;
  for (const auto& [year, streams] : corpus.by_year) {
    for (const auto& s : streams) cumulative.add(s);
    auto vocab = prev ? extend_vocabulary(*prev, cumulative, opts, year) : build_vocabulary(cumulative, opts, year);
    const auto golden = read_vocabulary(kFixtures / ("golden_vocab_" + std::to_string(year) + ".tsv"), year);
    ASSERT_EQ(vocab.terms(), golden.terms()) << year;
    for (std::size_t i = 0; i < vocab.size(); ++i) EXPECT_EQ(vocab.df(i), golden.df(i)) << vocab.term(i);
    prev = std::move(vocab);
  }
  EXPECT_FALSE(read_vocabulary(kFixtures / "golden_vocab_2010.tsv", 2010).find("sentinel"));
}

TEST(CountVectorize, Examples) {
  Vocabulary v(2010, {"a", "b"}, {1, 1});
  auto d = count_vectorize({7, {"a", "b", "a"}}, v);
  EXPECT_EQ(d.entries, (std::vector<std::pair<std::uint32_t, std::uint32_t>>{{0, 2}, {1, 1}}));
  EXPECT_EQ(d.total(), 3u);
  EXPECT_TRUE(count_vectorize({8, {"zz", "yy"}}, v).entries.empty());
}

TEST(CountVectorize, FixtureDocMatchesGolden) {
  const auto corpus = load_fixture();
  const auto vocab = read_vocabulary(kFixtures / "golden_vocab_2011.tsv", 2011);
  const auto& first = corpus.by_year.at(2011).front();
  const auto got = count_vectorize(first, vocab);
  const auto golden = read_dtm(kFixtures / "golden_dtm_first_2011.csv", 2011, {first.doc_id});
  EXPECT_EQ(got.entries, golden.front().entries);
}

TEST(CountVectorize, TotalEqualsInVocabTokenCount) {
  std::mt19937_64 rng(3);
  Vocabulary v(2010, {"aa", "bb", "cc", "dd"}, {1, 1, 1, 1});
  const Tokens pool = {"aa", "bb", "cc", "dd", "ee", "ff"};
  for (int trial = 0; trial < 500; ++trial) {
    TokenStream s{1, {}};
    const int n = std::uniform_int_distribution<int>(0, 50)(rng);
    std::size_t in_vocab = 0;
    for (int i = 0; i < n; ++i) {
      s.tokens.push_back(pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)]);
      in_vocab += v.find(s.tokens.back()).has_value();
    }
    const auto d = count_vectorize(s, v);
    EXPECT_EQ(d.total(), in_vocab);
    for (const auto& e : d.entries) EXPECT_GE(e.second, 1u);
  }
}

TEST(Vocabulary, ExtensionPreservesPrefixAndLookAhead) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    DocumentFrequencies cumulative;
    std::optional<Vocabulary> prev;
    std::set<std::string> seen_so_far;
    const std::size_t cap = std::uniform_int_distribution<std::size_t>(5, 40)(rng);
    for (int year = 2005; year < 2010; ++year) {
      for (int d = 0; d < 30; ++d) {
        TokenStream s{static_cast<DocId>(d), {}};
        for (int k = 0; k < 12; ++k) {
          // Term ids drift upward with the year so new terms keep appearing.
          int id = std::uniform_int_distribution<int>(0, 20)(rng) + 6 * (year - 2005);
          s.tokens.push_back("t" + std::to_string(id));
        }
        seen_so_far.insert(s.tokens.begin(), s.tokens.end());
        cumulative.add(s);
      }
      const VocabOptions opts{.min_df = 2, .max_df_ratio = 0.5, .max_size = cap};
      Vocabulary v = prev ? extend_vocabulary(*prev, cumulative, opts, year) : build_vocabulary(cumulative, opts, year);
      EXPECT_LE(v.size(), std::max(cap, prev ? prev->size() : 0));
      for (const auto& t : v.terms()) EXPECT_TRUE(seen_so_far.count(t)) << t;
      if (prev) {
        ASSERT_GE(v.size(), prev->size());
        for (std::size_t i = 0; i < prev->size(); ++i) EXPECT_EQ(v.term(i), prev->term(i));
      }
      prev = std::move(v);
    }
  }
}

TEST(ArtifactIo, VocabularyDtmAndStreamsRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "earnsig_textprep_io";
  std::filesystem::create_directories(dir);
  Vocabulary v(2012, {"alpha", "beta", "gamma"}, {3, 9, 4});
  write_vocabulary(dir / "vocab.tsv", v);
  const auto back = read_vocabulary(dir / "vocab.tsv", 2012);
  EXPECT_EQ(back.terms(), v.terms());
  EXPECT_EQ(back.df(1), 9u);

  std::vector<TokenStream> streams = {{5, {"alpha", "gamma", "alpha"}}, {6, {}}, {9, {"beta"}}};
  write_token_streams(dir / "tokens.tsv", streams);
  const auto sback = read_token_streams(dir / "tokens.tsv");
  ASSERT_EQ(sback.size(), 3u);
  EXPECT_EQ(sback[0].tokens, streams[0].tokens);
  EXPECT_TRUE(sback[1].tokens.empty());

  std::vector<DocTermCounts> dtm;
  for (const auto& s : streams) dtm.push_back(count_vectorize(s, v));
  write_dtm(dir / "dtm.csv", dtm);
  const auto dback = read_dtm(dir / "dtm.csv", 2012, {5, 6, 9});
  ASSERT_EQ(dback.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(dback[i].entries, dtm[i].entries);
  EXPECT_THROW(read_dtm(dir / "dtm.csv", 2012, {5, 6}), Error);
  std::filesystem::remove_all(dir);
}

}  // namespace
