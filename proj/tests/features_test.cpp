#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "earnsig/features/features.hpp"

namespace {

using namespace earnsig;
using namespace earnsig::features;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("earnsig_features_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

std::vector<EmbeddingRecord> random_records(std::size_t n, std::uint32_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  std::vector<EmbeddingRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    EmbeddingRecord r{1000 + i, std::vector<float>(dim)};
    for (auto& x : r.vector) x = g(rng);
    out.push_back(std::move(r));
  }
  // Awkward values survive too.
  out[0].vector[0] = -0.0f;
  out[0].vector[1] = std::numeric_limits<float>::denorm_min();
  out[0].vector[2] = std::numeric_limits<float>::max();
  return out;
}

using EmbeddingIo = TempDir;

TEST_F(EmbeddingIo, RoundTripIsBitExact) {
  const auto recs = random_records(3, kEmbeddingDim, 1);
  write_embeddings(dir_ / "emb.bin", FeatureKind::Finbert, kEmbeddingDim, recs);
  EXPECT_EQ(std::filesystem::file_size(dir_ / "emb.bin"), 4 + 1 + 4 + 8 + 3 * (8 + 4 * kEmbeddingDim));
  const auto back = read_embeddings(dir_ / "emb.bin");
  EXPECT_EQ(back.kind, FeatureKind::Finbert);
  EXPECT_EQ(back.dim, kEmbeddingDim);
  ASSERT_EQ(back.records.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.records[i].doc_id, recs[i].doc_id);
    EXPECT_EQ(std::memcmp(back.records[i].vector.data(), recs[i].vector.data(), 4 * kEmbeddingDim), 0);
  }
  const auto table = to_table(back);
  EXPECT_EQ((*table.find(1001))[5], static_cast<double>(recs[1].vector[5]));
}

TEST_F(EmbeddingIo, KnownByteLayout) {
  std::vector<EmbeddingRecord> one = {{0x0102030405060708ull, {1.0f, -2.0f}}};
  write_embeddings(dir_ / "emb.bin", FeatureKind::Mpnet, 2, one);
  std::ifstream in(dir_ / "emb.bin", std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), {});
  const std::vector<unsigned char> expected = {'E', 'M', 'B', '1', 3, 2, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0,
                                               8,   7,   6,   5,   4, 3, 2, 1, 0, 0, 0x80, 0x3F, 0, 0, 0, 0xC0};
  EXPECT_EQ(bytes, expected);
}

TEST_F(EmbeddingIo, TruncatedAndBadMagic) {
  const auto recs = random_records(2, 16, 2);
  write_embeddings(dir_ / "emb.bin", FeatureKind::Bert, 16, recs);
  std::filesystem::resize_file(dir_ / "emb.bin", std::filesystem::file_size(dir_ / "emb.bin") - 3);
  try {
    read_embeddings(dir_ / "emb.bin");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadMagic);
  }
  {
    std::ofstream bad(dir_ / "bad.bin", std::ios::binary);
    bad << "EMB2xxxxxxxxxxxxxxxxxxxx";
  }
  EXPECT_THROW(read_embeddings(dir_ / "bad.bin"), Error);
}

TEST_F(EmbeddingIo, UnknownDocRejected) {
  write_embeddings(dir_ / "emb.bin", FeatureKind::Bert, 16, random_records(2, 16, 3));
  std::unordered_set<DocId> manifest = {1000};
  try {
    read_embeddings(dir_ / "emb.bin", &manifest);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownDoc);
  }
  manifest.insert(1001);
  EXPECT_EQ(read_embeddings(dir_ / "emb.bin", &manifest).records.size(), 2u);
}

using TokenMatrixIo = TempDir;

TEST_F(TokenMatrixIo, RoundTripWithPadding) {
  std::mt19937_64 rng(4);
  std::normal_distribution<float> g;
  std::vector<TokenEmbeddingMatrix> mats;
  for (DocId id : {7u, 9u}) {
    TokenEmbeddingMatrix m{id, {"[CLS]", "rev", "##enue", "gr\xC3\xBCn", "[SEP]"}, 8, 4, std::vector<float>(32, 0.0f)};
    for (std::size_t i = 0; i < 5 * 4; ++i) m.E[i] = g(rng);
    mats.push_back(m);
  }
  write_token_matrices(dir_ / "tok.bin", FeatureKind::Bert, 8, 4, mats);
  const auto back = read_token_matrices(dir_ / "tok.bin");
  EXPECT_EQ(back.rows, 8u);
  EXPECT_EQ(back.dim, 4u);
  ASSERT_EQ(back.matrices.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.matrices[i].doc_id, mats[i].doc_id);
    EXPECT_EQ(back.matrices[i].tokens, mats[i].tokens);
    EXPECT_EQ(std::memcmp(back.matrices[i].E.data(), mats[i].E.data(), 32 * 4), 0);
    EXPECT_FALSE(back.matrices[i].is_padding(4));
    EXPECT_TRUE(back.matrices[i].is_padding(5));
  }
  std::vector<TokenEmbeddingMatrix> too_wide = {{1, {}, 600, 4, std::vector<float>(2400)}};
  EXPECT_THROW(write_token_matrices(dir_ / "x.bin", FeatureKind::Bert, 600, 4, too_wide), Error);
}

FeatureTable table_of(FeatureKind k, const std::vector<std::pair<DocId, std::vector<double>>>& rows) {
  FeatureTable t(k, static_cast<std::uint32_t>(rows.front().second.size()));
  for (const auto& [id, v] : rows) t.add(id, v);
  return t;
}

TEST(CosineStats, IdenticalOrthogonalAndSymmetric) {
  const auto a = table_of(FeatureKind::Bert, {{1, {1, 2, 3}}, {2, {0, 1, 0}}, {3, {5, 0, 1}}});
  const auto same = cosine_stats(a, a);
  EXPECT_NEAR(same.mean, 1.0, 1e-15);
  EXPECT_NEAR(same.std, 0.0, 1e-7);
  EXPECT_EQ(same.n, 3u);

  const auto x = table_of(FeatureKind::Bert, {{1, {1, 0}}, {2, {0, 3}}});
  const auto y = table_of(FeatureKind::Mpnet, {{1, {0, 2}}, {2, {-4, 0}}, {5, {1, 1}}});
  const auto orth = cosine_stats(x, y);
  EXPECT_EQ(orth.mean, 0.0);
  EXPECT_EQ(orth.n, 2u);

  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  FeatureTable p(FeatureKind::Bert, 8), q(FeatureKind::Finbert, 8);
  for (DocId id = 0; id < 50; ++id) {
    std::vector<double> u(8), v(8);
    for (auto& e : u) e = g(rng);
    for (auto& e : v) e = g(rng);
    p.add(id, u);
    if (id % 3) q.add(id, v);
  }
  const auto pq = cosine_stats(p, q), qp = cosine_stats(q, p);
  EXPECT_DOUBLE_EQ(pq.mean, qp.mean);
  EXPECT_DOUBLE_EQ(pq.std, qp.std);
  EXPECT_EQ(pq.min, qp.min);
  EXPECT_EQ(pq.max, qp.max);
}

TEST(CosineStats, NoOverlap) {
  const auto a = table_of(FeatureKind::Bert, {{1, {1, 0}}});
  const auto b = table_of(FeatureKind::Mpnet, {{2, {1, 0}}});
  try {
    cosine_stats(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoOverlap);
  }
}

corpus::AlignedEvent event(DocId id, Permno permno, const char* date, double ret) {
  corpus::AlignedEvent a;
  a.doc_id = id;
  a.event.permno = permno;
  a.event.tau_eff = corpus::parse_date(date);
  a.event.ret_day = ret;
  return a;
}

TEST(AssembleMatrix, OrderingAlignmentAndMissing) {
  const auto t = table_of(FeatureKind::Olda, {{10, {1, 0}}, {11, {0, 1}}, {12, {0.5, 0.5}}});
  std::vector<corpus::AlignedEvent> events = {event(11, 5, "2010-03-02", 0.02), event(10, 9, "2010-03-01", -0.01),
                                              event(12, 2, "2010-03-02", 0.03), event(13, 1, "2009-12-31", 0.5)};
  const auto m = assemble_matrix(t, events, 2010);
  ASSERT_EQ(m.X.rows(), 3);
  EXPECT_EQ(m.doc_ids, (std::vector<DocId>{10, 12, 11}));
  EXPECT_EQ(m.permnos, (std::vector<Permno>{9, 2, 5}));
  EXPECT_EQ(m.y(0), -0.01);
  EXPECT_EQ(m.y(1), 0.03);
  EXPECT_EQ(m.y(2), 0.02);
  EXPECT_EQ(m.X(1, 0), 0.5);
  const auto again = assemble_matrix(t, events, 2010);
  EXPECT_EQ(again.doc_ids, m.doc_ids);

  try {
    assemble_matrix(t, events, std::nullopt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingFeature);
    EXPECT_NE(std::string(e.what()).find("13"), std::string::npos);
  }
  const auto dropped = assemble_matrix(t, events, std::nullopt, true);
  EXPECT_EQ(dropped.dropped, (std::vector<DocId>{13}));
  EXPECT_EQ(dropped.X.rows(), 3);
}

TEST(AssembleMatrix, ReturnsMatchEventsPerRow) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-0.1, 0.1);
  FeatureTable t(FeatureKind::Bkmx, 3);
  std::vector<corpus::AlignedEvent> events;
  std::unordered_map<DocId, double> truth;
  for (DocId id = 0; id < 300; ++id) {
    t.add(id, {u(rng), u(rng), u(rng)});
    const double r = u(rng);
    truth[id] = r;
    char date[16];
    std::snprintf(date, sizeof(date), "2011-%02d-%02d", static_cast<int>(1 + id % 12), static_cast<int>(1 + id % 28));
    events.push_back(event(id, static_cast<Permno>(id % 17), date, r));
  }
  const auto m = assemble_matrix(t, events, 2011);
  for (Eigen::Index i = 0; i < m.X.rows(); ++i) {
    EXPECT_EQ(m.y(i), truth.at(m.doc_ids[static_cast<std::size_t>(i)]));
    EXPECT_EQ(m.X(i, 2), (*t.find(m.doc_ids[static_cast<std::size_t>(i)]))[2]);
    if (i) {
      EXPECT_TRUE(m.dates[i - 1] < m.dates[i] || (m.dates[i - 1] == m.dates[i] && m.permnos[i - 1] <= m.permnos[i]));
    }
  }
}

TEST(FeatureTable, RejectsWrongDimensionAndNonFinite) {
  FeatureTable t(FeatureKind::Bert, kEmbeddingDim);
  EXPECT_THROW(t.add(1, std::vector<double>(767)), Error);
  std::vector<double> v(kEmbeddingDim, 0.0);
  v[3] = std::nan("");
  EXPECT_THROW(t.add(1, v), Error);
  EXPECT_EQ(FeatureSchema{}.dim(FeatureKind::Bkmx), 180u);
  EXPECT_EQ(FeatureSchema{}.dim(FeatureKind::Olda), 50u);
  EXPECT_EQ(FeatureSchema{}.dim(FeatureKind::Mpnet), 768u);
  EXPECT_EQ(parse_kind("finbert"), FeatureKind::Finbert);
  EXPECT_THROW(parse_kind("gpt"), Error);
}

}  // namespace
