#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "earnsig/common/binary.hpp"
#include "earnsig/common/error.hpp"
#include "earnsig/corpus/ingest.hpp"

namespace earnsig::features {

enum class FeatureKind : std::uint8_t { Bkmx = 0, Olda = 1, Bert = 2, Mpnet = 3, Finbert = 4 };

inline constexpr FeatureKind kAllKinds[] = {FeatureKind::Bkmx, FeatureKind::Olda, FeatureKind::Bert,
                                            FeatureKind::Mpnet, FeatureKind::Finbert};
inline constexpr FeatureKind kEmbeddingKinds[] = {FeatureKind::Bert, FeatureKind::Mpnet, FeatureKind::Finbert};
inline constexpr std::uint32_t kEmbeddingDim = 768;
inline constexpr std::uint32_t kMaxTokenRows = 512;

inline std::string_view to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::Bkmx: return "bkmx";
    case FeatureKind::Olda: return "olda";
    case FeatureKind::Bert: return "bert";
    case FeatureKind::Mpnet: return "mpnet";
    case FeatureKind::Finbert: return "finbert";
  }
  return "unknown";
}

inline FeatureKind parse_kind(std::string_view s) {
  for (auto k : kAllKinds) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::ConfigInvalid, "unknown feature kind '" + std::string(s) + "'");
}

inline bool is_embedding(FeatureKind k) { return static_cast<std::uint8_t>(k) >= 2; }

inline FeatureKind kind_from_code(std::uint8_t code) {
  if (code > 4) throw Error(ErrorCode::BadMagic, "unknown kind code " + std::to_string(code));
  return static_cast<FeatureKind>(code);
}

// Expected vector length per kind. Topic dims follow the taxonomy size and K.
struct FeatureSchema {
  std::uint32_t bkmx_dim = 180;
  std::uint32_t olda_dim = 50;

  std::uint32_t dim(FeatureKind k) const {
    if (k == FeatureKind::Bkmx) return bkmx_dim;
    if (k == FeatureKind::Olda) return olda_dim;
    return kEmbeddingDim;
  }
};

// All vectors of one kind, keyed by doc id.
class FeatureTable {
 public:
  FeatureTable() = default;
  FeatureTable(FeatureKind kind, std::uint32_t dim) : kind_(kind), dim_(dim) {}

  FeatureKind kind() const { return kind_; }
  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return rows_.size(); }

  void add(DocId id, std::vector<double> v) {
    if (v.size() != dim_) {
      throw Error(ErrorCode::DimMismatch, std::string(to_string(kind_)) + ": doc " + std::to_string(id) + " has " +
                                              std::to_string(v.size()) + " entries, expected " +
                                              std::to_string(dim_));
    }
    for (double x : v) {
      if (!std::isfinite(x)) {
        throw Error(ErrorCode::DimMismatch, std::string(to_string(kind_)) + ": non-finite entry for doc " +
                                                std::to_string(id));
      }
    }
    rows_.insert_or_assign(id, std::move(v));
  }

  const std::vector<double>* find(DocId id) const {
    auto it = rows_.find(id);
    return it == rows_.end() ? nullptr : &it->second;
  }

  std::vector<DocId> ids() const {
    std::vector<DocId> out;
    out.reserve(rows_.size());
    for (const auto& [id, v] : rows_) out.push_back(id);
    std::sort(out.begin(), out.end());
    return out;
  }

  void merge(const FeatureTable& other) {
    if (other.kind_ != kind_ || other.dim_ != dim_) throw Error(ErrorCode::DimMismatch, "merging unlike tables");
    for (const auto& [id, v] : other.rows_) rows_.insert_or_assign(id, v);
  }

 private:
  FeatureKind kind_ = FeatureKind::Bkmx;
  std::uint32_t dim_ = 0;
  std::unordered_map<DocId, std::vector<double>> rows_;
};

// ---- emb_<kind>_<year>.bin --------------------------------------------------

struct EmbeddingRecord {
  DocId doc_id = 0;
  std::vector<float> vector;
};

inline void write_embeddings(const std::filesystem::path& path, FeatureKind kind, std::uint32_t dim,
                             std::span<const EmbeddingRecord> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  binary::write_magic(out, "EMB1");
  binary::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(kind));
  binary::write_le<std::uint32_t>(out, dim);
  binary::write_le<std::uint64_t>(out, records.size());
  for (const auto& r : records) {
    if (r.vector.size() != dim) throw Error(ErrorCode::DimMismatch, "embedding of wrong length");
    binary::write_le<std::uint64_t>(out, r.doc_id);
    binary::write_f32_block(out, r.vector.data(), r.vector.size());
  }
}

struct EmbeddingFile {
  FeatureKind kind = FeatureKind::Bert;
  std::uint32_t dim = 0;
  std::vector<EmbeddingRecord> records;
};

// `known_docs`, when given, must contain every doc id in the file.
inline EmbeddingFile read_embeddings(const std::filesystem::path& path,
                                     const std::unordered_set<DocId>* known_docs = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  binary::expect_magic(in, "EMB1");
  EmbeddingFile f;
  f.kind = kind_from_code(binary::read_le<std::uint8_t>(in, "kind code"));
  f.dim = binary::read_le<std::uint32_t>(in, "dim");
  const auto count = binary::read_le<std::uint64_t>(in, "count");
  if (f.dim == 0) throw Error(ErrorCode::DimMismatch, path.string() + ": zero dimension");
  f.records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 20)));
  for (std::uint64_t i = 0; i < count; ++i) {
    EmbeddingRecord r;
    r.doc_id = binary::read_le<std::uint64_t>(in, "doc id");
    r.vector.resize(f.dim);
    binary::read_f32_block(in, r.vector.data(), f.dim, "embedding record");
    if (known_docs && !known_docs->count(r.doc_id)) {
      throw Error(ErrorCode::UnknownDoc, path.string() + ": doc " + std::to_string(r.doc_id) + " not in manifest");
    }
    f.records.push_back(std::move(r));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::BadMagic, path.string() + ": trailing bytes after " + std::to_string(count) + " records");
  }
  return f;
}

inline FeatureTable to_table(const EmbeddingFile& f) {
  FeatureTable t(f.kind, f.dim);
  for (const auto& r : f.records) t.add(r.doc_id, std::vector<double>(r.vector.begin(), r.vector.end()));
  return t;
}

// ---- tok_<kind>_<year>.bin --------------------------------------------------

inline constexpr std::string_view kPadToken = "[PAD]";

// Row r is padding when r >= tokens.size() or its label is [PAD]; padding
// rows are zero-filled.
struct TokenEmbeddingMatrix {
  DocId doc_id = 0;
  std::vector<std::string> tokens;
  std::uint32_t rows = 0;
  std::uint32_t dim = 0;
  std::vector<float> E;  // rows x dim, row-major

  bool is_padding(std::size_t r) const { return r >= tokens.size() || tokens[r] == kPadToken; }
  const float* row(std::size_t r) const { return E.data() + r * dim; }
};

inline void write_token_matrices(const std::filesystem::path& path, FeatureKind kind, std::uint32_t rows,
                                 std::uint32_t dim, std::span<const TokenEmbeddingMatrix> mats) {
  if (rows > kMaxTokenRows) throw Error(ErrorCode::DimMismatch, "token matrix with more than 512 rows");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  binary::write_magic(out, "TOK1");
  binary::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(kind));
  binary::write_le<std::uint32_t>(out, rows);
  binary::write_le<std::uint32_t>(out, dim);
  binary::write_le<std::uint64_t>(out, mats.size());
  for (const auto& m : mats) {
    if (m.rows != rows || m.dim != dim || m.E.size() != static_cast<std::size_t>(rows) * dim ||
        m.tokens.size() > rows) {
      throw Error(ErrorCode::DimMismatch, "token matrix for doc " + std::to_string(m.doc_id) + " has wrong shape");
    }
    binary::write_le<std::uint64_t>(out, m.doc_id);
    binary::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(m.tokens.size()));
    for (const auto& t : m.tokens) {
      if (t.size() > 0xFFFF) throw Error(ErrorCode::DimMismatch, "token string too long");
      binary::write_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.size()));
      out.write(t.data(), static_cast<std::streamsize>(t.size()));
    }
    binary::write_f32_block(out, m.E.data(), m.E.size());
  }
}

struct TokenMatrixFile {
  FeatureKind kind = FeatureKind::Bert;
  std::uint32_t rows = 0;
  std::uint32_t dim = 0;
  std::vector<TokenEmbeddingMatrix> matrices;
};

inline TokenMatrixFile read_token_matrices(const std::filesystem::path& path,
                                           const std::unordered_set<DocId>* known_docs = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  binary::expect_magic(in, "TOK1");
  TokenMatrixFile f;
  f.kind = kind_from_code(binary::read_le<std::uint8_t>(in, "kind code"));
  f.rows = binary::read_le<std::uint32_t>(in, "rows");
  f.dim = binary::read_le<std::uint32_t>(in, "dim");
  if (f.rows > kMaxTokenRows) throw Error(ErrorCode::DimMismatch, path.string() + ": more than 512 rows");
  const auto count = binary::read_le<std::uint64_t>(in, "count");
  for (std::uint64_t i = 0; i < count; ++i) {
    TokenEmbeddingMatrix m;
    m.doc_id = binary::read_le<std::uint64_t>(in, "doc id");
    m.rows = f.rows;
    m.dim = f.dim;
    const auto n = binary::read_le<std::uint16_t>(in, "token count");
    if (n > f.rows) throw Error(ErrorCode::DimMismatch, path.string() + ": more tokens than rows");
    for (std::uint16_t t = 0; t < n; ++t) {
      const auto len = binary::read_le<std::uint16_t>(in, "token length");
      std::string s(len, '\0');
      in.read(s.data(), len);
      if (in.gcount() != len) throw Error(ErrorCode::BadMagic, path.string() + ": truncated token string");
      m.tokens.push_back(std::move(s));
    }
    m.E.resize(static_cast<std::size_t>(f.rows) * f.dim);
    binary::read_f32_block(in, m.E.data(), m.E.size(), "token states");
    if (known_docs && !known_docs->count(m.doc_id)) {
      throw Error(ErrorCode::UnknownDoc, path.string() + ": doc " + std::to_string(m.doc_id) + " not in manifest");
    }
    f.matrices.push_back(std::move(m));
  }
  return f;
}

// ---- diagnostics --------------------------------------------------------------

struct CosineStats {
  double mean = 0, std = 0, min = 0, max = 0;
  std::size_t n = 0;
};

inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::DimMismatch, "cosine of vectors of different length");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0 || bb == 0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

// Per-document cosine over docs present in both tables (optionally limited
// to `subset`); population standard deviation.
inline CosineStats cosine_stats(const FeatureTable& a, const FeatureTable& b,
                                const std::vector<DocId>* subset = nullptr) {
  if (a.dim() != b.dim()) throw Error(ErrorCode::DimMismatch, "cosine_stats on kinds of different dimension");
  std::vector<double> c;
  for (auto id : subset ? *subset : a.ids()) {
    const auto* va = a.find(id);
    const auto* vb = b.find(id);
    if (va && vb) c.push_back(cosine(*va, *vb));
  }
  if (c.empty()) throw Error(ErrorCode::NoOverlap, "no document has both feature kinds");
  CosineStats s;
  s.n = c.size();
  s.min = *std::min_element(c.begin(), c.end());
  s.max = *std::max_element(c.begin(), c.end());
  for (double x : c) s.mean += x;
  s.mean /= static_cast<double>(c.size());
  for (double x : c) s.std += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(s.std / static_cast<double>(c.size()));
  return s;
}

// ---- design matrices ------------------------------------------------------------

struct DesignMatrix {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  std::vector<DocId> doc_ids;
  std::vector<Permno> permnos;
  std::vector<corpus::Date> dates;
  std::vector<DocId> dropped;  // events without a feature row when dropping is allowed
};

// Events of `year` (all years when nullopt), ordered by (tau_eff, permno).
// Returns are ret_day.
inline DesignMatrix assemble_matrix(const FeatureTable& table, std::span<const corpus::AlignedEvent> events,
                                    std::optional<int> year, bool drop_missing = false) {
  std::vector<const corpus::AlignedEvent*> rows;
  for (const auto& e : events) {
    if (!year || e.year() == *year) rows.push_back(&e);
  }
  std::sort(rows.begin(), rows.end(), [](const auto* a, const auto* b) {
    if (a->event.tau_eff != b->event.tau_eff) return a->event.tau_eff < b->event.tau_eff;
    if (a->event.permno != b->event.permno) return a->event.permno < b->event.permno;
    return a->doc_id < b->doc_id;
  });
  DesignMatrix m;
  std::vector<const std::vector<double>*> vecs;
  std::vector<DocId> missing;
  for (const auto* e : rows) {
    const auto* v = table.find(e->doc_id);
    if (!v) {
      missing.push_back(e->doc_id);
      continue;
    }
    vecs.push_back(v);
    m.doc_ids.push_back(e->doc_id);
    m.permnos.push_back(e->event.permno);
    m.dates.push_back(e->event.tau_eff);
  }
  if (!missing.empty() && !drop_missing) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) list += (i ? "," : "") + std::to_string(missing[i]);
    if (missing.size() > 20) list += ",...";
    throw Error(ErrorCode::MissingFeature, std::string(to_string(table.kind())) + ": " +
                                               std::to_string(missing.size()) + " events lack features: " + list);
  }
  m.dropped = std::move(missing);
  m.X.resize(static_cast<Eigen::Index>(vecs.size()), table.dim());
  m.y.resize(static_cast<Eigen::Index>(vecs.size()));
  std::unordered_map<DocId, double> ret;
  for (const auto* e : rows) ret.emplace(e->doc_id, e->event.ret_day);
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    for (std::uint32_t j = 0; j < table.dim(); ++j) m.X(static_cast<Eigen::Index>(i), j) = (*vecs[i])[j];
    m.y(static_cast<Eigen::Index>(i)) = ret.at(m.doc_ids[i]);
  }
  return m;
}

}  // namespace earnsig::features
