#pragma once

// Planted-topic corpus generator shared by unit and acceptance tests.

#include <random>
#include <string>
#include <vector>

#include "earnsig/textprep/vocabulary.hpp"

namespace earnsig::test_support {

struct PlantedCorpus {
  textprep::Vocabulary vocab;
  std::vector<std::vector<double>> topics;  // K x V word distributions
  std::vector<textprep::DocTermCounts> train;
  std::vector<textprep::DocTermCounts> heldout;
};

// K topics on disjoint word blocks of V/K words, Zipf-like weights inside a
// block. Doc mixtures ~ Dirichlet(doc_alpha), lengths uniform in [40, 120].
inline PlantedCorpus make_planted_corpus(int K, int V, int n_train, int n_heldout, std::uint64_t seed,
                                         double doc_alpha = 0.3) {
  std::mt19937_64 rng(seed);
  std::vector<std::string> terms;
  std::vector<std::size_t> df(static_cast<std::size_t>(V), 1);
  for (int w = 0; w < V; ++w) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "w%03d", w);
    terms.push_back(buf);
  }
  PlantedCorpus c{textprep::Vocabulary(2010, terms, df), {}, {}, {}};
  const int block = V / K;
  for (int k = 0; k < K; ++k) {
    std::vector<double> row(static_cast<std::size_t>(V), 0.0);
    double total = 0;
    for (int j = 0; j < block; ++j) {
      row[static_cast<std::size_t>(k * block + j)] = 1.0 / (1.0 + 0.05 * j);
      total += row[static_cast<std::size_t>(k * block + j)];
    }
    for (auto& v : row) v /= total;
    c.topics.push_back(row);
  }
  std::vector<std::discrete_distribution<int>> word_dist;
  for (const auto& row : c.topics) word_dist.emplace_back(row.begin(), row.end());
  std::gamma_distribution<double> g(doc_alpha, 1.0);
  std::uniform_int_distribution<int> len(40, 120);
  for (int d = 0; d < n_train + n_heldout; ++d) {
    std::vector<double> theta(static_cast<std::size_t>(K));
    for (auto& t : theta) t = g(rng) + 1e-12;
    std::discrete_distribution<int> topic_dist(theta.begin(), theta.end());
    std::vector<std::uint32_t> counts(static_cast<std::size_t>(V), 0);
    const int n = len(rng);
    for (int i = 0; i < n; ++i) counts[static_cast<std::size_t>(word_dist[static_cast<std::size_t>(topic_dist(rng))](rng))] += 1;
    textprep::DocTermCounts doc{static_cast<DocId>(d), 2010, {}};
    for (int w = 0; w < V; ++w) {
      if (counts[static_cast<std::size_t>(w)]) doc.entries.emplace_back(w, counts[static_cast<std::size_t>(w)]);
    }
    (d < n_train ? c.train : c.heldout).push_back(std::move(doc));
  }
  return c;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

// Greedy matching of recovered rows to planted rows by descending cosine.
// Returns the matched cosine for every planted topic.
inline std::vector<double> greedy_match(const std::vector<std::vector<double>>& planted,
                                        const std::vector<std::vector<double>>& recovered) {
  struct Pair {
    double cos;
    std::size_t p, r;
  };
  std::vector<Pair> pairs;
  for (std::size_t p = 0; p < planted.size(); ++p) {
    for (std::size_t r = 0; r < recovered.size(); ++r) pairs.push_back({cosine(planted[p], recovered[r]), p, r});
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.cos > b.cos; });
  std::vector<double> out(planted.size(), -1.0);
  std::vector<bool> used_r(recovered.size(), false);
  for (const auto& pr : pairs) {
    if (out[pr.p] >= -0.5 || used_r[pr.r]) continue;
    out[pr.p] = pr.cos;
    used_r[pr.r] = true;
  }
  return out;
}

}  // namespace earnsig::test_support
