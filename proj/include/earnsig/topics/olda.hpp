#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/special_functions/digamma.hpp>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "earnsig/common/binary.hpp"
#include "earnsig/common/error.hpp"
#include "earnsig/textprep/vocabulary.hpp"

namespace earnsig::topics {

using textprep::DocTermCounts;

struct OldaConfig {
  int K = 50;
  double alpha = 1.0;
  double eta = 1.0;
  double tau0 = 10.0;
  double kappa = 0.7;
  std::size_t minibatch_size = 256;
  double e_step_tol = 1e-3;
  int e_step_max_iters = 100;

  void validate() const {
    if (K < 2) throw Error(ErrorCode::ConfigInvalid, "olda: K must be >= 2");
    if (!(tau0 > 0)) throw Error(ErrorCode::ConfigInvalid, "olda: tau0 must be > 0");
    if (!(kappa > 0.5 && kappa <= 1.0)) throw Error(ErrorCode::ConfigInvalid, "olda: kappa must be in (0.5, 1]");
    if (!(alpha > 0) || !(eta > 0)) throw Error(ErrorCode::ConfigInvalid, "olda: priors must be positive");
    if (minibatch_size == 0) throw Error(ErrorCode::ConfigInvalid, "olda: minibatch_size must be positive");
  }
};

// lambda is stored K x V column-major so a word's K-vector is contiguous.
struct TopicModelState {
  Eigen::MatrixXd lambda;
  int vocab_year = 0;
  std::uint64_t update_count = 0;
  std::uint64_t seed = 0;
  OldaConfig config;

  int K() const { return static_cast<int>(lambda.rows()); }
  std::size_t V() const { return static_cast<std::size_t>(lambda.cols()); }
};

namespace detail {

inline double digamma(double x) { return boost::math::digamma(x); }

// exp(E[log beta]) for every topic/word.
inline Eigen::MatrixXd exp_elog_beta(const Eigen::MatrixXd& lambda) {
  Eigen::MatrixXd out(lambda.rows(), lambda.cols());
  Eigen::VectorXd row_sum = lambda.rowwise().sum();
  Eigen::VectorXd dig_sum(lambda.rows());
  for (Eigen::Index k = 0; k < lambda.rows(); ++k) dig_sum(k) = digamma(row_sum(k));
  for (Eigen::Index w = 0; w < lambda.cols(); ++w) {
    for (Eigen::Index k = 0; k < lambda.rows(); ++k) out(k, w) = std::exp(digamma(lambda(k, w)) - dig_sum(k));
  }
  return out;
}

inline void exp_elog_theta(const Eigen::VectorXd& gamma, Eigen::VectorXd& out) {
  const double dsum = digamma(gamma.sum());
  out.resize(gamma.size());
  for (Eigen::Index k = 0; k < gamma.size(); ++k) out(k) = std::exp(digamma(gamma(k)) - dsum);
}

struct DocPosterior {
  Eigen::VectorXd gamma;
  Eigen::VectorXd exp_theta;
  Eigen::MatrixXd exp_beta;  // K x n, columns gathered for the doc's words
  Eigen::VectorXd counts;
  Eigen::VectorXd phinorm;
  int iterations = 0;
};

// Variational E-step for one document. Gamma starts at alpha + N/K.
inline void e_step(const DocTermCounts& doc, const Eigen::MatrixXd& exp_beta_all, const OldaConfig& cfg,
                   DocPosterior& post) {
  const Eigen::Index K = exp_beta_all.rows();
  const Eigen::Index n = static_cast<Eigen::Index>(doc.entries.size());
  post.exp_beta.resize(K, n);
  post.counts.resize(n);
  double total = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto [idx, c] = doc.entries[static_cast<std::size_t>(j)];
    if (idx >= exp_beta_all.cols()) {
      throw Error(ErrorCode::DimMismatch, "term index " + std::to_string(idx) + " outside model vocabulary");
    }
    post.exp_beta.col(j) = exp_beta_all.col(idx);
    post.counts(j) = c;
    total += c;
  }
  post.gamma = Eigen::VectorXd::Constant(K, cfg.alpha + total / static_cast<double>(K));
  exp_elog_theta(post.gamma, post.exp_theta);
  post.phinorm = (post.exp_beta.transpose() * post.exp_theta).array() + 1e-100;
  post.iterations = 0;
  if (n == 0) return;
  Eigen::VectorXd last(K);
  for (int it = 0; it < cfg.e_step_max_iters; ++it) {
    last = post.gamma;
    Eigen::VectorXd ratio = post.counts.cwiseQuotient(post.phinorm);
    post.gamma = (post.exp_theta.cwiseProduct(post.exp_beta * ratio)).array() + cfg.alpha;
    exp_elog_theta(post.gamma, post.exp_theta);
    post.phinorm = (post.exp_beta.transpose() * post.exp_theta).array() + 1e-100;
    post.iterations = it + 1;
    if ((post.gamma - last).cwiseAbs().mean() < cfg.e_step_tol) break;
  }
}

}  // namespace detail

// Seeded Gamma(100, 1/100) initialization, as in the reference online VB code.
inline TopicModelState olda_init(const OldaConfig& config, const textprep::Vocabulary& vocab, std::uint64_t seed) {
  config.validate();
  if (vocab.empty()) throw Error(ErrorCode::EmptyVocabulary, "olda_init needs a nonempty vocabulary");
  TopicModelState s;
  s.config = config;
  s.seed = seed;
  s.vocab_year = vocab.version_year();
  s.lambda.resize(config.K, static_cast<Eigen::Index>(vocab.size()));
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> g(100.0, 0.01);
  for (Eigen::Index k = 0; k < s.lambda.rows(); ++k) {
    for (Eigen::Index w = 0; w < s.lambda.cols(); ++w) s.lambda(k, w) = g(rng);
  }
  return s;
}

// New vocabulary terms get columns initialized at eta; old columns persist.
inline void extend_vocabulary(TopicModelState& state, const textprep::Vocabulary& vocab) {
  const auto old_v = static_cast<Eigen::Index>(state.V());
  const auto new_v = static_cast<Eigen::Index>(vocab.size());
  if (new_v < old_v) throw Error(ErrorCode::DimMismatch, "vocabulary shrank between vintages");
  if (new_v > old_v) {
    state.lambda.conservativeResize(Eigen::NoChange, new_v);
    state.lambda.rightCols(new_v - old_v).setConstant(state.config.eta);
  }
  state.vocab_year = vocab.version_year();
}

// One online VB step. `corpus_size` is D in the lambda_hat scaling D/|batch|.
inline void olda_partial_fit(TopicModelState& state, std::span<const DocTermCounts> batch, double corpus_size) {
  if (batch.empty()) throw Error(ErrorCode::EmptyBatch, "olda_partial_fit on an empty minibatch");
  for (const auto& d : batch) {
    if (d.vocab_year > state.vocab_year) {
      throw Error(ErrorCode::MissingVintage, "minibatch vectorized with a newer vocabulary than the model");
    }
  }
  const auto& cfg = state.config;
  const Eigen::MatrixXd exp_beta = detail::exp_elog_beta(state.lambda);
  Eigen::MatrixXd sstats = Eigen::MatrixXd::Zero(state.lambda.rows(), state.lambda.cols());
  detail::DocPosterior post;
  for (const auto& doc : batch) {
    detail::e_step(doc, exp_beta, cfg, post);
    Eigen::VectorXd ratio = post.counts.cwiseQuotient(post.phinorm);
    for (std::size_t j = 0; j < doc.entries.size(); ++j) {
      sstats.col(doc.entries[j].first) += post.exp_theta * ratio(static_cast<Eigen::Index>(j));
    }
  }
  sstats = sstats.cwiseProduct(exp_beta);
  const double rho = std::pow(cfg.tau0 + static_cast<double>(state.update_count), -cfg.kappa);
  const double scale = corpus_size / static_cast<double>(batch.size());
  state.lambda = (1.0 - rho) * state.lambda + rho * ((scale * sstats).array() + cfg.eta).matrix();
  state.update_count += 1;
}

// Splits docs into consecutive minibatches and applies olda_partial_fit to
// each; an empty corpus is a no-op.
inline void olda_fit_pass(TopicModelState& state, std::span<const DocTermCounts> docs) {
  const std::size_t mb = state.config.minibatch_size;
  for (std::size_t start = 0; start < docs.size(); start += mb) {
    olda_partial_fit(state, docs.subspan(start, std::min(mb, docs.size() - start)),
                     static_cast<double>(docs.size()));
  }
}

// Per-token hard assignment: argmax_k of phi, ties to the lowest k. Returns
// per-topic token counts.
inline std::vector<double> assign_counts(const TopicModelState& state, const DocTermCounts& doc,
                                         const Eigen::MatrixXd& exp_beta) {
  detail::DocPosterior post;
  detail::e_step(doc, exp_beta, state.config, post);
  std::vector<double> counts(static_cast<std::size_t>(state.K()), 0.0);
  for (Eigen::Index j = 0; j < post.exp_beta.cols(); ++j) {
    Eigen::Index best = 0;
    double best_v = -1.0;
    for (Eigen::Index k = 0; k < post.exp_beta.rows(); ++k) {
      const double v = post.exp_theta(k) * post.exp_beta(k, j);
      if (v > best_v) {
        best_v = v;
        best = k;
      }
    }
    counts[static_cast<std::size_t>(best)] += post.counts(j);
  }
  return counts;
}

// Approximate per-document variational bound (word and theta terms only).
inline double doc_bound(const DocTermCounts& doc, const Eigen::MatrixXd& exp_beta, const OldaConfig& cfg,
                        double& n_tokens) {
  detail::DocPosterior post;
  detail::e_step(doc, exp_beta, cfg, post);
  const Eigen::Index K = post.gamma.size();
  double bound = 0;
  for (Eigen::Index j = 0; j < post.counts.size(); ++j) bound += post.counts(j) * std::log(post.phinorm(j));
  const double dsum = detail::digamma(post.gamma.sum());
  for (Eigen::Index k = 0; k < K; ++k) {
    const double elog = detail::digamma(post.gamma(k)) - dsum;
    bound += (cfg.alpha - post.gamma(k)) * elog + std::lgamma(post.gamma(k)) - std::lgamma(cfg.alpha);
  }
  bound += std::lgamma(cfg.alpha * static_cast<double>(K)) - std::lgamma(post.gamma.sum());
  n_tokens += post.counts.sum();
  return bound;
}

inline double perplexity(const TopicModelState& state, std::span<const DocTermCounts> docs) {
  const Eigen::MatrixXd exp_beta = detail::exp_elog_beta(state.lambda);
  double bound = 0, n = 0;
  for (const auto& d : docs) bound += doc_bound(d, exp_beta, state.config, n);
  if (n == 0) throw Error(ErrorCode::EmptyBatch, "perplexity of an empty corpus");
  return std::exp(-bound / n);
}

// n highest-lambda term indices of a topic, ties by index.
inline std::vector<std::size_t> top_token_indices(const TopicModelState& state, int topic, std::size_t n) {
  if (topic < 0 || topic >= state.K()) throw Error(ErrorCode::DimMismatch, "topic index out of range");
  std::vector<std::size_t> idx(state.V());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  n = std::min(n, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(), [&](auto a, auto b) {
    const double la = state.lambda(topic, static_cast<Eigen::Index>(a));
    const double lb = state.lambda(topic, static_cast<Eigen::Index>(b));
    return la != lb ? la > lb : a < b;
  });
  idx.resize(n);
  return idx;
}

inline std::vector<std::string> top_tokens(const TopicModelState& state, const textprep::Vocabulary& vocab,
                                           int topic, std::size_t n = 10) {
  std::vector<std::string> out;
  for (auto i : top_token_indices(state, topic, n)) out.push_back(vocab.term(i));
  return out;
}

// ---- olda_state_<year>.bin --------------------------------------------------

inline void write_state(const std::filesystem::path& path, const TopicModelState& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  binary::write_magic(out, "OLDA");
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.K()));
  binary::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.V()));
  binary::write_le<std::uint64_t>(out, s.update_count);
  binary::write_le<std::uint64_t>(out, s.seed);
  for (Eigen::Index k = 0; k < s.lambda.rows(); ++k) {
    for (Eigen::Index w = 0; w < s.lambda.cols(); ++w) binary::write_le<double>(out, s.lambda(k, w));
  }
}

inline TopicModelState read_state(const std::filesystem::path& path, const OldaConfig& config, int vocab_year) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  binary::expect_magic(in, "OLDA");
  TopicModelState s;
  s.config = config;
  s.vocab_year = vocab_year;
  const auto K = binary::read_le<std::uint32_t>(in);
  const auto V = binary::read_le<std::uint32_t>(in);
  if (static_cast<int>(K) != config.K) throw Error(ErrorCode::DimMismatch, path.string() + ": K differs from config");
  s.update_count = binary::read_le<std::uint64_t>(in);
  s.seed = binary::read_le<std::uint64_t>(in);
  s.lambda.resize(K, V);
  for (Eigen::Index k = 0; k < s.lambda.rows(); ++k) {
    for (Eigen::Index w = 0; w < s.lambda.cols(); ++w) s.lambda(k, w) = binary::read_le<double>(in);
  }
  return s;
}

}  // namespace earnsig::topics
