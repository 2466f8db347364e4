#pragma once

// Small synthetic dataset plus a pipeline config pointing at it.

#include <filesystem>
#include <functional>
#include <nlohmann/json.hpp>

#include "earnsig/pipeline/config.hpp"
#include "earnsig/pipeline/synthetic.hpp"

namespace earnsig::test_support {

namespace fs = std::filesystem;

inline nlohmann::json small_config_json(const fs::path& root) {
  const auto d = (root / "synthetic").string();
  return {
      {"seed", 11},
      {"output_dir", (root / "run").string()},
      {"inputs",
       {{"manifest", d + "/manifest.csv"},
        {"events", d + "/events.csv"},
        {"forecasts", d + "/forecasts.csv"},
        {"calendar", d + "/calendar.txt"},
        {"quotes", d + "/quotes.csv"},
        {"factors", d + "/factors.csv"},
        {"taxonomy", d + "/taxonomy.json"},
        {"embedding_dir", d + "/embeddings"}}},
      {"years", {{"first", 2010}, {"last", 2013}}},
      {"olda", {{"K", 8}, {"passes", 1}}},
      {"lasso", {{"lambda", 1e-3}}},
      {"precision", {{"ks", {5, 10}}, {"min_announcements", 20}}},
      {"synth",
       {{"out_dir", d}, {"first_year", 2010}, {"years", 4}, {"firms", 120}, {"announce_days_per_quarter", 5},
        {"token_docs_per_year", 3}}},
  };
}

// Writes the dataset under root/synthetic; `tweak` edits the config first.
inline pipeline::PipelineConfig make_small(const fs::path& root,
                                           const std::function<void(nlohmann::json&)>& tweak = {}) {
  fs::remove_all(root);
  fs::create_directories(root);
  auto j = small_config_json(root);
  if (tweak) tweak(j);
  auto cfg = pipeline::config_from_json(j, root);
  pipeline::make_synthetic(cfg.synth, pipeline::derive_seed(cfg.seed, "synth"));
  return cfg;
}

inline fs::path scratch_root(const std::string& name) { return fs::temp_directory_path() / "earnsig_tests" / name; }

}  // namespace earnsig::test_support
