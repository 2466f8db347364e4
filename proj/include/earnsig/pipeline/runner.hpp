#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "earnsig/pipeline/config.hpp"
#include "earnsig/pipeline/ledger.hpp"
#include "earnsig/pipeline/stages.hpp"

namespace earnsig::pipeline {

struct StageOutcome {
  std::string name;
  bool cache_hit = false;
  double seconds = 0.0;
  std::size_t outputs = 0;
  std::vector<std::string> warnings;
};

// Bumped when a stage's output format or algorithm changes.
inline constexpr int kArtifactVersion = 1;

inline std::string settings_hash(const nlohmann::json& settings) {
  return sha256_hex(std::to_string(kArtifactVersion) + ":" + settings.dump());
}

namespace detail {

inline bool record_matches(const StageRecord& r, const std::string& config_hash,
                           const std::map<std::string, std::string>& inputs, const fs::path& output_dir,
                           HashCache& hashes) {
  if (r.config_hash != config_hash || r.inputs != inputs) return false;
  for (const auto& [rel, h] : r.outputs) {
    const auto p = output_dir / rel;
    if (!fs::exists(p) || hashes.file(p) != h) return false;
  }
  return true;
}

}  // namespace detail

// Runs one stage, or every stage in order for "all". Upstream stages are never
// run implicitly; a missing input raises MissingUpstream.
inline std::vector<StageOutcome> run(const PipelineConfig& cfg, const std::string& which, bool force = false) {
  cfg.validate();
  const auto stages = build_stages();
  std::vector<const Stage*> selected;
  for (const auto& s : stages) {
    if (which == "all" || s.name == which) selected.push_back(&s);
  }
  if (selected.empty()) throw Error(ErrorCode::ConfigInvalid, "unknown stage '" + which + "'");

  fs::create_directories(cfg.output_dir);
  auto ledger = RunLedger::load(cfg.output_dir);
  HashCache hashes;
  std::vector<StageOutcome> report;
  for (const auto* stage : selected) {
    const auto start = std::chrono::steady_clock::now();
    std::map<std::string, std::string> inputs;
    for (const auto& in : stage->inputs(cfg)) inputs[in.key] = hashes.input(in);
    const auto config_hash = settings_hash(stage->settings(cfg));

    const auto* prev = ledger.find(stage->name);
    if (!force && prev && detail::record_matches(*prev, config_hash, inputs, cfg.output_dir, hashes)) {
      auto r = *prev;
      r.cache_hit = true;
      report.push_back({stage->name, true, 0.0, r.outputs.size(), r.warnings});
      ledger.put(stage->name, std::move(r));
      ledger.save();
      continue;
    }

    const auto dir = cfg.output_dir / stage->name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    StageContext ctx{cfg, dir, {}, {}};
    stage->run(ctx);

    StageRecord r;
    r.inputs = std::move(inputs);
    r.config_hash = config_hash;
    for (const auto& p : ctx.outputs) r.outputs[p.lexically_relative(cfg.output_dir).generic_string()] = hashes.file(p);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    r.warnings = ctx.warnings;
    report.push_back({stage->name, false, r.seconds, r.outputs.size(), r.warnings});
    ledger.put(stage->name, std::move(r));
    ledger.save();
  }
  return report;
}

}  // namespace earnsig::pipeline
