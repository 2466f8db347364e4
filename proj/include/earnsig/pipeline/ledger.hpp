#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "earnsig/common/error.hpp"
#include "earnsig/common/hash.hpp"

namespace earnsig::pipeline {

namespace fs = std::filesystem;

// A declared stage input. A set input (members non-empty) hashes the list of
// member paths and their contents as one entry.
struct InputRef {
  std::string key;
  fs::path path;
  std::vector<fs::path> members;
};

inline InputRef file_input(const fs::path& p) { return {p.lexically_normal().string(), p, {}}; }

// Content hashes memoized on (size, mtime) for the life of the process.
class HashCache {
 public:
  std::string file(const fs::path& p) {
    std::error_code ec;
    const auto size = fs::file_size(p, ec);
    if (ec) throw Error(ErrorCode::MissingUpstream, "missing artifact " + p.string());
    const auto mtime = fs::last_write_time(p).time_since_epoch().count();
    auto& e = memo_[fs::absolute(p).lexically_normal().string()];
    if (e.hash.empty() || e.size != size || e.mtime != mtime) e = {size, mtime, sha256_file(p)};
    return e.hash;
  }

  std::string input(const InputRef& in) {
    if (in.members.empty()) return file(in.path);
    Sha256 h;
    for (const auto& m : in.members) {
      h.update(m.lexically_relative(in.path.parent_path()).generic_string());
      h.update("\t");
      h.update(file(m));
      h.update("\n");
    }
    return h.hex();
  }

 private:
  struct Entry {
    std::uintmax_t size = 0;
    std::int64_t mtime = 0;
    std::string hash;
  };
  std::map<std::string, Entry> memo_;
};

struct StageRecord {
  std::map<std::string, std::string> inputs;   // key -> sha256
  std::map<std::string, std::string> outputs;  // path relative to the output dir -> sha256
  std::string config_hash;
  double seconds = 0.0;
  bool cache_hit = false;
  std::vector<std::string> warnings;
};

// ledger.json in the output directory; one record per stage.
class RunLedger {
 public:
  explicit RunLedger(fs::path output_dir) : dir_(std::move(output_dir)) {}

  fs::path path() const { return dir_ / "ledger.json"; }

  static RunLedger load(const fs::path& output_dir) {
    RunLedger l(output_dir);
    std::ifstream in(l.path());
    if (!in) return l;
    try {
      const auto j = nlohmann::json::parse(in);
      for (const auto& [name, s] : j.at("stages").items()) {
        StageRecord r;
        r.inputs = s.at("inputs").get<std::map<std::string, std::string>>();
        r.outputs = s.at("outputs").get<std::map<std::string, std::string>>();
        r.config_hash = s.at("config_hash").get<std::string>();
        r.seconds = s.value("seconds", 0.0);
        r.cache_hit = s.value("cache_hit", false);
        r.warnings = s.value("warnings", std::vector<std::string>{});
        l.stages_[name] = std::move(r);
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, l.path().string() + ": " + e.what());
    }
    return l;
  }

  const StageRecord* find(const std::string& stage) const {
    auto it = stages_.find(stage);
    return it == stages_.end() ? nullptr : &it->second;
  }
  void put(const std::string& stage, StageRecord r) { stages_[stage] = std::move(r); }
  const std::map<std::string, StageRecord>& stages() const { return stages_; }

  // Written through a temporary file and renamed into place.
  void save() const {
    nlohmann::json j;
    j["stages"] = nlohmann::json::object();
    for (const auto& [name, r] : stages_) {
      j["stages"][name] = {{"inputs", r.inputs},   {"outputs", r.outputs}, {"config_hash", r.config_hash},
                           {"seconds", r.seconds}, {"cache_hit", r.cache_hit}, {"warnings", r.warnings}};
    }
    fs::create_directories(dir_);
    const auto tmp = path().string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary);
      if (!out) throw Error(ErrorCode::IoError, "cannot write " + tmp);
      out << j.dump(2) << '\n';
    }
    fs::rename(tmp, path());
  }

  // Output hashes of every stage, for comparing two runs.
  std::map<std::string, std::string> artifact_hashes() const {
    std::map<std::string, std::string> out;
    for (const auto& [name, r] : stages_) {
      for (const auto& [p, h] : r.outputs) out[p] = h;
    }
    return out;
  }

 private:
  fs::path dir_;
  std::map<std::string, StageRecord> stages_;
};

}  // namespace earnsig::pipeline
