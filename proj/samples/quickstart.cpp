// Generates a small synthetic dataset, runs every stage, prints the
// return regressions.
//
//   quickstart [work_dir]

#include <cstdio>
#include <fstream>
#include <iostream>

#include "earnsig/pipeline/runner.hpp"
#include "earnsig/pipeline/synthetic.hpp"

namespace ep = earnsig::pipeline;
namespace fs = std::filesystem;

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "earnsig_quickstart";
  const auto data = (work / "synthetic").string();
  const nlohmann::json j = {
      {"seed", 42},
      {"output_dir", (work / "run").string()},
      {"inputs",
       {{"manifest", data + "/manifest.csv"},
        {"events", data + "/events.csv"},
        {"forecasts", data + "/forecasts.csv"},
        {"calendar", data + "/calendar.txt"},
        {"quotes", data + "/quotes.csv"},
        {"factors", data + "/factors.csv"},
        {"taxonomy", data + "/taxonomy.json"},
        {"embedding_dir", data + "/embeddings"}}},
      {"years", {{"first", 2012}, {"last", 2015}}},
      {"olda", {{"K", 10}}},
      {"lasso", {{"lambda", 1e-3}}},
      {"synth", {{"out_dir", data}, {"first_year", 2012}, {"years", 4}, {"firms", 150}, {"announce_days_per_quarter", 6}}},
  };

  try {
    const auto cfg = ep::config_from_json(j, work);
    const auto s = ep::make_synthetic(cfg.synth, ep::derive_seed(cfg.seed, "synth"));
    std::printf("synthetic: %zu documents, %zu events\n", s.documents, s.events);
    for (const auto& o : ep::run(cfg, "all")) {
      std::printf("  %-10s %s %.2fs\n", o.name.c_str(), o.cache_hit ? "cached" : "ran   ", o.seconds);
    }
    std::ifstream in(cfg.output_dir / "regress/reg_oos.txt");
    std::cout << '\n' << in.rdbuf();
  } catch (const earnsig::Error& e) {
    std::cerr << e.what() << '\n';
    return earnsig::exit_code(e.code());
  }
}
