#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>

#include "earnsig/pipeline/runner.hpp"
#include "earnsig/pipeline/synthetic.hpp"

namespace ep = earnsig::pipeline;

namespace {

int run_synth(const ep::PipelineConfig& cfg) {
  if (!cfg.seed_set) throw earnsig::Error(earnsig::ErrorCode::ConfigInvalid, "config must set an explicit seed");
  const auto s = ep::make_synthetic(cfg.synth, ep::derive_seed(cfg.seed, "synth"));
  std::printf("synth  %s  documents=%zu events=%zu quotes=%zu files=%zu\n", cfg.synth.out_dir.string().c_str(),
              s.documents, s.events, s.quote_rows, s.files.size());
  return 0;
}

int run_stages(const ep::PipelineConfig& cfg, const std::string& stage, bool force) {
  for (const auto& o : ep::run(cfg, stage, force)) {
    std::printf("%-10s %-6s %8.2fs  outputs=%zu  warnings=%zu\n", o.name.c_str(), o.cache_hit ? "cached" : "ran",
                o.seconds, o.outputs, o.warnings.size());
    for (const auto& w : o.warnings) std::fprintf(stderr, "  [%s] %s\n", o.name.c_str(), w.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Earnings-announcement text signals pipeline"};
  std::string config_path, stage;
  bool force = false;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "Pipeline config (JSON)")->required();
  app.add_option("--stage", stage, "Stage to run when no command is given");
  app.add_flag("--force", force, "Ignore cached stage results");
  auto* seed_opt = app.add_option("--seed", seed, "Override the config seed");
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::vector<std::string> commands(ep::stage_order());
  commands.push_back("synth");
  commands.push_back("all");
  for (const auto& c : commands) app.add_subcommand(c, c == "all" ? "Run every stage" : "Run the " + c + " stage");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  std::string command = stage;
  for (auto* sub : app.get_subcommands()) command = sub->get_name();
  if (command.empty()) {
    std::cerr << "no command given; use one of the subcommands or --stage\n";
    return 2;
  }

  try {
    auto cfg = ep::load_config(config_path);
    if (seed_opt->count()) {
      cfg.seed = seed;
      cfg.seed_set = true;
    }
    if (command == "synth") return run_synth(cfg);
    return run_stages(cfg, command, force);
  } catch (const earnsig::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return earnsig::exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
