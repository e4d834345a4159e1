#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "crowdsim/errors.hpp"

namespace fs = std::filesystem;
using namespace crowdsim;

int main(int argc, char** argv) {
  CLI::App app{"crowdsim: adversarial crowd simulation with emotional contagion"};
  app.require_subcommand(1);

  std::string config;
  std::string out = "out";
  std::uint64_t seed = 0;
  int rounds = 0;
  bool smoke = false;
  int threads = 1;
  std::vector<std::string> checkpoints;
  std::string replay;
  std::vector<std::string> replays;

  auto add_common = [&](CLI::App* sub, bool with_rounds) {
    sub->add_option("--config", config, "Scenario JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the scenario seed");
    sub->add_option("--out", out, "Output directory");
    sub->add_flag("--smoke", smoke, "Tiny run for pipeline checks");
    if (with_rounds) sub->add_option("--rounds", rounds, "Override the round count")->check(CLI::PositiveNumber);
  };

  CLI::App* train = app.add_subcommand("train", "Self-play training; writes checkpoints");
  add_common(train, false);
  CLI::App* match = app.add_subcommand("match", "Evaluate frozen checkpoints over many rounds");
  add_common(match, true);
  match->add_option("--checkpoint", checkpoints, "Checkpoint (righteous first, then opposite)");
  match->add_option("--threads", threads, "Rounds evaluated in parallel")->check(CLI::PositiveNumber);
  CLI::App* verify = app.add_subcommand("replay-verify", "Re-simulate a replay and compare");
  verify->add_option("replay", replay, "Replay file")->required();
  CLI::App* metrics = app.add_subcommand("metrics", "Curves and path comparisons from replays");
  metrics->add_option("replays", replays, "One or two replay files")->required()->expected(1, 2);
  metrics->add_option("--out", out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitConfig;
  }

  cli::CommonOptions options;
  options.smoke = smoke;
  try {
    if (*train) {
      if (train->count("--seed")) options.seed = seed;
      cli::cmd_train(config, out, options, std::cerr);
    } else if (*match) {
      if (match->count("--seed")) options.seed = seed;
      if (match->count("--rounds")) options.rounds = rounds;
      std::vector<fs::path> paths(checkpoints.begin(), checkpoints.end());
      cli::cmd_match(config, paths, out, options, std::cerr, threads);
    } else if (*verify) {
      if (!cli::cmd_replay_verify(replay, std::cout).ok) return cli::kExitMismatch;
    } else if (*metrics) {
      std::optional<fs::path> second;
      if (replays.size() == 2) second = replays[1];
      cli::cmd_metrics(replays[0], second, out, std::cerr);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kExitRuntime;
  }
  return cli::kExitOk;
}
