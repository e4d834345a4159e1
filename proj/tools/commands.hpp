#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "crowdsim/harness.hpp"
#include "crowdsim/io.hpp"

namespace crowdsim::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;
inline constexpr int kExitMismatch = 4;

struct CommonOptions {
  std::optional<std::uint64_t> seed;
  std::optional<int> rounds;
  bool smoke = false;  // shrink episodes, rounds and round length for a quick pipeline check
};

/// Applies --seed, --rounds and --smoke overrides.
ScenarioConfig apply_overrides(ScenarioConfig config, const CommonOptions& options);

/// Writes <team>.ckpt for each learning team, periodic checkpoints under
/// checkpoints/, training.csv and manifest.json.
TrainResult cmd_train(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                      const CommonOptions& options, std::ostream& log);

/// Checkpoints are given righteous first; a single checkpoint is shared by
/// every learning team. Writes the stats export and one replay per round
/// under replays/.
MatchSummary cmd_match(const std::filesystem::path& config_path,
                       const std::vector<std::filesystem::path>& checkpoints,
                       const std::filesystem::path& out_dir, const CommonOptions& options,
                       std::ostream& log, int threads = 1);

io::VerifyReport cmd_replay_verify(const std::filesystem::path& replay_path, std::ostream& log);

/// Curves for replay_a; with replay_b also dominant-path comparisons.
void cmd_metrics(const std::filesystem::path& replay_a,
                 const std::optional<std::filesystem::path>& replay_b,
                 const std::filesystem::path& out_dir, std::ostream& log);

std::filesystem::path replay_name(int round);

}  // namespace crowdsim::cli
