#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crowdsim/harness.hpp"
#include "crowdsim/metrics.hpp"

namespace crowdsim::io {

/// Parses a JSON scenario. Only `map` and `teams` are required; every other
/// field falls back to its default. Syntax errors report line and column,
/// semantic errors the dotted field path.
ScenarioConfig parse_config(std::string_view text, std::string_view source = "<config>");
ScenarioConfig load_config(const std::filesystem::path& path);

/// Config with every default materialized, spawn bands included.
ScenarioConfig resolve(const ScenarioConfig& config);

/// Canonical JSON (sorted keys). indent < 0 gives the compact form.
std::string to_json(const ScenarioConfig& config, int indent = 2);
/// FNV-1a over the compact canonical JSON.
std::uint64_t config_hash(const ScenarioConfig& config);
std::string hex(std::uint64_t v);

inline constexpr std::string_view kReplayFormat = "crowdsim-replay";
inline constexpr int kReplayVersion = 1;

struct Replay {
  ScenarioConfig config;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::vector<AgentState> roster;
  std::uint64_t initial_hash = 0;
  std::vector<StepRecord> steps;
  Winner winner = Winner::Draw;
};

/// Line-delimited JSON: one header line, one line per step, one end line.
void write_replay(std::ostream& out, const ScenarioConfig& config, const RoundResult& round);
void write_replay(const std::filesystem::path& path, const ScenarioConfig& config,
                  const RoundResult& round);
/// Throws FormatError on malformed or truncated input.
Replay read_replay(std::istream& in);
Replay read_replay(const std::filesystem::path& path);

struct VerifyReport {
  bool ok = true;
  std::optional<int> divergent_step;  // 0 refers to the initial state
  std::string detail;
};

/// Re-simulates the round from the header seed and the recorded executed
/// actions, comparing state hashes and recorded fields step by step.
VerifyReport verify_replay(const Replay& replay);

metrics::TrajectoryLog trajectory(const Replay& replay);
metrics::TrajectoryLog trajectory(const RoundResult& round);

/// Round picked for inspection, a pure function of the scenario seed.
int inspect_round(const ScenarioConfig& config, int rounds);

/// Writes summary.json, rounds.csv and curves.csv into out_dir.
void write_match_stats(const std::filesystem::path& out_dir, const ScenarioConfig& config,
                       const MatchSummary& summary);

/// Fixed-format number for CSV output; "inf"/"-inf"/"nan" for non-finite values.
std::string format_number(double v);

}  // namespace crowdsim::io
