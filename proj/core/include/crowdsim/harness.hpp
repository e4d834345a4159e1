#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "crowdsim/contagion.hpp"
#include "crowdsim/mfq/learner.hpp"
#include "crowdsim/mfq/network.hpp"
#include "crowdsim/rules.hpp"
#include "crowdsim/world.hpp"

namespace crowdsim {

enum class PolicyKind { Acsed, MfqBlind, Random, Scripted };
enum class ScriptedMode { Idle, AttackAdjacent, Chase };

std::string_view to_string(PolicyKind p);
std::string_view to_string(ScriptedMode m);
/// Case-insensitive: "acsed", "mfq_blind", "random", "scripted".
PolicyKind parse_policy(std::string_view text);
/// Case-insensitive: "idle", "attack_adjacent", "chase".
ScriptedMode parse_scripted_mode(std::string_view text);

constexpr bool is_learning(PolicyKind p) {
  return p == PolicyKind::Acsed || p == PolicyKind::MfqBlind;
}

struct TeamConfig {
  int size = 0;
  double emotion_lo = 0.0;
  double emotion_hi = 0.0;
  std::optional<Region> spawn;  // default: a band facing the other team
  PolicyKind policy = PolicyKind::Acsed;
  ScriptedMode scripted = ScriptedMode::Idle;
  friend bool operator==(const TeamConfig&, const TeamConfig&) = default;
};

struct GateConfig {
  Region region{};
  double threshold = 3.0;  // cells
  double penalty = -0.01;
  bool retreat_rule = true;
  double retreat_drop = 0.3;  // fraction of opposite survivors lost ...
  int retreat_window = 20;    // ... within this many steps
  friend bool operator==(const GateConfig&, const GateConfig&) = default;
};

struct ScenarioConfig {
  int width = 0;
  int height = 0;
  std::vector<Cell> walls;
  std::array<TeamConfig, 2> teams{};
  RuleParams rules{};
  ContagionParams contagion{};
  DamageParams damage{};
  mfq::TrainConfig train{};
  mfq::NetShape network{};  // network.window is also the perception window
  double match_epsilon = 0.0;
  int rounds = 50;
  std::uint64_t seed = 0;
  std::optional<GateConfig> gate;

  const TeamConfig& team(Team t) const { return teams[index_of(t)]; }
  TeamConfig& team(Team t) { return teams[index_of(t)]; }
  int window() const { return network.window; }
  void validate() const;
  /// World setup with default spawn bands materialized.
  WorldConfig world_config() const;
  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

/// Default spawn band for a team: columns on its own side of the map center,
/// wide enough to hold the team at half density.
Region default_spawn(int width, int height, Team team, int size);

enum class Winner { Righteous, Opposite, Draw };
std::string_view to_string(Winner w);

struct AgentRecord {
  AgentId id = 0;
  Cell pos{};
  ActionId executed = kNoAction;
  ActionId predicted = kNoAction;
  double emotion = 0.0;
  double hp = 0.0;
  double reward = 0.0;
  bool alive = true;
};

struct StepRecord {
  int step = 0;
  std::vector<AgentRecord> agents;
  std::uint64_t hash = 0;
  bool terminal = false;
};

struct RoundResult {
  std::uint64_t seed = 0;
  Winner winner = Winner::Draw;
  int steps = 0;
  // Index 0 is the initial state, index k the state after step k.
  std::array<std::vector<int>, 2> survivors;
  std::array<std::vector<double>, 2> mean_emotion;
  std::array<double, 2> mean_return{};  // per-agent mean of summed rewards
  std::vector<AgentState> initial;
  std::uint64_t initial_hash = 0;
  std::vector<StepRecord> trace;  // filled when requested
};

/// Latching detector for a large-scale opposite retreat.
class RetreatMonitor {
 public:
  RetreatMonitor() = default;
  RetreatMonitor(double drop, int window) : drop_(drop), window_(window) {}
  /// Feed the opposite alive count after each step (and once before the first).
  void observe(int opposite_alive);
  bool active() const { return active_; }

 private:
  double drop_ = 0.3;
  int window_ = 20;
  std::vector<int> history_;
  bool active_ = false;
};

struct GateShaping {
  double adjustment = 0.0;
  bool move_to_gate = false;
};

/// Per-step shaping for a righteous agent in a gate scenario.
GateShaping gate_shaping(const AgentState& agent, const GateConfig& gate, bool retreat_active);

/// Move action that brings the agent closest to the gate region.
ActionId toward_gate(const WorldState& world, AgentId agent, const Region& gate);

/// World step followed by scenario shaping and the emotion update. Shared by
/// live rounds and replay verification so both produce the same states.
class RoundEngine {
 public:
  RoundEngine(const ScenarioConfig& config, std::uint64_t seed);

  const WorldState& world() const { return world_; }
  bool retreat_active() const { return monitor_.active(); }
  /// Rewards of the last step after shaping, indexed by agent id.
  const std::vector<double>& rewards() const { return rewards_; }
  StepResult advance(std::span<const ActionId> executed);

 private:
  const ScenarioConfig* config_;
  WorldState world_;
  RetreatMonitor monitor_;
  std::vector<double> rewards_;
  std::vector<double> previous_rewards_;
};

struct TeamNets {
  std::array<const mfq::QNetwork*, 2> nets{};
};

/// Hooks that turn a round into a training episode.
struct TrainingHooks {
  double epsilon = 0.0;
  std::array<mfq::Learner*, 2> learners{};
  std::function<void()> after_step;  // called once per environment step
};

struct RoundOptions {
  bool record_trace = false;
  const TrainingHooks* training = nullptr;
};

RoundResult run_round(const ScenarioConfig& config, std::uint64_t seed, const TeamNets& nets,
                      const RoundOptions& options = {});

std::uint64_t training_round_seed(const ScenarioConfig& config, int episode);
std::uint64_t match_round_seed(const ScenarioConfig& config, int round);

struct EpisodeStats {
  int episode = 0;
  double epsilon = 0.0;
  int steps = 0;
  Winner winner = Winner::Draw;
  std::array<double, 2> mean_return{};
  std::array<std::optional<double>, 2> mean_loss;
};

struct TrainResult {
  std::vector<EpisodeStats> episodes;
  std::array<std::optional<mfq::Learner>, 2> learners;
};

/// Called after every episode; `learners` holds the team learners so callers
/// can checkpoint them.
using EpisodeCallback =
    std::function<void(const EpisodeStats&, const std::array<std::optional<mfq::Learner>, 2>&)>;

/// Self-play training of every learning team for config.train.episodes.
TrainResult train(const ScenarioConfig& config, const EpisodeCallback& on_episode = {});

struct MatchSummary {
  std::vector<RoundResult> rounds;
  std::array<int, 2> wins{};
  int draws = 0;
  double win_rate(Team t) const;
};

/// Frozen-policy evaluation over `rounds` seeded rounds. Rounds may run on
/// several threads; results keep round order.
MatchSummary run_match(const ScenarioConfig& config, const TeamNets& nets, int rounds,
                       bool record_traces = false, int threads = 1);

}  // namespace crowdsim
