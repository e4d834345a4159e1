#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "crowdsim/types.hpp"

namespace crowdsim {

class GridMap {
 public:
  GridMap() = default;
  GridMap(int width, int height, std::vector<Cell> walls = {});

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<Cell>& walls() const { return walls_; }

  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
  bool is_wall(Cell c) const { return wall_mask_[index(c)] != 0; }
  /// Out-of-bounds cells count as blocked.
  bool blocked(Cell c) const { return !in_bounds(c) || is_wall(c); }
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y) * width_ + c.x; }
  std::size_t cell_count() const { return static_cast<std::size_t>(width_) * height_; }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Cell> walls_;
  std::vector<std::uint8_t> wall_mask_;
};

/// Inclusive axis-aligned cell rectangle.
struct Region {
  Cell min{};
  Cell max{};

  bool contains(Cell c) const {
    return c.x >= min.x && c.x <= max.x && c.y >= min.y && c.y <= max.y;
  }
  int area() const { return (max.x - min.x + 1) * (max.y - min.y + 1); }
  /// Euclidean distance from c to the closest cell of the region.
  double distance_to(Cell c) const;

  friend bool operator==(const Region&, const Region&) = default;
};

struct DamageParams {
  double beta = 2.0;
  double base_hp = 10.0;
  double emotion_cap = 0.99;

  void validate() const;
  friend bool operator==(const DamageParams&, const DamageParams&) = default;
};

struct RewardConstants {
  static constexpr double kMoveCost = -0.005;
  static constexpr double kHitEnemy = 0.2;
  static constexpr double kSubdue = 5.0;
  static constexpr double kAttackEmpty = -0.1;
  static constexpr double kBeingAttacked = -0.1;
};

struct AgentState {
  AgentId id = 0;
  Team team = Team::Righteous;
  Cell pos{};
  double hp = 0.0;
  double emotion = 0.0;
  ActionId last_action = kIdleAction;
  bool alive = true;
};

struct TeamSetup {
  int size = 0;
  double emotion_lo = 0.0;
  double emotion_hi = 0.0;
  Region spawn{};
};

struct WorldConfig {
  GridMap map;
  std::array<TeamSetup, 2> teams{};
  DamageParams damage{};
  int max_steps = 400;

  void validate() const;
};

struct AttackOutcome {
  bool hit = false;
  std::optional<AgentId> target;
  double damage = 0.0;
  bool subdued = false;
  double attacker_reward = 0.0;
  double target_reward = 0.0;
};

struct StepResult {
  std::vector<double> rewards;  // indexed by agent id
  bool terminal = false;
};

class WorldState {
 public:
  WorldState() = default;
  WorldState(GridMap map, DamageParams damage, int max_steps, std::vector<AgentState> agents);

  const GridMap& map() const { return map_; }
  const DamageParams& damage() const { return damage_; }
  int max_steps() const { return max_steps_; }
  int step_count() const { return step_; }
  bool terminal() const { return terminal_; }

  std::span<const AgentState> agents() const { return agents_; }
  std::size_t agent_count() const { return agents_.size(); }
  /// Agent ids are dense indices starting at 0.
  const AgentState& agent(AgentId id) const;
  int alive_count(Team t) const;
  std::optional<AgentId> occupant(Cell c) const;

  /// Emotion writes are clamped into the team range.
  void set_emotion(AgentId id, double emotion);

  /// 64-bit FNV-1a digest over the full dynamic state.
  std::uint64_t hash() const;

 private:
  friend AttackOutcome apply_attack(const AgentState&, Cell, WorldState&, const DamageParams&);
  friend StepResult step(WorldState&, std::span<const ActionId>);

  AgentState& mutable_agent(AgentId id);
  void refresh_terminal();

  GridMap map_;
  DamageParams damage_{};
  int max_steps_ = 400;
  int step_ = 0;
  bool terminal_ = false;
  std::vector<AgentState> agents_;
  std::vector<AgentId> occupancy_;
};

/// Damage dealt by an attacker with the given emotion:
/// beta * log_{1/2}(1 - min(|E|, cap)).
double attack_damage(double attacker_emotion, const DamageParams& params);

WorldState reset(const WorldConfig& config, std::uint64_t seed);

/// Always the full fixed action space. Moves that cannot be carried out are
/// still legal and resolve as idle.
std::vector<ActionId> legal_actions(const WorldState& world, AgentId agent);

/// True when a move-type action of this agent would resolve as idle given
/// the current occupancy.
bool move_resolves_idle(const WorldState& world, AgentId agent, ActionId action);

/// Resolves a single attack immediately against the world.
AttackOutcome apply_attack(const AgentState& attacker, Cell target_cell, WorldState& world,
                           const DamageParams& params);

/// Advances one step. joint_actions is indexed by agent id; dead agents may
/// hold kNoAction. Attacks resolve simultaneously before moves.
StepResult step(WorldState& world, std::span<const ActionId> joint_actions);

struct Observation {
  int window = 0;
  /// window x window x 3, channel-fastest: ((dy * window + dx) * 3 + channel).
  std::vector<double> occupancy;
  std::vector<double> features;
  std::vector<AgentId> neighbors;
};

inline constexpr int kOccupancyChannels = 3;
inline constexpr int kChannelOwn = 0;
inline constexpr int kChannelEnemy = 1;
inline constexpr int kChannelWall = 2;

// Feature layout: x, y (normalized), emotion, last-action one-hot, hp fraction, id scalar.
inline constexpr int kFeatureEmotion = 2;
inline constexpr int kFeatureLastAction = 3;
inline constexpr int kFeatureHp = kFeatureLastAction + kNumActions;
inline constexpr int kFeatureId = kFeatureHp + 1;
inline constexpr int kFeatureDim = kFeatureId + 1;

Observation perceive(const WorldState& world, AgentId agent, int window = 9);

/// Alive agents (either team, excluding self) inside the square window.
std::vector<AgentId> neighbors_in_window(const WorldState& world, AgentId agent, int window);

}  // namespace crowdsim
