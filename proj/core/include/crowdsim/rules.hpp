#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "crowdsim/types.hpp"
#include "crowdsim/world.hpp"

namespace crowdsim {

struct RuleParams {
  double threshold = 0.5;    // T: |E| above it means aggressive
  double emotion_gap = 0.2;  // E_th: emotions closer than this count as even

  void validate() const;
  friend bool operator==(const RuleParams&, const RuleParams&) = default;
};

enum class CombatState { Aggressive, Conservative };

/// Aggressive iff |E| > T; the boundary belongs to Conservative.
CombatState classify_state(double emotion, const RuleParams& params);

/// An opponent inside the attack range (the 8-neighborhood).
struct EnemyCandidate {
  AgentId id = 0;
  int direction = 0;  // index into kNeighborOffsets
  double distance = 0.0;
  double abs_emotion = 0.0;
  CombatState state = CombatState::Conservative;
};

enum class CellContent { Empty, Wall, Teammate, Enemy };

/// What the arbiter needs to know about an agent's surroundings.
struct Neighborhood {
  std::array<CellContent, 8> adjacent{};
  std::array<double, 8> adjacent_abs_emotion{};  // meaningful where adjacent == Enemy
  std::vector<EnemyCandidate> enemies_in_range;
  int partners = 0;   // teammates in the perception window, self excluded
  int opponents = 0;  // enemies in the perception window
};

Neighborhood summarize_neighborhood(const WorldState& world, AgentId agent, int window,
                                    const RuleParams& params);

enum class FallbackMode { NearestConservative, MinAbsEmotion };

/// NearestConservative: Conservative candidates only, minimum distance, then
/// minimum |E|, then lowest id. MinAbsEmotion: minimum |E|, then distance,
/// then lowest id.
std::optional<EnemyCandidate> select_fallback_target(std::span<const EnemyCandidate> candidates,
                                                     FallbackMode mode);

/// Highest-Q action among idle and the eight moves, ties to the lowest id.
ActionId best_move_type_action(std::span<const double> q_values);

/// Accepts or overrides the network's predicted action according to the
/// agent's combat state and the emotions of the opponents around it.
ActionId determine_action(double own_emotion, ActionId predicted, std::span<const double> q_values,
                          const Neighborhood& neighborhood, const RuleParams& params);

inline ActionId determine_action(const AgentState& agent, ActionId predicted,
                                 std::span<const double> q_values,
                                 const Neighborhood& neighborhood, const RuleParams& params) {
  return determine_action(agent.emotion, predicted, q_values, neighborhood, params);
}

}  // namespace crowdsim
