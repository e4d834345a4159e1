#include "crowdsim/rules.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crowdsim/errors.hpp"

namespace crowdsim {

namespace {

// Keep the prediction when the agent is stronger or the two are close.
bool holds_its_ground(double own_abs, double target_abs, double gap) {
  return own_abs > target_abs || std::abs(own_abs - target_abs) < gap;
}

bool nearer(const EnemyCandidate& a, const EnemyCandidate& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  if (a.abs_emotion != b.abs_emotion) return a.abs_emotion < b.abs_emotion;
  return a.id < b.id;
}

bool calmer(const EnemyCandidate& a, const EnemyCandidate& b) {
  if (a.abs_emotion != b.abs_emotion) return a.abs_emotion < b.abs_emotion;
  if (a.distance != b.distance) return a.distance < b.distance;
  return a.id < b.id;
}

}  // namespace

void RuleParams::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("rules.T must lie in (0,1)");
  if (!(emotion_gap > 0.0)) throw ConfigError("rules.e_th must be > 0");
}

CombatState classify_state(double emotion, const RuleParams& params) {
  return std::abs(emotion) > params.threshold ? CombatState::Aggressive
                                              : CombatState::Conservative;
}

Neighborhood summarize_neighborhood(const WorldState& world, AgentId agent, int window,
                                    const RuleParams& params) {
  const AgentState& self = world.agent(agent);
  if (!self.alive) throw QueryError("neighborhood of a dead agent");
  Neighborhood n;
  for (int d = 0; d < 8; ++d) {
    const Cell c = self.pos + kNeighborOffsets[d];
    if (world.map().blocked(c)) {
      n.adjacent[d] = CellContent::Wall;
      continue;
    }
    const auto occ = world.occupant(c);
    if (!occ) {
      n.adjacent[d] = CellContent::Empty;
      continue;
    }
    const AgentState& other = world.agents()[*occ];
    if (other.team == self.team) {
      n.adjacent[d] = CellContent::Teammate;
      continue;
    }
    n.adjacent[d] = CellContent::Enemy;
    n.adjacent_abs_emotion[d] = std::abs(other.emotion);
    n.enemies_in_range.push_back(
        {other.id, d, std::hypot(kNeighborOffsets[d].x, kNeighborOffsets[d].y),
         std::abs(other.emotion), classify_state(other.emotion, params)});
  }
  for (AgentId id : neighbors_in_window(world, agent, window)) {
    (world.agents()[id].team == self.team ? n.partners : n.opponents) += 1;
  }
  return n;
}

std::optional<EnemyCandidate> select_fallback_target(std::span<const EnemyCandidate> candidates,
                                                     FallbackMode mode) {
  std::optional<EnemyCandidate> best;
  for (const EnemyCandidate& c : candidates) {
    if (mode == FallbackMode::NearestConservative) {
      if (c.state != CombatState::Conservative) continue;
      if (!best || nearer(c, *best)) best = c;
    } else if (!best || calmer(c, *best)) {
      best = c;
    }
  }
  return best;
}

ActionId best_move_type_action(std::span<const double> q_values) {
  if (q_values.size() < static_cast<std::size_t>(kNumActions)) {
    throw ContractViolation("arbiter needs the full Q vector");
  }
  return static_cast<ActionId>(
      std::max_element(q_values.begin(), q_values.begin() + kNumMoveTypeActions) -
      q_values.begin());
}

ActionId determine_action(double own_emotion, ActionId predicted, std::span<const double> q_values,
                          const Neighborhood& neighborhood, const RuleParams& params) {
  if (!is_valid_action(predicted)) throw ContractViolation("predicted action out of range");
  const double own_abs = std::abs(own_emotion);
  const bool aggressive = classify_state(own_emotion, params) == CombatState::Aggressive;
  const auto& enemies = neighborhood.enemies_in_range;
  auto attack = [](const EnemyCandidate& c) { return attack_action(c.direction); };

  if (!is_attack(predicted)) {
    if (!aggressive) return predicted;
    std::vector<EnemyCandidate> conservative;
    std::copy_if(enemies.begin(), enemies.end(), std::back_inserter(conservative),
                 [](const EnemyCandidate& c) { return c.state == CombatState::Conservative; });
    if (conservative.empty()) return predicted;
    return attack(*select_fallback_target(conservative, FallbackMode::MinAbsEmotion));
  }

  const int dir = predicted - kFirstAttackAction;
  if (neighborhood.adjacent[dir] != CellContent::Enemy) {
    if (!aggressive) return best_move_type_action(q_values);
    if (auto t = select_fallback_target(enemies, FallbackMode::NearestConservative)) return attack(*t);
    if (!enemies.empty()) return attack(*std::min_element(enemies.begin(), enemies.end(), nearer));
    return best_move_type_action(q_values);
  }

  const double target_abs = neighborhood.adjacent_abs_emotion[dir];
  if (holds_its_ground(own_abs, target_abs, params.emotion_gap)) return predicted;

  if (aggressive) {
    if (neighborhood.partners < neighborhood.opponents) return best_move_type_action(q_values);
    return attack(*select_fallback_target(enemies, FallbackMode::MinAbsEmotion));
  }
  if (own_abs > params.threshold / 2.0) {
    // Walk down the attack-type Q ranking to the first other cell holding an enemy.
    std::array<ActionId, 8> ranking{};
    std::iota(ranking.begin(), ranking.end(), kFirstAttackAction);
    std::stable_sort(ranking.begin(), ranking.end(),
                     [&](ActionId a, ActionId b) { return q_values[a] > q_values[b]; });
    for (ActionId a : ranking) {
      if (a == predicted) continue;
      if (neighborhood.adjacent[a - kFirstAttackAction] == CellContent::Enemy) return a;
    }
  }
  return best_move_type_action(q_values);
}

}  // namespace crowdsim
