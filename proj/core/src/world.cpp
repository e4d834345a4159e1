#include "crowdsim/world.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <cstdlib>
#include <string>
#include <utility>

#include "crowdsim/errors.hpp"
#include "crowdsim/rng.hpp"

namespace crowdsim {

namespace {

class Fnv1a {
 public:
  void add(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h_ ^= (v >> (8 * i)) & 0xffU;
      h_ *= 0x100000001b3ULL;
    }
  }
  void add(double v) { add(std::bit_cast<std::uint64_t>(v)); }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

bool is_neighbor_offset(Cell d) {
  return std::max(std::abs(d.x), std::abs(d.y)) == 1;
}

}  // namespace

GridMap::GridMap(int width, int height, std::vector<Cell> walls)
    : width_(width), height_(height), walls_(std::move(walls)) {
  if (width_ < 4 || height_ < 4) {
    throw ConfigError("map must be at least 4x4, got " + std::to_string(width_) + "x" +
                      std::to_string(height_));
  }
  wall_mask_.assign(cell_count(), 0);
  std::sort(walls_.begin(), walls_.end());
  walls_.erase(std::unique(walls_.begin(), walls_.end()), walls_.end());
  for (Cell c : walls_) {
    if (!in_bounds(c)) {
      throw ConfigError("wall (" + std::to_string(c.x) + "," + std::to_string(c.y) +
                        ") lies outside the map");
    }
    wall_mask_[index(c)] = 1;
  }
}

double Region::distance_to(Cell c) const {
  const int dx = std::max({min.x - c.x, 0, c.x - max.x});
  const int dy = std::max({min.y - c.y, 0, c.y - max.y});
  return std::hypot(static_cast<double>(dx), static_cast<double>(dy));
}

void DamageParams::validate() const {
  if (!(beta > 0.0)) throw ConfigError("damage.beta must be > 0");
  if (!(base_hp > 0.0)) throw ConfigError("damage.base_hp must be > 0");
  if (!(emotion_cap > 0.0 && emotion_cap < 1.0)) {
    throw ConfigError("damage.emotion_cap must lie in (0,1)");
  }
}

void WorldConfig::validate() const {
  damage.validate();
  if (max_steps < 1) throw ConfigError("max_steps must be >= 1");
  for (Team t : kTeams) {
    const TeamSetup& s = teams[index_of(t)];
    const std::string name(to_string(t));
    if (s.size < 0) throw ConfigError(name + ": team size must be >= 0");
    const auto [lo, hi] = emotion_bounds(t);
    if (s.emotion_lo > s.emotion_hi || s.emotion_lo < lo || s.emotion_hi > hi) {
      throw ConfigError(name + ": emotion range [" + std::to_string(s.emotion_lo) + ", " +
                        std::to_string(s.emotion_hi) + "] outside team bounds [" +
                        std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    if (s.size == 0) continue;
    if (!map.in_bounds(s.spawn.min) || !map.in_bounds(s.spawn.max) ||
        s.spawn.min.x > s.spawn.max.x || s.spawn.min.y > s.spawn.max.y) {
      throw ConfigError(name + ": spawn region must be a non-empty rectangle inside the map");
    }
  }
}

WorldState::WorldState(GridMap map, DamageParams damage, int max_steps,
                       std::vector<AgentState> agents)
    : map_(std::move(map)), damage_(damage), max_steps_(max_steps), agents_(std::move(agents)) {
  occupancy_.assign(map_.cell_count(), -1);
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    AgentState& a = agents_[i];
    if (a.id != static_cast<AgentId>(i)) throw ContractViolation("agent ids must be dense");
    a.alive = a.hp > 0.0;
    if (!a.alive) {
      a.hp = 0.0;
      continue;
    }
    if (map_.blocked(a.pos)) throw ContractViolation("agent placed on a blocked cell");
    if (occupancy_[map_.index(a.pos)] != -1) throw ContractViolation("two agents share a cell");
    occupancy_[map_.index(a.pos)] = a.id;
    a.emotion = clamp_emotion(a.team, a.emotion);
  }
  refresh_terminal();
}

const AgentState& WorldState::agent(AgentId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= agents_.size()) {
    throw QueryError("unknown agent id " + std::to_string(id));
  }
  return agents_[id];
}

AgentState& WorldState::mutable_agent(AgentId id) {
  return const_cast<AgentState&>(std::as_const(*this).agent(id));
}

int WorldState::alive_count(Team t) const {
  return static_cast<int>(std::count_if(agents_.begin(), agents_.end(), [t](const AgentState& a) {
    return a.alive && a.team == t;
  }));
}

std::optional<AgentId> WorldState::occupant(Cell c) const {
  if (!map_.in_bounds(c)) return std::nullopt;
  const AgentId id = occupancy_[map_.index(c)];
  if (id < 0) return std::nullopt;
  return id;
}

void WorldState::set_emotion(AgentId id, double emotion) {
  AgentState& a = mutable_agent(id);
  a.emotion = clamp_emotion(a.team, emotion);
}

std::uint64_t WorldState::hash() const {
  Fnv1a h;
  h.add(static_cast<std::uint64_t>(step_));
  h.add(static_cast<std::uint64_t>(terminal_));
  for (const AgentState& a : agents_) {
    h.add(static_cast<std::uint64_t>(a.id));
    h.add(static_cast<std::uint64_t>(a.team));
    h.add(static_cast<std::uint64_t>(static_cast<std::uint32_t>(a.pos.x)));
    h.add(static_cast<std::uint64_t>(static_cast<std::uint32_t>(a.pos.y)));
    h.add(a.hp);
    h.add(a.emotion);
    h.add(static_cast<std::uint64_t>(static_cast<std::uint32_t>(a.last_action)));
    h.add(static_cast<std::uint64_t>(a.alive));
  }
  return h.value();
}

void WorldState::refresh_terminal() {
  terminal_ = step_ >= max_steps_ || alive_count(Team::Righteous) < 2 ||
              alive_count(Team::Opposite) < 2;
}

double attack_damage(double attacker_emotion, const DamageParams& params) {
  const double m = std::min(std::abs(attacker_emotion), params.emotion_cap);
  // log_{1/2}(x) = -log2(x); adding 0.0 normalizes -0 to +0.
  return params.beta * -std::log2(1.0 - m) + 0.0;
}

WorldState reset(const WorldConfig& config, std::uint64_t seed) {
  config.validate();
  const CounterRng rng(seed);
  const GridMap& map = config.map;
  std::vector<std::uint8_t> taken(map.cell_count(), 0);
  std::vector<AgentState> agents;
  for (Team t : kTeams) {
    const TeamSetup& setup = config.teams[index_of(t)];
    if (setup.size == 0) continue;
    std::vector<Cell> candidates;
    for (int y = setup.spawn.min.y; y <= setup.spawn.max.y; ++y) {
      for (int x = setup.spawn.min.x; x <= setup.spawn.max.x; ++x) {
        const Cell c{x, y};
        if (!map.is_wall(c) && !taken[map.index(c)]) candidates.push_back(c);
      }
    }
    if (static_cast<int>(candidates.size()) < setup.size) {
      throw ConfigError(std::string(to_string(t)) + ": spawn region has " +
                        std::to_string(candidates.size()) + " free cells for " +
                        std::to_string(setup.size) + " agents");
    }
    RngStream spawn(rng, rng_stream::kSpawn * 16 + index_of(t));
    // Partial Fisher-Yates so only `size` draws are consumed.
    for (int i = 0; i < setup.size; ++i) {
      const auto j = i + static_cast<std::size_t>(spawn.below(candidates.size() - i));
      std::swap(candidates[i], candidates[j]);
    }
    RngStream emotion(rng, rng_stream::kEmotion * 16 + index_of(t));
    for (int i = 0; i < setup.size; ++i) {
      AgentState a;
      a.id = static_cast<AgentId>(agents.size());
      a.team = t;
      a.pos = candidates[i];
      a.hp = config.damage.base_hp;
      a.emotion = emotion.uniform(setup.emotion_lo, setup.emotion_hi);
      a.last_action = kIdleAction;
      a.alive = true;
      taken[map.index(a.pos)] = 1;
      agents.push_back(a);
    }
  }
  return WorldState(map, config.damage, config.max_steps, std::move(agents));
}

std::vector<ActionId> legal_actions(const WorldState& world, AgentId agent) {
  if (!world.agent(agent).alive) throw QueryError("legal_actions on a dead agent");
  std::vector<ActionId> out(kNumActions);
  std::iota(out.begin(), out.end(), 0);
  return out;
}

bool move_resolves_idle(const WorldState& world, AgentId agent, ActionId action) {
  const AgentState& a = world.agent(agent);
  if (!a.alive) throw QueryError("move query on a dead agent");
  const Action act = action_of(action);
  if (act.kind != ActionKind::Move) return act.kind == ActionKind::Idle;
  const Cell dest = a.pos + act.offset;
  return world.map().blocked(dest) || world.occupant(dest).has_value();
}

AttackOutcome apply_attack(const AgentState& attacker, Cell target_cell, WorldState& world,
                           const DamageParams& params) {
  if (!is_neighbor_offset(target_cell - attacker.pos)) {
    throw ContractViolation("attack target outside the 8-neighborhood");
  }
  AttackOutcome out;
  const auto occ = world.occupant(target_cell);
  if (!occ || world.agent(*occ).team == attacker.team) {
    out.attacker_reward = RewardConstants::kAttackEmpty;
    return out;
  }
  AgentState& target = world.mutable_agent(*occ);
  out.hit = true;
  out.target = target.id;
  out.damage = attack_damage(attacker.emotion, params);
  out.attacker_reward = RewardConstants::kHitEnemy;
  out.target_reward = RewardConstants::kBeingAttacked;
  target.hp -= out.damage;
  if (target.hp <= 0.0) {
    target.hp = 0.0;
    target.alive = false;
    world.occupancy_[world.map().index(target.pos)] = -1;
    out.subdued = true;
    out.attacker_reward += RewardConstants::kSubdue;
  }
  world.refresh_terminal();
  return out;
}

StepResult step(WorldState& world, std::span<const ActionId> joint_actions) {
  if (world.terminal()) throw ContractViolation("step called on a terminal world");
  const std::size_t n = world.agent_count();
  if (joint_actions.size() != n) {
    throw ContractViolation("joint action vector must cover every agent id");
  }
  for (const AgentState& a : world.agents()) {
    if (a.alive && !is_valid_action(joint_actions[a.id])) {
      throw ContractViolation("missing or invalid action for alive agent " +
                              std::to_string(a.id));
    }
  }

  StepResult result;
  result.rewards.assign(n, 0.0);
  std::vector<double> damage(n, 0.0);
  std::vector<std::pair<AgentId, AgentId>> hits;

  // Attack phase, evaluated against the pre-step snapshot.
  for (const AgentState& a : world.agents()) {
    if (!a.alive) continue;
    const Action act = action_of(joint_actions[a.id]);
    if (act.kind != ActionKind::Attack) continue;
    const auto occ = world.occupant(a.pos + act.offset);
    if (!occ || world.agents()[*occ].team == a.team) {
      result.rewards[a.id] += RewardConstants::kAttackEmpty;
      continue;
    }
    damage[*occ] += attack_damage(a.emotion, world.damage());
    result.rewards[a.id] += RewardConstants::kHitEnemy;
    result.rewards[*occ] += RewardConstants::kBeingAttacked;
    hits.emplace_back(a.id, *occ);
  }
  std::vector<bool> was_alive(n);
  for (const AgentState& a : world.agents()) was_alive[a.id] = a.alive;
  for (std::size_t i = 0; i < n; ++i) {
    if (damage[i] == 0.0) continue;
    AgentState& t = world.mutable_agent(static_cast<AgentId>(i));
    t.hp -= damage[i];
    if (t.hp <= 0.0) {
      t.hp = 0.0;
      t.alive = false;
      world.occupancy_[world.map().index(t.pos)] = -1;
    }
  }
  // Every attacker that hit a target removed this step is credited.
  for (const auto& [attacker, target] : hits) {
    if (!world.agents()[target].alive) result.rewards[attacker] += RewardConstants::kSubdue;
  }

  // Move phase: destinations must be free after the attack phase; conflicts
  // go to the lowest id.
  std::vector<std::pair<AgentId, Cell>> moves;
  std::vector<std::uint8_t> claimed(world.map().cell_count(), 0);
  for (const AgentState& a : world.agents()) {
    if (!a.alive) continue;
    const Action act = action_of(joint_actions[a.id]);
    if (act.kind != ActionKind::Move) continue;
    result.rewards[a.id] += RewardConstants::kMoveCost;
    const Cell dest = a.pos + act.offset;
    if (world.map().blocked(dest) || world.occupant(dest)) continue;
    if (claimed[world.map().index(dest)]) continue;
    claimed[world.map().index(dest)] = 1;
    moves.emplace_back(a.id, dest);
  }
  for (const auto& [id, dest] : moves) {
    AgentState& a = world.mutable_agent(id);
    world.occupancy_[world.map().index(a.pos)] = -1;
    a.pos = dest;
    world.occupancy_[world.map().index(dest)] = id;
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (was_alive[i]) world.mutable_agent(static_cast<AgentId>(i)).last_action = joint_actions[i];
  }
  ++world.step_;
  world.refresh_terminal();
  result.terminal = world.terminal();
  return result;
}

std::vector<AgentId> neighbors_in_window(const WorldState& world, AgentId agent, int window) {
  const AgentState& self = world.agent(agent);
  const int half = window / 2;
  std::vector<AgentId> out;
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      if (dx == 0 && dy == 0) continue;
      if (const auto occ = world.occupant(self.pos + Cell{dx, dy})) out.push_back(*occ);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

Observation perceive(const WorldState& world, AgentId agent, int window) {
  if (window < 1 || window % 2 == 0) throw ContractViolation("perception window must be odd");
  const AgentState& self = world.agent(agent);
  if (!self.alive) throw QueryError("perceive on a dead agent");
  const GridMap& map = world.map();
  const int half = window / 2;

  Observation obs;
  obs.window = window;
  obs.occupancy.assign(static_cast<std::size_t>(window) * window * kOccupancyChannels, 0.0);
  for (int wy = 0; wy < window; ++wy) {
    for (int wx = 0; wx < window; ++wx) {
      const Cell c = self.pos + Cell{wx - half, wy - half};
      const std::size_t base = (static_cast<std::size_t>(wy) * window + wx) * kOccupancyChannels;
      if (map.blocked(c)) {
        obs.occupancy[base + kChannelWall] = 1.0;
        continue;
      }
      const auto occ = world.occupant(c);
      if (!occ || *occ == agent) continue;
      const bool own = world.agents()[*occ].team == self.team;
      obs.occupancy[base + (own ? kChannelOwn : kChannelEnemy)] = 1.0;
      obs.neighbors.push_back(*occ);
    }
  }
  std::sort(obs.neighbors.begin(), obs.neighbors.end());

  obs.features.assign(kFeatureDim, 0.0);
  obs.features[0] = static_cast<double>(self.pos.x) / (map.width() - 1);
  obs.features[1] = static_cast<double>(self.pos.y) / (map.height() - 1);
  obs.features[kFeatureEmotion] = self.emotion;
  obs.features[kFeatureLastAction + self.last_action] = 1.0;
  obs.features[kFeatureHp] = self.hp / world.damage().base_hp;
  obs.features[kFeatureId] = static_cast<double>(self.id) / 1000.0;
  return obs;
}

}  // namespace crowdsim
