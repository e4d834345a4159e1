#pragma once

#include <initializer_list>
#include <vector>

#include "crowdsim/harness.hpp"
#include "crowdsim/mfq/network.hpp"
#include "crowdsim/world.hpp"

namespace crowdsim::testing {

struct Spec {
  Team team;
  int x;
  int y;
  double emotion;
  double hp = 10.0;
};

inline WorldState make_world(int width, int height, std::initializer_list<Spec> specs,
                             int max_steps = 400, std::vector<Cell> walls = {},
                             DamageParams damage = {}) {
  std::vector<AgentState> agents;
  for (const Spec& s : specs) {
    AgentState a;
    a.id = static_cast<AgentId>(agents.size());
    a.team = s.team;
    a.pos = {s.x, s.y};
    a.emotion = s.emotion;
    a.hp = s.hp;
    agents.push_back(a);
  }
  return WorldState(GridMap(width, height, std::move(walls)), damage, max_steps,
                    std::move(agents));
}

/// Network small enough for gradient checks and fast training in tests.
inline mfq::NetShape tiny_shape(int window = 5) {
  mfq::NetShape s;
  s.window = window;
  s.conv1_filters = 4;
  s.conv2_filters = 4;
  s.spatial_width = 8;
  s.feature_width = 8;
  s.mean_width = 8;
  s.trunk1_width = 8;
  s.trunk2_width = 8;
  return s;
}

/// 8x8 arena, two small teams, tiny network and short rounds.
inline ScenarioConfig small_scenario(int size = 3) {
  ScenarioConfig c;
  c.width = 8;
  c.height = 8;
  c.team(Team::Righteous) = {size, 0.6, 0.9, std::nullopt, PolicyKind::Acsed, ScriptedMode::Idle};
  c.team(Team::Opposite) = {size, -0.6, -0.4, std::nullopt, PolicyKind::Acsed, ScriptedMode::Idle};
  c.network = tiny_shape(5);
  c.train.max_steps = 40;
  c.train.batch_size = 8;
  c.train.memory_size = 64;
  c.train.episodes = 2;
  c.train.train_every = 2;
  c.train.learning_rate = 1e-3;
  c.rounds = 3;
  c.seed = 11;
  return c;
}

}  // namespace crowdsim::testing
