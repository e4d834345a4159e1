#include "crowdsim/contagion.hpp"

#include <cmath>

#include "crowdsim/errors.hpp"

namespace crowdsim {

void ContagionParams::validate() const {
  if (!(receive_strength > 0.0 && receive_strength <= 1.0) ||
      !(send_strength > 0.0 && send_strength <= 1.0)) {
    throw ConfigError("contagion strengths must lie in (0,1]");
  }
  if (!(delta > 0.0)) throw ConfigError("contagion.delta must be > 0");
  if (!(gamma_e > 0.0)) throw ConfigError("contagion.gamma_e must be > 0");
}

double external_delta(double receiver_emotion, double distance, bool same_team,
                      const ContagionParams& params) {
  // 1 - 1/(1+exp(-D)) == 1/(1+exp(D)); the latter saturates cleanly to 0.
  const double falloff = 1.0 / (1.0 + std::exp(distance));
  const double sign = same_team ? 1.0 : -1.0;
  return falloff * receiver_emotion * params.receive_strength * params.send_strength * sign;
}

double external_delta(const AgentState& receiver, const AgentState& sender,
                      const ContagionParams& params) {
  const Cell d = sender.pos - receiver.pos;
  const double distance = std::hypot(static_cast<double>(d.x), static_cast<double>(d.y));
  return external_delta(receiver.emotion, distance, receiver.team == sender.team, params);
}

double aggregate_external(const AgentState& agent, std::span<const AgentState> neighbors,
                          const ContagionParams& params) {
  double sum = 0.0;
  for (const AgentState& n : neighbors) sum += external_delta(agent, n, params);
  return sum;
}

double self_delta(double reward_diff, Team team, const ContagionParams& params) {
  const double g = params.gamma_e;
  if (std::abs(reward_diff) < g) return 0.0;
  const bool favorable = reward_diff > 0.0;
  const double magnitude = favorable ? 0.1 / (params.delta + std::exp(g / reward_diff))
                                     : 0.1 / (params.delta + std::exp(reward_diff / g));
  // Favorable: away from 0 toward the team's extreme. Unfavorable: toward 0.
  const double polarity = team == Team::Righteous ? 1.0 : -1.0;
  return (favorable ? polarity : -polarity) * magnitude;
}

double update_emotion(Team team, double previous, double ext, double se) {
  return clamp_emotion(team, previous + ext + se);
}

void contagion_step(WorldState& world, std::span<const double> rewards,
                    std::span<const double> previous_rewards, int window,
                    const ContagionParams& params) {
  const auto agents = world.agents();
  std::vector<double> next(agents.size(), 0.0);
  std::vector<AgentState> neighbor_states;
  for (const AgentState& a : agents) {
    if (!a.alive) continue;
    neighbor_states.clear();
    for (AgentId id : neighbors_in_window(world, a.id, window)) neighbor_states.push_back(agents[id]);
    const double ext = aggregate_external(a, neighbor_states, params);
    const double se = self_delta(rewards[a.id] - previous_rewards[a.id], a.team, params);
    next[a.id] = update_emotion(a, ext, se);
  }
  for (const AgentState& a : agents) {
    if (a.alive) world.set_emotion(a.id, next[a.id]);
  }
}

}  // namespace crowdsim
