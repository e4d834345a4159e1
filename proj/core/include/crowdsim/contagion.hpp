#pragma once

#include <span>
#include <vector>

#include "crowdsim/types.hpp"
#include "crowdsim/world.hpp"

namespace crowdsim {

struct ContagionParams {
  double receive_strength = 0.3;  // A: how strongly the receiver takes in emotion
  double send_strength = 0.3;     // B: how strongly the sender emits it
  double delta = 1.0;             // denominator constant of the self term
  double gamma_e = 0.15;          // dead-zone half width for reward differences

  void validate() const;
  friend bool operator==(const ContagionParams&, const ContagionParams&) = default;
};

/// External change caused by one sender at Euclidean distance `distance`:
/// (1 - sigmoid(D)) * E_receiver * A * B * sign, sign = +1 for teammates.
double external_delta(double receiver_emotion, double distance, bool same_team,
                      const ContagionParams& params);

double external_delta(const AgentState& receiver, const AgentState& sender,
                      const ContagionParams& params);

/// Sum of external_delta over every neighbor, teammates and opponents alike.
double aggregate_external(const AgentState& agent, std::span<const AgentState> neighbors,
                          const ContagionParams& params);

/// Reward-driven self influence. Zero inside (-gamma_e, gamma_e); a favorable
/// difference pushes the agent away from 0 (toward its team's extreme), an
/// unfavorable one pushes it toward 0.
double self_delta(double reward_diff, Team team, const ContagionParams& params);

/// E(t) = clamp(E(t-1) + ext + se) into the team range.
double update_emotion(Team team, double previous, double ext, double se);

inline double update_emotion(const AgentState& agent, double ext, double se) {
  return update_emotion(agent.team, agent.emotion, ext, se);
}

/// Synchronous update of every alive agent from the pre-update emotion
/// snapshot. rewards/previous_rewards are indexed by agent id; neighbors are
/// the alive agents inside the perception window.
void contagion_step(WorldState& world, std::span<const double> rewards,
                    std::span<const double> previous_rewards, int window,
                    const ContagionParams& params);

}  // namespace crowdsim
