#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "crowdsim/mfq/network.hpp"
#include "crowdsim/rng.hpp"

namespace crowdsim::mfq {

/// Arithmetic mean of the neighbors' one-hot actions; uniform when there are
/// no neighbors.
std::vector<double> mean_action(std::span<const ActionId> neighbor_actions,
                                int action_dim = kNumActions);
std::vector<double> mean_action(std::span<const std::vector<double>> neighbor_one_hots,
                                int action_dim = kNumActions);

/// Mean of pairwise Q-values over the neighbor set. Empty input is a
/// contract violation.
double factored_q(std::span<const double> per_neighbor_qs);

/// Boltzmann policy pi = softmax(q / temperature).
std::vector<double> boltzmann(std::span<const double> q, double temperature);

/// Expected Q under the Boltzmann policy.
double mf_value(std::span<const double> q, double temperature);

/// r + discount * v, or r when terminal.
double td_target(double reward, double next_value, bool terminal, double discount);

/// (1 - alpha) * q_prev + alpha * (r + discount * v_next).
double tabular_q_update(double q_prev, double reward, double v_next, double alpha,
                        double discount);

/// Argmax with ties broken toward the lowest index.
ActionId greedy_action(std::span<const double> q);

/// Epsilon-greedy over precomputed Q-values.
ActionId select_action(std::span<const double> q, double epsilon, RngStream& rng);
ActionId select_action(const QNetwork& net, const NetInput& obs, double epsilon, RngStream& rng);

struct Transition {
  NetInput obs;
  ActionId action = kIdleAction;
  double reward = 0.0;
  NetInput next_obs;
  bool terminal = false;
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> gradient;
};

/// Mean squared TD error over the batch. Targets come from target_net and
/// receive no gradient.
LossResult loss(std::span<const Transition* const> batch, const QNetwork& net,
                const QNetwork& target_net, double discount, double temperature);
LossResult loss(std::span<const Transition> batch, const QNetwork& net,
                const QNetwork& target_net, double discount, double temperature);

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update. Throws TrainingError on non-finite
/// gradients, leaving parameters and state untouched.
void train_step(std::span<double> params, AdamState& state, std::span<const double> gradient,
                const AdamConfig& config);
void train_step(QNetwork& net, AdamState& state, std::span<const double> gradient,
                const AdamConfig& config);

}  // namespace crowdsim::mfq
