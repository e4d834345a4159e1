#include "crowdsim/mfq/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crowdsim/errors.hpp"

namespace crowdsim::mfq {

std::vector<double> mean_action(std::span<const ActionId> neighbor_actions, int action_dim) {
  if (neighbor_actions.empty()) return std::vector<double>(action_dim, 1.0 / action_dim);
  std::vector<double> out(action_dim, 0.0);
  for (ActionId a : neighbor_actions) {
    if (a < 0 || a >= action_dim) throw ContractViolation("neighbor action out of range");
    out[a] += 1.0;
  }
  const double inv = 1.0 / static_cast<double>(neighbor_actions.size());
  for (double& v : out) v *= inv;
  return out;
}

std::vector<double> mean_action(std::span<const std::vector<double>> neighbor_one_hots,
                                int action_dim) {
  if (neighbor_one_hots.empty()) return std::vector<double>(action_dim, 1.0 / action_dim);
  std::vector<double> out(action_dim, 0.0);
  for (const auto& one_hot : neighbor_one_hots) {
    if (static_cast<int>(one_hot.size()) != action_dim) {
      throw ContractViolation("one-hot width mismatch");
    }
    for (int i = 0; i < action_dim; ++i) out[i] += one_hot[i];
  }
  const double inv = 1.0 / static_cast<double>(neighbor_one_hots.size());
  for (double& v : out) v *= inv;
  return out;
}

double factored_q(std::span<const double> per_neighbor_qs) {
  if (per_neighbor_qs.empty()) throw ContractViolation("factored_q over an empty neighbor set");
  return std::accumulate(per_neighbor_qs.begin(), per_neighbor_qs.end(), 0.0) /
         static_cast<double>(per_neighbor_qs.size());
}

std::vector<double> boltzmann(std::span<const double> q, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("Boltzmann temperature must be > 0");
  if (q.empty()) throw ContractViolation("Boltzmann over an empty action set");
  const double top = *std::max_element(q.begin(), q.end());
  std::vector<double> p(q.size());
  double z = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    p[i] = std::exp((q[i] - top) / temperature);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

double mf_value(std::span<const double> q, double temperature) {
  const std::vector<double> p = boltzmann(q, temperature);
  double v = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) v += p[i] * q[i];
  return v;
}

double td_target(double reward, double next_value, bool terminal, double discount) {
  return terminal ? reward : reward + discount * next_value;
}

double tabular_q_update(double q_prev, double reward, double v_next, double alpha,
                        double discount) {
  return (1.0 - alpha) * q_prev + alpha * (reward + discount * v_next);
}

ActionId greedy_action(std::span<const double> q) {
  if (q.empty()) throw ContractViolation("argmax over an empty action set");
  return static_cast<ActionId>(std::max_element(q.begin(), q.end()) - q.begin());
}

ActionId select_action(std::span<const double> q, double epsilon, RngStream& rng) {
  if (rng.uniform() < epsilon) return static_cast<ActionId>(rng.below(q.size()));
  return greedy_action(q);
}

ActionId select_action(const QNetwork& net, const NetInput& obs, double epsilon, RngStream& rng) {
  return select_action(net.q_values(obs), epsilon, rng);
}

LossResult loss(std::span<const Transition* const> batch, const QNetwork& net,
                const QNetwork& target_net, double discount, double temperature) {
  if (batch.empty()) throw ContractViolation("loss over an empty batch");
  const int n = static_cast<int>(batch.size());
  const int actions = net.shape().action_dim;

  NetBatch next(target_net.shape(), n);
  NetBatch current(net.shape(), n);
  for (int i = 0; i < n; ++i) {
    if (batch[i]->action < 0 || batch[i]->action >= actions) {
      throw ContractViolation("transition action out of range");
    }
    current.set(i, batch[i]->obs);
    // Terminal transitions may omit the successor; its column stays zero.
    if (!(batch[i]->terminal && batch[i]->next_obs.occupancy.empty())) {
      next.set(i, batch[i]->next_obs);
    }
  }
  const Eigen::MatrixXd next_q = target_net.forward(next);
  ForwardCache cache;
  const Eigen::MatrixXd q = net.forward(current, cache);

  LossResult out;
  Eigen::MatrixXd d_q = Eigen::MatrixXd::Zero(actions, n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const Transition& t = *batch[i];
    const double v = t.terminal ? 0.0
                                : mf_value(std::span<const double>(next_q.col(i).data(), actions),
                                           temperature);
    const double y = td_target(t.reward, v, t.terminal, discount);
    const double err = y - q(t.action, i);
    total += err * err;
    d_q(t.action, i) = -2.0 * err / n;
  }
  out.loss = total / n;
  if (!std::isfinite(out.loss)) throw TrainingError("non-finite loss");
  out.gradient.assign(net.parameter_count(), 0.0);
  net.backward(cache, d_q, out.gradient);
  return out;
}

LossResult loss(std::span<const Transition> batch, const QNetwork& net,
                const QNetwork& target_net, double discount, double temperature) {
  std::vector<const Transition*> ptrs;
  ptrs.reserve(batch.size());
  for (const Transition& t : batch) ptrs.push_back(&t);
  return loss(std::span<const Transition* const>(ptrs), net, target_net, discount, temperature);
}

void train_step(std::span<double> params, AdamState& state, std::span<const double> gradient,
                const AdamConfig& config) {
  if (gradient.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ContractViolation("optimizer state does not match parameter count");
  }
  for (double g : gradient) {
    if (!std::isfinite(g)) throw TrainingError("non-finite gradient");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * gradient[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * gradient[i] * gradient[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
  }
}

void train_step(QNetwork& net, AdamState& state, std::span<const double> gradient,
                const AdamConfig& config) {
  train_step(net.parameters(), state, gradient, config);
}

}  // namespace crowdsim::mfq
