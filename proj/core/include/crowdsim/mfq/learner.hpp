#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "crowdsim/mfq/learning.hpp"
#include "crowdsim/mfq/network.hpp"
#include "crowdsim/rng.hpp"

namespace crowdsim::mfq {

/// Which action a replay transition records for an agent whose prediction
/// was overridden by the rule arbiter.
enum class StoredAction : std::int32_t { Predicted = 0, Executed = 1 };

struct TrainConfig {
  double discount = 0.95;
  double learning_rate = 1e-4;
  int batch_size = 256;
  int memory_size = 1 << 10;
  int max_steps = 400;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  double epsilon_decay_fraction = 0.5;  // share of episodes over which epsilon anneals
  double temperature = 0.1;
  int target_sync_interval = 200;  // gradient updates between target copies
  int episodes = 2000;
  int train_every = 4;            // environment steps per gradient update
  int checkpoint_interval = 100;  // episodes; 0 disables periodic checkpoints
  StoredAction stored_action = StoredAction::Predicted;

  /// Linear anneal from epsilon_start to epsilon_end over the first
  /// epsilon_decay_fraction of training, flat afterwards.
  double epsilon_at(int episode) const;
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Fixed-capacity FIFO of transitions; the oldest entry is evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return storage_.size(); }
  /// i = 0 is the oldest retained transition.
  const Transition& at(std::size_t i) const;
  /// Uniform sampling with replacement.
  std::vector<const Transition*> sample(std::size_t n, RngStream& rng) const;

 private:
  std::vector<Transition> storage_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
};

/// One team's learner: online network, target network, Adam state and replay.
class Learner {
 public:
  Learner(const NetShape& shape, const TrainConfig& config, std::uint64_t seed);

  const QNetwork& net() const { return net_; }
  QNetwork& net() { return net_; }
  const QNetwork& target() const { return target_; }
  const AdamState& optimizer() const { return adam_; }
  AdamState& optimizer() { return adam_; }
  const ReplayBuffer& memory() const { return memory_; }
  ReplayBuffer& memory() { return memory_; }
  const TrainConfig& config() const { return config_; }
  std::int64_t updates() const { return updates_; }

  void remember(Transition t) { memory_.push(std::move(t)); }

  /// One gradient update from a uniformly sampled batch. Returns nothing
  /// while the buffer holds fewer transitions than a batch.
  std::optional<double> update(RngStream& rng);

  void sync_target() { target_.copy_parameters_from(net_); }

 private:
  TrainConfig config_;
  QNetwork net_;
  QNetwork target_;
  AdamState adam_;
  ReplayBuffer memory_;
  std::int64_t updates_ = 0;
};

struct Checkpoint {
  NetShape shape;
  TrainConfig config;
  std::vector<double> parameters;
  AdamState optimizer;
};

/// Little-endian binary container: magic, version, shape, train config,
/// tensor table, parameters, optimizer moments.
void save_checkpoint(const std::filesystem::path& path, const QNetwork& net,
                     const AdamState& optimizer, const TrainConfig& config);
Checkpoint read_checkpoint(const std::filesystem::path& path);
/// Loads parameters into a network, rejecting any shape mismatch.
QNetwork load_network(const std::filesystem::path& path, const NetShape& expected);

}  // namespace crowdsim::mfq
