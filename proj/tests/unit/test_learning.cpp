#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "crowdsim/errors.hpp"
#include "crowdsim/mfq/learner.hpp"
#include "crowdsim/mfq/learning.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"

using namespace crowdsim;
using namespace crowdsim::mfq;
using crowdsim::testing::random_input;
using crowdsim::testing::random_transitions;
using crowdsim::testing::tiny_shape;

namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "crowdsim_learning_tests";
  fs::create_directories(dir);
  return dir / name;
}

TrainConfig small_train() {
  TrainConfig c;
  c.batch_size = 4;
  c.memory_size = 16;
  c.learning_rate = 1e-3;
  c.target_sync_interval = 3;
  return c;
}

}  // namespace

TEST(MeanAction, AveragesOneHots) {
  const std::vector<ActionId> acts{0, 3, 3, 16};
  const auto m = mean_action(acts);
  ASSERT_EQ(m.size(), 17u);
  EXPECT_DOUBLE_EQ(m[0], 0.25);
  EXPECT_DOUBLE_EQ(m[3], 0.5);
  EXPECT_DOUBLE_EQ(m[16], 0.25);
  EXPECT_DOUBLE_EQ(m[1], 0.0);

  const std::vector<std::vector<double>> hots{{1, 0, 0}, {0, 0, 1}};
  const auto m2 = mean_action(std::span<const std::vector<double>>(hots), 3);
  EXPECT_EQ(m2, (std::vector<double>{0.5, 0.0, 0.5}));
}

TEST(MeanAction, EmptyIsUniformAndRangeChecked) {
  const auto m = mean_action(std::span<const ActionId>{}, 4);
  EXPECT_EQ(m, std::vector<double>(4, 0.25));
  const std::vector<ActionId> bad{17};
  EXPECT_THROW(mean_action(bad), ContractViolation);
}

TEST(FactoredQ, MeanOfPairwise) {
  const std::vector<double> q{1.0, 2.0, 6.0};
  EXPECT_DOUBLE_EQ(factored_q(q), 3.0);
  EXPECT_THROW(factored_q(std::span<const double>{}), ContractViolation);
}

TEST(Boltzmann, SoftmaxWithTemperature) {
  const std::vector<double> q{1.0, 2.0, 0.5};
  const auto p = boltzmann(q, 0.5);
  const double z = std::exp(2.0) + std::exp(4.0) + std::exp(1.0);
  EXPECT_NEAR(p[0], std::exp(2.0) / z, 1e-15);
  EXPECT_NEAR(p[1], std::exp(4.0) / z, 1e-15);
  EXPECT_NEAR(p[2], std::exp(1.0) / z, 1e-15);
  // Large values do not overflow.
  const std::vector<double> big{1000.0, 999.0};
  const auto pb = boltzmann(big, 0.1);
  EXPECT_NEAR(pb[0], 1.0 / (1.0 + std::exp(-10.0)), 1e-12);
  EXPECT_THROW(boltzmann(q, 0.0), ConfigError);
}

TEST(MfValue, ExpectationUnderPolicy) {
  const std::vector<double> q{1.0, 3.0};
  const double p1 = 1.0 / (1.0 + std::exp(-2.0));
  EXPECT_NEAR(mf_value(q, 1.0), (1.0 - p1) * 1.0 + p1 * 3.0, 1e-14);
  EXPECT_NEAR(mf_value(q, 1e-3), 3.0, 1e-12);
}

TEST(TdTarget, TerminalDropsBootstrap) {
  EXPECT_DOUBLE_EQ(td_target(1.0, 4.0, false, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(td_target(1.0, 4.0, true, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(tabular_q_update(2.0, 1.0, 4.0, 0.25, 0.5), 0.75 * 2.0 + 0.25 * 3.0);
}

TEST(Greedy, LowestIndexOnTies) {
  const std::vector<double> q{0.0, 2.0, 2.0, -1.0};
  EXPECT_EQ(greedy_action(q), 1);
  EXPECT_THROW(greedy_action(std::span<const double>{}), ContractViolation);
}

TEST(SelectAction, EpsilonExtremes) {
  const std::vector<double> q{0.0, 0.0, 5.0, 0.0};
  RngStream rng(CounterRng(3), 1);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(select_action(q, 0.0, rng), 2);
  std::map<int, int> counts;
  for (int i = 0; i < 4000; ++i) ++counts[select_action(q, 1.0, rng)];
  ASSERT_EQ(counts.size(), 4u);
  for (auto [a, c] : counts) EXPECT_NEAR(c, 1000, 150) << a;
}

TEST(Loss, HandComputedSingleTransition) {
  const NetShape shape = tiny_shape();
  const QNetwork net(shape, 1), target(shape, 2);
  RngStream rng(CounterRng(4), 1);
  Transition t;
  t.obs = random_input(shape, rng);
  t.next_obs = random_input(shape, rng);
  t.action = 5;
  t.reward = 0.7;
  const std::vector<Transition> batch{t};
  const LossResult r = loss(batch, net, target, 0.9, 0.1);
  const double y = 0.7 + 0.9 * mf_value(target.q_values(t.next_obs), 0.1);
  const double err = y - net.q_values(t.obs)[5];
  EXPECT_NEAR(r.loss, err * err, 1e-12);

  t.terminal = true;
  t.next_obs = {};
  const std::vector<Transition> term{t};
  const double err_t = 0.7 - net.q_values(t.obs)[5];
  EXPECT_NEAR(loss(term, net, target, 0.9, 0.1).loss, err_t * err_t, 1e-12);
}

TEST(Loss, GradientMatchesCentralDifferences) {
  const NetShape shape = tiny_shape();
  QNetwork net(shape, 9);
  const QNetwork target(shape, 10);
  RngStream rng(CounterRng(12), 1);
  for (double& p : net.parameters()) p += rng.uniform(-0.05, 0.05);
  const auto batch = random_transitions(shape, 6, rng);
  const LossResult r = loss(batch, net, target, 0.95, 0.1);
  const auto f = [&] { return loss(batch, net, target, 0.95, 0.1).loss; };
  const auto check = crowdsim::testing::check_gradient(f, net.parameters(), r.gradient);
  EXPECT_LT(check.norm_relative, 1e-7);
  EXPECT_LT(check.max_relative, 1e-4);
}

TEST(Loss, RejectsBadBatches) {
  const NetShape shape = tiny_shape();
  const QNetwork net(shape, 1);
  EXPECT_THROW(loss(std::span<const Transition>{}, net, net, 0.9, 0.1), ContractViolation);
  RngStream rng(CounterRng(4), 1);
  auto batch = random_transitions(shape, 2, rng);
  batch[1].action = 40;
  EXPECT_THROW(loss(batch, net, net, 0.9, 0.1), ContractViolation);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<double> params{1.0, -2.0, 0.5};
  const std::vector<double> grad{0.3, -4.0, 0.0};
  AdamState state(3);
  const AdamConfig cfg{.learning_rate = 0.01};
  train_step(params, state, grad, cfg);
  // Bias-corrected first step is lr * g / (|g| + eps').
  EXPECT_NEAR(params[0], 1.0 - 0.01, 1e-9);
  EXPECT_NEAR(params[1], -2.0 + 0.01, 1e-9);
  EXPECT_DOUBLE_EQ(params[2], 0.5);
  EXPECT_EQ(state.step, 1);
  EXPECT_NEAR(state.m[0], 0.1 * 0.3, 1e-15);
  EXPECT_NEAR(state.v[1], 0.001 * 16.0, 1e-15);
}

TEST(Adam, SecondStepMatchesRecurrence) {
  std::vector<double> params{0.0};
  AdamState state(1);
  const AdamConfig cfg{.learning_rate = 0.1};
  const std::vector<double> g1{1.0}, g2{-0.5};
  train_step(params, state, g1, cfg);
  train_step(params, state, g2, cfg);
  const double m = 0.9 * 0.1 * 1.0 + 0.1 * -0.5;
  const double v = 0.999 * 0.001 * 1.0 + 0.001 * 0.25;
  const double m_hat = m / (1.0 - 0.81), v_hat = v / (1.0 - 0.999 * 0.999);
  const double first = -0.1 / (1.0 + 1e-8);
  const double expected = first - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8);
  EXPECT_NEAR(params[0], expected, 1e-12);
}

TEST(Adam, NonFiniteGradientLeavesStateUntouched) {
  std::vector<double> params{1.0, 2.0};
  AdamState state(2);
  const std::vector<double> grad{0.1, std::numeric_limits<double>::quiet_NaN()};
  EXPECT_THROW(train_step(params, state, grad, AdamConfig{}), TrainingError);
  EXPECT_EQ(params, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(state.step, 0);
  EXPECT_EQ(state.m, (std::vector<double>{0.0, 0.0}));
  const std::vector<double> inf{std::numeric_limits<double>::infinity(), 0.0};
  EXPECT_THROW(train_step(params, state, inf, AdamConfig{}), TrainingError);
  const std::vector<double> short_grad{0.1};
  EXPECT_THROW(train_step(params, state, short_grad, AdamConfig{}), ContractViolation);
}

TEST(TrainConfig, EpsilonSchedule) {
  TrainConfig c;
  c.episodes = 100;
  c.epsilon_start = 1.0;
  c.epsilon_end = 0.1;
  c.epsilon_decay_fraction = 0.5;
  EXPECT_DOUBLE_EQ(c.epsilon_at(0), 1.0);
  EXPECT_NEAR(c.epsilon_at(25), 0.55, 1e-12);
  EXPECT_DOUBLE_EQ(c.epsilon_at(50), 0.1);
  EXPECT_DOUBLE_EQ(c.epsilon_at(99), 0.1);
  c.epsilon_decay_fraction = 0.0;
  EXPECT_DOUBLE_EQ(c.epsilon_at(0), 0.1);
}

TEST(TrainConfig, Validation) {
  EXPECT_NO_THROW(TrainConfig{}.validate());
  TrainConfig c;
  c.discount = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.epsilon_end = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.train_every = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ReplayBuffer, FifoEviction) {
  ReplayBuffer buf(3);
  for (int i = 0; i < 5; ++i) {
    Transition t;
    t.reward = i;
    buf.push(t);
  }
  EXPECT_EQ(buf.size(), 3u);
  EXPECT_DOUBLE_EQ(buf.at(0).reward, 2.0);
  EXPECT_DOUBLE_EQ(buf.at(2).reward, 4.0);
  EXPECT_THROW(buf.at(3), QueryError);
  EXPECT_THROW(ReplayBuffer(0), ConfigError);
}

TEST(ReplayBuffer, UniformSamplingWithReplacement) {
  ReplayBuffer buf(4);
  RngStream rng(CounterRng(6), 1);
  EXPECT_THROW(buf.sample(1, rng), QueryError);
  for (int i = 0; i < 4; ++i) {
    Transition t;
    t.reward = i;
    buf.push(t);
  }
  std::map<double, int> counts;
  for (const Transition* t : buf.sample(8000, rng)) ++counts[t->reward];
  ASSERT_EQ(counts.size(), 4u);
  for (auto [r, c] : counts) EXPECT_NEAR(c, 2000, 200) << r;
}

TEST(Learner, DefersUntilBatchIsAvailable) {
  const NetShape shape = tiny_shape();
  Learner learner(shape, small_train(), 5);
  RngStream rng(CounterRng(1), 1);
  auto ts = random_transitions(shape, 4, rng);
  for (int i = 0; i < 3; ++i) learner.remember(ts[i]);
  EXPECT_FALSE(learner.update(rng).has_value());
  EXPECT_EQ(learner.updates(), 0);
  learner.remember(ts[3]);
  const std::vector<double> before(learner.net().parameters().begin(),
                                   learner.net().parameters().end());
  ASSERT_TRUE(learner.update(rng).has_value());
  EXPECT_EQ(learner.updates(), 1);
  EXPECT_FALSE(std::equal(before.begin(), before.end(), learner.net().parameters().begin()));
  // Target only follows on the sync interval.
  EXPECT_TRUE(std::equal(before.begin(), before.end(), learner.target().parameters().begin()));
  learner.update(rng);
  learner.update(rng);
  EXPECT_TRUE(std::equal(learner.net().parameters().begin(), learner.net().parameters().end(),
                         learner.target().parameters().begin()));
}

TEST(Learner, RepeatedUpdatesReduceLossOnFixedBatch) {
  const NetShape shape = tiny_shape();
  TrainConfig cfg = small_train();
  cfg.batch_size = 8;
  cfg.memory_size = 8;
  Learner learner(shape, cfg, 5);
  RngStream rng(CounterRng(2), 1);
  auto ts = random_transitions(shape, 8, rng);
  for (auto& t : ts) {
    t.terminal = true;
    learner.remember(t);
  }
  const double first = loss(ts, learner.net(), learner.target(), 0.95, 0.1).loss;
  for (int i = 0; i < 300; ++i) learner.update(rng);
  EXPECT_LT(loss(ts, learner.net(), learner.target(), 0.95, 0.1).loss, 0.2 * first);
}

TEST(Checkpoint, RoundTrip) {
  const NetShape shape = tiny_shape();
  TrainConfig cfg = small_train();
  cfg.stored_action = StoredAction::Executed;
  Learner learner(shape, cfg, 5);
  RngStream rng(CounterRng(1), 1);
  for (auto& t : random_transitions(shape, 8, rng)) learner.remember(t);
  learner.update(rng);
  const fs::path path = temp_file("roundtrip.ckpt");
  save_checkpoint(path, learner.net(), learner.optimizer(), learner.config());
  const Checkpoint ck = read_checkpoint(path);
  EXPECT_EQ(ck.shape, shape);
  EXPECT_EQ(ck.config, learner.config());
  EXPECT_TRUE(std::equal(ck.parameters.begin(), ck.parameters.end(),
                         learner.net().parameters().begin()));
  EXPECT_EQ(ck.optimizer.step, 1);
  EXPECT_EQ(ck.optimizer.m, learner.optimizer().m);
  EXPECT_EQ(ck.optimizer.v, learner.optimizer().v);
  const QNetwork loaded = load_network(path, shape);
  EXPECT_TRUE(std::equal(loaded.parameters().begin(), loaded.parameters().end(),
                         learner.net().parameters().begin()));
}

TEST(Checkpoint, TruncationAndGarbageAreFormatErrors) {
  const NetShape shape = tiny_shape();
  const QNetwork net(shape, 1);
  const fs::path path = temp_file("truncated.ckpt");
  save_checkpoint(path, net, AdamState(net.parameter_count()), TrainConfig{});
  const auto full = fs::file_size(path);
  fs::resize_file(path, full - 13);
  EXPECT_THROW(read_checkpoint(path), FormatError);

  const fs::path junk = temp_file("junk.ckpt");
  std::ofstream(junk) << "definitely not a checkpoint";
  EXPECT_THROW(read_checkpoint(junk), FormatError);
  EXPECT_THROW(read_checkpoint(temp_file("missing.ckpt")), FormatError);

  const fs::path trailing = temp_file("trailing.ckpt");
  save_checkpoint(trailing, net, AdamState(net.parameter_count()), TrainConfig{});
  std::ofstream(trailing, std::ios::app | std::ios::binary) << 'x';
  EXPECT_THROW(read_checkpoint(trailing), FormatError);
}

TEST(Checkpoint, ShapeMismatchIsConfigError) {
  const QNetwork net(tiny_shape(5), 1);
  const fs::path path = temp_file("shape.ckpt");
  save_checkpoint(path, net, AdamState(net.parameter_count()), TrainConfig{});
  EXPECT_THROW(load_network(path, tiny_shape(7)), ConfigError);
}
