#include <benchmark/benchmark.h>

#include <vector>

#include "crowdsim/mfq/learning.hpp"
#include "crowdsim/mfq/network.hpp"
#include "crowdsim/rng.hpp"

using namespace crowdsim;
using namespace crowdsim::mfq;

namespace {

NetInput random_input(const NetShape& s, RngStream& rng) {
  NetInput in;
  in.occupancy.resize(s.occupancy_dim());
  for (double& v : in.occupancy) v = rng.uniform() < 0.2 ? 1.0 : 0.0;
  in.features.resize(s.feature_dim);
  for (double& v : in.features) v = rng.uniform();
  in.mean_action.assign(s.action_dim, 1.0 / s.action_dim);
  return in;
}

std::vector<Transition> batch_of(const NetShape& s, int n) {
  RngStream rng(CounterRng(5), 1);
  std::vector<Transition> out(n);
  for (auto& t : out) {
    t.obs = random_input(s, rng);
    t.next_obs = random_input(s, rng);
    t.action = static_cast<ActionId>(rng.below(s.action_dim));
    t.reward = rng.uniform(-1.0, 1.0);
  }
  return out;
}

}  // namespace

static void BM_Forward(benchmark::State& state) {
  const NetShape shape;
  const QNetwork net(shape, 1);
  const int n = static_cast<int>(state.range(0));
  RngStream rng(CounterRng(3), 1);
  NetBatch batch(shape, n);
  for (int i = 0; i < n; ++i) batch.set(i, random_input(shape, rng));
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(batch));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(16)->Arg(64);

static void BM_LossAndGradient(benchmark::State& state) {
  const NetShape shape;
  const QNetwork net(shape, 1), target(shape, 2);
  const auto batch = batch_of(shape, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(loss(batch, net, target, 0.95, 0.1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_LossAndGradient)->Arg(64);

static void BM_AdamStep(benchmark::State& state) {
  QNetwork net(NetShape{}, 1);
  AdamState adam(net.parameter_count());
  std::vector<double> grad(net.parameter_count(), 1e-3);
  for (auto _ : state) {
    train_step(net, adam, grad, AdamConfig{});
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * net.parameter_count());
}
BENCHMARK(BM_AdamStep);
