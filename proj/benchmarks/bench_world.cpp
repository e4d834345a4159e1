#include <benchmark/benchmark.h>

#include <vector>

#include "crowdsim/contagion.hpp"
#include "crowdsim/rng.hpp"
#include "crowdsim/world.hpp"

using namespace crowdsim;

namespace {

// 16x16 map, both teams packed into adjacent bands so attacks connect.
WorldState crowded(int per_team) {
  std::vector<AgentState> agents;
  for (int i = 0; i < 2 * per_team; ++i) {
    AgentState a;
    a.id = i;
    a.team = i < per_team ? Team::Righteous : Team::Opposite;
    const int k = i % per_team;
    a.pos = {a.team == Team::Righteous ? 7 - k / 16 : 8 + k / 16, k % 16};
    a.emotion = a.team == Team::Righteous ? 0.7 : -0.5;
    a.hp = 1e9;
    agents.push_back(a);
  }
  return WorldState(GridMap(16, 16), DamageParams{}, 1 << 30, std::move(agents));
}

}  // namespace

static void BM_WorldStep(benchmark::State& state) {
  WorldState w = crowded(static_cast<int>(state.range(0)));
  RngStream rng(CounterRng(1), 1);
  std::vector<ActionId> acts(w.agent_count());
  for (auto _ : state) {
    for (auto& a : acts) a = static_cast<ActionId>(rng.below(kNumActions));
    benchmark::DoNotOptimize(step(w, acts));
  }
  state.SetItemsProcessed(state.iterations() * w.agent_count());
}
BENCHMARK(BM_WorldStep)->Arg(16)->Arg(64);

static void BM_ContagionStep(benchmark::State& state) {
  WorldState w = crowded(static_cast<int>(state.range(0)));
  RngStream rng(CounterRng(2), 1);
  std::vector<double> rewards(w.agent_count()), previous(w.agent_count());
  for (auto& r : rewards) r = rng.uniform(-1.0, 1.0);
  for (auto _ : state) {
    contagion_step(w, rewards, previous, 9, ContagionParams{});
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * w.agent_count());
}
BENCHMARK(BM_ContagionStep)->Arg(16)->Arg(64);
