#include <benchmark/benchmark.h>

#include "crowdsim/harness.hpp"
#include "crowdsim/mfq/network.hpp"

using namespace crowdsim;

namespace {

ScenarioConfig desk(PolicyKind policy) {
  ScenarioConfig c;
  c.width = 16;
  c.height = 16;
  c.team(Team::Righteous) = {16, 0.6, 1.0, std::nullopt, policy, ScriptedMode::Chase};
  c.team(Team::Opposite) = {16, -0.6, -0.4, std::nullopt, policy, ScriptedMode::Chase};
  c.train.max_steps = 200;
  return c;
}

}  // namespace

static void BM_ScriptedRound(benchmark::State& state) {
  const ScenarioConfig c = desk(PolicyKind::Scripted);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_round(c, seed++, {}));
}
BENCHMARK(BM_ScriptedRound)->Unit(benchmark::kMillisecond);

static void BM_AcsedRound(benchmark::State& state) {
  const ScenarioConfig c = desk(PolicyKind::Acsed);
  const mfq::QNetwork r(c.network, 1), o(c.network, 2);
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(run_round(c, seed++, {{&r, &o}}));
}
BENCHMARK(BM_AcsedRound)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
