#include "crowdsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <limits>
#include <string>
#include <thread>

#include "crowdsim/errors.hpp"
#include "crowdsim/mfq/learning.hpp"
#include "crowdsim/rng.hpp"

namespace crowdsim {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

int sign(int v) { return (v > 0) - (v < 0); }

ActionId step_toward(Cell from, Cell to) {
  const Cell offset{sign(to.x - from.x), sign(to.y - from.y)};
  if (offset.x == 0 && offset.y == 0) return kIdleAction;
  return move_action(direction_index(offset));
}

std::optional<int> adjacent_enemy_direction(const WorldState& world, const AgentState& a) {
  for (int d = 0; d < 8; ++d) {
    const Cell c = a.pos + kNeighborOffsets[d];
    if (!world.map().in_bounds(c)) continue;
    if (auto occ = world.occupant(c); occ && world.agents()[*occ].team != a.team) return d;
  }
  return std::nullopt;
}

ActionId scripted_action(const WorldState& world, AgentId id, ScriptedMode mode) {
  if (mode == ScriptedMode::Idle) return kIdleAction;
  const AgentState& a = world.agent(id);
  if (auto d = adjacent_enemy_direction(world, a)) return attack_action(*d);
  if (mode == ScriptedMode::AttackAdjacent) return kIdleAction;
  const AgentState* nearest = nullptr;
  double best = std::numeric_limits<double>::infinity();
  for (const AgentState& o : world.agents()) {
    if (!o.alive || o.team == a.team) continue;
    const double d = std::hypot(o.pos.x - a.pos.x, o.pos.y - a.pos.y);
    if (d < best) {
      best = d;
      nearest = &o;
    }
  }
  return nearest ? step_toward(a.pos, nearest->pos) : kIdleAction;
}

mfq::NetInput make_input(const WorldState& world, AgentId id, int window, bool blind) {
  Observation obs = perceive(world, id, window);
  std::vector<ActionId> acts;
  acts.reserve(obs.neighbors.size());
  for (AgentId n : obs.neighbors) acts.push_back(world.agents()[n].last_action);
  if (blind) obs.features[kFeatureEmotion] = 0.0;
  return {std::move(obs.occupancy), std::move(obs.features), mfq::mean_action(acts)};
}

double mean_team_emotion(const WorldState& world, Team t) {
  double sum = 0.0;
  int n = 0;
  for (const AgentState& a : world.agents()) {
    if (a.alive && a.team == t) {
      sum += a.emotion;
      ++n;
    }
  }
  return n ? sum / n : 0.0;
}

}  // namespace

std::string_view to_string(PolicyKind p) {
  switch (p) {
    case PolicyKind::Acsed: return "acsed";
    case PolicyKind::MfqBlind: return "mfq_blind";
    case PolicyKind::Random: return "random";
    case PolicyKind::Scripted: return "scripted";
  }
  return "?";
}

std::string_view to_string(ScriptedMode m) {
  switch (m) {
    case ScriptedMode::Idle: return "idle";
    case ScriptedMode::AttackAdjacent: return "attack_adjacent";
    case ScriptedMode::Chase: return "chase";
  }
  return "?";
}

std::string_view to_string(Winner w) {
  switch (w) {
    case Winner::Righteous: return "Righteous";
    case Winner::Opposite: return "Opposite";
    case Winner::Draw: return "Draw";
  }
  return "?";
}

PolicyKind parse_policy(std::string_view text) {
  const std::string s = lower(text);
  for (PolicyKind p : {PolicyKind::Acsed, PolicyKind::MfqBlind, PolicyKind::Random,
                       PolicyKind::Scripted}) {
    if (s == to_string(p)) return p;
  }
  throw ConfigError("unknown policy '" + std::string(text) +
                    "' (expected acsed, mfq_blind, random or scripted)");
}

ScriptedMode parse_scripted_mode(std::string_view text) {
  const std::string s = lower(text);
  for (ScriptedMode m : {ScriptedMode::Idle, ScriptedMode::AttackAdjacent, ScriptedMode::Chase}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown scripted mode '" + std::string(text) +
                    "' (expected idle, attack_adjacent or chase)");
}

Region default_spawn(int width, int height, Team team, int size) {
  const int left_center = width / 2 - 1;
  const int right_center = width / 2;
  const int room = std::max(1, left_center);
  const int cols = std::clamp((2 * size + height - 1) / std::max(1, height), 1, room);
  if (team == Team::Righteous) {
    return {{std::max(0, left_center - cols), 0}, {std::max(0, left_center - 1), height - 1}};
  }
  return {{std::min(width - 1, right_center + 1), 0},
          {std::min(width - 1, right_center + cols), height - 1}};
}

void ScenarioConfig::validate() const {
  if (width < 4 || height < 4) throw ConfigError("map.width and map.height must be >= 4");
  const GridMap map(width, height, walls);
  for (const Cell& w : walls) {
    if (!map.in_bounds(w)) throw ConfigError("map.walls contains a cell outside the map");
  }
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (!(match_epsilon >= 0.0 && match_epsilon <= 1.0)) {
    throw ConfigError("match_epsilon must lie in [0,1]");
  }
  rules.validate();
  contagion.validate();
  train.validate();
  network.validate();
  if (network.window % 2 == 0) throw ConfigError("network.window must be odd");
  if (network.channels != kOccupancyChannels || network.feature_dim != kFeatureDim ||
      network.action_dim != kNumActions) {
    throw ConfigError("network channels/feature_dim/action_dim must match the observation");
  }
  world_config().validate();
  if (gate) {
    if (!map.in_bounds(gate->region.min) || !map.in_bounds(gate->region.max) ||
        gate->region.min.x > gate->region.max.x || gate->region.min.y > gate->region.max.y) {
      throw ConfigError("gate.region must be a non-empty rectangle inside the map");
    }
    if (!(gate->threshold >= 0.0)) throw ConfigError("gate.threshold must be >= 0");
    if (!(gate->retreat_drop > 0.0 && gate->retreat_drop <= 1.0)) {
      throw ConfigError("gate.retreat_drop must lie in (0,1]");
    }
    if (gate->retreat_window < 1) throw ConfigError("gate.retreat_window must be >= 1");
  }
}

WorldConfig ScenarioConfig::world_config() const {
  WorldConfig w;
  w.map = GridMap(width, height, walls);
  for (Team t : kTeams) {
    const TeamConfig& tc = team(t);
    w.teams[index_of(t)] = {tc.size, tc.emotion_lo, tc.emotion_hi,
                            tc.spawn.value_or(default_spawn(width, height, t, tc.size))};
  }
  w.damage = damage;
  w.max_steps = train.max_steps;
  return w;
}

void RetreatMonitor::observe(int opposite_alive) {
  history_.push_back(opposite_alive);
  if (active_) return;
  const std::size_t n = history_.size();
  const std::size_t ref = n - 1 > static_cast<std::size_t>(window_) ? n - 1 - window_ : 0;
  const int before = history_[ref];
  if (before > 0 && before - opposite_alive >= drop_ * before - 1e-12) active_ = true;
}

GateShaping gate_shaping(const AgentState& agent, const GateConfig& gate, bool retreat_active) {
  GateShaping out;
  if (!agent.alive || agent.team != Team::Righteous) return out;
  if (gate.region.distance_to(agent.pos) > gate.threshold) out.adjustment = gate.penalty;
  out.move_to_gate = retreat_active && gate.retreat_rule && !gate.region.contains(agent.pos);
  return out;
}

ActionId toward_gate(const WorldState& world, AgentId agent, const Region& gate) {
  const Cell p = world.agent(agent).pos;
  const Cell target{std::clamp(p.x, gate.min.x, gate.max.x), std::clamp(p.y, gate.min.y, gate.max.y)};
  return step_toward(p, target);
}

RoundEngine::RoundEngine(const ScenarioConfig& config, std::uint64_t seed)
    : config_(&config), world_(reset(config.world_config(), seed)) {
  if (config.gate) {
    monitor_ = RetreatMonitor(config.gate->retreat_drop, config.gate->retreat_window);
    monitor_.observe(world_.alive_count(Team::Opposite));
  }
  rewards_.assign(world_.agent_count(), 0.0);
  previous_rewards_ = rewards_;
}

StepResult RoundEngine::advance(std::span<const ActionId> executed) {
  StepResult r = step(world_, executed);
  if (config_->gate) {
    monitor_.observe(world_.alive_count(Team::Opposite));
    for (const AgentState& a : world_.agents()) {
      r.rewards[a.id] += gate_shaping(a, *config_->gate, false).adjustment;
    }
  }
  previous_rewards_ = std::move(rewards_);
  rewards_ = r.rewards;
  contagion_step(world_, rewards_, previous_rewards_, config_->window(), config_->contagion);
  return r;
}

RoundResult run_round(const ScenarioConfig& config, std::uint64_t seed, const TeamNets& nets,
                      const RoundOptions& options) {
  const TrainingHooks* hooks = options.training;
  std::array<const mfq::QNetwork*, 2> policy_net{};
  for (Team t : kTeams) {
    const std::size_t ti = index_of(t);
    if (!is_learning(config.team(t).policy) || config.team(t).size == 0) continue;
    policy_net[ti] = hooks && hooks->learners[ti] ? &hooks->learners[ti]->net() : nets.nets[ti];
    if (!policy_net[ti]) {
      throw ContractViolation(std::string(to_string(t)) + " plays a learning policy without a network");
    }
    if (!(policy_net[ti]->shape() == config.network)) {
      throw ConfigError(std::string(to_string(t)) + " network shape does not match the scenario");
    }
  }

  RoundEngine engine(config, seed);
  const CounterRng rng(seed);
  const WorldState& world = engine.world();
  const std::size_t n = world.agent_count();
  const int window = config.window();
  const double epsilon = hooks ? hooks->epsilon : config.match_epsilon;

  RoundResult result;
  result.seed = seed;
  result.initial.assign(world.agents().begin(), world.agents().end());
  result.initial_hash = world.hash();
  std::array<int, 2> team_size{};
  auto record_curves = [&] {
    for (Team t : kTeams) {
      result.survivors[index_of(t)].push_back(world.alive_count(t));
      result.mean_emotion[index_of(t)].push_back(mean_team_emotion(world, t));
    }
  };
  record_curves();
  for (const AgentState& a : world.agents()) ++team_size[index_of(a.team)];

  auto learning_agent = [&](const AgentState& a) {
    return a.alive && policy_net[index_of(a.team)] != nullptr;
  };
  auto build_inputs = [&] {
    std::vector<std::optional<mfq::NetInput>> in(n);
    for (const AgentState& a : world.agents()) {
      if (!learning_agent(a)) continue;
      in[a.id] = make_input(world, a.id, window,
                            config.team(a.team).policy == PolicyKind::MfqBlind);
    }
    return in;
  };

  std::vector<std::optional<mfq::NetInput>> inputs = build_inputs();
  std::array<double, 2> returns{};

  while (!world.terminal()) {
    const int t_step = world.step_count();
    std::vector<ActionId> predicted(n, kNoAction);
    std::vector<ActionId> executed(n, kNoAction);

    for (Team team : kTeams) {
      const std::size_t ti = index_of(team);
      const TeamConfig& tc = config.team(team);
      std::vector<AgentId> ids;
      for (const AgentState& a : world.agents()) {
        if (a.alive && a.team == team) ids.push_back(a.id);
      }
      if (ids.empty()) continue;

      if (policy_net[ti]) {
        mfq::NetBatch batch(config.network, static_cast<int>(ids.size()));
        for (std::size_t k = 0; k < ids.size(); ++k) batch.set(static_cast<int>(k), *inputs[ids[k]]);
        const Eigen::MatrixXd q = policy_net[ti]->forward(batch);
        for (std::size_t k = 0; k < ids.size(); ++k) {
          const AgentId id = ids[k];
          const std::vector<double> qv(q.col(static_cast<Eigen::Index>(k)).data(),
                                       q.col(static_cast<Eigen::Index>(k)).data() + q.rows());
          RngStream explore(CounterRng(rng.bits({rng_stream::kExplore, std::uint64_t(t_step),
                                                 std::uint64_t(id)})),
                            rng_stream::kExploreAction);
          predicted[id] = mfq::select_action(qv, epsilon, explore);
          executed[id] = predicted[id];
          if (tc.policy == PolicyKind::Acsed) {
            executed[id] = determine_action(world.agent(id), predicted[id], qv,
                                            summarize_neighborhood(world, id, window, config.rules),
                                            config.rules);
          }
        }
      } else {
        for (AgentId id : ids) {
          predicted[id] = tc.policy == PolicyKind::Random
                              ? static_cast<ActionId>(rng.below(
                                    kNumActions, {rng_stream::kRandomPolicy, std::uint64_t(t_step),
                                                  std::uint64_t(id)}))
                              : scripted_action(world, id, tc.scripted);
          executed[id] = predicted[id];
        }
      }
      if (config.gate && team == Team::Righteous) {
        for (AgentId id : ids) {
          if (gate_shaping(world.agent(id), *config.gate, engine.retreat_active()).move_to_gate) {
            executed[id] = toward_gate(world, id, config.gate->region);
          }
        }
      }
    }

    const std::vector<bool> alive_before = [&] {
      std::vector<bool> v(n);
      for (const AgentState& a : world.agents()) v[a.id] = a.alive;
      return v;
    }();
    engine.advance(executed);
    const std::vector<double>& rewards = engine.rewards();
    for (const AgentState& a : world.agents()) {
      if (alive_before[a.id]) returns[index_of(a.team)] += rewards[a.id];
    }

    std::vector<std::optional<mfq::NetInput>> next = build_inputs();
    if (hooks) {
      for (const AgentState& a : world.agents()) {
        mfq::Learner* learner = hooks->learners[index_of(a.team)];
        if (!learner || !inputs[a.id]) continue;
        mfq::Transition tr;
        tr.obs = *inputs[a.id];
        tr.action = learner->config().stored_action == mfq::StoredAction::Predicted
                        ? predicted[a.id]
                        : executed[a.id];
        tr.reward = rewards[a.id];
        tr.terminal = !a.alive || world.terminal();
        if (next[a.id]) tr.next_obs = *next[a.id];
        learner->remember(std::move(tr));
      }
      if (hooks->after_step) hooks->after_step();
    }

    record_curves();
    if (options.record_trace) {
      StepRecord rec;
      rec.step = world.step_count();
      rec.hash = world.hash();
      rec.terminal = world.terminal();
      for (const AgentState& a : world.agents()) {
        rec.agents.push_back({a.id, a.pos, executed[a.id], predicted[a.id], a.emotion, a.hp,
                              rewards[a.id], a.alive});
      }
      result.trace.push_back(std::move(rec));
    }
    inputs = std::move(next);
  }

  result.steps = world.step_count();
  const int r_alive = world.alive_count(Team::Righteous);
  const int o_alive = world.alive_count(Team::Opposite);
  result.winner = r_alive > o_alive   ? Winner::Righteous
                  : o_alive > r_alive ? Winner::Opposite
                                      : Winner::Draw;
  for (std::size_t ti = 0; ti < 2; ++ti) {
    result.mean_return[ti] = team_size[ti] ? returns[ti] / team_size[ti] : 0.0;
  }
  return result;
}

std::uint64_t training_round_seed(const ScenarioConfig& config, int episode) {
  return CounterRng(config.seed).bits({rng_stream::kRoundSeed, 0, std::uint64_t(episode)});
}

std::uint64_t match_round_seed(const ScenarioConfig& config, int round) {
  return CounterRng(config.seed).bits({rng_stream::kRoundSeed, 1, std::uint64_t(round)});
}

TrainResult train(const ScenarioConfig& config, const EpisodeCallback& on_episode) {
  config.validate();
  TrainResult out;
  std::array<std::optional<RngStream>, 2> sample_rng;
  const CounterRng root(config.seed);
  for (Team t : kTeams) {
    const std::size_t ti = index_of(t);
    if (!is_learning(config.team(t).policy)) continue;
    out.learners[ti].emplace(config.network, config.train, root.bits({rng_stream::kInit, ti}));
    sample_rng[ti].emplace(CounterRng(root.bits({rng_stream::kReplaySample, ti})),
                           rng_stream::kReplaySample);
  }
  if (!out.learners[0] && !out.learners[1]) {
    throw ConfigError("training needs at least one team with a learning policy");
  }

  std::int64_t env_steps = 0;
  for (int e = 0; e < config.train.episodes; ++e) {
    std::array<double, 2> loss_sum{};
    std::array<int, 2> loss_count{};
    TrainingHooks hooks;
    hooks.epsilon = config.train.epsilon_at(e);
    for (std::size_t ti = 0; ti < 2; ++ti) {
      hooks.learners[ti] = out.learners[ti] ? &*out.learners[ti] : nullptr;
    }
    hooks.after_step = [&] {
      if (++env_steps % config.train.train_every != 0) return;
      for (std::size_t ti = 0; ti < 2; ++ti) {
        if (!out.learners[ti]) continue;
        if (auto l = out.learners[ti]->update(*sample_rng[ti])) {
          if (!std::isfinite(*l)) {
            throw TrainingError("loss diverged in episode " + std::to_string(e) + " for " +
                                std::string(to_string(kTeams[ti])));
          }
          loss_sum[ti] += *l;
          ++loss_count[ti];
        }
      }
    };
    RoundOptions opts;
    opts.training = &hooks;
    const RoundResult rr = run_round(config, training_round_seed(config, e), {}, opts);

    EpisodeStats stats;
    stats.episode = e;
    stats.epsilon = hooks.epsilon;
    stats.steps = rr.steps;
    stats.winner = rr.winner;
    stats.mean_return = rr.mean_return;
    for (std::size_t ti = 0; ti < 2; ++ti) {
      if (loss_count[ti]) stats.mean_loss[ti] = loss_sum[ti] / loss_count[ti];
    }
    out.episodes.push_back(stats);
    if (on_episode) on_episode(stats, out.learners);
  }
  return out;
}

double MatchSummary::win_rate(Team t) const {
  return rounds.empty() ? 0.0 : static_cast<double>(wins[index_of(t)]) / rounds.size();
}

MatchSummary run_match(const ScenarioConfig& config, const TeamNets& nets, int rounds,
                       bool record_traces, int threads) {
  config.validate();
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  MatchSummary summary;
  summary.rounds.resize(static_cast<std::size_t>(rounds));
  RoundOptions opts;
  opts.record_trace = record_traces;

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (int r = next++; r < rounds && !failed; r = next++) {
      try {
        summary.rounds[r] = run_round(config, match_round_seed(config, r), nets, opts);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  const int workers = std::clamp(threads, 1, rounds);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  for (const RoundResult& r : summary.rounds) {
    if (r.winner == Winner::Righteous) ++summary.wins[0];
    else if (r.winner == Winner::Opposite) ++summary.wins[1];
    else ++summary.draws;
  }
  return summary;
}

}  // namespace crowdsim
