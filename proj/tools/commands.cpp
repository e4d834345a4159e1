#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "crowdsim/errors.hpp"
#include "crowdsim/metrics.hpp"
#include "crowdsim/mfq/learner.hpp"

namespace crowdsim::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string team_file(Team t) {
  return t == Team::Righteous ? "righteous.ckpt" : "opposite.ckpt";
}

std::string optional_number(const std::optional<double>& v) {
  return v ? io::format_number(*v) : std::string();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw FormatError("cannot write " + path.string());
}

}  // namespace

fs::path replay_name(int round) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "round_%04d.jsonl", round);
  return buf;
}

ScenarioConfig apply_overrides(ScenarioConfig config, const CommonOptions& options) {
  if (options.seed) config.seed = *options.seed;
  if (options.rounds) config.rounds = *options.rounds;
  if (options.smoke) {
    config.train.episodes = std::min(config.train.episodes, 2);
    config.train.max_steps = std::min(config.train.max_steps, 50);
    config.train.checkpoint_interval = std::min(config.train.checkpoint_interval, 1);
    config.rounds = std::min(config.rounds, 2);
  }
  config.validate();
  return config;
}

TrainResult cmd_train(const fs::path& config_path, const fs::path& out_dir,
                      const CommonOptions& options, std::ostream& log) {
  const ScenarioConfig config =
      io::resolve(apply_overrides(io::load_config(config_path), options));
  fs::create_directories(out_dir / "checkpoints");

  std::ofstream curve(out_dir / "training.csv", std::ios::binary);
  curve << "episode,epsilon,steps,winner,righteous_return,opposite_return,righteous_loss,"
           "opposite_loss\n";
  const int interval = config.train.checkpoint_interval;

  auto on_episode = [&](const EpisodeStats& s,
                        const std::array<std::optional<mfq::Learner>, 2>& learners) {
    curve << s.episode << ',' << io::format_number(s.epsilon) << ',' << s.steps << ','
          << to_string(s.winner) << ',' << io::format_number(s.mean_return[0]) << ','
          << io::format_number(s.mean_return[1]) << ',' << optional_number(s.mean_loss[0]) << ','
          << optional_number(s.mean_loss[1]) << '\n';
    if (interval > 0 && (s.episode + 1) % interval == 0) {
      for (Team t : kTeams) {
        const auto& l = learners[index_of(t)];
        if (!l) continue;
        char name[64];
        std::snprintf(name, sizeof name, "%s_ep%06d.ckpt",
                      t == Team::Righteous ? "righteous" : "opposite", s.episode + 1);
        mfq::save_checkpoint(out_dir / "checkpoints" / name, l->net(), l->optimizer(),
                             l->config());
      }
    }
    if ((s.episode + 1) % 10 == 0) {
      log << "episode " << s.episode + 1 << '/' << config.train.episodes << " eps "
          << io::format_number(s.epsilon) << " return R " << io::format_number(s.mean_return[0])
          << " O " << io::format_number(s.mean_return[1]) << '\n';
    }
  };

  TrainResult result = train(config, on_episode);

  json manifest;
  manifest["config"] = json::parse(io::to_json(config, -1));
  manifest["config_hash"] = io::hex(io::config_hash(config));
  manifest["episodes"] = config.train.episodes;
  manifest["checkpoints"] = json::object();
  for (Team t : kTeams) {
    const auto& l = result.learners[index_of(t)];
    if (!l) continue;
    mfq::save_checkpoint(out_dir / team_file(t), l->net(), l->optimizer(), l->config());
    manifest["checkpoints"][std::string(to_string(t))] = team_file(t);
  }
  write_text(out_dir / "manifest.json", manifest.dump(2) + "\n");
  curve.flush();
  if (!curve) throw FormatError("cannot write training.csv");
  log << "trained " << config.train.episodes << " episodes into " << out_dir.string() << '\n';
  return result;
}

MatchSummary cmd_match(const fs::path& config_path, const std::vector<fs::path>& checkpoints,
                       const fs::path& out_dir, const CommonOptions& options, std::ostream& log,
                       int threads) {
  const ScenarioConfig config = apply_overrides(io::load_config(config_path), options);

  std::vector<Team> learning;
  for (Team t : kTeams) {
    if (is_learning(config.team(t).policy) && config.team(t).size > 0) learning.push_back(t);
  }
  if (checkpoints.size() > 2 ||
      (!learning.empty() && checkpoints.size() != learning.size() && checkpoints.size() != 1)) {
    throw ConfigError("expected " + std::to_string(learning.size()) +
                      " checkpoint(s) for the learning teams, got " +
                      std::to_string(checkpoints.size()));
  }
  std::vector<mfq::QNetwork> loaded;
  loaded.reserve(2);
  TeamNets nets;
  for (std::size_t i = 0; i < learning.size(); ++i) {
    const fs::path& p = checkpoints[std::min(i, checkpoints.size() - 1)];
    loaded.push_back(mfq::load_network(p, config.network));
    nets.nets[index_of(learning[i])] = &loaded.back();
  }

  MatchSummary summary = run_match(config, nets, config.rounds, true, threads);
  fs::create_directories(out_dir / "replays");
  io::write_match_stats(out_dir, config, summary);
  for (std::size_t r = 0; r < summary.rounds.size(); ++r) {
    io::write_replay(out_dir / "replays" / replay_name(static_cast<int>(r)), config,
                     summary.rounds[r]);
  }
  log << "match: Righteous " << summary.wins[0] << " Opposite " << summary.wins[1] << " draws "
      << summary.draws << " over " << summary.rounds.size() << " rounds\n";
  return summary;
}

io::VerifyReport cmd_replay_verify(const fs::path& replay_path, std::ostream& log) {
  const io::Replay replay = io::read_replay(replay_path);
  io::VerifyReport report = io::verify_replay(replay);
  if (report.ok) {
    log << replay_path.string() << ": ok (" << replay.steps.size() << " steps)\n";
  } else {
    log << replay_path.string() << ": mismatch at step " << report.divergent_step.value_or(-1)
        << ": " << report.detail << '\n';
  }
  return report;
}

void cmd_metrics(const fs::path& replay_a, const std::optional<fs::path>& replay_b,
                 const fs::path& out_dir, std::ostream& log) {
  const io::Replay a = io::read_replay(replay_a);
  const metrics::TrajectoryLog log_a = io::trajectory(a);
  fs::create_directories(out_dir);

  {
    const auto ratio = metrics::survivor_ratio(log_a);
    const auto er = metrics::mean_emotion(log_a, Team::Righteous);
    const auto eo = metrics::mean_emotion(log_a, Team::Opposite);
    std::ofstream out(out_dir / "curves.csv", std::ios::binary);
    out << "step,righteous_survivors,opposite_survivors,survivor_ratio,righteous_mean_emotion,"
           "opposite_mean_emotion\n";
    for (std::size_t k = 0; k < log_a.steps.size(); ++k) {
      out << k << ',' << metrics::alive_count(log_a.steps[k], Team::Righteous) << ','
          << metrics::alive_count(log_a.steps[k], Team::Opposite) << ','
          << (ratio[k] ? io::format_number(*ratio[k]) : std::string("inf")) << ','
          << io::format_number(er[k]) << ',' << io::format_number(eo[k]) << '\n';
    }
    if (!out) throw FormatError("cannot write curves.csv");
  }
  if (!replay_b) {
    log << "wrote curves for " << replay_a.string() << '\n';
    return;
  }

  const io::Replay b = io::read_replay(*replay_b);
  if (a.config.width != b.config.width || a.config.height != b.config.height ||
      a.config.walls != b.config.walls) {
    throw QueryError("replays were recorded on different maps and cannot be compared");
  }
  const metrics::TrajectoryLog log_b = io::trajectory(b);
  std::ofstream out(out_dir / "comparison.csv", std::ios::binary);
  out << "team,angular_error_mean,angular_error_variance,angular_pairs_used,"
         "angular_pairs_skipped,entropy\n";
  for (Team t : kTeams) {
    const metrics::DominantPath pa = metrics::dominant_path(log_a, t);
    const metrics::DominantPath pb = metrics::dominant_path(log_b, t);
    std::vector<metrics::Vec2> da = metrics::directions(pa);
    std::vector<metrics::Vec2> db = metrics::directions(pb);
    const std::size_t n = std::min(da.size(), db.size());
    da.resize(n);
    db.resize(n);
    const metrics::AngularError ae = metrics::angular_error(da, db);
    std::string entropy = "undefined";
    if (std::min(pa.size(), pb.size()) >= 3) {
      entropy = io::format_number(metrics::entropy_metric(pa, pb));
    }
    out << to_string(t) << ',' << (ae.mean ? io::format_number(*ae.mean) : "undefined") << ','
        << (ae.variance ? io::format_number(*ae.variance) : "undefined") << ',' << ae.used << ','
        << ae.skipped << ',' << entropy << '\n';
  }
  if (!out) throw FormatError("cannot write comparison.csv");
  log << "wrote curves and comparison for " << replay_a.string() << " vs "
      << replay_b->string() << '\n';
}

}  // namespace crowdsim::cli
