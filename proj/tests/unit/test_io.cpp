#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "crowdsim/errors.hpp"
#include "crowdsim/io.hpp"
#include "fixtures.hpp"

using namespace crowdsim;
using crowdsim::testing::small_scenario;

namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({
  "map": {"width": 12, "height": 10, "walls": [[5, 5]]},
  "teams": {
    "righteous": {"size": 4, "emotion": [0.6, 1.0]},
    "opposite": {"size": 5, "emotion": [-0.6, -0.4], "policy": "Random"}
  }
})";

std::string error_of(const std::string& text) {
  try {
    io::parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

struct RecordedRound {
  ScenarioConfig config = small_scenario(3);
  RoundResult round;
  std::string text;

  RecordedRound() {
    config.team(Team::Opposite).policy = PolicyKind::Random;
    const mfq::QNetwork net(config.network, 3);
    RoundOptions opts;
    opts.record_trace = true;
    round = run_round(config, 17, {{&net, nullptr}}, opts);
    std::ostringstream out;
    io::write_replay(out, config, round);
    text = out.str();
  }
};

struct ScriptedRound {
  ScenarioConfig config = small_scenario(3);
  RoundResult round;
  std::string text;

  ScriptedRound() {
    config.team(Team::Righteous).policy = PolicyKind::Scripted;
    config.team(Team::Righteous).scripted = ScriptedMode::Chase;
    config.team(Team::Opposite).policy = PolicyKind::Random;
    RoundOptions opts;
    opts.record_trace = true;
    round = run_round(config, 17, {}, opts);
    std::ostringstream out;
    io::write_replay(out, config, round);
    text = out.str();
  }
};

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

io::Replay parse(const std::string& text) {
  std::istringstream in(text);
  return io::read_replay(in);
}

}  // namespace

TEST(Config, MinimalUsesDefaults) {
  const ScenarioConfig c = io::parse_config(kMinimal);
  EXPECT_EQ(c.width, 12);
  EXPECT_EQ(c.walls, (std::vector<Cell>{{5, 5}}));
  EXPECT_EQ(c.team(Team::Opposite).policy, PolicyKind::Random);
  EXPECT_EQ(c.team(Team::Righteous).policy, PolicyKind::Acsed);
  EXPECT_FALSE(c.team(Team::Righteous).spawn.has_value());
  EXPECT_EQ(c.train, mfq::TrainConfig{});
  EXPECT_EQ(c.network, mfq::NetShape{});
  EXPECT_EQ(c.rounds, 50);
  EXPECT_FALSE(c.gate.has_value());
}

TEST(Config, MissingFieldIsNamed) {
  const std::string e = error_of(R"({"map": {"height": 8}, "teams": {}})");
  EXPECT_NE(e.find("cfg.json"), std::string::npos) << e;
  EXPECT_NE(e.find("map.width"), std::string::npos) << e;
}

TEST(Config, UnknownFieldIsRejected) {
  std::string text = kMinimal;
  text.insert(text.rfind('}'), R"(, "train": {"episodez": 3})");
  const std::string e = error_of(text);
  EXPECT_NE(e.find("train.episodez"), std::string::npos) << e;
  EXPECT_NE(e.find("unknown field"), std::string::npos) << e;
}

TEST(Config, WrongTypeAndBadPolicy) {
  std::string text = kMinimal;
  text.insert(text.rfind('}'), R"(, "rounds": "many")");
  EXPECT_NE(error_of(text).find("rounds"), std::string::npos);
  std::string bad_policy = kMinimal;
  bad_policy.replace(bad_policy.find("Random"), 6, "Greedy");
  EXPECT_NE(error_of(bad_policy).find("Greedy"), std::string::npos);
}

TEST(Config, StoredActionIsValidated) {
  std::string text = kMinimal;
  text.insert(text.rfind('}'), R"(, "train": {"stored_action": "both"})");
  EXPECT_NE(error_of(text).find("train.stored_action"), std::string::npos);
  std::string ok = kMinimal;
  ok.insert(ok.rfind('}'), R"(, "train": {"stored_action": "executed"})");
  EXPECT_EQ(io::parse_config(ok).train.stored_action, mfq::StoredAction::Executed);
}

TEST(Config, RighteousRangeMustStayNonNegative) {
  std::string text = kMinimal;
  text.replace(text.find("[0.6, 1.0]"), 10, "[-0.5, 0.5]");
  const std::string e = error_of(text);
  EXPECT_NE(e.find("Righteous"), std::string::npos) << e;
}

TEST(Config, SyntaxErrorReportsLineAndColumn) {
  const std::string e = error_of("{\n  \"map\": {\n    \"width\": 12,,\n}");
  EXPECT_NE(e.find("cfg.json:3:"), std::string::npos) << e;
}

TEST(Config, JsonRoundTripAndHash) {
  ScenarioConfig c = io::resolve(io::parse_config(kMinimal));
  c.gate = GateConfig{{{0, 0}, {1, 9}}, 2.5};
  c.train.episodes = 7;
  c.train.stored_action = mfq::StoredAction::Executed;
  const std::string text = io::to_json(c);
  const ScenarioConfig back = io::parse_config(text);
  EXPECT_EQ(back, c);
  EXPECT_EQ(io::config_hash(back), io::config_hash(c));
  ScenarioConfig d = c;
  d.seed = 99;
  EXPECT_NE(io::config_hash(d), io::config_hash(c));
  EXPECT_EQ(io::hex(0xabcULL), "0000000000000abc");
  EXPECT_TRUE(c.team(Team::Righteous).spawn.has_value());
}

TEST(Config, LoadFromMissingFile) {
  EXPECT_THROW(io::load_config("/nonexistent/cfg.json"), ConfigError);
}

TEST(Replay, RoundTripAndVerify) {
  const ScriptedRound r;
  const io::Replay rep = parse(r.text);
  EXPECT_EQ(rep.seed, 17u);
  EXPECT_EQ(rep.config, r.config);
  EXPECT_EQ(rep.steps.size(), r.round.trace.size());
  EXPECT_EQ(rep.winner, r.round.winner);
  EXPECT_EQ(rep.initial_hash, r.round.initial_hash);
  const io::VerifyReport v = io::verify_replay(rep);
  EXPECT_TRUE(v.ok) << v.detail;
}

TEST(Replay, LearnedPolicyReplaysFromExecutedActions) {
  const RecordedRound r;
  const io::VerifyReport v = io::verify_replay(parse(r.text));
  EXPECT_TRUE(v.ok) << v.detail;
}

TEST(Replay, TamperedPositionIsReportedAtItsStep) {
  const ScriptedRound r;
  io::Replay rep = parse(r.text);
  ASSERT_GE(rep.steps.size(), 3u);
  rep.steps[2].agents[0].pos.x += 1;
  const io::VerifyReport v = io::verify_replay(rep);
  EXPECT_FALSE(v.ok);
  ASSERT_TRUE(v.divergent_step.has_value());
  EXPECT_EQ(*v.divergent_step, rep.steps[2].step);
}

TEST(Replay, TamperedActionDiverges) {
  const ScriptedRound r;
  io::Replay rep = parse(r.text);
  ASSERT_GE(rep.steps.size(), 2u);
  AgentRecord& a = rep.steps[1].agents[3];
  a.executed = a.executed == kIdleAction ? move_action(0) : kIdleAction;
  const io::VerifyReport v = io::verify_replay(rep);
  EXPECT_FALSE(v.ok);
  EXPECT_EQ(v.divergent_step.value_or(-1), rep.steps[1].step);
}

TEST(Replay, TamperedSeedFailsAtInitialState) {
  const ScriptedRound r;
  io::Replay rep = parse(r.text);
  rep.seed += 1;
  const io::VerifyReport v = io::verify_replay(rep);
  EXPECT_FALSE(v.ok);
  EXPECT_EQ(v.divergent_step.value_or(-1), 0);
}

TEST(Replay, TruncatedOrMalformedIsFormatError) {
  const ScriptedRound r;
  auto lines = lines_of(r.text);
  ASSERT_GE(lines.size(), 3u);
  auto truncated = lines;
  truncated.pop_back();
  EXPECT_THROW(parse(join_lines(truncated)), FormatError);
  auto cut = lines;
  cut[1] = cut[1].substr(0, cut[1].size() / 2);
  EXPECT_THROW(parse(join_lines(cut)), FormatError);
  EXPECT_THROW(parse(""), FormatError);
  EXPECT_THROW(parse("{\"format\": \"other\"}\n"), FormatError);
  auto reordered = lines;
  if (reordered.size() > 3) {
    std::swap(reordered[1], reordered[2]);
    EXPECT_THROW(parse(join_lines(reordered)), FormatError);
  }
}

TEST(Replay, TrajectoryFromReplayMatchesRound) {
  const ScriptedRound r;
  const auto a = io::trajectory(parse(r.text));
  const auto b = io::trajectory(r.round);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  ASSERT_EQ(a.steps.size(), r.round.trace.size() + 1);
  EXPECT_EQ(metrics::dominant_path(a, Team::Righteous),
            metrics::dominant_path(b, Team::Righteous));
}

TEST(Stats, FilesAndNumbers) {
  ScriptedRound r;
  MatchSummary s;
  s.rounds = {r.round, r.round};
  s.wins[r.round.winner == Winner::Righteous ? 0 : 1] = 2;
  const fs::path dir = fs::temp_directory_path() / "crowdsim_io_stats";
  fs::remove_all(dir);
  fs::create_directories(dir);
  io::write_match_stats(dir, r.config, s);
  for (const char* f : {"summary.json", "rounds.csv", "curves.csv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  std::ifstream rounds(dir / "rounds.csv");
  int n = 0;
  for (std::string l; std::getline(rounds, l);) ++n;
  EXPECT_EQ(n, 3);

  EXPECT_EQ(io::format_number(0.5), "0.5");
  EXPECT_EQ(io::format_number(1.0 / 0.0), "inf");
  const int pick = io::inspect_round(r.config, 10);
  EXPECT_GE(pick, 0);
  EXPECT_LT(pick, 10);
  EXPECT_EQ(pick, io::inspect_round(r.config, 10));
}
