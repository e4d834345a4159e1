#include "crowdsim/io.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "crowdsim/errors.hpp"
#include "crowdsim/rng.hpp"

namespace crowdsim::io {

using nlohmann::json;

namespace {

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

// Reads one JSON object, tracking which keys were consumed so leftovers can
// be reported as unknown fields.
class Fields {
 public:
  Fields(const json& j, std::string path, std::string_view source)
      : j_(j), path_(std::move(path)), source_(source) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] void fail(const std::string& field, std::string_view what) const {
    throw ConfigError(std::string(source_) + ": field '" + (field.empty() ? "<root>" : field) +
                      "': " + std::string(what));
  }

  const json* find(std::string_view key) {
    seen_.insert(std::string(key));
    auto it = j_.find(std::string(key));
    return it == j_.end() ? nullptr : &*it;
  }
  const json& require(std::string_view key) {
    const json* v = find(key);
    if (!v) fail(join(path_, key), "missing");
    return *v;
  }
  Fields object(std::string_view key) { return Fields(require(key), join(path_, key), source_); }
  std::optional<Fields> optional_object(std::string_view key) {
    const json* v = find(key);
    if (!v || v->is_null()) return std::nullopt;
    return Fields(*v, join(path_, key), source_);
  }

  double number(std::string_view key, double fallback) {
    const json* v = find(key);
    return v ? as_number(*v, join(path_, key)) : fallback;
  }
  int integer(std::string_view key, int fallback) {
    const json* v = find(key);
    return v ? as_int(*v, join(path_, key)) : fallback;
  }
  int required_integer(std::string_view key) { return as_int(require(key), join(path_, key)); }
  std::uint64_t unsigned64(std::string_view key, std::uint64_t fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
      fail(join(path_, key), "expected a non-negative integer");
    }
    return v->get<std::uint64_t>();
  }
  bool boolean(std::string_view key, bool fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail(join(path_, key), "expected true or false");
    return v->get<bool>();
  }
  std::optional<std::string> string(std::string_view key) {
    const json* v = find(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) fail(join(path_, key), "expected a string");
    return v->get<std::string>();
  }
  std::pair<double, double> range(std::string_view key) {
    const json& v = require(key);
    const std::string f = join(path_, key);
    if (!v.is_array() || v.size() != 2) fail(f, "expected [lo, hi]");
    return {as_number(v[0], f), as_number(v[1], f)};
  }
  Cell cell(const json& v, const std::string& f) const {
    if (!v.is_array() || v.size() != 2) fail(f, "expected [x, y]");
    return {as_int(v[0], f), as_int(v[1], f)};
  }
  std::optional<Region> region(std::string_view key) {
    auto r = optional_object(key);
    if (!r) return std::nullopt;
    Region out{r->cell(r->require("min"), join(r->path_, "min")),
               r->cell(r->require("max"), join(r->path_, "max"))};
    r->finish();
    return out;
  }
  std::vector<Cell> cells(std::string_view key) {
    const json* v = find(key);
    if (!v) return {};
    const std::string f = join(path_, key);
    if (!v->is_array()) fail(f, "expected a list of [x, y]");
    std::vector<Cell> out;
    for (const json& c : *v) out.push_back(cell(c, f));
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(join(path_, it.key()), "unknown field");
    }
  }

  const std::string& path() const { return path_; }

 private:
  double as_number(const json& v, const std::string& f) const {
    if (!v.is_number()) fail(f, "expected a number");
    return v.get<double>();
  }
  int as_int(const json& v, const std::string& f) const {
    if (!v.is_number_integer()) fail(f, "expected an integer");
    const auto x = v.get<std::int64_t>();
    if (x < INT32_MIN || x > INT32_MAX) fail(f, "integer out of range");
    return static_cast<int>(x);
  }

  const json& j_;
  std::string path_;
  std::string_view source_;
  std::set<std::string> seen_;
};

json cell_json(Cell c) { return json::array({c.x, c.y}); }
json region_json(const Region& r) { return {{"min", cell_json(r.min)}, {"max", cell_json(r.max)}}; }

const char* team_key(Team t) { return t == Team::Righteous ? "righteous" : "opposite"; }

json config_json(const ScenarioConfig& c) {
  json j;
  json walls = json::array();
  for (Cell w : c.walls) walls.push_back(cell_json(w));
  j["map"] = {{"width", c.width}, {"height", c.height}, {"walls", walls}};
  for (Team t : kTeams) {
    const TeamConfig& tc = c.team(t);
    json tj = {{"size", tc.size},
               {"emotion", json::array({tc.emotion_lo, tc.emotion_hi})},
               {"policy", to_string(tc.policy)},
               {"scripted", to_string(tc.scripted)}};
    if (tc.spawn) tj["spawn"] = region_json(*tc.spawn);
    j["teams"][team_key(t)] = tj;
  }
  j["rules"] = {{"threshold", c.rules.threshold}, {"emotion_gap", c.rules.emotion_gap}};
  j["contagion"] = {{"receive_strength", c.contagion.receive_strength},
                    {"send_strength", c.contagion.send_strength},
                    {"delta", c.contagion.delta},
                    {"gamma_e", c.contagion.gamma_e}};
  j["damage"] = {{"beta", c.damage.beta},
                 {"base_hp", c.damage.base_hp},
                 {"emotion_cap", c.damage.emotion_cap}};
  const mfq::TrainConfig& tr = c.train;
  j["train"] = {{"discount", tr.discount},
                {"learning_rate", tr.learning_rate},
                {"batch_size", tr.batch_size},
                {"memory_size", tr.memory_size},
                {"max_steps", tr.max_steps},
                {"epsilon_start", tr.epsilon_start},
                {"epsilon_end", tr.epsilon_end},
                {"epsilon_decay_fraction", tr.epsilon_decay_fraction},
                {"temperature", tr.temperature},
                {"target_sync_interval", tr.target_sync_interval},
                {"episodes", tr.episodes},
                {"train_every", tr.train_every},
                {"checkpoint_interval", tr.checkpoint_interval},
                {"stored_action",
                 tr.stored_action == mfq::StoredAction::Predicted ? "predicted" : "executed"}};
  const mfq::NetShape& n = c.network;
  j["network"] = {{"window", n.window},
                  {"channels", n.channels},
                  {"conv1_filters", n.conv1_filters},
                  {"conv2_filters", n.conv2_filters},
                  {"kernel", n.kernel},
                  {"conv_padding", n.conv_padding},
                  {"feature_dim", n.feature_dim},
                  {"action_dim", n.action_dim},
                  {"spatial_width", n.spatial_width},
                  {"feature_width", n.feature_width},
                  {"mean_width", n.mean_width},
                  {"trunk1_width", n.trunk1_width},
                  {"trunk2_width", n.trunk2_width}};
  j["match_epsilon"] = c.match_epsilon;
  j["rounds"] = c.rounds;
  j["seed"] = c.seed;
  if (c.gate) {
    j["gate"] = {{"region", region_json(c.gate->region)},
                 {"threshold", c.gate->threshold},
                 {"penalty", c.gate->penalty},
                 {"retreat_rule", c.gate->retreat_rule},
                 {"retreat_drop", c.gate->retreat_drop},
                 {"retreat_window", c.gate->retreat_window}};
  }
  return j;
}

ScenarioConfig config_from(const json& root, std::string_view source) {
  ScenarioConfig c;
  Fields top(root, "", source);

  Fields map = top.object("map");
  c.width = map.required_integer("width");
  c.height = map.required_integer("height");
  c.walls = map.cells("walls");
  map.finish();

  Fields teams = top.object("teams");
  for (Team t : kTeams) {
    Fields tf = teams.object(team_key(t));
    TeamConfig& tc = c.team(t);
    tc.size = tf.required_integer("size");
    std::tie(tc.emotion_lo, tc.emotion_hi) = tf.range("emotion");
    try {
      if (auto p = tf.string("policy")) tc.policy = parse_policy(*p);
      if (auto s = tf.string("scripted")) tc.scripted = parse_scripted_mode(*s);
    } catch (const ConfigError& e) {
      tf.fail(tf.path(), e.what());
    }
    tc.spawn = tf.region("spawn");
    tf.finish();
  }
  teams.finish();

  if (auto r = top.optional_object("rules")) {
    c.rules.threshold = r->number("threshold", c.rules.threshold);
    c.rules.emotion_gap = r->number("emotion_gap", c.rules.emotion_gap);
    r->finish();
  }
  if (auto g = top.optional_object("contagion")) {
    ContagionParams& p = c.contagion;
    p.receive_strength = g->number("receive_strength", p.receive_strength);
    p.send_strength = g->number("send_strength", p.send_strength);
    p.delta = g->number("delta", p.delta);
    p.gamma_e = g->number("gamma_e", p.gamma_e);
    g->finish();
  }
  if (auto d = top.optional_object("damage")) {
    c.damage.beta = d->number("beta", c.damage.beta);
    c.damage.base_hp = d->number("base_hp", c.damage.base_hp);
    c.damage.emotion_cap = d->number("emotion_cap", c.damage.emotion_cap);
    d->finish();
  }
  if (auto t = top.optional_object("train")) {
    mfq::TrainConfig& tr = c.train;
    tr.discount = t->number("discount", tr.discount);
    tr.learning_rate = t->number("learning_rate", tr.learning_rate);
    tr.batch_size = t->integer("batch_size", tr.batch_size);
    tr.memory_size = t->integer("memory_size", tr.memory_size);
    tr.max_steps = t->integer("max_steps", tr.max_steps);
    tr.epsilon_start = t->number("epsilon_start", tr.epsilon_start);
    tr.epsilon_end = t->number("epsilon_end", tr.epsilon_end);
    tr.epsilon_decay_fraction = t->number("epsilon_decay_fraction", tr.epsilon_decay_fraction);
    tr.temperature = t->number("temperature", tr.temperature);
    tr.target_sync_interval = t->integer("target_sync_interval", tr.target_sync_interval);
    tr.episodes = t->integer("episodes", tr.episodes);
    tr.train_every = t->integer("train_every", tr.train_every);
    tr.checkpoint_interval = t->integer("checkpoint_interval", tr.checkpoint_interval);
    if (auto a = t->string("stored_action")) {
      if (*a == "predicted") tr.stored_action = mfq::StoredAction::Predicted;
      else if (*a == "executed") tr.stored_action = mfq::StoredAction::Executed;
      else t->fail(join(t->path(), "stored_action"), "expected predicted or executed, got '" + *a + "'");
    }
    t->finish();
  }
  if (auto n = top.optional_object("network")) {
    mfq::NetShape& s = c.network;
    s.window = n->integer("window", s.window);
    s.channels = n->integer("channels", s.channels);
    s.conv1_filters = n->integer("conv1_filters", s.conv1_filters);
    s.conv2_filters = n->integer("conv2_filters", s.conv2_filters);
    s.kernel = n->integer("kernel", s.kernel);
    s.conv_padding = n->integer("conv_padding", s.conv_padding);
    s.feature_dim = n->integer("feature_dim", s.feature_dim);
    s.action_dim = n->integer("action_dim", s.action_dim);
    s.spatial_width = n->integer("spatial_width", s.spatial_width);
    s.feature_width = n->integer("feature_width", s.feature_width);
    s.mean_width = n->integer("mean_width", s.mean_width);
    s.trunk1_width = n->integer("trunk1_width", s.trunk1_width);
    s.trunk2_width = n->integer("trunk2_width", s.trunk2_width);
    n->finish();
  }
  c.match_epsilon = top.number("match_epsilon", c.match_epsilon);
  c.rounds = top.integer("rounds", c.rounds);
  c.seed = top.unsigned64("seed", c.seed);
  if (auto g = top.optional_object("gate")) {
    GateConfig gate;
    auto region = g->region("region");
    if (!region) g->fail(join(g->path(), "region"), "missing");
    gate.region = *region;
    gate.threshold = g->number("threshold", gate.threshold);
    gate.penalty = g->number("penalty", gate.penalty);
    gate.retreat_rule = g->boolean("retreat_rule", gate.retreat_rule);
    gate.retreat_drop = g->number("retreat_drop", gate.retreat_drop);
    gate.retreat_window = g->integer("retreat_window", gate.retreat_window);
    g->finish();
    c.gate = gate;
  }
  top.finish();

  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(source) + ": " + e.what());
  }
  return c;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t parse_hex(const json& v) {
  if (!v.is_string()) throw FormatError("expected a hex hash string");
  const std::string s = v.get<std::string>();
  if (s.empty() || s.size() > 16) throw FormatError("malformed hash '" + s + "'");
  std::uint64_t out = 0;
  for (char ch : s) {
    out <<= 4;
    if (ch >= '0' && ch <= '9') out |= static_cast<std::uint64_t>(ch - '0');
    else if (ch >= 'a' && ch <= 'f') out |= static_cast<std::uint64_t>(ch - 'a' + 10);
    else throw FormatError("malformed hash '" + s + "'");
  }
  return out;
}

Winner parse_winner(const json& v) {
  if (!v.is_string()) throw FormatError("winner must be a string");
  const std::string s = v.get<std::string>();
  for (Winner w : {Winner::Righteous, Winner::Opposite, Winner::Draw}) {
    if (s == to_string(w)) return w;
  }
  throw FormatError("unknown winner '" + s + "'");
}

json parse_line(const std::string& line, int line_no) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    throw FormatError("replay line " + std::to_string(line_no) + ": " + e.what());
  }
}

template <typename T>
T field(const json& j, const char* key, int line_no) {
  auto it = j.find(key);
  if (it == j.end()) {
    throw FormatError("replay line " + std::to_string(line_no) + ": missing '" + key + "'");
  }
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw FormatError("replay line " + std::to_string(line_no) + ": bad '" + key + "'");
  }
}

Team team_of(const std::vector<AgentState>& roster, AgentId id) { return roster[id].team; }

}  // namespace

ScenarioConfig parse_config(std::string_view text, std::string_view source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(std::string(source) + ":" + std::to_string(line) + ":" +
                      std::to_string(col) + ": malformed JSON (" + e.what() + ")");
  }
  return config_from(root, source);
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

ScenarioConfig resolve(const ScenarioConfig& config) {
  ScenarioConfig out = config;
  for (Team t : kTeams) {
    TeamConfig& tc = out.team(t);
    if (!tc.spawn) tc.spawn = default_spawn(out.width, out.height, t, tc.size);
  }
  return out;
}

std::string to_json(const ScenarioConfig& config, int indent) {
  return config_json(config).dump(indent);
}

std::uint64_t config_hash(const ScenarioConfig& config) { return fnv1a(to_json(config, -1)); }

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

void write_replay(std::ostream& out, const ScenarioConfig& config, const RoundResult& round) {
  json header = {{"format", kReplayFormat},
                 {"version", kReplayVersion},
                 {"config", config_json(config)},
                 {"config_hash", hex(config_hash(config))},
                 {"seed", round.seed},
                 {"initial_hash", hex(round.initial_hash)}};
  json roster = json::array();
  for (const AgentState& a : round.initial) {
    roster.push_back({a.id, to_string(a.team), a.pos.x, a.pos.y, a.emotion, a.hp});
  }
  header["roster"] = roster;
  out << header.dump() << '\n';
  for (const StepRecord& s : round.trace) {
    json agents = json::array();
    for (const AgentRecord& a : s.agents) {
      agents.push_back({a.id, a.pos.x, a.pos.y, a.executed, a.predicted, a.emotion, a.hp,
                        a.reward, a.alive});
    }
    json line = {{"step", s.step}, {"hash", hex(s.hash)}, {"terminal", s.terminal},
                 {"agents", agents}};
    out << line.dump() << '\n';
  }
  out << json{{"end", true}, {"winner", to_string(round.winner)}, {"steps", round.steps}}.dump()
      << '\n';
}

void write_replay(const std::filesystem::path& path, const ScenarioConfig& config,
                  const RoundResult& round) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write replay " + path.string());
  write_replay(out, config, round);
  out.flush();
  if (!out) throw FormatError("replay write failed: " + path.string());
}

Replay read_replay(std::istream& in) {
  Replay r;
  std::string line;
  int line_no = 0;
  if (!std::getline(in, line)) throw FormatError("empty replay");
  ++line_no;
  const json header = parse_line(line, line_no);
  if (!header.is_object() || field<std::string>(header, "format", 1) != kReplayFormat) {
    throw FormatError("not a crowdsim replay");
  }
  const int version = field<int>(header, "version", 1);
  if (version != kReplayVersion) {
    throw FormatError("unsupported replay version " + std::to_string(version));
  }
  try {
    r.config = config_from(header.at("config"), "replay header");
  } catch (const ConfigError& e) {
    throw FormatError(std::string("replay header config invalid: ") + e.what());
  } catch (const json::exception&) {
    throw FormatError("replay header has no config");
  }
  r.config_hash = parse_hex(header.value("config_hash", json()));
  r.seed = field<std::uint64_t>(header, "seed", 1);
  r.initial_hash = parse_hex(header.value("initial_hash", json()));
  const json roster = header.value("roster", json());
  if (!roster.is_array()) throw FormatError("replay header has no roster");
  try {
    for (const json& a : roster) {
      AgentState s;
      s.id = a.at(0).get<AgentId>();
      const std::string team = a.at(1).get<std::string>();
      if (team != "Righteous" && team != "Opposite") throw FormatError("bad team " + team);
      s.team = team == "Righteous" ? Team::Righteous : Team::Opposite;
      s.pos = {a.at(2).get<int>(), a.at(3).get<int>()};
      s.emotion = a.at(4).get<double>();
      s.hp = a.at(5).get<double>();
      if (s.id != static_cast<AgentId>(r.roster.size())) throw FormatError("roster ids not dense");
      r.roster.push_back(s);
    }
  } catch (const json::exception&) {
    throw FormatError("malformed roster entry");
  }

  bool ended = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (ended) throw FormatError("data after the end record");
    const json j = parse_line(line, line_no);
    if (j.contains("end")) {
      r.winner = parse_winner(j.value("winner", json()));
      if (field<int>(j, "steps", line_no) != static_cast<int>(r.steps.size())) {
        throw FormatError("end record step count disagrees with the step records");
      }
      ended = true;
      continue;
    }
    StepRecord s;
    s.step = field<int>(j, "step", line_no);
    s.hash = parse_hex(j.value("hash", json()));
    s.terminal = field<bool>(j, "terminal", line_no);
    if (s.step != static_cast<int>(r.steps.size()) + 1) {
      throw FormatError("replay line " + std::to_string(line_no) + ": steps out of sequence");
    }
    const json agents = j.value("agents", json());
    if (!agents.is_array() || agents.size() != r.roster.size()) {
      throw FormatError("replay line " + std::to_string(line_no) + ": agent list size mismatch");
    }
    try {
      for (const json& a : agents) {
        s.agents.push_back({a.at(0).get<AgentId>(),
                            {a.at(1).get<int>(), a.at(2).get<int>()},
                            a.at(3).get<ActionId>(),
                            a.at(4).get<ActionId>(),
                            a.at(5).get<double>(),
                            a.at(6).get<double>(),
                            a.at(7).get<double>(),
                            a.at(8).get<bool>()});
      }
    } catch (const json::exception&) {
      throw FormatError("replay line " + std::to_string(line_no) + ": malformed agent entry");
    }
    r.steps.push_back(std::move(s));
  }
  if (!ended) throw FormatError("replay truncated: no end record");
  return r;
}

Replay read_replay(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open replay " + path.string());
  return read_replay(in);
}

VerifyReport verify_replay(const Replay& replay) {
  auto mismatch = [](int step, std::string detail) {
    return VerifyReport{false, step, std::move(detail)};
  };
  if (config_hash(replay.config) != replay.config_hash) {
    return mismatch(0, "config hash does not match the embedded config");
  }
  RoundEngine engine(replay.config, replay.seed);
  const WorldState& world = engine.world();
  if (world.hash() != replay.initial_hash) return mismatch(0, "initial state hash differs");
  if (world.agent_count() != replay.roster.size()) return mismatch(0, "roster size differs");
  for (const AgentState& a : replay.roster) {
    const AgentState& w = world.agent(a.id);
    if (w.team != a.team || w.pos != a.pos || w.emotion != a.emotion || w.hp != a.hp) {
      return mismatch(0, "roster entry for agent " + std::to_string(a.id) + " differs");
    }
  }

  std::vector<ActionId> actions(world.agent_count());
  for (const StepRecord& s : replay.steps) {
    if (world.terminal()) return mismatch(s.step, "round already ended before this step");
    for (const AgentRecord& a : s.agents) {
      if (a.id < 0 || static_cast<std::size_t>(a.id) >= actions.size()) {
        return mismatch(s.step, "agent id out of range");
      }
      actions[a.id] = world.agent(a.id).alive ? a.executed : kNoAction;
    }
    try {
      engine.advance(actions);
    } catch (const ContractViolation& e) {
      return mismatch(s.step, std::string("recorded actions rejected: ") + e.what());
    }
    if (world.hash() != s.hash) return mismatch(s.step, "state hash differs");
    if (world.terminal() != s.terminal) return mismatch(s.step, "terminal flag differs");
    for (const AgentRecord& a : s.agents) {
      const AgentState& w = world.agent(a.id);
      if (w.pos != a.pos || w.emotion != a.emotion || w.hp != a.hp || w.alive != a.alive ||
          engine.rewards()[a.id] != a.reward) {
        return mismatch(s.step, "recorded fields of agent " + std::to_string(a.id) + " differ");
      }
    }
  }
  if (!world.terminal()) {
    return mismatch(static_cast<int>(replay.steps.size()), "replay ends before the round does");
  }
  const int r = world.alive_count(Team::Righteous);
  const int o = world.alive_count(Team::Opposite);
  const Winner w = r > o ? Winner::Righteous : o > r ? Winner::Opposite : Winner::Draw;
  if (w != replay.winner) {
    return mismatch(static_cast<int>(replay.steps.size()), "recorded winner differs");
  }
  return {true, std::nullopt, "ok"};
}

metrics::TrajectoryLog trajectory(const Replay& replay) {
  metrics::TrajectoryLog log;
  std::vector<metrics::TrajectoryEntry> first;
  for (const AgentState& a : replay.roster) first.push_back({a.id, a.team, a.pos, a.emotion, true});
  log.steps.push_back(std::move(first));
  for (const StepRecord& s : replay.steps) {
    std::vector<metrics::TrajectoryEntry> row;
    for (const AgentRecord& a : s.agents) {
      row.push_back({a.id, team_of(replay.roster, a.id), a.pos, a.emotion, a.alive});
    }
    log.steps.push_back(std::move(row));
  }
  return log;
}

metrics::TrajectoryLog trajectory(const RoundResult& round) {
  metrics::TrajectoryLog log;
  std::vector<metrics::TrajectoryEntry> first;
  for (const AgentState& a : round.initial) first.push_back({a.id, a.team, a.pos, a.emotion, a.alive});
  log.steps.push_back(std::move(first));
  for (const StepRecord& s : round.trace) {
    std::vector<metrics::TrajectoryEntry> row;
    for (const AgentRecord& a : s.agents) {
      row.push_back({a.id, team_of(round.initial, a.id), a.pos, a.emotion, a.alive});
    }
    log.steps.push_back(std::move(row));
  }
  return log;
}

int inspect_round(const ScenarioConfig& config, int rounds) {
  if (rounds < 1) throw ContractViolation("no rounds to inspect");
  return static_cast<int>(CounterRng(config.seed).below(static_cast<std::uint64_t>(rounds),
                                                        {rng_stream::kInspect}));
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void write_match_stats(const std::filesystem::path& out_dir, const ScenarioConfig& config,
                       const MatchSummary& summary) {
  std::filesystem::create_directories(out_dir);
  const int n = static_cast<int>(summary.rounds.size());
  const int inspect = inspect_round(config, n);

  json s;
  s["rounds"] = n;
  s["seed"] = config.seed;
  s["config_hash"] = hex(config_hash(config));
  s["wins"] = {{"Righteous", summary.wins[0]}, {"Opposite", summary.wins[1]}};
  s["draws"] = summary.draws;
  s["win_rate"] = {{"Righteous", summary.win_rate(Team::Righteous)},
                   {"Opposite", summary.win_rate(Team::Opposite)}};
  s["inspect_round"] = inspect;
  {
    std::ofstream out(out_dir / "summary.json", std::ios::binary);
    out << s.dump(2) << '\n';
    if (!out) throw FormatError("cannot write summary.json");
  }

  std::ofstream rounds(out_dir / "rounds.csv", std::ios::binary);
  rounds << "round,seed,winner,steps,righteous_survivors,opposite_survivors,righteous_return,"
            "opposite_return\n";
  std::ofstream curves(out_dir / "curves.csv", std::ios::binary);
  curves << "round,step,righteous_survivors,opposite_survivors,survivor_ratio,"
            "righteous_mean_emotion,opposite_mean_emotion\n";
  for (int i = 0; i < n; ++i) {
    const RoundResult& r = summary.rounds[i];
    rounds << i << ',' << r.seed << ',' << to_string(r.winner) << ',' << r.steps << ','
           << r.survivors[0].back() << ',' << r.survivors[1].back() << ','
           << format_number(r.mean_return[0]) << ',' << format_number(r.mean_return[1]) << '\n';
    for (std::size_t k = 0; k < r.survivors[0].size(); ++k) {
      const int rs = r.survivors[0][k];
      const int os = r.survivors[1][k];
      curves << i << ',' << k << ',' << rs << ',' << os << ','
             << (os ? format_number(static_cast<double>(rs) / os) : std::string("inf")) << ','
             << format_number(r.mean_emotion[0][k]) << ',' << format_number(r.mean_emotion[1][k])
             << '\n';
    }
  }
  if (!rounds || !curves) throw FormatError("cannot write match statistics");
}

}  // namespace crowdsim::io
