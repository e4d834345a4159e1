#include "crowdsim/mfq/learner.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <string>

#include "crowdsim/errors.hpp"

namespace crowdsim::mfq {

double TrainConfig::epsilon_at(int episode) const {
  const double horizon = epsilon_decay_fraction * episodes;
  if (horizon <= 0.0) return epsilon_end;
  const double frac = std::min(1.0, static_cast<double>(episode) / horizon);
  return epsilon_start + (epsilon_end - epsilon_start) * frac;
}

void TrainConfig::validate() const {
  if (!(discount > 0.0 && discount < 1.0)) throw ConfigError("train.discount must lie in (0,1)");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (memory_size < 1) throw ConfigError("train.memory_size must be >= 1");
  if (max_steps < 1) throw ConfigError("train.max_steps must be >= 1");
  for (double e : {epsilon_start, epsilon_end, epsilon_decay_fraction}) {
    if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("train epsilon settings must lie in [0,1]");
  }
  if (!(temperature > 0.0)) throw ConfigError("train.temperature must be > 0");
  if (target_sync_interval < 1) throw ConfigError("train.target_sync_interval must be >= 1");
  if (episodes < 0) throw ConfigError("train.episodes must be >= 0");
  if (train_every < 1) throw ConfigError("train.train_every must be >= 1");
  if (checkpoint_interval < 0) throw ConfigError("train.checkpoint_interval must be >= 0");
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : storage_(capacity) {
  if (capacity == 0) throw ConfigError("replay capacity must be >= 1");
}

void ReplayBuffer::push(Transition t) {
  storage_[head_] = std::move(t);
  head_ = (head_ + 1) % storage_.size();
  size_ = std::min(size_ + 1, storage_.size());
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw QueryError("replay index out of range");
  const std::size_t oldest = (head_ + storage_.size() - size_) % storage_.size();
  return storage_[(oldest + i) % storage_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, RngStream& rng) const {
  if (size_ == 0) throw QueryError("sampling from an empty replay buffer");
  std::vector<const Transition*> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(&at(rng.below(size_)));
  return out;
}

Learner::Learner(const NetShape& shape, const TrainConfig& config, std::uint64_t seed)
    : config_(config),
      net_(shape, seed),
      target_(shape, seed),
      adam_(net_.parameter_count()),
      memory_(static_cast<std::size_t>(config.memory_size)) {
  config_.validate();
}

std::optional<double> Learner::update(RngStream& rng) {
  if (memory_.size() < static_cast<std::size_t>(config_.batch_size)) return std::nullopt;
  const auto batch = memory_.sample(static_cast<std::size_t>(config_.batch_size), rng);
  LossResult result = loss(batch, net_, target_, config_.discount, config_.temperature);
  train_step(net_, adam_, result.gradient, AdamConfig{.learning_rate = config_.learning_rate});
  ++updates_;
  if (updates_ % config_.target_sync_interval == 0) sync_target();
  return result.loss;
}

namespace {

constexpr std::array<char, 8> kMagic{'C', 'S', 'I', 'M', 'Q', 'N', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    if (!out_) throw FormatError("cannot open checkpoint for writing: " + path.string());
  }
  template <typename T>
  void put(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_doubles(std::span<const double> v) {
    put<std::uint64_t>(v.size());
    out_.write(reinterpret_cast<const char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void finish() {
    out_.flush();
    if (!out_) throw FormatError("checkpoint write failed");
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw FormatError("cannot open checkpoint: " + path.string());
  }
  template <typename T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw FormatError("truncated checkpoint");
    return v;
  }
  std::vector<double> get_doubles(std::size_t limit) {
    const auto n = get<std::uint64_t>();
    if (n > limit) throw FormatError("checkpoint tensor larger than declared");
    std::vector<double> v(n);
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in_) throw FormatError("truncated checkpoint");
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    if (n > 4096) throw FormatError("corrupt checkpoint string");
    std::string s(n, '\0');
    in_.read(s.data(), n);
    if (!in_) throw FormatError("truncated checkpoint");
    return s;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::ifstream in_;
};

std::array<std::int32_t, 13> shape_fields(const NetShape& s) {
  return {s.window,        s.channels,      s.conv1_filters, s.conv2_filters, s.kernel,
          s.conv_padding,  s.feature_dim,   s.action_dim,    s.spatial_width, s.feature_width,
          s.mean_width,    s.trunk1_width,  s.trunk2_width};
}

NetShape shape_from(const std::array<std::int32_t, 13>& f) {
  return {f[0], f[1], f[2], f[3], f[4], f[5], f[6], f[7], f[8], f[9], f[10], f[11], f[12]};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const QNetwork& net,
                     const AdamState& optimizer, const TrainConfig& config) {
  Writer w(path);
  for (char c : kMagic) w.put(c);
  w.put(kVersion);
  for (std::int32_t f : shape_fields(net.shape())) w.put(f);

  w.put(config.discount);
  w.put(config.learning_rate);
  w.put<std::int32_t>(config.batch_size);
  w.put<std::int32_t>(config.memory_size);
  w.put<std::int32_t>(config.max_steps);
  w.put(config.epsilon_start);
  w.put(config.epsilon_end);
  w.put(config.epsilon_decay_fraction);
  w.put(config.temperature);
  w.put<std::int32_t>(config.target_sync_interval);
  w.put<std::int32_t>(config.episodes);
  w.put<std::int32_t>(config.train_every);
  w.put<std::int32_t>(config.checkpoint_interval);
  w.put<std::int32_t>(static_cast<std::int32_t>(config.stored_action));

  w.put<std::uint32_t>(static_cast<std::uint32_t>(net.layout().size()));
  for (const TensorSpec& t : net.layout()) {
    w.put_string(t.name);
    w.put<std::int32_t>(t.rows);
    w.put<std::int32_t>(t.cols);
  }
  w.put_doubles(net.parameters());
  w.put<std::int64_t>(optimizer.step);
  w.put_doubles(optimizer.m);
  w.put_doubles(optimizer.v);
  w.finish();
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  std::array<char, 8> magic{};
  for (char& c : magic) c = r.get<char>();
  if (magic != kMagic) throw FormatError("not a crowdsim checkpoint: " + path.string());
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  std::array<std::int32_t, 13> fields{};
  for (auto& f : fields) f = r.get<std::int32_t>();
  ck.shape = shape_from(fields);
  try {
    ck.shape.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint holds an invalid network shape: ") + e.what());
  }

  TrainConfig& c = ck.config;
  c.discount = r.get<double>();
  c.learning_rate = r.get<double>();
  c.batch_size = r.get<std::int32_t>();
  c.memory_size = r.get<std::int32_t>();
  c.max_steps = r.get<std::int32_t>();
  c.epsilon_start = r.get<double>();
  c.epsilon_end = r.get<double>();
  c.epsilon_decay_fraction = r.get<double>();
  c.temperature = r.get<double>();
  c.target_sync_interval = r.get<std::int32_t>();
  c.episodes = r.get<std::int32_t>();
  c.train_every = r.get<std::int32_t>();
  c.checkpoint_interval = r.get<std::int32_t>();
  const auto stored = r.get<std::int32_t>();
  if (stored != 0 && stored != 1) throw FormatError("checkpoint holds an unknown stored-action mode");
  c.stored_action = static_cast<StoredAction>(stored);

  // The tensor table must match what this shape produces.
  const QNetwork reference(ck.shape, 0);
  const auto count = r.get<std::uint32_t>();
  if (count != reference.layout().size()) throw FormatError("checkpoint tensor table mismatch");
  for (const TensorSpec& expected : reference.layout()) {
    const std::string name = r.get_string();
    const auto rows = r.get<std::int32_t>();
    const auto cols = r.get<std::int32_t>();
    if (name != expected.name || rows != expected.rows || cols != expected.cols) {
      throw FormatError("checkpoint tensor '" + name + "' does not match its declared shape");
    }
  }
  const std::size_t n = reference.parameter_count();
  ck.parameters = r.get_doubles(n);
  if (ck.parameters.size() != n) throw FormatError("checkpoint parameter count mismatch");
  ck.optimizer.step = r.get<std::int64_t>();
  ck.optimizer.m = r.get_doubles(n);
  ck.optimizer.v = r.get_doubles(n);
  if (ck.optimizer.m.size() != n || ck.optimizer.v.size() != n) {
    throw FormatError("checkpoint optimizer state mismatch");
  }
  if (!r.at_end()) throw FormatError("trailing bytes after checkpoint payload");
  return ck;
}

QNetwork load_network(const std::filesystem::path& path, const NetShape& expected) {
  Checkpoint ck = read_checkpoint(path);
  if (!(ck.shape == expected)) {
    throw ConfigError("checkpoint " + path.string() +
                      " was trained for a different network shape than the scenario requires");
  }
  QNetwork net(ck.shape, 0);
  std::copy(ck.parameters.begin(), ck.parameters.end(), net.parameters().begin());
  return net;
}

}  // namespace crowdsim::mfq
