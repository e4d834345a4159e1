#pragma once

#include <optional>
#include <span>
#include <vector>

#include "crowdsim/types.hpp"

namespace crowdsim::metrics {

struct TrajectoryEntry {
  AgentId id = 0;
  Team team = Team::Righteous;
  Cell pos{};
  double emotion = 0.0;
  bool alive = true;
};

/// steps[k] holds every agent at step k, dead ones included.
struct TrajectoryLog {
  std::vector<std::vector<TrajectoryEntry>> steps;
};

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

/// Centroid of the team's alive agents per step; ends at the first step the
/// team has no one alive.
using DominantPath = std::vector<Vec2>;

int alive_count(const std::vector<TrajectoryEntry>& step, Team team);

/// Righteous over opposite survivors per step; nullopt where the opposite
/// side is extinct.
std::vector<std::optional<double>> survivor_ratio(const TrajectoryLog& log);

/// Mean emotion of the team's alive agents per step (0 once extinct).
std::vector<double> mean_emotion(const TrajectoryLog& log, Team team);

DominantPath dominant_path(const TrajectoryLog& log, Team team);

/// Per-step displacement of a path; one shorter than the path.
std::vector<Vec2> directions(const DominantPath& path);

struct AngularError {
  std::optional<double> mean;      // nullopt when every pair was skipped
  std::optional<double> variance;  // population variance
  int used = 0;
  int skipped = 0;  // pairs with a zero vector on either side
};

/// arccos of the cosine similarity per step, aggregated as mean and variance.
AngularError angular_error(std::span<const Vec2> sim, std::span<const Vec2> ref);

/// Gaussian differential entropy of the per-step error between two paths,
/// truncated to their common length: 0.5 * ln((2 pi e)^2 det S) with S the
/// unbiased covariance of (sim - ref). Returns -infinity when det S is 0.
double entropy_metric(const DominantPath& sim, const DominantPath& ref);

}  // namespace crowdsim::metrics
