#include "crowdsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "crowdsim/errors.hpp"

namespace crowdsim::metrics {

int alive_count(const std::vector<TrajectoryEntry>& step, Team team) {
  return static_cast<int>(std::count_if(step.begin(), step.end(), [&](const TrajectoryEntry& e) {
    return e.alive && e.team == team;
  }));
}

std::vector<std::optional<double>> survivor_ratio(const TrajectoryLog& log) {
  std::vector<std::optional<double>> out;
  out.reserve(log.steps.size());
  for (const auto& step : log.steps) {
    const int opp = alive_count(step, Team::Opposite);
    if (opp == 0) {
      out.emplace_back();
    } else {
      out.emplace_back(static_cast<double>(alive_count(step, Team::Righteous)) / opp);
    }
  }
  return out;
}

std::vector<double> mean_emotion(const TrajectoryLog& log, Team team) {
  std::vector<double> out;
  out.reserve(log.steps.size());
  for (const auto& step : log.steps) {
    double sum = 0.0;
    int n = 0;
    for (const TrajectoryEntry& e : step) {
      if (e.alive && e.team == team) {
        sum += e.emotion;
        ++n;
      }
    }
    out.push_back(n ? sum / n : 0.0);
  }
  return out;
}

DominantPath dominant_path(const TrajectoryLog& log, Team team) {
  DominantPath path;
  for (const auto& step : log.steps) {
    Vec2 c;
    int n = 0;
    for (const TrajectoryEntry& e : step) {
      if (!e.alive || e.team != team) continue;
      c.x += e.pos.x;
      c.y += e.pos.y;
      ++n;
    }
    if (n == 0) break;
    path.push_back({c.x / n, c.y / n});
  }
  return path;
}

std::vector<Vec2> directions(const DominantPath& path) {
  std::vector<Vec2> out;
  for (std::size_t i = 1; i < path.size(); ++i) {
    out.push_back({path[i].x - path[i - 1].x, path[i].y - path[i - 1].y});
  }
  return out;
}

AngularError angular_error(std::span<const Vec2> sim, std::span<const Vec2> ref) {
  if (sim.size() != ref.size()) {
    throw ContractViolation("angular_error needs direction sequences of equal length");
  }
  AngularError out;
  std::vector<double> errors;
  for (std::size_t i = 0; i < sim.size(); ++i) {
    const double ns = std::hypot(sim[i].x, sim[i].y);
    const double nr = std::hypot(ref[i].x, ref[i].y);
    if (ns == 0.0 || nr == 0.0) {
      ++out.skipped;
      continue;
    }
    const double dot = sim[i].x * ref[i].x + sim[i].y * ref[i].y;
    const double cross = sim[i].x * ref[i].y - sim[i].y * ref[i].x;
    errors.push_back(std::atan2(std::abs(cross), dot));
  }
  out.used = static_cast<int>(errors.size());
  if (errors.empty()) return out;
  // Shifted by the first error so constant sequences come out exact.
  const double shift = errors.front();
  double offset = 0.0;
  for (double e : errors) offset += e - shift;
  const double mean = shift + offset / errors.size();
  double var = 0.0;
  for (double e : errors) var += (e - mean) * (e - mean);
  out.mean = mean;
  out.variance = var / errors.size();
  return out;
}

double entropy_metric(const DominantPath& sim, const DominantPath& ref) {
  const std::size_t n = std::min(sim.size(), ref.size());
  if (n < 3) throw QueryError("entropy metric needs at least 3 common steps");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += sim[i].x - ref[i].x;
    my += sim[i].y - ref[i].y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = sim[i].x - ref[i].x - mx;
    const double dy = sim[i].y - ref[i].y - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  const double denom = static_cast<double>(n - 1);
  const double det = (sxx / denom) * (syy / denom) - (sxy / denom) * (sxy / denom);
  if (!(det > 0.0)) return -std::numeric_limits<double>::infinity();
  const double two_pi_e = 2.0 * std::numbers::pi * std::numbers::e;
  return 0.5 * std::log(two_pi_e * two_pi_e * det);
}

}  // namespace crowdsim::metrics
