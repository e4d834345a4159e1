#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <string_view>
#include <utility>

namespace crowdsim {

enum class Team : std::uint8_t { Righteous = 0, Opposite = 1 };

inline constexpr std::array<Team, 2> kTeams{Team::Righteous, Team::Opposite};

constexpr Team enemy_of(Team t) {
  return t == Team::Righteous ? Team::Opposite : Team::Righteous;
}

constexpr std::size_t index_of(Team t) { return static_cast<std::size_t>(t); }

constexpr std::string_view to_string(Team t) {
  return t == Team::Righteous ? "Righteous" : "Opposite";
}

// Emotion range owned by each team: Righteous [0,1], Opposite [-1,0].
constexpr std::pair<double, double> emotion_bounds(Team t) {
  return t == Team::Righteous ? std::pair{0.0, 1.0} : std::pair{-1.0, 0.0};
}

constexpr double clamp_emotion(Team t, double e) {
  const auto [lo, hi] = emotion_bounds(t);
  return e < lo ? lo : (e > hi ? hi : e);
}

struct Cell {
  int x = 0;
  int y = 0;

  friend constexpr Cell operator+(Cell a, Cell b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Cell operator-(Cell a, Cell b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

using AgentId = int;
using ActionId = int;

inline constexpr ActionId kNoAction = -1;
inline constexpr int kNumActions = 17;
inline constexpr int kNumMoveTypeActions = 9;

enum class ActionKind : std::uint8_t { Idle, Move, Attack };

struct Action {
  ActionKind kind = ActionKind::Idle;
  Cell offset{};
};

// Compass order, y grows downward: N, NE, E, SE, S, SW, W, NW.
inline constexpr std::array<Cell, 8> kNeighborOffsets{
    Cell{0, -1}, Cell{1, -1}, Cell{1, 0},  Cell{1, 1},
    Cell{0, 1},  Cell{-1, 1}, Cell{-1, 0}, Cell{-1, -1}};

// Fixed action table: 0 idle, 1..8 moves, 9..16 attacks, both in compass order.
inline constexpr ActionId kIdleAction = 0;
inline constexpr ActionId kFirstMoveAction = 1;
inline constexpr ActionId kFirstAttackAction = 9;

constexpr bool is_valid_action(ActionId a) { return a >= 0 && a < kNumActions; }
constexpr bool is_attack(ActionId a) { return a >= kFirstAttackAction && a < kNumActions; }
constexpr bool is_move_type(ActionId a) { return a >= 0 && a < kFirstAttackAction; }

constexpr Action action_of(ActionId a) {
  if (a == kIdleAction) return {ActionKind::Idle, {0, 0}};
  if (is_attack(a)) return {ActionKind::Attack, kNeighborOffsets[a - kFirstAttackAction]};
  return {ActionKind::Move, kNeighborOffsets[a - kFirstMoveAction]};
}

constexpr int direction_index(Cell offset) {
  for (int i = 0; i < 8; ++i) {
    if (kNeighborOffsets[i] == offset) return i;
  }
  return -1;
}

constexpr ActionId move_action(int direction) { return kFirstMoveAction + direction; }
constexpr ActionId attack_action(int direction) { return kFirstAttackAction + direction; }

}  // namespace crowdsim
