#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "crowdsim/rng.hpp"
#include "crowdsim/types.hpp"

using namespace crowdsim;

TEST(Actions, TableLayout) {
  EXPECT_EQ(action_of(kIdleAction).kind, ActionKind::Idle);
  for (int d = 0; d < 8; ++d) {
    const Action m = action_of(move_action(d));
    const Action a = action_of(attack_action(d));
    EXPECT_EQ(m.kind, ActionKind::Move);
    EXPECT_EQ(a.kind, ActionKind::Attack);
    EXPECT_EQ(m.offset, kNeighborOffsets[d]);
    EXPECT_EQ(a.offset, kNeighborOffsets[d]);
    EXPECT_EQ(direction_index(kNeighborOffsets[d]), d);
  }
  EXPECT_EQ(kNeighborOffsets[0], (Cell{0, -1}));
  EXPECT_EQ(kNeighborOffsets[2], (Cell{1, 0}));
}

TEST(Actions, Classification) {
  int moves = 0, attacks = 0;
  for (ActionId a = 0; a < kNumActions; ++a) {
    EXPECT_TRUE(is_valid_action(a));
    EXPECT_NE(is_attack(a), is_move_type(a));
    moves += is_move_type(a);
    attacks += is_attack(a);
  }
  EXPECT_EQ(moves, kNumMoveTypeActions);
  EXPECT_EQ(attacks, 8);
  EXPECT_FALSE(is_valid_action(kNoAction));
  EXPECT_FALSE(is_valid_action(kNumActions));
}

TEST(Teams, BoundsAndClamp) {
  EXPECT_EQ(enemy_of(Team::Righteous), Team::Opposite);
  EXPECT_DOUBLE_EQ(clamp_emotion(Team::Righteous, 1.4), 1.0);
  EXPECT_DOUBLE_EQ(clamp_emotion(Team::Righteous, -0.2), 0.0);
  EXPECT_DOUBLE_EQ(clamp_emotion(Team::Opposite, 0.3), 0.0);
  EXPECT_DOUBLE_EQ(clamp_emotion(Team::Opposite, -1.3), -1.0);
}

TEST(CounterRng, PureFunctionOfKey) {
  const CounterRng a(42), b(42), c(43);
  EXPECT_EQ(a.bits({1, 2, 3}), b.bits({1, 2, 3}));
  EXPECT_NE(a.bits({1, 2, 3}), c.bits({1, 2, 3}));
  EXPECT_NE(a.bits({1, 2, 3}), a.bits({1, 3, 2}));
  // Order of evaluation does not matter.
  const auto late = a.bits({7, 7});
  (void)a.bits({1});
  EXPECT_EQ(late, a.bits({7, 7}));
}

TEST(CounterRng, UniformAndBelowRanges) {
  const CounterRng r(5);
  std::vector<int> counts(7, 0);
  double sum = 0.0;
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform({1, std::uint64_t(i)});
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    const auto k = r.below(7, {2, std::uint64_t(i)});
    ASSERT_LT(k, 7u);
    ++counts[k];
  }
  EXPECT_NEAR(sum / n, 0.5, 0.01);
  for (int c : counts) EXPECT_NEAR(c, n / 7.0, 0.05 * n / 7.0);
}

TEST(RngStream, ReproducibleAndShuffles) {
  RngStream s1(CounterRng(9), 3), s2(CounterRng(9), 3), s3(CounterRng(9), 4);
  EXPECT_EQ(s1(), s2());
  EXPECT_NE(s1(), s3());
  std::vector<int> v(20);
  std::iota(v.begin(), v.end(), 0);
  auto w = v;
  RngStream a(CounterRng(1), 1), b(CounterRng(1), 1);
  std::shuffle(v.begin(), v.end(), a);
  std::shuffle(w.begin(), w.end(), b);
  EXPECT_EQ(v, w);
  EXPECT_EQ(std::set<int>(v.begin(), v.end()).size(), 20u);
}

TEST(RngStream, NormalMoments) {
  RngStream s(CounterRng(17), 1);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = s.normal();
    ASSERT_TRUE(std::isfinite(x));
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.02);
}
