#include <algorithm>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "crowdsim/errors.hpp"
#include "crowdsim/mfq/learning.hpp"
#include "crowdsim/mfq/network.hpp"
#include "fixtures.hpp"
#include "gradcheck.hpp"

using namespace crowdsim;
using namespace crowdsim::mfq;
using crowdsim::testing::check_gradient;
using crowdsim::testing::random_input;
using crowdsim::testing::tiny_shape;

namespace {

double relu(double x) { return x > 0.0 ? x : 0.0; }

// Straight loops over the layer definitions, no im2col.
std::vector<double> conv_ref(const QNetwork& net, QNetwork::Tensor w_t, const std::vector<double>& in,
                             int side, int channels, int filters) {
  const NetShape& s = net.shape();
  const auto w = net.tensor(w_t);
  const auto b = net.tensor(static_cast<QNetwork::Tensor>(w_t + 1));
  const int k = s.kernel, pad = s.conv_padding;
  const int out = side + 2 * pad - k + 1;
  std::vector<double> res(static_cast<std::size_t>(out) * out * filters);
  for (int oy = 0; oy < out; ++oy)
    for (int ox = 0; ox < out; ++ox)
      for (int f = 0; f < filters; ++f) {
        double acc = b(f, 0);
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) {
            const int iy = oy + ky - pad, ix = ox + kx - pad;
            if (iy < 0 || ix < 0 || iy >= side || ix >= side) continue;
            for (int c = 0; c < channels; ++c)
              acc += w(f, (ky * k + kx) * channels + c) * in[(iy * side + ix) * channels + c];
          }
        res[(oy * out + ox) * filters + f] = relu(acc);
      }
  return res;
}

std::vector<double> dense_ref(const QNetwork& net, QNetwork::Tensor w_t, const std::vector<double>& in,
                              int col0, bool activate) {
  const auto w = net.tensor(w_t);
  const auto b = net.tensor(static_cast<QNetwork::Tensor>(w_t + 1));
  std::vector<double> out(w.rows());
  for (int r = 0; r < w.rows(); ++r) {
    double acc = b(r, 0);
    for (std::size_t c = 0; c < in.size(); ++c) acc += w(r, col0 + c) * in[c];
    out[r] = activate ? relu(acc) : acc;
  }
  return out;
}

std::vector<double> forward_ref(const QNetwork& net, const NetInput& x) {
  const NetShape& s = net.shape();
  const auto a1 = conv_ref(net, QNetwork::kConv1W, x.occupancy, s.window, s.channels,
                           s.conv1_filters);
  const auto a2 = conv_ref(net, QNetwork::kConv2W, a1, s.conv1_side(), s.conv1_filters,
                           s.conv2_filters);
  const auto sp = dense_ref(net, QNetwork::kSpatialW, a2, 0, true);
  const auto fe = dense_ref(net, QNetwork::kFeatureW, x.features, 0, true);
  const auto me = dense_ref(net, QNetwork::kMeanW, x.mean_action, 0, true);
  std::vector<double> cat = sp;
  cat.insert(cat.end(), fe.begin(), fe.end());
  cat.insert(cat.end(), me.begin(), me.end());
  const auto t1 = dense_ref(net, QNetwork::kTrunk1W, cat, 0, true);
  const auto t2 = dense_ref(net, QNetwork::kTrunk2W, t1, 0, true);
  return dense_ref(net, QNetwork::kHeadW, t2, 0, false);
}

NetShape padded_shape() {
  NetShape s = tiny_shape(3);
  s.conv_padding = 1;
  return s;
}

}  // namespace

TEST(NetShape, Validation) {
  EXPECT_NO_THROW(NetShape{}.validate());
  NetShape even;
  even.window = 8;
  EXPECT_THROW(even.validate(), ConfigError);
  NetShape small = tiny_shape(3);
  EXPECT_THROW(small.validate(), ConfigError);  // 3 -> 1 -> nothing
  EXPECT_NO_THROW(padded_shape().validate());
  NetShape zero = tiny_shape();
  zero.trunk2_width = 0;
  EXPECT_THROW(zero.validate(), ConfigError);
}

TEST(NetShape, DefaultGeometry) {
  const NetShape s;
  EXPECT_EQ(s.conv1_side(), 7);
  EXPECT_EQ(s.conv2_side(), 5);
  EXPECT_EQ(s.occupancy_dim(), 9 * 9 * 3);
  EXPECT_EQ(s.flattened_conv_dim(), 5 * 5 * 32);
}

TEST(QNetwork, LayoutIsContiguous) {
  const QNetwork net(tiny_shape(), 1);
  std::size_t offset = 0;
  ASSERT_EQ(net.layout().size(), static_cast<std::size_t>(QNetwork::kTensorCount));
  for (const TensorSpec& t : net.layout()) {
    EXPECT_EQ(t.offset, offset) << t.name;
    offset += t.size();
  }
  EXPECT_EQ(offset, net.parameter_count());
  EXPECT_EQ(net.layout()[QNetwork::kConv1W].cols, 9 * 3);
  EXPECT_EQ(net.layout()[QNetwork::kSpatialW].cols, 1 * 1 * 4);
  EXPECT_EQ(net.layout()[QNetwork::kTrunk1W].cols, 24);
  EXPECT_EQ(net.layout()[QNetwork::kHeadW].rows, kNumActions);
}

TEST(QNetwork, InitializationBoundsAndSeeding) {
  const QNetwork a(tiny_shape(), 3), b(tiny_shape(), 3), c(tiny_shape(), 4);
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
  EXPECT_FALSE(std::equal(a.parameters().begin(), a.parameters().end(), c.parameters().begin()));
  for (int t = 0; t < QNetwork::kTensorCount; ++t) {
    const TensorSpec& spec = a.layout()[t];
    const auto m = a.tensor(static_cast<QNetwork::Tensor>(t));
    if (t % 2 == 1) {
      EXPECT_EQ(m.cwiseAbs().maxCoeff(), 0.0) << spec.name;
      continue;
    }
    const double limit = t == QNetwork::kHeadW ? std::sqrt(6.0 / (spec.cols + spec.rows))
                                               : std::sqrt(6.0 / spec.cols);
    EXPECT_LE(m.cwiseAbs().maxCoeff(), limit) << spec.name;
    EXPECT_GT(m.cwiseAbs().maxCoeff(), 0.5 * limit) << spec.name;
  }
}

TEST(QNetwork, ForwardMatchesLoopReference) {
  for (const NetShape& shape : {tiny_shape(5), padded_shape(), tiny_shape(7)}) {
    QNetwork net(shape, 21);
    // Nonzero biases so they are exercised too.
    RngStream rng(CounterRng(2), 1);
    for (double& p : net.parameters()) p += rng.uniform(-0.05, 0.05);
    for (int i = 0; i < 4; ++i) {
      const NetInput x = random_input(shape, rng);
      const auto q = net.q_values(x);
      const auto ref = forward_ref(net, x);
      ASSERT_EQ(q.size(), ref.size());
      for (std::size_t a = 0; a < q.size(); ++a) EXPECT_NEAR(q[a], ref[a], 1e-12);
    }
  }
}

TEST(QNetwork, BatchColumnsAreIndependent) {
  const NetShape shape = tiny_shape();
  const QNetwork net(shape, 5);
  RngStream rng(CounterRng(8), 1);
  std::vector<NetInput> xs;
  NetBatch batch(shape, 5);
  for (int i = 0; i < 5; ++i) {
    xs.push_back(random_input(shape, rng));
    batch.set(i, xs.back());
  }
  const Eigen::MatrixXd q = net.forward(batch);
  ASSERT_EQ(q.rows(), kNumActions);
  ASSERT_EQ(q.cols(), 5);
  for (int i = 0; i < 5; ++i) {
    const auto single = net.q_values(xs[i]);
    for (int a = 0; a < kNumActions; ++a) EXPECT_NEAR(q(a, i), single[a], 1e-12);
  }
}

TEST(QNetwork, RejectsMismatchedInput) {
  const QNetwork net(tiny_shape(), 5);
  NetInput bad;
  bad.occupancy.assign(10, 0.0);
  bad.features.assign(kFeatureDim, 0.0);
  bad.mean_action.assign(kNumActions, 0.0);
  EXPECT_THROW(net.q_values(bad), ContractViolation);
  const NetBatch wrong(tiny_shape(7), 2);
  EXPECT_THROW(net.forward(wrong), ContractViolation);
}

TEST(QNetwork, CopyParameters) {
  QNetwork a(tiny_shape(), 1);
  const QNetwork b(tiny_shape(), 2);
  a.copy_parameters_from(b);
  EXPECT_TRUE(std::equal(a.parameters().begin(), a.parameters().end(), b.parameters().begin()));
  EXPECT_THROW(a.copy_parameters_from(QNetwork(tiny_shape(7), 2)), ContractViolation);
}

class Backward : public ::testing::TestWithParam<NetShape> {};

TEST_P(Backward, MatchesCentralDifferences) {
  const NetShape shape = GetParam();
  QNetwork net(shape, 31);
  RngStream rng(CounterRng(77), 1);
  for (double& p : net.parameters()) p += rng.uniform(-0.05, 0.05);
  NetBatch batch(shape, 3);
  for (int i = 0; i < 3; ++i) batch.set(i, random_input(shape, rng));
  Eigen::MatrixXd weights(shape.action_dim, 3);
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights.data()[i] = rng.uniform(-1.0, 1.0);

  // L = sum(weights .* Q), so dL/dQ = weights.
  ForwardCache cache;
  net.forward(batch, cache);
  std::vector<double> grad(net.parameter_count());
  net.backward(cache, weights, grad);
  const auto f = [&] { return net.forward(batch).cwiseProduct(weights).sum(); };
  const auto r = check_gradient(f, net.parameters(), grad);
  EXPECT_LT(r.max_relative, 1e-4);
  EXPECT_LT(r.norm_relative, 1e-7);
}

INSTANTIATE_TEST_SUITE_P(Shapes, Backward, ::testing::Values(tiny_shape(5), padded_shape()));
