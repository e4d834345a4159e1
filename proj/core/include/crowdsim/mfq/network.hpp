#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "crowdsim/types.hpp"
#include "crowdsim/world.hpp"

namespace crowdsim::mfq {

// Fixed alignment keeps Eigen's vectorized reductions bitwise reproducible.
using AlignedVector = std::vector<double, Eigen::aligned_allocator<double>>;

/// Layer geometry of the Q-network. Defaults are the full-size network;
/// tests shrink every width.
struct NetShape {
  int window = 9;
  int channels = kOccupancyChannels;
  int conv1_filters = 32;
  int conv2_filters = 32;
  int kernel = 3;
  int conv_padding = 0;
  int feature_dim = kFeatureDim;
  int action_dim = kNumActions;
  int spatial_width = 256;
  int feature_width = 64;
  int mean_width = 64;
  int trunk1_width = 256;
  int trunk2_width = 128;

  int conv1_side() const { return window + 2 * conv_padding - kernel + 1; }
  int conv2_side() const { return conv1_side() + 2 * conv_padding - kernel + 1; }
  int occupancy_dim() const { return window * window * channels; }
  int flattened_conv_dim() const { return conv2_side() * conv2_side() * conv2_filters; }

  void validate() const;
  friend bool operator==(const NetShape&, const NetShape&) = default;
};

/// One network input: occupancy window, agent features and neighbor mean action.
struct NetInput {
  std::vector<double> occupancy;
  std::vector<double> features;
  std::vector<double> mean_action;
};

/// Column-per-sample batch of network inputs.
struct NetBatch {
  Eigen::MatrixXd occupancy;
  Eigen::MatrixXd features;
  Eigen::MatrixXd mean_action;

  NetBatch() = default;
  NetBatch(const NetShape& shape, int size);

  int size() const { return static_cast<int>(occupancy.cols()); }
  void set(int column, const NetInput& input);
};

struct TensorSpec {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
  friend bool operator==(const TensorSpec&, const TensorSpec&) = default;
};

/// Intermediate activations kept by a training forward pass.
struct ForwardCache {
  Eigen::MatrixXd cols1, act1, cols2, act2;
  Eigen::MatrixXd spatial, feature, mean, trunk1, trunk2;
  const NetBatch* input = nullptr;
};

/// Two convolutions over the occupancy window feed one dense branch; the
/// feature vector and the mean action each feed their own dense branch; the
/// three are concatenated into a two-layer trunk and a linear Q head.
class QNetwork {
 public:
  enum Tensor : int {
    kConv1W, kConv1B, kConv2W, kConv2B,
    kSpatialW, kSpatialB, kFeatureW, kFeatureB, kMeanW, kMeanB,
    kTrunk1W, kTrunk1B, kTrunk2W, kTrunk2B, kHeadW, kHeadB,
    kTensorCount
  };

  explicit QNetwork(NetShape shape = {}, std::uint64_t seed = 0);

  const NetShape& shape() const { return shape_; }
  const std::vector<TensorSpec>& layout() const { return layout_; }
  std::size_t parameter_count() const { return params_.size(); }
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  Eigen::Map<Eigen::MatrixXd> tensor(Tensor t);
  Eigen::Map<const Eigen::MatrixXd> tensor(Tensor t) const;

  /// Q-values, action_dim x batch.
  Eigen::MatrixXd forward(const NetBatch& batch) const;
  Eigen::MatrixXd forward(const NetBatch& batch, ForwardCache& cache) const;
  std::vector<double> q_values(const NetInput& input) const;

  /// Writes dL/dparams into grad given dL/dQ (action_dim x batch).
  void backward(const ForwardCache& cache, const Eigen::MatrixXd& d_q,
                std::span<double> grad) const;

  void copy_parameters_from(const QNetwork& other);

 private:
  void check_batch(const NetBatch& batch) const;

  NetShape shape_;
  std::vector<TensorSpec> layout_;
  AlignedVector params_;
};

}  // namespace crowdsim::mfq
