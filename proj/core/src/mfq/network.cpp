#include "crowdsim/mfq/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "crowdsim/errors.hpp"
#include "crowdsim/rng.hpp"

namespace crowdsim::mfq {

namespace {

using Eigen::MatrixXd;

// im2col for channel-fastest inputs. Each column of `input` is one sample of
// side x side x channels; the result has one column per output position per
// sample, rows ordered (ky, kx, channel).
MatrixXd im2col(const double* input, int batch, int side, int channels, int kernel, int pad) {
  const int out = side + 2 * pad - kernel + 1;
  const int patch = kernel * kernel * channels;
  const std::size_t sample_stride = static_cast<std::size_t>(side) * side * channels;
  MatrixXd cols = MatrixXd::Zero(patch, static_cast<Eigen::Index>(out) * out * batch);
  for (int b = 0; b < batch; ++b) {
    const double* src = input + b * sample_stride;
    for (int oy = 0; oy < out; ++oy) {
      for (int ox = 0; ox < out; ++ox) {
        double* dst = cols.col((static_cast<Eigen::Index>(b) * out + oy) * out + ox).data();
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = oy + ky - pad;
          if (iy < 0 || iy >= side) continue;
          for (int kx = 0; kx < kernel; ++kx) {
            const int ix = ox + kx - pad;
            if (ix < 0 || ix >= side) continue;
            std::memcpy(dst + (ky * kernel + kx) * channels,
                        src + (static_cast<std::size_t>(iy) * side + ix) * channels,
                        sizeof(double) * channels);
          }
        }
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatters patch gradients back onto the input layout.
MatrixXd col2im(const MatrixXd& d_cols, int batch, int side, int channels, int kernel, int pad) {
  const int out = side + 2 * pad - kernel + 1;
  const std::size_t sample_stride = static_cast<std::size_t>(side) * side * channels;
  MatrixXd d_input = MatrixXd::Zero(static_cast<Eigen::Index>(sample_stride), batch);
  for (int b = 0; b < batch; ++b) {
    double* dst = d_input.col(b).data();
    for (int oy = 0; oy < out; ++oy) {
      for (int ox = 0; ox < out; ++ox) {
        const double* src = d_cols.col((static_cast<Eigen::Index>(b) * out + oy) * out + ox).data();
        for (int ky = 0; ky < kernel; ++ky) {
          const int iy = oy + ky - pad;
          if (iy < 0 || iy >= side) continue;
          for (int kx = 0; kx < kernel; ++kx) {
            const int ix = ox + kx - pad;
            if (ix < 0 || ix >= side) continue;
            double* d = dst + (static_cast<std::size_t>(iy) * side + ix) * channels;
            const double* s = src + (ky * kernel + kx) * channels;
            for (int c = 0; c < channels; ++c) d[c] += s[c];
          }
        }
      }
    }
  }
  return d_input;
}

void relu_inplace(MatrixXd& m) { m = m.cwiseMax(0.0); }

MatrixXd relu_mask(const MatrixXd& activation) {
  return (activation.array() > 0.0).cast<double>().matrix();
}

}  // namespace

void NetShape::validate() const {
  if (window < 1 || window % 2 == 0) throw ConfigError("network.window must be odd and >= 1");
  if (kernel < 1 || conv_padding < 0) throw ConfigError("network kernel/padding invalid");
  if (conv1_side() < 1 || conv2_side() < 1) {
    throw ConfigError("network window too small for two convolutions at this padding");
  }
  for (int v : {channels, conv1_filters, conv2_filters, feature_dim, action_dim, spatial_width,
                feature_width, mean_width, trunk1_width, trunk2_width}) {
    if (v < 1) throw ConfigError("network widths must be >= 1");
  }
}

NetBatch::NetBatch(const NetShape& shape, int size)
    : occupancy(MatrixXd::Zero(shape.occupancy_dim(), size)),
      features(MatrixXd::Zero(shape.feature_dim, size)),
      mean_action(MatrixXd::Zero(shape.action_dim, size)) {}

void NetBatch::set(int column, const NetInput& input) {
  if (static_cast<Eigen::Index>(input.occupancy.size()) != occupancy.rows() ||
      static_cast<Eigen::Index>(input.features.size()) != features.rows() ||
      static_cast<Eigen::Index>(input.mean_action.size()) != mean_action.rows()) {
    throw ContractViolation("network input shape mismatch");
  }
  occupancy.col(column) = Eigen::Map<const Eigen::VectorXd>(input.occupancy.data(),
                                                            occupancy.rows());
  features.col(column) = Eigen::Map<const Eigen::VectorXd>(input.features.data(), features.rows());
  mean_action.col(column) = Eigen::Map<const Eigen::VectorXd>(input.mean_action.data(),
                                                              mean_action.rows());
}

QNetwork::QNetwork(NetShape shape, std::uint64_t seed) : shape_(shape) {
  shape_.validate();
  const NetShape& s = shape_;
  const int k2 = s.kernel * s.kernel;
  const int concat = s.spatial_width + s.feature_width + s.mean_width;
  const std::pair<int, int> dims[kTensorCount] = {
      {s.conv1_filters, k2 * s.channels},      {s.conv1_filters, 1},
      {s.conv2_filters, k2 * s.conv1_filters}, {s.conv2_filters, 1},
      {s.spatial_width, s.flattened_conv_dim()}, {s.spatial_width, 1},
      {s.feature_width, s.feature_dim},        {s.feature_width, 1},
      {s.mean_width, s.action_dim},            {s.mean_width, 1},
      {s.trunk1_width, concat},                {s.trunk1_width, 1},
      {s.trunk2_width, s.trunk1_width},        {s.trunk2_width, 1},
      {s.action_dim, s.trunk2_width},          {s.action_dim, 1}};
  static constexpr const char* kNames[kTensorCount] = {
      "conv1.weight",   "conv1.bias",   "conv2.weight",   "conv2.bias",
      "spatial.weight", "spatial.bias", "feature.weight", "feature.bias",
      "mean.weight",    "mean.bias",    "trunk1.weight",  "trunk1.bias",
      "trunk2.weight",  "trunk2.bias",  "head.weight",    "head.bias"};
  std::size_t offset = 0;
  for (int t = 0; t < kTensorCount; ++t) {
    layout_.push_back({kNames[t], dims[t].first, dims[t].second, offset});
    offset += layout_.back().size();
  }
  params_.assign(offset, 0.0);

  // He-uniform for ReLU layers, Glorot-uniform for the linear head; zero biases.
  RngStream rng(CounterRng(seed), rng_stream::kInit);
  for (int t = 0; t < kTensorCount; t += 2) {
    const TensorSpec& w = layout_[t];
    const double fan_in = w.cols;
    const double limit = t == kHeadW ? std::sqrt(6.0 / (fan_in + w.rows)) : std::sqrt(6.0 / fan_in);
    for (std::size_t i = 0; i < w.size(); ++i) params_[w.offset + i] = rng.uniform(-limit, limit);
  }
}

Eigen::Map<MatrixXd> QNetwork::tensor(Tensor t) {
  const TensorSpec& spec = layout_[t];
  return {params_.data() + spec.offset, spec.rows, spec.cols};
}

Eigen::Map<const MatrixXd> QNetwork::tensor(Tensor t) const {
  const TensorSpec& spec = layout_[t];
  return {params_.data() + spec.offset, spec.rows, spec.cols};
}

void QNetwork::check_batch(const NetBatch& batch) const {
  if (batch.occupancy.rows() != shape_.occupancy_dim() ||
      batch.features.rows() != shape_.feature_dim ||
      batch.mean_action.rows() != shape_.action_dim ||
      batch.features.cols() != batch.occupancy.cols() ||
      batch.mean_action.cols() != batch.occupancy.cols()) {
    throw ContractViolation("network batch shape mismatch");
  }
}

MatrixXd QNetwork::forward(const NetBatch& batch) const {
  ForwardCache cache;
  return forward(batch, cache);
}

MatrixXd QNetwork::forward(const NetBatch& batch, ForwardCache& cache) const {
  check_batch(batch);
  const NetShape& s = shape_;
  const int n = batch.size();
  cache.input = &batch;

  cache.cols1 = im2col(batch.occupancy.data(), n, s.window, s.channels, s.kernel, s.conv_padding);
  cache.act1 = tensor(kConv1W) * cache.cols1;
  cache.act1.colwise() += tensor(kConv1B).col(0);
  relu_inplace(cache.act1);

  cache.cols2 = im2col(cache.act1.data(), n, s.conv1_side(), s.conv1_filters, s.kernel,
                       s.conv_padding);
  cache.act2 = tensor(kConv2W) * cache.cols2;
  cache.act2.colwise() += tensor(kConv2B).col(0);
  relu_inplace(cache.act2);
  const Eigen::Map<const MatrixXd> flat(cache.act2.data(), s.flattened_conv_dim(), n);

  cache.spatial = tensor(kSpatialW) * flat;
  cache.spatial.colwise() += tensor(kSpatialB).col(0);
  relu_inplace(cache.spatial);

  cache.feature = tensor(kFeatureW) * batch.features;
  cache.feature.colwise() += tensor(kFeatureB).col(0);
  relu_inplace(cache.feature);

  cache.mean = tensor(kMeanW) * batch.mean_action;
  cache.mean.colwise() += tensor(kMeanB).col(0);
  relu_inplace(cache.mean);

  const auto trunk1_w = tensor(kTrunk1W);
  cache.trunk1 = trunk1_w.leftCols(s.spatial_width) * cache.spatial +
                 trunk1_w.middleCols(s.spatial_width, s.feature_width) * cache.feature +
                 trunk1_w.rightCols(s.mean_width) * cache.mean;
  cache.trunk1.colwise() += tensor(kTrunk1B).col(0);
  relu_inplace(cache.trunk1);

  cache.trunk2 = tensor(kTrunk2W) * cache.trunk1;
  cache.trunk2.colwise() += tensor(kTrunk2B).col(0);
  relu_inplace(cache.trunk2);

  MatrixXd q = tensor(kHeadW) * cache.trunk2;
  q.colwise() += tensor(kHeadB).col(0);
  return q;
}

std::vector<double> QNetwork::q_values(const NetInput& input) const {
  NetBatch batch(shape_, 1);
  batch.set(0, input);
  const MatrixXd q = forward(batch);
  return {q.data(), q.data() + q.size()};
}

void QNetwork::backward(const ForwardCache& cache, const MatrixXd& d_q,
                        std::span<double> grad) const {
  if (grad.size() != params_.size()) throw ContractViolation("gradient buffer size mismatch");
  if (cache.input == nullptr) throw ContractViolation("backward without a forward cache");
  const NetShape& s = shape_;
  const NetBatch& batch = *cache.input;
  const int n = batch.size();
  AlignedVector scratch(params_.size(), 0.0);
  auto g = [&](Tensor t) {
    const TensorSpec& spec = layout_[t];
    return Eigen::Map<MatrixXd>(scratch.data() + spec.offset, spec.rows, spec.cols);
  };
  auto dense_grad = [&](Tensor w, const MatrixXd& dz, const auto& input) {
    g(w).noalias() = dz * input.transpose();
    g(static_cast<Tensor>(w + 1)) = dz.rowwise().sum();
  };

  dense_grad(kHeadW, d_q, cache.trunk2);
  MatrixXd d = (tensor(kHeadW).transpose() * d_q).cwiseProduct(relu_mask(cache.trunk2));
  dense_grad(kTrunk2W, d, cache.trunk1);
  d = (tensor(kTrunk2W).transpose() * d).cwiseProduct(relu_mask(cache.trunk1));

  // Trunk1 sees the concatenation [spatial; feature; mean].
  const auto trunk1_w = tensor(kTrunk1W);
  auto g_trunk1 = g(kTrunk1W);
  g_trunk1.leftCols(s.spatial_width).noalias() = d * cache.spatial.transpose();
  g_trunk1.middleCols(s.spatial_width, s.feature_width).noalias() = d * cache.feature.transpose();
  g_trunk1.rightCols(s.mean_width).noalias() = d * cache.mean.transpose();
  g(kTrunk1B) = d.rowwise().sum();

  MatrixXd d_mean = (trunk1_w.rightCols(s.mean_width).transpose() * d)
                        .cwiseProduct(relu_mask(cache.mean));
  dense_grad(kMeanW, d_mean, batch.mean_action);
  MatrixXd d_feature = (trunk1_w.middleCols(s.spatial_width, s.feature_width).transpose() * d)
                           .cwiseProduct(relu_mask(cache.feature));
  dense_grad(kFeatureW, d_feature, batch.features);
  MatrixXd d_spatial = (trunk1_w.leftCols(s.spatial_width).transpose() * d)
                           .cwiseProduct(relu_mask(cache.spatial));
  const Eigen::Map<const MatrixXd> flat(cache.act2.data(), s.flattened_conv_dim(), n);
  dense_grad(kSpatialW, d_spatial, flat);

  // Back through conv2: gradient wrt its activation, reshaped filter-major.
  MatrixXd d_flat = tensor(kSpatialW).transpose() * d_spatial;
  Eigen::Map<MatrixXd> d_act2(d_flat.data(), s.conv2_filters,
                              static_cast<Eigen::Index>(s.conv2_side()) * s.conv2_side() * n);
  d_act2.array() *= (cache.act2.array() > 0.0).cast<double>();
  g(kConv2W).noalias() = d_act2 * cache.cols2.transpose();
  g(kConv2B) = d_act2.rowwise().sum();

  const MatrixXd d_cols2 = tensor(kConv2W).transpose() * d_act2;
  MatrixXd d_act1_flat = col2im(d_cols2, n, s.conv1_side(), s.conv1_filters, s.kernel,
                                s.conv_padding);
  Eigen::Map<MatrixXd> d_act1(d_act1_flat.data(), s.conv1_filters,
                              static_cast<Eigen::Index>(s.conv1_side()) * s.conv1_side() * n);
  d_act1.array() *= (cache.act1.array() > 0.0).cast<double>();
  g(kConv1W).noalias() = d_act1 * cache.cols1.transpose();
  g(kConv1B) = d_act1.rowwise().sum();
  std::copy(scratch.begin(), scratch.end(), grad.begin());
}

void QNetwork::copy_parameters_from(const QNetwork& other) {
  if (!(other.shape_ == shape_)) throw ContractViolation("copying between different shapes");
  params_ = other.params_;
}

}  // namespace crowdsim::mfq
