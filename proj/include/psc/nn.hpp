#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "psc/kernels.hpp"
#include "psc/tensor.hpp"

namespace psc::nn {

/// Topology: embedding -> conv(k3) -> conv(k3) -> maxpool -> conv(k5) ->
/// maxpool -> flatten -> dense sigmoid. Convolutions are valid (no padding)
/// with ReLU; pooling stride equals the window.
struct ModelConfig {
  std::int32_t vocab_size = 23;  // V; embedding row 0 is the padding index
  std::int32_t embed_dim = 32;
  std::int32_t conv1_filters = 32;
  std::int32_t conv2_filters = 32;
  std::int32_t pool1_window = 5;
  std::int32_t conv3_filters = 32;
  std::int32_t pool2_window = 5;
  std::int32_t input_len = 1500;

  static constexpr std::int32_t kConv1Kernel = 3;
  static constexpr std::int32_t kConv2Kernel = 3;
  static constexpr std::int32_t kConv3Kernel = 5;

  std::int32_t conv1_len() const { return input_len - kConv1Kernel + 1; }
  std::int32_t conv2_len() const { return conv1_len() - kConv2Kernel + 1; }
  std::int32_t pool1_len() const { return conv2_len() / pool1_window; }
  std::int32_t conv3_len() const { return pool1_len() - kConv3Kernel + 1; }
  std::int32_t pool2_len() const { return conv3_len() / pool2_window; }
  std::int32_t flatten_dim() const { return pool2_len() * conv3_filters; }

  /// Throws BadConfig when any size is < 1 or any layer output is empty.
  void validate() const;

  /// Closed-form trainable value count; equals Parameters::total_values().
  std::int64_t count_parameters() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Trainable tensors; also reused as the container for gradients and
/// optimizer accumulators since they share shapes.
struct Parameters {
  Tensor E;   // (V+1, d)
  Tensor W1;  // (3, d, f1)
  Tensor b1;  // (f1)
  Tensor W2;  // (3, f1, f2)
  Tensor b2;  // (f2)
  Tensor W3;  // (5, f2, f3)
  Tensor b3;  // (f3)
  Tensor Wd;  // (flatten_dim, 1)
  Tensor bd;  // (1)

  static constexpr std::size_t kTensors = 9;
  static const std::array<const char*, kTensors>& names();
  std::array<Tensor*, kTensors> tensors();
  std::array<const Tensor*, kTensors> tensors() const;

  static Parameters zeros(const ModelConfig& cfg);
  /// Per-tensor uniform(-sqrt(6/(fan_in+fan_out))) weights, zero biases,
  /// uniform(-0.05, 0.05) embedding; draws are seed-deterministic.
  static Parameters glorot(const ModelConfig& cfg, std::uint64_t seed);

  std::size_t total_values() const;
  bool same_shapes(const Parameters& other) const;
  void scale(double factor);
  void fill(double value);
  /// Elementwise +=; shapes must match.
  void add(const Parameters& other);
};

/// Activations and pooling argmaxes kept for the backward pass.
struct ForwardCache {
  std::vector<std::int32_t> indices;  // (L)
  Tensor x0;                          // embedded input (L, d)
  Tensor a1;                          // conv1 output (conv1_len, f1), post-ReLU
  Tensor a2;                          // conv2 output (conv2_len, f2), post-ReLU
  Tensor p1;                          // pool1 output (pool1_len, f2)
  std::vector<std::int32_t> i1;       // pool1 argmax rows
  Tensor a3;                          // conv3 output (conv3_len, f3), post-ReLU
  Tensor p2;                          // pool2 output (pool2_len, f3)
  std::vector<std::int32_t> i2;       // pool2 argmax rows
  double z = 0.0;                     // dense pre-activation
  double p = 0.5;                     // sigmoid output
};

/// Reusable buffers for backward; allocate once per worker.
struct BackwardScratch {
  explicit BackwardScratch(const ModelConfig& cfg);
  Tensor dp2, da3, dp1, da2, da1, dx0;
  std::vector<double> w1_t, w2_t, w3_t;  // transposed-kernel scratch
};

double sigmoid(double z);

/// BCE with probability clamped to [1e-7, 1 - 1e-7].
double bce_loss(double p, double y);

/// Full forward pass; returns the probability and fills the cache.
/// Throws ShapeMismatch on a wrong-length sample, IndexOutOfVocab on an
/// index outside [0, V].
double forward(const ModelConfig& cfg, const Parameters& params,
               std::span<const std::int32_t> indices, ForwardCache& cache);

/// Accumulates dL/d(theta) for one sample into grads (callers zero it per
/// batch). Throws StaleCache when the cache does not match the config.
void backward(const ModelConfig& cfg, const Parameters& params, const ForwardCache& cache,
              double y, Parameters& grads, BackwardScratch& scratch);

struct AdadeltaState {
  Parameters eg2;   // decayed mean of squared gradients
  Parameters edx2;  // decayed mean of squared updates
  double rho = 0.95;
  double lr = 1.0;
  double epsilon = 1e-6;

  static AdadeltaState init(const ModelConfig& cfg, double rho = 0.95, double lr = 1.0,
                            double epsilon = 1e-6);
};

/// One optimizer step over every tensor, in declaration order.
/// Throws NonFiniteGradient (before mutating anything) on NaN/inf gradients.
void adadelta_step(Parameters& params, const Parameters& grads, AdadeltaState& state);

}  // namespace psc::nn
