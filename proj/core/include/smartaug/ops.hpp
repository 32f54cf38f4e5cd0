#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "smartaug/tensor.hpp"

namespace smartaug {

using Rng = std::mt19937_64;

enum class Padding { kSame, kValid };
enum class Mode { kTrain, kInfer };

// Convolution, NCHW layout, stride 1. `same` zero-fills so H'=H and W'=W.
Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias, Padding padding);

// 2x2 window, stride 2. Gradient goes to the first (row-major) maximal element.
Tensor maxpool2d(const Tensor& input);

/// Per-channel running statistics owned by a batch-normalization layer.
struct BatchNormStats {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;

  explicit BatchNormStats(std::size_t channels = 0)
      : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

inline constexpr double kBatchNormEpsilon = 1e-5;

/// Batch normalization over N,H,W per channel.
///
/// Train mode normalizes with the biased batch variance and moves the running
/// statistics toward the batch statistics by `stats.momentum`. Infer mode uses
/// the running statistics and leaves them untouched.
Tensor batchnorm2d(const Tensor& input, const Tensor& gamma, const Tensor& beta, Mode mode,
                   BatchNormStats& stats, double epsilon = kBatchNormEpsilon);

// input[N,D] x weights[D,U] + bias[U]
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);

Tensor relu(const Tensor& input);
Tensor sigmoid(const Tensor& input);

// Inverted dropout; identity in infer mode or when rate == 0.
Tensor dropout(const Tensor& input, double rate, Mode mode, Rng& rng);

// Mean over the batch of -log softmax(logits)[label].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

// Mean squared difference over all elements.
Tensor mse_loss(const Tensor& prediction, const Tensor& target);

Tensor sum(const Tensor& input);
Tensor add(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& input, double factor);
// Linear combination of scalar tensors: sum_i weights[i] * terms[i].
Tensor weighted_sum(std::span<const Tensor> terms, std::span<const double> weights);
Tensor reshape(const Tensor& input, Shape shape);
// [N, ...] -> [N, prod(...)]
Tensor flatten(const Tensor& input);
// Concatenation along axis 0; trailing dimensions must agree.
Tensor concat(std::span<const Tensor> parts);

// Row-wise softmax of [N,K] logits, no tape.
std::vector<double> softmax_rows(const Tensor& logits);

}  // namespace smartaug
