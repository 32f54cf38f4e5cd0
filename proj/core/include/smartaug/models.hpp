#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "smartaug/checkpoint.hpp"
#include "smartaug/ops.hpp"
#include "smartaug/optimizer.hpp"
#include "smartaug/tensor.hpp"

namespace smartaug {

/// Per-sample image geometry (channels, height, width).
struct ImageSpec {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  friend bool operator==(const ImageSpec&, const ImageSpec&) = default;
};

std::string to_string(const ImageSpec& spec);

struct Conv2dLayer {
  std::string name;
  Tensor weight;  // [F, C, kh, kw]
  Tensor bias;    // [F]
  Padding padding = Padding::kSame;
};

struct BatchNormLayer {
  std::string name;
  Tensor gamma;
  Tensor beta;
  BatchNormStats stats;
  double epsilon = kBatchNormEpsilon;
};

struct DenseLayer {
  std::string name;
  Tensor weight;  // [D, U]
  Tensor bias;    // [U]
};

struct ReluLayer {};
struct SigmoidLayer {};
struct MaxPoolLayer {};
struct FlattenLayer {};
struct DropoutLayer {
  double rate = 0.5;
};

using Layer = std::variant<Conv2dLayer, BatchNormLayer, DenseLayer, ReluLayer, SigmoidLayer,
                           MaxPoolLayer, FlattenLayer, DropoutLayer>;

/// Ordered composition of layers with a fixed per-sample input geometry.
class LayerGraph {
 public:
  LayerGraph() = default;
  explicit LayerGraph(ImageSpec input_spec);

  /// Appends a layer after checking it accepts the current output shape.
  void add(Layer layer);

  Tensor forward(const Tensor& input, Mode mode, Rng& rng);

  const ImageSpec& input_spec() const { return input_spec_; }
  /// Per-sample output shape (batch axis excluded).
  const Shape& output_spec() const { return output_spec_; }
  const std::vector<Layer>& layers() const { return layers_; }

  ParameterList parameters() const;
  std::size_t parameter_count() const;

  /// Trainable parameters plus batch-norm running statistics.
  std::vector<NamedTensor> state() const;
  void load_state(const std::vector<NamedTensor>& state);

  /// One layer per line: kind followed by key=value hyperparameters.
  std::string describe() const;

  /// Number of forward() calls since construction.
  std::size_t forward_calls() const { return forward_calls_; }

 private:
  ImageSpec input_spec_{};
  Shape output_spec_;
  std::vector<Layer> layers_;
  std::size_t forward_calls_ = 0;
};

/// Rebuilds a graph from describe() output. Parameters are zero-filled; load
/// a checkpoint with load_state() afterwards.
LayerGraph graph_from_description(const std::string& text);

Tensor forward(LayerGraph& net, const Tensor& input, Mode mode, Rng& rng);

struct NetworkAOptions {
  std::size_t filters = 16;
};

/// Fully convolutional augmenter:
/// conv3x3(filters) -> ReLU -> conv3x3(filters) -> ReLU -> conv3x3(out) -> sigmoid.
struct NetworkA {
  LayerGraph graph;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;

  Tensor forward(const Tensor& packed, Mode mode, Rng& rng) {
    return graph.forward(packed, mode, rng);
  }
};

struct NetworkB1Options {
  std::size_t conv1_filters = 16;
  std::size_t conv2_filters = 32;
  std::size_t hidden_units = 1024;
  double dropout_rate = 0.5;
};

/// Small classifier: two conv/BN/ReLU/maxpool stages, a hidden dense layer
/// with dropout, and a K-way logit layer.
struct NetworkB1 {
  LayerGraph graph;
  std::size_t num_classes = 0;

  Tensor forward(const Tensor& images, Mode mode, Rng& rng) {
    return graph.forward(images, mode, rng);
  }
};

NetworkA build_network_a(std::size_t in_channels, std::size_t out_channels,
                         std::pair<std::size_t, std::size_t> spatial, Rng& init_rng,
                         const NetworkAOptions& options = {});

NetworkB1 build_network_b1(std::size_t in_channels, std::size_t num_classes,
                           std::pair<std::size_t, std::size_t> spatial, Rng& init_rng,
                           const NetworkB1Options& options = {});

/// Zero-mean normal weights with stddev sqrt(2 / fan_in).
Tensor he_normal(Shape shape, std::size_t fan_in, Rng& rng);

}  // namespace smartaug
