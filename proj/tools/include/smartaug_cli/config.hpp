#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "smartaug/trainer.hpp"

namespace smartaug::cli {

/// One experiment: the grid columns (exp id, dataset, Network A count and
/// channels, Network B, alpha, beta, learning rate, momentum) plus run knobs.
struct ExperimentConfig {
  int exp_id = 0;
  std::string dataset = "synthetic";  // "synthetic", an image directory, or "idx:<images>,<labels>"
  std::size_t num_net_a = 1;          // 0 = baseline, 1 = shared A, >=2 = one A per class
  std::size_t a_channels = 2;
  std::string net_b = "b1";
  double alpha = 0.3;
  double beta = 0.7;
  std::optional<double> learning_rate;  // default depends on num_net_a
  double momentum = 0.9;
  std::size_t epochs = 1000;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  bool traditional_aug = false;

  std::optional<double> alpha_final;
  std::optional<double> beta_final;
  std::size_t height = 32;
  std::size_t width = 32;
  bool grayscale = true;
  bool subject_exclusive = false;
  std::size_t synthetic_per_class = 300;
  std::size_t a_filters = 16;
  std::size_t b_conv1_filters = 16;
  std::size_t b_conv2_filters = 32;
  std::size_t b_hidden_units = 1024;
  double dropout_rate = 0.5;

  /// 0.005 with two or more Network As, 0.01 otherwise, unless set.
  double effective_learning_rate() const;
  /// Throws ConfigError naming the offending key.
  void validate() const;
  TrainingConfig training_config() const;
};

/// Parses `key = value` lines; '#' starts a comment. Unknown keys, repeated
/// keys and malformed values are errors that name the key and line.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Every key, one per line, in a stable order; parse_config() inverts it.
std::string serialize_config(const ExperimentConfig& config);

}  // namespace smartaug::cli
