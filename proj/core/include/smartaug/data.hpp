#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "smartaug/ops.hpp"
#include "smartaug/tensor.hpp"

namespace smartaug {

struct Sample {
  Tensor image;  // [c,H,W], values in [0,1]
  int label = 0;
  std::optional<std::string> subject_id;
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> class_names;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return samples.size(); }
  std::size_t num_classes() const { return class_names.size(); }

  /// Throws ConfigError describing the first violated invariant.
  void validate() const;

  /// Dataset indices per class label, ascending.
  std::vector<std::vector<std::size_t>> class_indices() const;

  Dataset subset(std::span<const std::size_t> indices) const;

  /// Stacks the selected images into [n,c,H,W].
  Tensor batch_images(std::span<const std::size_t> indices) const;
  std::vector<int> batch_labels(std::span<const std::size_t> indices) const;
};

// Layout: root/<class_name>/[<subject_id>__]<name>.(pgm|ppm|png); classes are
// indexed by sorted directory name.
Dataset load_image_dir(const std::filesystem::path& root);

// IDX images (magic 0x00000803, u8 [count,rows,cols]) and labels (0x00000801).
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);
Dataset decode_idx(const std::vector<std::uint8_t>& images, const std::vector<std::uint8_t>& labels);
std::vector<std::uint8_t> encode_idx_images(const Dataset& dataset);
std::vector<std::uint8_t> encode_idx_labels(const Dataset& dataset);

/// Writes the directory layout load_image_dir() reads, one PGM/PPM per sample.
void write_image_dir(const Dataset& dataset, const std::filesystem::path& root);

struct SplitSpec {
  double train_frac = 0.7;
  double val_frac = 0.2;
  double test_frac = 0.1;
  bool subject_exclusive = false;

  void validate() const;
};

struct DatasetSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Shuffles subjects (subject_exclusive) or samples with `seed` and hands out
/// floor(val_frac*n) to validation, floor(test_frac*n) to test and the rest to
/// training, where n counts subjects or samples.
DatasetSplits split(const Dataset& dataset, const SplitSpec& spec, std::uint64_t seed);

struct PreprocessTarget {
  bool grayscale = true;
  std::size_t height = 0;
  std::size_t width = 0;
};

// Luminance 0.299R + 0.587G + 0.114B, align-corners bilinear resize, clip to [0,1].
Tensor preprocess(const Tensor& image, const PreprocessTarget& target);
Dataset preprocess(const Dataset& dataset, const PreprocessTarget& target);

inline const std::vector<std::string> kSyntheticClassNames = {"rectangle", "disc"};

/// Two-class shape dataset: class 0 is an axis-aligned bright rectangle, class
/// 1 a bright disc, both on a dark noisy background with jittered size and
/// position. Every 5 consecutive samples of a class share a subject id.
Dataset gen_synthetic(std::size_t n_per_class, std::size_t classes,
                      std::pair<std::size_t, std::size_t> size, std::uint64_t seed);

/// Deterministic generator seeded from (seed, stream).
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

}  // namespace smartaug
