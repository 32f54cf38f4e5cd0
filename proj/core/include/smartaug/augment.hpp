#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "smartaug/data.hpp"
#include "smartaug/models.hpp"
#include "smartaug/tensor.hpp"

namespace smartaug {

struct SampleSelection {
  std::vector<std::size_t> sources;  // k dataset indices
  std::size_t target = 0;
};

/// Draws k+1 distinct dataset indices uniformly from `class_members`; the
/// last draw becomes the target.
SampleSelection select_samples(std::span<const std::size_t> class_members, int class_label,
                               std::size_t k, Rng& rng);

/// Stacks k [c,H,W] images into one [k*c,H,W] tensor; source i occupies
/// channels i*c .. (i+1)*c-1.
Tensor pack_channels(std::span<const Tensor> sources);

/// Inverse of pack_channels for images with `channels_per_source` channels.
std::vector<Tensor> unpack_channels(const Tensor& packed, std::size_t channels_per_source);

/// A batch for Network A: packed sources, held-out targets and their class.
struct AugmentBatch {
  Tensor packed_input;   // [N, k*c, H, W]
  Tensor target_image;   // [N, c, H, W]
  std::vector<int> class_label;
  std::vector<std::vector<std::size_t>> source_indices;  // k+1 per sample, target last

  std::size_t size() const { return class_label.size(); }
};

/// One AugmentBatch sample per entry of `labels`, drawing sources and targets
/// from `dataset` with select_samples().
AugmentBatch make_augment_batch(const Dataset& dataset,
                                const std::vector<std::vector<std::size_t>>& class_members,
                                std::span<const int> labels, std::size_t k, Rng& rng);

struct ClassPartition {
  int class_label = 0;
  std::vector<std::size_t> positions;  // rows of the original batch, ascending
  AugmentBatch batch;
};

/// Splits `batch` by class label (ascending label order, stable within a
/// class). Every label present must have an entry in `augmenters`.
std::vector<ClassPartition> route_by_class(const AugmentBatch& batch,
                                           const std::map<int, NetworkA*>& augmenters);

enum class Flip { kNone, kHorizontal };
enum class Blur { kNone, kGaussian };

struct TraditionalAugConfig {
  std::vector<Flip> flips{Flip::kNone, Flip::kHorizontal};
  std::vector<Blur> blurs{Blur::kNone, Blur::kGaussian};
  std::vector<double> rotations_deg{-5.0, -2.0, 0.0, 2.0, 5.0};

  std::size_t expansion_factor() const { return flips.size() * blurs.size() * rotations_deg.size(); }
};

Tensor flip_horizontal(const Tensor& chw);
// 3x3 Gaussian, sigma 1, edge pixels replicated.
Tensor gaussian_blur3(const Tensor& chw);
// Rotation about the image center, bilinear, zero outside the source.
Tensor rotate(const Tensor& chw, double degrees);

/// Every flip x blur x rotation combination, in that nesting order.
std::vector<Tensor> traditional_expand(const Tensor& image, const TraditionalAugConfig& config);
Dataset traditional_expand(const Dataset& dataset, const TraditionalAugConfig& config);

/// Writes aug_<epoch>_<batch>_<i>.(pgm|ppm): i=0 is the blend, 1..k the sources.
std::vector<std::filesystem::path> write_triptych(const std::filesystem::path& dir,
                                                  std::size_t epoch, std::size_t batch,
                                                  const Tensor& blend,
                                                  std::span<const Tensor> sources);

}  // namespace smartaug
