#include "smartaug/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "smartaug/error.hpp"
#include "smartaug/image_io.hpp"

namespace smartaug {

SampleSelection select_samples(std::span<const std::size_t> class_members, int class_label,
                               std::size_t k, Rng& rng) {
  if (k == 0) throw ConfigError("select_samples: k must be at least 1");
  if (class_members.size() < k + 1) {
    throw ConfigError("class " + std::to_string(class_label) + " has " +
                      std::to_string(class_members.size()) + " samples but " +
                      std::to_string(k + 1) + " are required (k=" + std::to_string(k) +
                      " sources plus one target)");
  }
  // Partial Fisher-Yates over a copy of the member list.
  std::vector<std::size_t> pool(class_members.begin(), class_members.end());
  for (std::size_t i = 0; i <= k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  SampleSelection sel;
  sel.sources.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  sel.target = pool[k];
  return sel;
}

Tensor pack_channels(std::span<const Tensor> sources) {
  if (sources.empty()) throw ShapeError("pack_channels: no sources");
  const Shape& ref = sources.front().shape();
  if (ref.size() != 3) throw ShapeError("pack_channels: sources must be [c,H,W], got " + shape_to_string(ref));
  std::vector<double> values;
  values.reserve(sources.size() * shape_numel(ref));
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (sources[i].shape() != ref) {
      throw ShapeError("pack_channels: source " + std::to_string(i) + " has shape " +
                       shape_to_string(sources[i].shape()) + ", source 0 has " +
                       shape_to_string(ref));
    }
    values.insert(values.end(), sources[i].data().begin(), sources[i].data().end());
  }
  return Tensor(Shape{sources.size() * ref[0], ref[1], ref[2]}, std::move(values));
}

std::vector<Tensor> unpack_channels(const Tensor& packed, std::size_t channels_per_source) {
  if (packed.rank() != 3 || channels_per_source == 0 || packed.dim(0) % channels_per_source != 0) {
    throw ShapeError("unpack_channels: cannot split " + shape_to_string(packed.shape()) +
                     " into blocks of " + std::to_string(channels_per_source) + " channels");
  }
  const std::size_t per = channels_per_source * packed.dim(1) * packed.dim(2);
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < packed.dim(0) / channels_per_source; ++i) {
    auto first = packed.data().begin() + static_cast<std::ptrdiff_t>(i * per);
    out.emplace_back(Shape{channels_per_source, packed.dim(1), packed.dim(2)},
                     std::vector<double>(first, first + static_cast<std::ptrdiff_t>(per)));
  }
  return out;
}

AugmentBatch make_augment_batch(const Dataset& dataset,
                                const std::vector<std::vector<std::size_t>>& class_members,
                                std::span<const int> labels, std::size_t k, Rng& rng) {
  if (labels.empty()) throw ShapeError("make_augment_batch: empty batch");
  const std::size_t c = dataset.channels, h = dataset.height, w = dataset.width;
  std::vector<double> packed, target;
  packed.reserve(labels.size() * k * c * h * w);
  target.reserve(labels.size() * c * h * w);
  AugmentBatch batch;
  for (int label : labels) {
    const auto& members = class_members.at(static_cast<std::size_t>(label));
    SampleSelection sel = select_samples(members, label, k, rng);
    for (std::size_t src : sel.sources) {
      const auto d = dataset.samples[src].image.data();
      packed.insert(packed.end(), d.begin(), d.end());
    }
    const auto t = dataset.samples[sel.target].image.data();
    target.insert(target.end(), t.begin(), t.end());
    batch.class_label.push_back(label);
    sel.sources.push_back(sel.target);
    batch.source_indices.push_back(std::move(sel.sources));
  }
  batch.packed_input = Tensor(Shape{labels.size(), k * c, h, w}, std::move(packed));
  batch.target_image = Tensor(Shape{labels.size(), c, h, w}, std::move(target));
  return batch;
}

namespace {

Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& rows) {
  const std::size_t per = t.numel() / t.dim(0);
  std::vector<double> values;
  values.reserve(rows.size() * per);
  for (std::size_t r : rows) {
    auto first = t.data().begin() + static_cast<std::ptrdiff_t>(r * per);
    values.insert(values.end(), first, first + static_cast<std::ptrdiff_t>(per));
  }
  Shape shape = t.shape();
  shape[0] = rows.size();
  return Tensor(std::move(shape), std::move(values));
}

}  // namespace

std::vector<ClassPartition> route_by_class(const AugmentBatch& batch,
                                           const std::map<int, NetworkA*>& augmenters) {
  std::map<int, std::vector<std::size_t>> rows_by_class;
  for (std::size_t i = 0; i < batch.size(); ++i) rows_by_class[batch.class_label[i]].push_back(i);
  std::vector<ClassPartition> out;
  for (auto& [label, rows] : rows_by_class) {
    auto it = augmenters.find(label);
    if (it == augmenters.end() || it->second == nullptr) {
      throw ConfigError("no Network A registered for class " + std::to_string(label) +
                        " present in the batch");
    }
    ClassPartition part;
    part.class_label = label;
    part.positions = rows;
    part.batch.packed_input = gather_rows(batch.packed_input, rows);
    part.batch.target_image = gather_rows(batch.target_image, rows);
    for (std::size_t r : rows) {
      part.batch.class_label.push_back(batch.class_label[r]);
      part.batch.source_indices.push_back(batch.source_indices[r]);
    }
    out.push_back(std::move(part));
  }
  return out;
}

Tensor flip_horizontal(const Tensor& chw) {
  const std::size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  std::vector<double> out(chw.numel());
  const auto in = chw.data();
  for (std::size_t p = 0; p < c * h; ++p) {
    for (std::size_t x = 0; x < w; ++x) out[p * w + x] = in[p * w + (w - 1 - x)];
  }
  return Tensor(chw.shape(), std::move(out));
}

Tensor gaussian_blur3(const Tensor& chw) {
  const std::size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  double kernel[3][3];
  double total = 0.0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      kernel[dy + 1][dx + 1] = std::exp(-(dy * dy + dx * dx) / 2.0);
      total += kernel[dy + 1][dx + 1];
    }
  }
  const auto in = chw.data();
  std::vector<double> out(chw.numel());
  auto clampi = [](std::ptrdiff_t v, std::size_t n) {
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(n) - 1));
  };
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* plane = in.data() + ch * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        double acc = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const std::size_t yy = clampi(static_cast<std::ptrdiff_t>(y) + dy, h);
            const std::size_t xx = clampi(static_cast<std::ptrdiff_t>(x) + dx, w);
            acc += kernel[dy + 1][dx + 1] * plane[yy * w + xx];
          }
        }
        out[(ch * h + y) * w + x] = std::clamp(acc / total, 0.0, 1.0);
      }
    }
  }
  return Tensor(chw.shape(), std::move(out));
}

Tensor rotate(const Tensor& chw, double degrees) {
  if (degrees == 0.0) return chw.clone();
  const std::size_t c = chw.dim(0), h = chw.dim(1), w = chw.dim(2);
  const double theta = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(theta), sn = std::sin(theta);
  const double cy = (static_cast<double>(h) - 1.0) / 2.0;
  const double cx = (static_cast<double>(w) - 1.0) / 2.0;
  const auto in = chw.data();
  std::vector<double> out(chw.numel(), 0.0);
  auto sample = [&](const double* plane, std::ptrdiff_t y, std::ptrdiff_t x) {
    if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(h) || x >= static_cast<std::ptrdiff_t>(w)) {
      return 0.0;
    }
    return plane[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  };
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* plane = in.data() + ch * h * w;
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        // Inverse mapping: output pixel -> source location.
        const double dy = static_cast<double>(y) - cy;
        const double dx = static_cast<double>(x) - cx;
        const double sx = cs * dx + sn * dy + cx;
        const double sy = -sn * dx + cs * dy + cy;
        const double fx = std::floor(sx), fy = std::floor(sy);
        const auto x0 = static_cast<std::ptrdiff_t>(fx), y0 = static_cast<std::ptrdiff_t>(fy);
        const double tx = sx - fx, ty = sy - fy;
        const double v = sample(plane, y0, x0) * (1 - tx) * (1 - ty) +
                         sample(plane, y0, x0 + 1) * tx * (1 - ty) +
                         sample(plane, y0 + 1, x0) * (1 - tx) * ty +
                         sample(plane, y0 + 1, x0 + 1) * tx * ty;
        out[(ch * h + y) * w + x] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return Tensor(chw.shape(), std::move(out));
}

std::vector<Tensor> traditional_expand(const Tensor& image, const TraditionalAugConfig& config) {
  if (image.rank() != 3) {
    throw ShapeError("traditional_expand needs [c,H,W], got " + shape_to_string(image.shape()));
  }
  std::vector<Tensor> out;
  out.reserve(config.expansion_factor());
  for (Flip flip : config.flips) {
    const Tensor flipped = flip == Flip::kHorizontal ? flip_horizontal(image) : image.clone();
    for (Blur blur : config.blurs) {
      const Tensor blurred = blur == Blur::kGaussian ? gaussian_blur3(flipped) : flipped;
      for (double deg : config.rotations_deg) out.push_back(rotate(blurred, deg));
    }
  }
  return out;
}

Dataset traditional_expand(const Dataset& dataset, const TraditionalAugConfig& config) {
  Dataset out;
  out.class_names = dataset.class_names;
  out.channels = dataset.channels;
  out.height = dataset.height;
  out.width = dataset.width;
  out.samples.reserve(dataset.size() * config.expansion_factor());
  for (const Sample& s : dataset.samples) {
    for (Tensor& variant : traditional_expand(s.image, config)) {
      out.samples.push_back({std::move(variant), s.label, s.subject_id});
    }
  }
  return out;
}

std::vector<std::filesystem::path> write_triptych(const std::filesystem::path& dir,
                                                  std::size_t epoch, std::size_t batch,
                                                  const Tensor& blend,
                                                  std::span<const Tensor> sources) {
  std::vector<std::filesystem::path> written;
  auto emit = [&](std::size_t i, const Tensor& img) {
    const char* ext = img.dim(0) == 3 ? "ppm" : "pgm";
    auto path = dir / ("aug_" + std::to_string(epoch) + "_" + std::to_string(batch) + "_" +
                       std::to_string(i) + "." + ext);
    write_pnm(path, to_raw(img));
    written.push_back(std::move(path));
  };
  emit(0, blend);
  for (std::size_t i = 0; i < sources.size(); ++i) emit(i + 1, sources[i]);
  return written;
}

}  // namespace smartaug
