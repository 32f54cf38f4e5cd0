#include "smartaug/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <set>

#include "smartaug/error.hpp"
#include "smartaug/image_io.hpp"

namespace smartaug {

namespace fs = std::filesystem;

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

void Dataset::validate() const {
  if (class_names.empty()) throw ConfigError("dataset has no classes");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Sample& s = samples[i];
    if (s.image.shape() != Shape{channels, height, width}) {
      throw ConfigError("sample " + std::to_string(i) + " has shape " +
                        shape_to_string(s.image.shape()) + ", dataset is " +
                        shape_to_string(Shape{channels, height, width}));
    }
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= class_names.size()) {
      throw ConfigError("sample " + std::to_string(i) + " has label " + std::to_string(s.label) +
                        " outside [0," + std::to_string(class_names.size()) + ")");
    }
    for (double v : s.image.data()) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ConfigError("sample " + std::to_string(i) + " has pixel value " +
                          std::to_string(v) + " outside [0,1]");
      }
    }
  }
}

std::vector<std::vector<std::size_t>> Dataset::class_indices() const {
  std::vector<std::vector<std::size_t>> out(class_names.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out.at(static_cast<std::size_t>(samples[i].label)).push_back(i);
  return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.class_names = class_names;
  out.channels = channels;
  out.height = height;
  out.width = width;
  out.samples.reserve(indices.size());
  for (std::size_t i : indices) out.samples.push_back(samples.at(i));
  return out;
}

Tensor Dataset::batch_images(std::span<const std::size_t> indices) const {
  const std::size_t per = channels * height * width;
  std::vector<double> values;
  values.reserve(indices.size() * per);
  for (std::size_t i : indices) {
    const auto d = samples.at(i).image.data();
    values.insert(values.end(), d.begin(), d.end());
  }
  return Tensor(Shape{indices.size(), channels, height, width}, std::move(values));
}

std::vector<int> Dataset::batch_labels(std::span<const std::size_t> indices) const {
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (std::size_t i : indices) labels.push_back(samples.at(i).label);
  return labels;
}

Dataset load_image_dir(const fs::path& root) {
  if (!fs::is_directory(root)) throw ConfigError("dataset root is not a directory: " + root.string());
  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw ConfigError("no class directories under " + root.string());

  Dataset ds;
  std::vector<fs::path> sources;
  for (std::size_t label = 0; label < class_dirs.size(); ++label) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dirs[label])) {
      if (!entry.is_regular_file()) continue;
      auto ext = entry.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (ext == ".pgm" || ext == ".ppm" || ext == ".png") files.push_back(entry.path());
    }
    if (files.empty()) {
      throw ConfigError("class directory has no images: " + class_dirs[label].string());
    }
    std::sort(files.begin(), files.end());
    ds.class_names.push_back(class_dirs[label].filename().string());
    for (const fs::path& file : files) {
      Sample s;
      s.image = from_raw(read_image(file));
      s.label = static_cast<int>(label);
      const std::string stem = file.stem().string();
      const auto delim = stem.find("__");
      if (delim != std::string::npos && delim > 0) s.subject_id = stem.substr(0, delim);
      ds.samples.push_back(std::move(s));
      sources.push_back(file);
    }
  }

  const Shape& ref = ds.samples.front().image.shape();
  std::string offending;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    if (ds.samples[i].image.shape() != ref) {
      offending += "\n  " + sources[i].string() + " " + shape_to_string(ds.samples[i].image.shape());
    }
  }
  if (!offending.empty()) {
    throw ConfigError("images must share one size; expected " + shape_to_string(ref) + " (from " +
                      sources.front().string() + "), offending files:" + offending);
  }
  ds.channels = ref[0];
  ds.height = ref[1];
  ds.width = ref[2];
  return ds;
}

namespace {

std::vector<std::uint8_t> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t pos, const char* what) {
  if (b.size() < pos + 4) throw FormatError(std::string("IDX truncated reading ") + what);
  return (std::uint32_t{b[pos]} << 24) | (std::uint32_t{b[pos + 1]} << 16) |
         (std::uint32_t{b[pos + 2]} << 8) | std::uint32_t{b[pos + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>((v >> s) & 0xFF));
}

}  // namespace

Dataset decode_idx(const std::vector<std::uint8_t>& images, const std::vector<std::uint8_t>& labels) {
  const auto img_magic = read_be32(images, 0, "image magic");
  if (img_magic != 0x00000803) {
    throw FormatError("IDX images: bad magic 0x" + [&] {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%08x", img_magic);
      return std::string(buf);
    }() + ", expected 0x00000803");
  }
  const auto lbl_magic = read_be32(labels, 0, "label magic");
  if (lbl_magic != 0x00000801) throw FormatError("IDX labels: bad magic, expected 0x00000801");
  const std::size_t count = read_be32(images, 4, "image count");
  const std::size_t rows = read_be32(images, 8, "rows");
  const std::size_t cols = read_be32(images, 12, "cols");
  const std::size_t label_count = read_be32(labels, 4, "label count");
  if (count != label_count) {
    throw FormatError("IDX image count " + std::to_string(count) + " does not match label count " +
                      std::to_string(label_count));
  }
  if (rows == 0 || cols == 0) throw FormatError("IDX images with zero dimension");
  if (images.size() != 16 + count * rows * cols) {
    throw FormatError("IDX images: header promises " + std::to_string(count * rows * cols) +
                      " pixel bytes, file has " + std::to_string(images.size() - 16));
  }
  if (labels.size() != 8 + count) {
    throw FormatError("IDX labels: header promises " + std::to_string(count) + " labels, file has " +
                      std::to_string(labels.size() - 8));
  }
  Dataset ds;
  ds.channels = 1;
  ds.height = rows;
  ds.width = cols;
  int max_label = 0;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<double> px(rows * cols);
    const std::size_t off = 16 + i * rows * cols;
    for (std::size_t p = 0; p < px.size(); ++p) px[p] = images[off + p] / 255.0;
    Sample s;
    s.image = Tensor(Shape{1, rows, cols}, std::move(px));
    s.label = labels[8 + i];
    max_label = std::max(max_label, s.label);
    ds.samples.push_back(std::move(s));
  }
  for (int c = 0; c <= max_label; ++c) ds.class_names.push_back(std::to_string(c));
  return ds;
}

Dataset load_idx(const fs::path& images, const fs::path& labels) {
  return decode_idx(slurp(images), slurp(labels));
}

std::vector<std::uint8_t> encode_idx_images(const Dataset& dataset) {
  if (dataset.channels != 1) throw FormatError("IDX images must be single-channel");
  std::vector<std::uint8_t> out;
  put_be32(out, 0x00000803);
  put_be32(out, static_cast<std::uint32_t>(dataset.size()));
  put_be32(out, static_cast<std::uint32_t>(dataset.height));
  put_be32(out, static_cast<std::uint32_t>(dataset.width));
  for (const Sample& s : dataset.samples) {
    for (double v : s.image.data()) out.push_back(quantize(v));
  }
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(const Dataset& dataset) {
  std::vector<std::uint8_t> out;
  put_be32(out, 0x00000801);
  put_be32(out, static_cast<std::uint32_t>(dataset.size()));
  for (const Sample& s : dataset.samples) {
    if (s.label < 0 || s.label > 255) throw FormatError("IDX labels must fit in one byte");
    out.push_back(static_cast<std::uint8_t>(s.label));
  }
  return out;
}

void write_image_dir(const Dataset& dataset, const fs::path& root) {
  const char* ext = dataset.channels == 3 ? ".ppm" : ".pgm";
  std::vector<std::size_t> per_class(dataset.num_classes(), 0);
  for (const std::string& name : dataset.class_names) fs::create_directories(root / name);
  for (const Sample& s : dataset.samples) {
    const auto label = static_cast<std::size_t>(s.label);
    char stem[32];
    std::snprintf(stem, sizeof stem, "img%05zu", per_class[label]++);
    std::string file = s.subject_id ? *s.subject_id + "__" + stem : std::string(stem);
    write_pnm(root / dataset.class_names[label] / (file + ext), to_raw(s.image));
  }
}

void SplitSpec::validate() const {
  for (double f : {train_frac, val_frac, test_frac}) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("split fractions must lie in [0,1]");
  }
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9) {
    throw ConfigError("split fractions must sum to 1");
  }
}

DatasetSplits split(const Dataset& dataset, const SplitSpec& spec, std::uint64_t seed) {
  spec.validate();
  // Units are subjects (exclusive mode) or single samples.
  std::vector<std::vector<std::size_t>> units;
  if (spec.subject_exclusive) {
    std::map<std::string, std::size_t> unit_of;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const auto& sid = dataset.samples[i].subject_id;
      if (!sid) {
        throw ConfigError("subject-exclusive split needs a subject id on every sample; sample " +
                          std::to_string(i) + " has none");
      }
      auto [it, inserted] = unit_of.emplace(*sid, units.size());
      if (inserted) units.emplace_back();
      units[it->second].push_back(i);
    }
  } else {
    for (std::size_t i = 0; i < dataset.size(); ++i) units.push_back({i});
  }

  Rng rng = make_rng(seed, 0x5711ULL);
  std::vector<std::size_t> order(units.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t n = units.size();
  const auto take = [n](double frac) {
    return static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9));
  };
  const std::size_t n_val = take(spec.val_frac);
  const std::size_t n_test = take(spec.test_frac);
  const std::size_t n_train = n - std::min(n, n_val + n_test);
  const char* unit_name = spec.subject_exclusive ? "subjects" : "samples";
  if ((spec.train_frac > 0 && n_train == 0) || (spec.val_frac > 0 && n_val == 0) ||
      (spec.test_frac > 0 && n_test == 0) || n_val + n_test > n) {
    throw ConfigError(std::string("too few ") + unit_name + " (" + std::to_string(n) +
                      ") to populate train/validation/test splits");
  }

  auto gather = [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> idx;
    for (std::size_t u = begin; u < end; ++u) {
      idx.insert(idx.end(), units[order[u]].begin(), units[order[u]].end());
    }
    std::sort(idx.begin(), idx.end());
    return dataset.subset(idx);
  };
  return DatasetSplits{gather(0, n_train), gather(n_train, n_train + n_val),
                       gather(n_train + n_val, n)};
}

Tensor preprocess(const Tensor& image, const PreprocessTarget& target) {
  if (image.rank() != 3) throw ShapeError("preprocess needs [c,H,W], got " + shape_to_string(image.shape()));
  std::size_t c = image.dim(0);
  const std::size_t h = image.dim(1), w = image.dim(2);
  std::vector<double> src(image.data().begin(), image.data().end());
  if (target.grayscale && c == 3) {
    const std::size_t plane = h * w;
    std::vector<double> gray(plane);
    for (std::size_t p = 0; p < plane; ++p) {
      gray[p] = 0.299 * src[p] + (0.587 * src[plane + p] + 0.114 * src[2 * plane + p]);
    }
    src = std::move(gray);
    c = 1;
  }
  const std::size_t oh = target.height ? target.height : h;
  const std::size_t ow = target.width ? target.width : w;
  std::vector<double> out(c * oh * ow);
  if (oh == h && ow == w) {
    out = src;
  } else {
    // Align-corners mapping keeps the four corner pixels fixed.
    const double sy = oh > 1 ? static_cast<double>(h - 1) / static_cast<double>(oh - 1) : 0.0;
    const double sx = ow > 1 ? static_cast<double>(w - 1) / static_cast<double>(ow - 1) : 0.0;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* plane = src.data() + ch * h * w;
      for (std::size_t y = 0; y < oh; ++y) {
        const double fy = static_cast<double>(y) * sy;
        const std::size_t y0 = std::min(static_cast<std::size_t>(fy), h - 1);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double ty = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < ow; ++x) {
          const double fx = static_cast<double>(x) * sx;
          const std::size_t x0 = std::min(static_cast<std::size_t>(fx), w - 1);
          const std::size_t x1 = std::min(x0 + 1, w - 1);
          const double tx = fx - static_cast<double>(x0);
          const double top = plane[y0 * w + x0] * (1.0 - tx) + plane[y0 * w + x1] * tx;
          const double bot = plane[y1 * w + x0] * (1.0 - tx) + plane[y1 * w + x1] * tx;
          out[(ch * oh + y) * ow + x] = top * (1.0 - ty) + bot * ty;
        }
      }
    }
  }
  for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  return Tensor(Shape{c, oh, ow}, std::move(out));
}

Dataset preprocess(const Dataset& dataset, const PreprocessTarget& target) {
  Dataset out;
  out.class_names = dataset.class_names;
  for (const Sample& s : dataset.samples) {
    out.samples.push_back({preprocess(s.image, target), s.label, s.subject_id});
  }
  if (!out.samples.empty()) {
    out.channels = out.samples.front().image.dim(0);
    out.height = out.samples.front().image.dim(1);
    out.width = out.samples.front().image.dim(2);
  } else {
    out.channels = target.grayscale ? 1 : dataset.channels;
    out.height = target.height ? target.height : dataset.height;
    out.width = target.width ? target.width : dataset.width;
  }
  return out;
}

Dataset gen_synthetic(std::size_t n_per_class, std::size_t classes,
                      std::pair<std::size_t, std::size_t> size, std::uint64_t seed) {
  if (classes != 2) throw ConfigError("synthetic generator supports exactly 2 classes");
  const auto [h, w] = size;
  if (h < 8 || w < 8) throw ConfigError("synthetic images must be at least 8x8");
  Rng rng = make_rng(seed, 0x5E17ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  Dataset ds;
  ds.class_names = kSyntheticClassNames;
  ds.channels = 1;
  ds.height = h;
  ds.width = w;
  const double fh = static_cast<double>(h), fw = static_cast<double>(w);
  const double side = std::min(fh, fw);
  for (std::size_t i = 0; i < n_per_class; ++i) {
    for (int label = 0; label < 2; ++label) {
      std::vector<double> px(h * w);
      for (double& v : px) v = uniform(0.0, 0.3);
      const double intensity = uniform(0.7, 1.0);
      if (label == 0) {
        const double rh = uniform(0.3, 0.55) * fh;
        const double rw = uniform(0.3, 0.55) * fw;
        const double y0 = uniform(1.0, fh - rh - 1.0);
        const double x0 = uniform(1.0, fw - rw - 1.0);
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            const double cy = static_cast<double>(y) + 0.5, cx = static_cast<double>(x) + 0.5;
            if (cy >= y0 && cy <= y0 + rh && cx >= x0 && cx <= x0 + rw) {
              px[y * w + x] = intensity - uniform(0.0, 0.05);
            }
          }
        }
      } else {
        const double r = uniform(0.17, 0.3) * side;
        const double yc = uniform(r + 1.0, fh - r - 1.0);
        const double xc = uniform(r + 1.0, fw - r - 1.0);
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            const double dy = static_cast<double>(y) + 0.5 - yc;
            const double dx = static_cast<double>(x) + 0.5 - xc;
            if (dy * dy + dx * dx <= r * r) px[y * w + x] = intensity - uniform(0.0, 0.05);
          }
        }
      }
      Sample s;
      s.image = Tensor(Shape{1, h, w}, std::move(px));
      s.label = label;
      char sid[32];
      std::snprintf(sid, sizeof sid, "c%ds%04zu", label, i / 5);
      s.subject_id = sid;
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

}  // namespace smartaug
