#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "smartaug/checkpoint.hpp"
#include "smartaug/data.hpp"
#include "smartaug/error.hpp"
#include "smartaug/image_io.hpp"
#include "smartaug/metrics.hpp"

namespace smartaug {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("smartaug_formats_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<NamedTensor> sample_tensors(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 3.0);
  std::vector<NamedTensor> out;
  for (const Shape& shape : {Shape{3}, Shape{2, 3, 3, 3}, Shape{5, 2}, Shape{1}}) {
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = n(rng);
    out.push_back({"t" + std::to_string(out.size()) + ".weight", Tensor(shape, std::move(v))});
  }
  out[0].tensor.at(0) = std::numeric_limits<double>::denorm_min();
  out[0].tensor.at(1) = -0.0;
  out[0].tensor.at(2) = std::numeric_limits<double>::max();
  return out;
}

void expect_bit_equal(const std::vector<NamedTensor>& a, const std::vector<NamedTensor>& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_EQ(a[i].tensor.shape(), b[i].tensor.shape());
    for (std::size_t j = 0; j < a[i].tensor.numel(); ++j) {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(a[i].tensor.at(j)), std::bit_cast<std::uint64_t>(b[i].tensor.at(j)));
    }
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto tensors = sample_tensors(1);
  const auto bytes = encode_checkpoint(tensors);
  expect_bit_equal(tensors, decode_checkpoint(bytes));
  EXPECT_EQ(encode_checkpoint(decode_checkpoint(bytes)), bytes);

  const fs::path file = scratch_dir("ckpt") / "net.saug";
  save_checkpoint(file, tensors);
  expect_bit_equal(tensors, load_checkpoint(file));
}

TEST(Checkpoint, HeaderLayout) {
  const std::vector<NamedTensor> one = {{"ab", Tensor(Shape{2}, std::vector<double>{1.5, -2.0})}};
  const auto bytes = encode_checkpoint(one);
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 4 + 2 + 4 + 8 + 16);
  EXPECT_EQ(std::memcmp(bytes.data(), "SAUG", 4), 0);
  EXPECT_EQ(bytes[4], 1);  // version, little-endian
  EXPECT_EQ(bytes[8], 1);  // count
  EXPECT_EQ(bytes[12], 2);  // name length
  EXPECT_EQ(bytes[16], 'a');
  EXPECT_EQ(bytes[18], 1);  // rank
  EXPECT_EQ(bytes[22], 2);  // dim
  double first;
  std::memcpy(&first, bytes.data() + 30, 8);
  EXPECT_EQ(first, 1.5);
}

TEST(Checkpoint, RejectsCorruptInput) {
  auto bytes = encode_checkpoint(sample_tensors(2));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(decode_checkpoint(bad_version), FormatError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(decode_checkpoint(truncated), FormatError);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(decode_checkpoint(trailing), FormatError);
  EXPECT_THROW(load_checkpoint("/nonexistent/file.saug"), FormatError);
}

RawImage random_raw(std::size_t w, std::size_t h, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RawImage img{w, h, c, std::vector<std::uint8_t>(w * h * c)};
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
  return img;
}

TEST(Pnm, GrayAndColorRoundTrip) {
  for (std::size_t c : {1u, 3u}) {
    const RawImage img = random_raw(7, 5, c, c);
    const auto bytes = encode_pnm(img);
    EXPECT_EQ(bytes[1], c == 1 ? '5' : '6');
    const RawImage back = decode_pnm(bytes);
    EXPECT_EQ(back.width, 7u);
    EXPECT_EQ(back.height, 5u);
    EXPECT_EQ(back.channels, c);
    EXPECT_EQ(back.pixels, img.pixels);
    EXPECT_EQ(encode_pnm(back), bytes);

    const fs::path file = scratch_dir("pnm") / (c == 1 ? "a.pgm" : "a.ppm");
    write_pnm(file, img);
    EXPECT_EQ(read_image(file).pixels, img.pixels);
  }
}

TEST(Pnm, ParsesCommentsInHeader) {
  const std::string text = "P5\n# made by hand\n2 1\n255\n";
  std::vector<std::uint8_t> bytes(text.begin(), text.end());
  bytes.push_back(10);
  bytes.push_back(250);
  const RawImage img = decode_pnm(bytes);
  EXPECT_EQ(img.pixels, (std::vector<std::uint8_t>{10, 250}));
}

TEST(Pnm, RejectsMalformedInput) {
  const std::string p2 = "P2\n1 1\n255\n0";
  EXPECT_THROW(decode_pnm({p2.begin(), p2.end()}), FormatError);
  const std::string wide = "P5\n1 1\n65535\n00";
  EXPECT_THROW(decode_pnm({wide.begin(), wide.end()}), FormatError);
  const std::string shortp = "P5\n4 4\n255\nab";
  EXPECT_THROW(decode_pnm({shortp.begin(), shortp.end()}), FormatError);
}

TEST(Pnm, TensorConversionQuantizesAndRoundTrips) {
  const RawImage img = random_raw(4, 3, 3, 9);
  const Tensor t = from_raw(img);
  EXPECT_EQ(t.shape(), (Shape{3, 3, 4}));
  EXPECT_EQ(to_raw(t).pixels, img.pixels);
  EXPECT_EQ(quantize(0.0), 0);
  EXPECT_EQ(quantize(1.0), 255);
  EXPECT_EQ(quantize(-0.5), 0);
  EXPECT_EQ(quantize(1.7), 255);
  EXPECT_EQ(quantize(0.5), 128);
}

std::vector<std::uint8_t> idx_images(std::uint32_t count, std::uint32_t rows, std::uint32_t cols,
                                     std::vector<std::uint8_t> pixels) {
  std::vector<std::uint8_t> out = {0, 0, 8, 3};
  for (std::uint32_t v : {count, rows, cols}) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
  }
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

std::vector<std::uint8_t> idx_labels(std::vector<std::uint8_t> labels) {
  std::vector<std::uint8_t> out = {0, 0, 8, 1};
  const auto n = static_cast<std::uint32_t>(labels.size());
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(n >> s));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

TEST(Idx, DecodesHeaderArithmeticAndScaling) {
  std::vector<std::uint8_t> px(32, 17);
  px[0] = 255;
  px[1] = 0;
  const Dataset ds = decode_idx(idx_images(2, 4, 4, px), idx_labels({0, 1}));
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.samples[0].image.shape(), (Shape{1, 4, 4}));
  EXPECT_EQ(ds.samples[0].image.at(0), 1.0);
  EXPECT_EQ(ds.samples[0].image.at(1), 0.0);
  EXPECT_EQ(ds.samples[1].label, 1);
  EXPECT_EQ(ds.num_classes(), 2u);
  EXPECT_NO_THROW(ds.validate());
}

TEST(Idx, RoundTripIsBitExact) {
  std::mt19937_64 rng(4);
  std::vector<std::uint8_t> px(5 * 6 * 3);
  for (auto& p : px) p = static_cast<std::uint8_t>(rng() & 0xff);
  const auto img = idx_images(5, 6, 3, px);
  const auto lbl = idx_labels({2, 0, 1, 1, 2});
  const Dataset ds = decode_idx(img, lbl);
  EXPECT_EQ(encode_idx_images(ds), img);
  EXPECT_EQ(encode_idx_labels(ds), lbl);

  const fs::path dir = scratch_dir("idx");
  {
    std::ofstream(dir / "img.idx", std::ios::binary).write(reinterpret_cast<const char*>(img.data()), img.size());
    std::ofstream(dir / "lbl.idx", std::ios::binary).write(reinterpret_cast<const char*>(lbl.data()), lbl.size());
  }
  const Dataset loaded = load_idx(dir / "img.idx", dir / "lbl.idx");
  EXPECT_EQ(encode_idx_images(loaded), img);
}

TEST(Idx, RejectsMismatches) {
  const std::vector<std::uint8_t> px(32, 0);
  EXPECT_THROW(decode_idx(idx_images(2, 4, 4, px), idx_labels({0})), FormatError);
  auto bad = idx_images(2, 4, 4, px);
  bad[3] = 4;
  EXPECT_THROW(decode_idx(bad, idx_labels({0, 1})), FormatError);
  EXPECT_THROW(decode_idx(idx_images(2, 4, 4, std::vector<std::uint8_t>(31, 0)), idx_labels({0, 1})),
               FormatError);
  auto bad_labels = idx_labels({0, 1});
  bad_labels[3] = 3;
  EXPECT_THROW(decode_idx(idx_images(2, 4, 4, px), bad_labels), FormatError);
}

std::vector<MetricsRecord> sample_records() {
  std::vector<MetricsRecord> out;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (std::size_t e = 0; e < 6; ++e) {
    MetricsRecord r;
    r.epoch = e;
    r.train_loss_b = u(rng);
    if (e % 2 == 0) r.train_loss_a = u(rng) / 3.0;
    r.train_loss_total = r.train_loss_a ? 0.3 * *r.train_loss_a + 0.7 * r.train_loss_b : r.train_loss_b;
    r.val_loss_b = u(rng);
    r.val_accuracy = u(rng) / 2.0;
    out.push_back(r);
  }
  return out;
}

TEST(MetricsCsv, RoundTripIsBitExact) {
  const auto records = sample_records();
  const double test_acc = 0.1 + 0.2;
  const std::string csv = metrics_to_csv(records, test_acc);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kMetricsHeader);
  const MetricsTable table = parse_metrics_csv(csv);
  ASSERT_EQ(table.records.size(), records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& a = records[i];
    const auto& b = table.records[i];
    EXPECT_EQ(a.epoch, b.epoch);
    EXPECT_EQ(std::bit_cast<std::uint64_t>(a.train_loss_total), std::bit_cast<std::uint64_t>(b.train_loss_total));
    EXPECT_EQ(a.train_loss_a.has_value(), b.train_loss_a.has_value());
    if (a.train_loss_a) {
      EXPECT_EQ(*a.train_loss_a, *b.train_loss_a);
    }
    EXPECT_EQ(std::bit_cast<std::uint64_t>(a.train_loss_b), std::bit_cast<std::uint64_t>(b.train_loss_b));
    EXPECT_EQ(std::bit_cast<std::uint64_t>(a.val_loss_b), std::bit_cast<std::uint64_t>(b.val_loss_b));
    EXPECT_EQ(std::bit_cast<std::uint64_t>(a.val_accuracy), std::bit_cast<std::uint64_t>(b.val_accuracy));
  }
  ASSERT_TRUE(table.test_accuracy.has_value());
  EXPECT_EQ(*table.test_accuracy, test_acc);
  EXPECT_EQ(metrics_to_csv(table.records, table.test_accuracy), csv);
}

TEST(MetricsCsv, MissingLossAIsAnEmptyField) {
  MetricsRecord r;
  r.epoch = 3;
  r.train_loss_total = r.train_loss_b = 0.5;
  const std::string csv = metrics_to_csv({r}, std::nullopt);
  EXPECT_NE(csv.find("\n3,0.5,,0.5,"), std::string::npos) << csv;
  EXPECT_EQ(csv.find("test_accuracy"), std::string::npos);
}

TEST(MetricsCsv, ErrorsNameTheLine) {
  const std::string header = std::string(kMetricsHeader) + "\n";
  auto expect_line = [](const std::string& text, const std::string& needle) {
    try {
      parse_metrics_csv(text);
      FAIL() << "expected FormatError for: " << text;
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_line("", "line 1");
  expect_line("epoch,foo\n", "line 1");
  expect_line(header + "0,1,,1,1,0.5\n1,abc,,1,1,0.5\n", "line 3");
  expect_line(header + "0,1,,1\n", "line 2");
}

}  // namespace
}  // namespace smartaug
