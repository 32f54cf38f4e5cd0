#include "smartaug/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

#include "smartaug/error.hpp"

namespace smartaug {

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Reads one whitespace-delimited header integer, skipping '#' comments.
std::size_t header_int(const std::vector<std::uint8_t>& b, std::size_t& pos) {
  for (;;) {
    while (pos < b.size() && std::isspace(b[pos])) ++pos;
    if (pos < b.size() && b[pos] == '#') {
      while (pos < b.size() && b[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  if (pos >= b.size() || !std::isdigit(b[pos])) throw FormatError("PNM header: expected integer");
  std::size_t v = 0;
  while (pos < b.size() && std::isdigit(b[pos])) {
    v = v * 10 + static_cast<std::size_t>(b[pos] - '0');
    ++pos;
  }
  return v;
}

RawImage read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw FormatError("cannot read PNG " + path.string() + ": " + img.message);
  }
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  RawImage out;
  out.width = img.width;
  out.height = img.height;
  out.channels = color ? 3 : 1;
  out.pixels.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.pixels.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw FormatError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return out;
}

}  // namespace

std::uint8_t quantize(double value) {
  const double scaled = std::round(value * 255.0);
  return static_cast<std::uint8_t>(std::clamp(scaled, 0.0, 255.0));
}

std::vector<std::uint8_t> encode_pnm(const RawImage& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw FormatError("PNM output supports 1 or 3 channels, got " + std::to_string(image.channels));
  }
  if (image.pixels.size() != image.width * image.height * image.channels) {
    throw FormatError("pixel buffer does not match image dimensions");
  }
  const std::string header = std::string(image.channels == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(image.width) + " " + std::to_string(image.height) +
                             "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels.begin(), image.pixels.end());
  return out;
}

RawImage decode_pnm(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw FormatError("not a binary PGM/PPM (expected P5 or P6 magic)");
  }
  RawImage img;
  img.channels = bytes[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  img.width = header_int(bytes, pos);
  img.height = header_int(bytes, pos);
  const std::size_t maxval = header_int(bytes, pos);
  if (maxval == 0 || maxval > 255) {
    throw FormatError("only 8-bit PNM is supported, maxval " + std::to_string(maxval));
  }
  if (img.width == 0 || img.height == 0) throw FormatError("PNM with zero dimension");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw FormatError("PNM header not terminated by whitespace");
  }
  ++pos;
  const std::size_t n = img.width * img.height * img.channels;
  if (bytes.size() - pos < n) {
    throw FormatError("PNM truncated: need " + std::to_string(n) + " pixel bytes, have " +
                      std::to_string(bytes.size() - pos));
  }
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                    bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  if (maxval != 255) {
    for (auto& p : img.pixels) {
      p = static_cast<std::uint8_t>(std::lround(255.0 * std::min<std::size_t>(p, maxval) /
                                                static_cast<double>(maxval)));
    }
  }
  return img;
}

RawImage read_image(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return read_png(path);
  if (ext == ".pgm" || ext == ".ppm") {
    try {
      return decode_pnm(read_file(path));
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }
  throw FormatError("unsupported image extension: " + path.string());
}

void write_pnm(const std::filesystem::path& path, const RawImage& image) {
  const auto bytes = encode_pnm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

RawImage to_raw(const Tensor& chw) {
  if (chw.rank() != 3) throw ShapeError("to_raw needs a [c,H,W] tensor, got " + shape_to_string(chw.shape()));
  RawImage img;
  img.channels = chw.dim(0);
  img.height = chw.dim(1);
  img.width = chw.dim(2);
  img.pixels.resize(chw.numel());
  const auto v = chw.data();
  const std::size_t plane = img.height * img.width;
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t p = 0; p < plane; ++p) {
      img.pixels[p * img.channels + c] = quantize(v[c * plane + p]);
    }
  }
  return img;
}

Tensor from_raw(const RawImage& image) {
  const std::size_t plane = image.height * image.width;
  std::vector<double> values(plane * image.channels);
  for (std::size_t c = 0; c < image.channels; ++c) {
    for (std::size_t p = 0; p < plane; ++p) {
      values[c * plane + p] = image.pixels[p * image.channels + c] / 255.0;
    }
  }
  return Tensor(Shape{image.channels, image.height, image.width}, std::move(values));
}

}  // namespace smartaug
