#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "smartaug/tensor.hpp"

namespace smartaug {

/// 8-bit raster, channel-interleaved as stored on disk.
struct RawImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;  // 1 or 3
  std::vector<std::uint8_t> pixels;
};

// Binary PGM (P5) for one channel, binary PPM (P6) for three.
std::vector<std::uint8_t> encode_pnm(const RawImage& image);
RawImage decode_pnm(const std::vector<std::uint8_t>& bytes);

RawImage read_image(const std::filesystem::path& path);  // .pgm, .ppm, .png
void write_pnm(const std::filesystem::path& path, const RawImage& image);

/// [c,H,W] values in [0,1] -> interleaved 8-bit, round(x*255) clipped.
RawImage to_raw(const Tensor& chw);
/// Interleaved 8-bit -> [c,H,W] with values byte/255.
Tensor from_raw(const RawImage& image);

std::uint8_t quantize(double value);

}  // namespace smartaug
