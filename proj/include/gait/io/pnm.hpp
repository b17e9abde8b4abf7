#pragma once

// Binary Netpbm images: P5 (8-bit gray), P6 (8-bit RGB), P4 (bitmap).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

namespace gait::io {

struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;  // 1 or 3, interleaved
  std::vector<std::uint8_t> data;
  bool operator==(const Image8&) const = default;
};

/// Bitmap with one byte per pixel, 1 = foreground (black in PBM).
struct Bitmap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bits;
  bool operator==(const Bitmap&) const = default;
};

void write_pgm(const std::filesystem::path& path, const Image8& img);
void write_ppm(const std::filesystem::path& path, const Image8& img);
void write_pbm(const std::filesystem::path& path, const Bitmap& bm);

/// Reads P5 or P6 (maxval 255 only). Throws InputError on anything else.
Image8 read_pnm(const std::filesystem::path& path);
Bitmap read_pbm(const std::filesystem::path& path);

}  // namespace gait::io
