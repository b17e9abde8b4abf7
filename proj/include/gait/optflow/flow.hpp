#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace gait::optflow {

/// Grayscale image with intensities in [0, 1], row-major.
struct Frame {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> pixels;

  Frame() = default;
  Frame(std::size_t w, std::size_t h, float fill = 0.0f) : width(w), height(h), pixels(w * h, fill) {}
  Frame(std::size_t w, std::size_t h, std::vector<float> data);

  float& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  float at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  bool operator==(const Frame&) const = default;
};

inline constexpr std::size_t kMinFrameSide = 16;

/// Throws InputError unless both sides are at least kMinFrameSide and the data length matches.
void validate_frame(const Frame& f, const char* what);

struct FlowConfig {
  std::size_t levels = 3;  // pyramid levels including the full-resolution one
  double pyramid_scale = 0.5;
  std::size_t window = 15;  // box averaging window for the displacement system
  std::size_t iterations = 3;
  std::size_t poly_n = 5;  // polynomial neighbourhood radius
  double poly_sigma = 1.1;

  void validate() const;
  bool operator==(const FlowConfig&) const = default;
};

/// Dense displacement field: prev(x, y) ~ next(x + u, y + v).
struct FlowMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<float> u, v;
  std::vector<std::uint8_t> encoded;  // empty or 3 planes (u, v, magnitude) of width*height bytes

  bool has_encoding() const { return encoded.size() == 3 * width * height; }
  std::uint8_t channel(std::size_t c, std::size_t x, std::size_t y) const {
    return encoded[(c * height + y) * width + x];
  }
  bool operator==(const FlowMap&) const = default;
};

/// Per-pixel quadratic fit f ~ c + bx x + by y + axx x^2 + ayy y^2 + axy x y
/// under a Gaussian applicability window. Planes are stored in that order.
struct PolyExpansion {
  static constexpr std::size_t kCoefficients = 6;
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> coeff;  // kCoefficients planes of width*height

  double get(std::size_t k, std::size_t x, std::size_t y) const { return coeff[(k * height + y) * width + x]; }
};

/// Separable, row-parallel polynomial expansion. Borders replicate.
PolyExpansion poly_expand(const std::vector<double>& image, std::size_t width, std::size_t height, std::size_t n,
                          double sigma);

/// Inverse of the 6x6 applicability Gram matrix for basis (1, x, y, x^2, y^2, xy).
std::array<double, 36> poly_gram_inverse(std::size_t n, double sigma);

FlowMap farneback_flow(const Frame& prev, const Frame& next, const FlowConfig& cfg = {});

/// Byte encoding of one displacement, see encode_flow.
std::array<std::uint8_t, 3> encode_vector(double u, double v, double clip);

/// Sets `encoded`: channel 0 = round(255 (clamp(u) + clip) / (2 clip)), channel 1
/// likewise for v, channel 2 = round(255 min(|d|, clip sqrt2) / (clip sqrt2)).
FlowMap encode_flow(FlowMap flow, double clip = 16.0);

}  // namespace gait::optflow
