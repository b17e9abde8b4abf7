#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "gait/error.hpp"
#include "gait/optflow/flow.hpp"

namespace gait::optflow {

namespace {

std::vector<double> gaussian_taps(std::size_t n, double sigma) {
  std::vector<double> g(2 * n + 1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double t = static_cast<double>(i) - static_cast<double>(n);
    g[i] = std::exp(-t * t / (2 * sigma * sigma));
  }
  return g;
}

}  // namespace

std::array<double, 36> poly_gram_inverse(std::size_t n, double sigma) {
  if (n == 0 || !(sigma > 0)) throw ConfigError("poly expansion: need n >= 1 and sigma > 0");
  const auto g = gaussian_taps(n, sigma);
  Eigen::Matrix<double, 6, 6> G = Eigen::Matrix<double, 6, 6>::Zero();
  const long r = static_cast<long>(n);
  for (long y = -r; y <= r; ++y)
    for (long x = -r; x <= r; ++x) {
      const double a = g[x + r] * g[y + r];
      const double b[6] = {1.0, double(x), double(y), double(x * x), double(y * y), double(x * y)};
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) G(i, j) += a * b[i] * b[j];
    }
  const Eigen::Matrix<double, 6, 6> inv = G.inverse();
  std::array<double, 36> out{};
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) out[i * 6 + j] = inv(i, j);
  return out;
}

PolyExpansion poly_expand(const std::vector<double>& image, std::size_t width, std::size_t height, std::size_t n,
                          double sigma) {
  if (image.size() != width * height || width == 0 || height == 0) {
    throw InputError("poly expansion: image size mismatch");
  }
  const auto ginv = poly_gram_inverse(n, sigma);
  const auto g = gaussian_taps(n, sigma);
  const long r = static_cast<long>(n), W = static_cast<long>(width), H = static_cast<long>(height);
  const std::size_t plane = width * height;

  // vertical pass: v_q(x, y) = sum_t g(t) t^q f(x, y + t), q = 0..2
  std::vector<double> vert(3 * plane);
#pragma omp parallel for schedule(static)
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      double s0 = 0, s1 = 0, s2 = 0;
      for (long t = -r; t <= r; ++t) {
        const long yy = std::clamp(y + t, 0L, H - 1);
        const double f = g[t + r] * image[yy * W + x];
        s0 += f;
        s1 += f * t;
        s2 += f * t * t;
      }
      vert[y * W + x] = s0;
      vert[plane + y * W + x] = s1;
      vert[2 * plane + y * W + x] = s2;
    }
  }

  PolyExpansion out{width, height, std::vector<double>(PolyExpansion::kCoefficients * plane)};
#pragma omp parallel for schedule(static)
  for (long y = 0; y < H; ++y) {
    for (long x = 0; x < W; ++x) {
      // moments in basis order (1, x, y, x^2, y^2, xy)
      double m[6] = {0, 0, 0, 0, 0, 0};
      for (long t = -r; t <= r; ++t) {
        const long xx = std::clamp(x + t, 0L, W - 1);
        const double w = g[t + r];
        const double v0 = vert[y * W + xx], v1 = vert[plane + y * W + xx], v2 = vert[2 * plane + y * W + xx];
        m[0] += w * v0;
        m[1] += w * t * v0;
        m[2] += w * v1;
        m[3] += w * t * t * v0;
        m[4] += w * v2;
        m[5] += w * t * v1;
      }
      for (int k = 0; k < 6; ++k) {
        double s = 0;
        for (int j = 0; j < 6; ++j) s += ginv[k * 6 + j] * m[j];
        out.coeff[k * plane + y * W + x] = s;
      }
    }
  }
  return out;
}

}  // namespace gait::optflow
