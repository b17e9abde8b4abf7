#include "gait/reference/optflow.hpp"

#include <algorithm>
#include <cmath>

namespace gait::reference {

optflow::PolyExpansion poly_expand(const std::vector<double>& image, std::size_t width, std::size_t height,
                                   std::size_t n, double sigma) {
  const auto ginv = optflow::poly_gram_inverse(n, sigma);
  const long r = static_cast<long>(n), W = static_cast<long>(width), H = static_cast<long>(height);
  const std::size_t plane = width * height;
  optflow::PolyExpansion out{width, height, std::vector<double>(6 * plane)};
  for (long y = 0; y < H; ++y)
    for (long x = 0; x < W; ++x) {
      double m[6] = {0, 0, 0, 0, 0, 0};
      for (long dy = -r; dy <= r; ++dy)
        for (long dx = -r; dx <= r; ++dx) {
          const double a = std::exp(-double(dx * dx) / (2 * sigma * sigma)) *
                           std::exp(-double(dy * dy) / (2 * sigma * sigma));
          const double f = image[std::clamp(y + dy, 0L, H - 1) * W + std::clamp(x + dx, 0L, W - 1)];
          const double b[6] = {1.0, double(dx), double(dy), double(dx * dx), double(dy * dy), double(dx * dy)};
          for (int k = 0; k < 6; ++k) m[k] += a * b[k] * f;
        }
      for (int k = 0; k < 6; ++k) {
        double s = 0;
        for (int j = 0; j < 6; ++j) s += ginv[k * 6 + j] * m[j];
        out.coeff[k * plane + y * W + x] = s;
      }
    }
  return out;
}

}  // namespace gait::reference
