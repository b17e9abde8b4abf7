#pragma once

// Textbook loop implementations used as test oracles.

#include <cmath>
#include <cstddef>
#include <vector>

#include "gait/tensornet/tensor.hpp"

namespace gait::testing {

inline tensornet::Tensor<double> naive_conv(const tensornet::Tensor<double>& x, const tensornet::Tensor<double>& w,
                                            const std::vector<double>& bias, std::size_t stride, std::size_t pad) {
  const std::size_t n = x.extent(0), ci = x.extent(1), H = x.extent(2), W = x.extent(3);
  const std::size_t co = w.extent(0), kh = w.extent(2), kw = w.extent(3);
  const std::size_t oh = (H + 2 * pad - kh) / stride + 1, ow = (W + 2 * pad - kw) / stride + 1;
  tensornet::Tensor<double> y({n, co, oh, ow});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < co; ++o)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double s = bias.empty() ? 0.0 : bias[o];
          for (std::size_t c = 0; c < ci; ++c)
            for (std::size_t u = 0; u < kh; ++u)
              for (std::size_t v = 0; v < kw; ++v) {
                const long r = static_cast<long>(i * stride + u) - static_cast<long>(pad);
                const long q = static_cast<long>(j * stride + v) - static_cast<long>(pad);
                if (r < 0 || q < 0 || r >= static_cast<long>(H) || q >= static_cast<long>(W)) continue;
                s += x(b, c, r, q) * w(o, c, u, v);
              }
          y(b, o, i, j) = s;
        }
  return y;
}

}  // namespace gait::testing
