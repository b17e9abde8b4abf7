#include "gait/reference/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace gait::reference {

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights, std::span<const T> bias,
                         std::size_t stride, std::size_t pad) {
  const std::size_t n = input.extent(0), cin = input.extent(1), h = input.extent(2), w = input.extent(3);
  const std::size_t cout = weights.extent(0), kh = weights.extent(2), kw = weights.extent(3);
  if (weights.extent(1) != cin) throw DimensionError("reference conv2d: channel mismatch");
  const std::size_t oh = (h + 2 * pad - kh) / stride + 1, ow = (w + 2 * pad - kw) / stride + 1;
  Tensor<T> out({n, cout, oh, ow});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          double acc = bias.empty() ? 0.0 : static_cast<double>(bias[o]);
          for (std::size_t c = 0; c < cin; ++c)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long iy = static_cast<long>(y * stride + i) - static_cast<long>(pad);
                const long ix = static_cast<long>(x * stride + j) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                acc += static_cast<double>(input(b, c, iy, ix)) * weights(o, c, i, j);
              }
          out(b, o, y, x) = static_cast<T>(acc);
        }
  return out;
}

template <typename T>
tensornet::kernels::Conv2dGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& input,
                                                   const Tensor<T>& weights, std::size_t stride,
                                                   std::size_t pad) {
  const std::size_t n = input.extent(0), cin = input.extent(1), h = input.extent(2), w = input.extent(3);
  const std::size_t cout = weights.extent(0), kh = weights.extent(2), kw = weights.extent(3);
  const std::size_t oh = grad_out.extent(2), ow = grad_out.extent(3);
  tensornet::kernels::Conv2dGrads<T> g{Tensor<T>(input.shape()), Tensor<T>(weights.shape()),
                                       std::vector<T>(cout, T{0})};
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
          const T gy = grad_out(b, o, y, x);
          g.bias[o] += gy;
          for (std::size_t c = 0; c < cin; ++c)
            for (std::size_t i = 0; i < kh; ++i)
              for (std::size_t j = 0; j < kw; ++j) {
                const long iy = static_cast<long>(y * stride + i) - static_cast<long>(pad);
                const long ix = static_cast<long>(x * stride + j) - static_cast<long>(pad);
                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                g.input(b, c, iy, ix) += gy * weights(o, c, i, j);
                g.weights(o, c, i, j) += gy * input(b, c, iy, ix);
              }
        }
  return g;
}

template <typename T>
Tensor<T> batchnorm_train(const Tensor<T>& input, std::span<const T> gamma, std::span<const T> beta,
                          double eps) {
  const std::size_t n = input.extent(0), cs = input.extent(1), h = input.extent(2), w = input.extent(3);
  Tensor<T> out(input.shape());
  for (std::size_t c = 0; c < cs; ++c) {
    double sum = 0.0;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) sum += input(b, c, y, x);
    const double count = static_cast<double>(n * h * w);
    const double mean = sum / count;
    double var = 0.0;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) var += (input(b, c, y, x) - mean) * (input(b, c, y, x) - mean);
    var /= count;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          out(b, c, y, x) = static_cast<T>(gamma[c] * (input(b, c, y, x) - mean) / std::sqrt(var + eps) + beta[c]);
  }
  return out;
}

template <typename T>
Tensor<T> maxpool2(const Tensor<T>& input) {
  const std::size_t n = input.extent(0), cs = input.extent(1), oh = input.extent(2) / 2, ow = input.extent(3) / 2;
  Tensor<T> out({n, cs, oh, ow});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t c = 0; c < cs; ++c)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x)
          out(b, c, y, x) = std::max({input(b, c, 2 * y, 2 * x), input(b, c, 2 * y, 2 * x + 1),
                                      input(b, c, 2 * y + 1, 2 * x), input(b, c, 2 * y + 1, 2 * x + 1)});
  return out;
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weights, std::span<const T> bias) {
  const std::size_t n = input.extent(0), in = input.size() / n, out = weights.extent(0);
  Tensor<T> y({n, out});
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < out; ++o) {
      double acc = bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += static_cast<double>(input[b * in + i]) * weights(o, i);
      y(b, o) = static_cast<T>(acc);
    }
  return y;
}

#define GAIT_INSTANTIATE_REFERENCE(T)                                                                       \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, std::span<const T>, std::size_t,    \
                                    std::size_t);                                                           \
  template tensornet::kernels::Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&,           \
                                                              const Tensor<T>&, std::size_t, std::size_t);  \
  template Tensor<T> batchnorm_train(const Tensor<T>&, std::span<const T>, std::span<const T>, double);     \
  template Tensor<T> maxpool2(const Tensor<T>&);                                                            \
  template Tensor<T> dense_forward(const Tensor<T>&, const Tensor<T>&, std::span<const T>);

GAIT_INSTANTIATE_REFERENCE(float)
GAIT_INSTANTIATE_REFERENCE(double)

}  // namespace gait::reference
