#include "gait/tensornet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Core>

namespace gait::tensornet::kernels {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

struct ConvDims {
  std::size_t n, cin, h, w, cout, kh, kw, oh, ow;
  std::size_t patch() const { return cin * kh * kw; }
  std::size_t pixels() const { return oh * ow; }
};

template <typename T>
ConvDims conv_dims(const Tensor<T>& input, const Tensor<T>& weights, std::size_t stride, std::size_t pad) {
  require_rank(input, 4, "conv2d input");
  require_rank(weights, 4, "conv2d weights");
  if (stride == 0) throw DimensionError("conv2d: stride must be positive");
  if (input.extent(1) != weights.extent(1)) {
    throw DimensionError("conv2d: input channels (input axis 1) = " + std::to_string(input.extent(1)) +
                         " but weight in-channels (weights axis 1) = " + std::to_string(weights.extent(1)));
  }
  if (input.extent(2) + 2 * pad < weights.extent(2) || input.extent(3) + 2 * pad < weights.extent(3)) {
    throw DimensionError("conv2d: kernel (weights axes 2,3) " + shape_string(weights.shape()) +
                         " larger than padded input (input axes 2,3) " + shape_string(input.shape()));
  }
  ConvDims d{input.extent(0), input.extent(1), input.extent(2), input.extent(3), weights.extent(0),
             weights.extent(2), weights.extent(3), 0, 0};
  d.oh = conv_out_extent(d.h, d.kh, stride, pad);
  d.ow = conv_out_extent(d.w, d.kw, stride, pad);
  return d;
}

template <typename T>
void im2col(const T* image, const ConvDims& d, std::size_t stride, std::size_t pad, T* col) {
  const std::size_t pixels = d.pixels();
  for (std::size_t c = 0; c < d.cin; ++c) {
    for (std::size_t i = 0; i < d.kh; ++i) {
      for (std::size_t j = 0; j < d.kw; ++j) {
        T* row = col + ((c * d.kh + i) * d.kw + j) * pixels;
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
          const long y = static_cast<long>(oy * stride + i) - static_cast<long>(pad);
          T* out = row + oy * d.ow;
          if (y < 0 || y >= static_cast<long>(d.h)) {
            std::fill(out, out + d.ow, T{0});
            continue;
          }
          const T* src = image + (c * d.h + static_cast<std::size_t>(y)) * d.w;
          for (std::size_t ox = 0; ox < d.ow; ++ox) {
            const long x = static_cast<long>(ox * stride + j) - static_cast<long>(pad);
            out[ox] = (x < 0 || x >= static_cast<long>(d.w)) ? T{0} : src[x];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, const ConvDims& d, std::size_t stride, std::size_t pad, T* image) {
  const std::size_t pixels = d.pixels();
  std::fill(image, image + d.cin * d.h * d.w, T{0});
  for (std::size_t c = 0; c < d.cin; ++c) {
    for (std::size_t i = 0; i < d.kh; ++i) {
      for (std::size_t j = 0; j < d.kw; ++j) {
        const T* row = col + ((c * d.kh + i) * d.kw + j) * pixels;
        for (std::size_t oy = 0; oy < d.oh; ++oy) {
          const long y = static_cast<long>(oy * stride + i) - static_cast<long>(pad);
          if (y < 0 || y >= static_cast<long>(d.h)) continue;
          T* dst = image + (c * d.h + static_cast<std::size_t>(y)) * d.w;
          const T* in = row + oy * d.ow;
          for (std::size_t ox = 0; ox < d.ow; ++ox) {
            const long x = static_cast<long>(ox * stride + j) - static_cast<long>(pad);
            if (x >= 0 && x < static_cast<long>(d.w)) dst[x] += in[ox];
          }
        }
      }
    }
  }
}

}  // namespace

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights, std::span<const T> bias,
                         std::size_t stride, std::size_t pad) {
  const ConvDims d = conv_dims(input, weights, stride, pad);
  if (!bias.empty() && bias.size() != d.cout) {
    throw DimensionError("conv2d: bias length " + std::to_string(bias.size()) +
                         " != output channels (weights axis 0) " + std::to_string(d.cout));
  }
  Tensor<T> output({d.n, d.cout, d.oh, d.ow});
  const ConstMatrixMap<T> w(weights.ptr(), d.cout, d.patch());
  const long items = static_cast<long>(d.n);
#pragma omp parallel
  {
    std::vector<T> col(d.patch() * d.pixels());
#pragma omp for schedule(static)
    for (long n = 0; n < items; ++n) {
      im2col(input.item(n).data(), d, stride, pad, col.data());
      MatrixMap<T> y(output.item(n).data(), d.cout, d.pixels());
      y.noalias() = w * ConstMatrixMap<T>(col.data(), d.patch(), d.pixels());
      if (!bias.empty()) {
        for (std::size_t c = 0; c < d.cout; ++c) y.row(c).array() += bias[c];
      }
    }
  }
  return output;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& input, const Tensor<T>& weights,
                               std::size_t stride, std::size_t pad) {
  const ConvDims d = conv_dims(input, weights, stride, pad);
  require_rank(grad_out, 4, "conv2d grad_out");
  if (grad_out.shape() != Shape{d.n, d.cout, d.oh, d.ow}) {
    throw DimensionError("conv2d backward: grad_out shape " + shape_string(grad_out.shape()) +
                         " does not match forward output " + shape_string({d.n, d.cout, d.oh, d.ow}));
  }
  Conv2dGrads<T> g{Tensor<T>(input.shape()), Tensor<T>(weights.shape()), std::vector<T>(d.cout, T{0})};
  const ConstMatrixMap<T> w(weights.ptr(), d.cout, d.patch());
  const long items = static_cast<long>(d.n);

#pragma omp parallel
  {
    std::vector<T> gcol(d.patch() * d.pixels());
#pragma omp for schedule(static)
    for (long n = 0; n < items; ++n) {
      const ConstMatrixMap<T> gy(grad_out.item(n).data(), d.cout, d.pixels());
      MatrixMap<T>(gcol.data(), d.patch(), d.pixels()).noalias() = w.transpose() * gy;
      col2im(gcol.data(), d, stride, pad, g.input.item(n).data());
    }
  }

  // Weight and bias gradients accumulate over items in a fixed order.
  std::vector<T> col(d.patch() * d.pixels());
  MatrixMap<T> gw(g.weights.ptr(), d.cout, d.patch());
  for (std::size_t n = 0; n < d.n; ++n) {
    im2col(input.item(n).data(), d, stride, pad, col.data());
    const ConstMatrixMap<T> gy(grad_out.item(n).data(), d.cout, d.pixels());
    gw.noalias() += gy * ConstMatrixMap<T>(col.data(), d.patch(), d.pixels()).transpose();
    for (std::size_t c = 0; c < d.cout; ++c) g.bias[c] += gy.row(c).sum();
  }
  return g;
}

template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& input, std::span<const T> gamma, std::span<const T> beta,
                            Mode mode, std::span<T> running_mean, std::span<T> running_var,
                            const BatchNormOptions& options, BatchNormCache<T>* cache) {
  require_rank(input, 4, "batchnorm input");
  const std::size_t n = input.extent(0), channels = input.extent(1);
  const std::size_t plane = input.extent(2) * input.extent(3);
  for (auto [len, name] : {std::pair{gamma.size(), "gamma"}, {beta.size(), "beta"},
                           {running_mean.size(), "running mean"}, {running_var.size(), "running var"}}) {
    if (len != channels) {
      throw DimensionError(std::string("batchnorm: ") + name + " length " + std::to_string(len) +
                           " != channels (input axis 1) " + std::to_string(channels));
    }
  }
  if (mode == Mode::eval) {
    return batchnorm_inference<T>(input, gamma, beta, running_mean, running_var, options);
  }
  Tensor<T> output(input.shape());
  if (cache) {
    cache->normalized = Tensor<T>(input.shape());
    cache->inv_std.assign(channels, T{0});
  }
  const double count = static_cast<double>(n * plane);
  const long nch = static_cast<long>(channels);

#pragma omp parallel for schedule(static)
  for (long cl = 0; cl < nch; ++cl) {
    const auto c = static_cast<std::size_t>(cl);
    double sum = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const T* x = input.ptr() + (b * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) sum += x[i];
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const T* x = input.ptr() + (b * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        const double dx = x[i] - mean;
        sq += dx * dx;
      }
    }
    const double var = sq / count;
    const double unbiased = count > 1 ? sq / (count - 1) : var;
    running_mean[c] = static_cast<T>(options.momentum * running_mean[c] + (1 - options.momentum) * mean);
    running_var[c] = static_cast<T>(options.momentum * running_var[c] + (1 - options.momentum) * unbiased);
    const T inv_std = static_cast<T>(1.0 / std::sqrt(var + options.eps));
    const T m = static_cast<T>(mean);
    if (cache) cache->inv_std[c] = inv_std;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * channels + c) * plane;
      const T* x = input.ptr() + off;
      T* y = output.ptr() + off;
      T* xh = cache ? cache->normalized.ptr() + off : nullptr;
      for (std::size_t i = 0; i < plane; ++i) {
        const T normalized = (x[i] - m) * inv_std;
        if (xh) xh[i] = normalized;
        y[i] = gamma[c] * normalized + beta[c];
      }
    }
  }
  return output;
}

template <typename T>
Tensor<T> batchnorm_inference(const Tensor<T>& input, std::span<const T> gamma, std::span<const T> beta,
                              std::span<const T> running_mean, std::span<const T> running_var,
                              const BatchNormOptions& options) {
  require_rank(input, 4, "batchnorm input");
  const std::size_t n = input.extent(0), channels = input.extent(1);
  const std::size_t plane = input.extent(2) * input.extent(3);
  if (gamma.size() != channels || beta.size() != channels || running_mean.size() != channels ||
      running_var.size() != channels) {
    throw DimensionError("batchnorm: parameter lengths != channels (input axis 1) " + std::to_string(channels));
  }
  Tensor<T> output(input.shape());
  for (std::size_t c = 0; c < channels; ++c) {
    const T inv_std =
        static_cast<T>(1.0 / std::sqrt(std::max(0.0, static_cast<double>(running_var[c])) + options.eps));
    const T scale = gamma[c] * inv_std;
    const T shift = beta[c] - running_mean[c] * scale;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) output[off + i] = input[off + i] * scale + shift;
    }
  }
  return output;
}

template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& grad_out, const BatchNormCache<T>& cache,
                                     std::span<const T> gamma) {
  if (grad_out.shape() != cache.normalized.shape()) {
    throw DimensionError("batchnorm backward: grad_out " + shape_string(grad_out.shape()) +
                         " vs cached " + shape_string(cache.normalized.shape()));
  }
  const std::size_t n = grad_out.extent(0), channels = grad_out.extent(1);
  const std::size_t plane = grad_out.extent(2) * grad_out.extent(3);
  BatchNormGrads<T> g{Tensor<T>(grad_out.shape()), std::vector<T>(channels), std::vector<T>(channels)};
  const double count = static_cast<double>(n * plane);
  const long nch = static_cast<long>(channels);

#pragma omp parallel for schedule(static)
  for (long cl = 0; cl < nch; ++cl) {
    const auto c = static_cast<std::size_t>(cl);
    double sum_gy = 0.0, sum_gy_xh = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_gy += grad_out[off + i];
        sum_gy_xh += grad_out[off + i] * cache.normalized[off + i];
      }
    }
    g.beta[c] = static_cast<T>(sum_gy);
    g.gamma[c] = static_cast<T>(sum_gy_xh);
    const double scale = gamma[c] * cache.inv_std[c] / count;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        g.input[off + i] = static_cast<T>(
            scale * (count * grad_out[off + i] - sum_gy - cache.normalized[off + i] * sum_gy_xh));
      }
    }
  }
  return g;
}

template <typename T>
MaxPoolResult<T> maxpool2_forward(const Tensor<T>& input) {
  require_rank(input, 4, "maxpool2 input");
  const std::size_t n = input.extent(0), c = input.extent(1), h = input.extent(2), w = input.extent(3);
  if (h < 2 || w < 2) throw DimensionError("maxpool2: spatial axes 2,3 of " + shape_string(input.shape()) + " below 2");
  const std::size_t oh = h / 2, ow = w / 2;
  MaxPoolResult<T> r{Tensor<T>({n, c, oh, ow}), std::vector<std::uint32_t>(n * c * oh * ow)};
  const long planes = static_cast<long>(n * c);
#pragma omp parallel for schedule(static)
  for (long p = 0; p < planes; ++p) {
    const std::size_t in_off = static_cast<std::size_t>(p) * h * w;
    const std::size_t out_off = static_cast<std::size_t>(p) * oh * ow;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = in_off + 2 * y * w + 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = in_off + (2 * y + dy) * w + 2 * x + dx;
            if (input[idx] > input[best]) best = idx;
          }
        }
        r.output[out_off + y * ow + x] = input[best];
        r.argmax[out_off + y * ow + x] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& grad_out, std::span<const std::uint32_t> argmax,
                            const Shape& input_shape) {
  if (argmax.size() != grad_out.size()) {
    throw DimensionError("maxpool2 backward: grad_out " + shape_string(grad_out.shape()) +
                         " does not match cached argmax");
  }
  Tensor<T> g(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) g[argmax[i]] += grad_out[i];
  return g;
}

template <typename T>
Tensor<T> avgpool_global_forward(const Tensor<T>& input) {
  require_rank(input, 4, "avgpool input");
  const std::size_t n = input.extent(0), c = input.extent(1), plane = input.extent(2) * input.extent(3);
  Tensor<T> out({n, c});
  for (std::size_t p = 0; p < n * c; ++p) {
    double s = 0.0;
    const T* x = input.ptr() + p * plane;
    for (std::size_t i = 0; i < plane; ++i) s += x[i];
    out[p] = static_cast<T>(s / static_cast<double>(plane));
  }
  return out;
}

template <typename T>
Tensor<T> avgpool_global_backward(const Tensor<T>& grad_out, const Shape& input_shape) {
  Tensor<T> g(input_shape);
  const std::size_t plane = input_shape.at(2) * input_shape.at(3);
  if (grad_out.size() * plane != g.size()) {
    throw DimensionError("avgpool backward: grad_out " + shape_string(grad_out.shape()) +
                         " does not match input " + shape_string(input_shape));
  }
  const T inv = static_cast<T>(1.0 / static_cast<double>(plane));
  for (std::size_t p = 0; p < grad_out.size(); ++p) {
    std::fill_n(g.ptr() + p * plane, plane, grad_out[p] * inv);
  }
  return g;
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weights, std::span<const T> bias) {
  require_rank(weights, 2, "dense weights");
  if (input.rank() < 2) throw DimensionError("dense: input " + shape_string(input.shape()) + " has no batch axis");
  const std::size_t n = input.extent(0), in = input.size() / n, out = weights.extent(0);
  if (in != weights.extent(1)) {
    throw DimensionError("dense: flattened input features (input axes 1..) = " + std::to_string(in) +
                         " but weights axis 1 = " + std::to_string(weights.extent(1)));
  }
  if (bias.size() != out) {
    throw DimensionError("dense: bias length " + std::to_string(bias.size()) + " != weights axis 0 " +
                         std::to_string(out));
  }
  Tensor<T> y({n, out});
  MatrixMap<T> ym(y.ptr(), n, out);
  ym.noalias() = ConstMatrixMap<T>(input.ptr(), n, in) * ConstMatrixMap<T>(weights.ptr(), out, in).transpose();
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t o = 0; o < out; ++o) ym(b, o) += bias[o];
  }
  return y;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& grad_out, const Tensor<T>& input, const Tensor<T>& weights) {
  const std::size_t n = input.extent(0), in = input.size() / n, out = weights.extent(0);
  if (grad_out.shape() != Shape{n, out}) {
    throw DimensionError("dense backward: grad_out " + shape_string(grad_out.shape()) + " expected " +
                         shape_string({n, out}));
  }
  DenseGrads<T> g{Tensor<T>(input.shape()), Tensor<T>(weights.shape()), std::vector<T>(out, T{0})};
  const ConstMatrixMap<T> gy(grad_out.ptr(), n, out);
  MatrixMap<T>(g.input.ptr(), n, in).noalias() = gy * ConstMatrixMap<T>(weights.ptr(), out, in);
  MatrixMap<T>(g.weights.ptr(), out, in).noalias() = gy.transpose() * ConstMatrixMap<T>(input.ptr(), n, in);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t o = 0; o < out; ++o) g.bias[o] += gy(b, o);
  }
  return g;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input) {
  Tensor<T> y = input;
  for (auto& v : y.data()) v = (v > T{0} || v != v) ? v : T{0};  // NaN passes through
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& forward_output) {
  if (grad_out.shape() != forward_output.shape()) {
    throw DimensionError("relu backward: grad_out " + shape_string(grad_out.shape()) + " vs cached " +
                         shape_string(forward_output.shape()));
  }
  Tensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(forward_output[i] > T{0})) g[i] = T{0};
  }
  return g;
}

template <typename T>
Tensor<T> dropout_forward(const Tensor<T>& input, double p, Rng& rng, std::vector<T>& mask) {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("dropout probability outside [0,1]");
  mask.assign(input.size(), T{0});
  Tensor<T> y(input.shape());
  if (p >= 1.0) return y;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::bernoulli_distribution keep(1.0 - p);
  for (std::size_t i = 0; i < input.size(); ++i) {
    mask[i] = keep(rng) ? keep_scale : T{0};
    y[i] = input[i] * mask[i];
  }
  return y;
}

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& grad_out, std::span<const T> mask) {
  if (mask.size() != grad_out.size()) throw DimensionError("dropout backward: mask length mismatch");
  Tensor<T> g(grad_out.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad_out[i] * mask[i];
  return g;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  require_rank(logits, 2, "softmax logits");
  const std::size_t n = logits.extent(0), k = logits.extent(1);
  Tensor<T> p(logits.shape());
  for (std::size_t b = 0; b < n; ++b) {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      const T v = logits(b, j);
      if (!std::isfinite(v)) {
        throw NumericError("softmax: non-finite logit at row " + std::to_string(b) + ", class " + std::to_string(j));
      }
      mx = std::max(mx, v);
    }
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(static_cast<double>(logits(b, j) - mx));
    for (std::size_t j = 0; j < k; ++j) {
      p(b, j) = static_cast<T>(std::exp(static_cast<double>(logits(b, j) - mx)) / total);
    }
  }
  return p;
}

template <typename T>
SoftmaxCrossEntropy<T> softmax_crossentropy(const Tensor<T>& logits, std::span<const int> labels) {
  require_rank(logits, 2, "softmax_crossentropy logits");
  const std::size_t n = logits.extent(0), k = logits.extent(1);
  if (labels.size() != n) {
    throw DimensionError("softmax_crossentropy: " + std::to_string(labels.size()) + " labels for batch axis " +
                         std::to_string(n));
  }
  SoftmaxCrossEntropy<T> r;
  r.probabilities = softmax(logits);
  r.grad_logits = r.probabilities;
  double loss = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    const int label = labels[b];
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw InputError("softmax_crossentropy: label " + std::to_string(label) + " outside [0," +
                       std::to_string(k) + ")");
    }
    const auto l = static_cast<std::size_t>(label);
    // log-softmax directly from logits keeps the loss finite for tiny probabilities.
    double mx = logits(b, 0);
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, static_cast<double>(logits(b, j)));
    double lse = 0.0;
    for (std::size_t j = 0; j < k; ++j) lse += std::exp(logits(b, j) - mx);
    loss += std::log(lse) + mx - logits(b, l);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (r.probabilities(b, j) > r.probabilities(b, arg)) arg = j;
    }
    if (arg == l) ++r.correct;
    r.grad_logits(b, l) -= T{1};
  }
  const T inv_n = static_cast<T>(1.0 / static_cast<double>(n));
  for (auto& g : r.grad_logits.data()) g *= inv_n;
  r.loss = loss / static_cast<double>(n);
  return r;
}

#define GAIT_INSTANTIATE_KERNELS(T)                                                                        \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, std::span<const T>, std::size_t,   \
                                    std::size_t);                                                          \
  template Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,            \
                                          std::size_t, std::size_t);                                       \
  template Tensor<T> batchnorm_forward(const Tensor<T>&, std::span<const T>, std::span<const T>, Mode,     \
                                       std::span<T>, std::span<T>, const BatchNormOptions&,                \
                                       BatchNormCache<T>*);                                                \
  template Tensor<T> batchnorm_inference(const Tensor<T>&, std::span<const T>, std::span<const T>,          \
                                         std::span<const T>, std::span<const T>, const BatchNormOptions&); \
  template BatchNormGrads<T> batchnorm_backward(const Tensor<T>&, const BatchNormCache<T>&,                \
                                                std::span<const T>);                                       \
  template MaxPoolResult<T> maxpool2_forward(const Tensor<T>&);                                            \
  template Tensor<T> maxpool2_backward(const Tensor<T>&, std::span<const std::uint32_t>, const Shape&);    \
  template Tensor<T> avgpool_global_forward(const Tensor<T>&);                                             \
  template Tensor<T> avgpool_global_backward(const Tensor<T>&, const Shape&);                              \
  template Tensor<T> dense_forward(const Tensor<T>&, const Tensor<T>&, std::span<const T>);                \
  template DenseGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> relu_forward(const Tensor<T>&);                                                       \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> dropout_forward(const Tensor<T>&, double, Rng&, std::vector<T>&);                      \
  template Tensor<T> dropout_backward(const Tensor<T>&, std::span<const T>);                               \
  template Tensor<T> softmax(const Tensor<T>&);                                                            \
  template SoftmaxCrossEntropy<T> softmax_crossentropy(const Tensor<T>&, std::span<const int>);

GAIT_INSTANTIATE_KERNELS(float)
GAIT_INSTANTIATE_KERNELS(double)

}  // namespace gait::tensornet::kernels
