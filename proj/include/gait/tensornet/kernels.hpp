#pragma once

// Data-parallel layer kernels. Loops over batch items (convolution, pooling)
// or channels (batch normalization) run under OpenMP; per-item GEMMs go
// through Eigen with its own threading disabled, so forward results do not
// depend on the thread count. Serial reference versions of the same kernels
// live in gait/reference/kernels.hpp and are only linked by tests and
// benchmarks.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gait/rng.hpp"
#include "gait/tensornet/tensor.hpp"

namespace gait::tensornet::kernels {

/// Output extent of a strided, padded window: floor((in + 2*pad - k)/stride) + 1.
std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t pad);

/// input (N, Cin, H, W), weights (Cout, Cin, kh, kw), bias empty or Cout long.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights, std::span<const T> bias,
                         std::size_t stride, std::size_t pad);

template <typename T>
struct Conv2dGrads {
  Tensor<T> input;
  Tensor<T> weights;
  std::vector<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& input,
                               const Tensor<T>& weights, std::size_t stride, std::size_t pad);

enum class Mode { train, eval };

/// Cache of a training-mode batch normalization, consumed by the backward pass.
template <typename T>
struct BatchNormCache {
  Tensor<T> normalized;  // x-hat
  std::vector<T> inv_std;
};

struct BatchNormOptions {
  double eps = 1e-5;
  double momentum = 0.9;  // running = momentum * running + (1 - momentum) * batch
};

/// Per-channel normalization of a 4-D tensor. Train mode normalizes with batch
/// statistics, updates the running statistics and fills `cache` when given;
/// eval mode normalizes with the running statistics and leaves them alone.
template <typename T>
Tensor<T> batchnorm_forward(const Tensor<T>& input, std::span<const T> gamma, std::span<const T> beta,
                            Mode mode, std::span<T> running_mean, std::span<T> running_var,
                            const BatchNormOptions& options, BatchNormCache<T>* cache);

/// Eval-mode normalization with fixed statistics; reads everything, writes nothing shared.
template <typename T>
Tensor<T> batchnorm_inference(const Tensor<T>& input, std::span<const T> gamma, std::span<const T> beta,
                              std::span<const T> running_mean, std::span<const T> running_var,
                              const BatchNormOptions& options);

template <typename T>
struct BatchNormGrads {
  Tensor<T> input;
  std::vector<T> gamma;
  std::vector<T> beta;
};

template <typename T>
BatchNormGrads<T> batchnorm_backward(const Tensor<T>& grad_out, const BatchNormCache<T>& cache,
                                     std::span<const T> gamma);

template <typename T>
struct MaxPoolResult {
  Tensor<T> output;
  std::vector<std::uint32_t> argmax;  // flat input index of each output element
};

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
template <typename T>
MaxPoolResult<T> maxpool2_forward(const Tensor<T>& input);

template <typename T>
Tensor<T> maxpool2_backward(const Tensor<T>& grad_out, std::span<const std::uint32_t> argmax,
                            const Shape& input_shape);

/// (N, C, H, W) -> (N, C) spatial mean.
template <typename T>
Tensor<T> avgpool_global_forward(const Tensor<T>& input);

template <typename T>
Tensor<T> avgpool_global_backward(const Tensor<T>& grad_out, const Shape& input_shape);

/// input (N, ...) flattened per item, weights (out, in), bias length out.
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weights, std::span<const T> bias);

template <typename T>
struct DenseGrads {
  Tensor<T> input;  // shaped like the forward input
  Tensor<T> weights;
  std::vector<T> bias;
};

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& grad_out, const Tensor<T>& input, const Tensor<T>& weights);

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& input);

/// Gradient through ReLU given the forward output (or input: the sign is the same).
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& forward_output);

/// Inverted dropout: kept units are scaled by 1/(1-p). `mask` receives the
/// per-element multiplier (0 or 1/(1-p)).
template <typename T>
Tensor<T> dropout_forward(const Tensor<T>& input, double p, Rng& rng, std::vector<T>& mask);

template <typename T>
Tensor<T> dropout_backward(const Tensor<T>& grad_out, std::span<const T> mask);

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

template <typename T>
struct SoftmaxCrossEntropy {
  double loss = 0.0;  // mean over the batch
  Tensor<T> probabilities;
  Tensor<T> grad_logits;
  std::size_t correct = 0;  // argmax hits, for accuracy bookkeeping
};

/// Throws NumericError on non-finite logits and InputError on out-of-range labels.
template <typename T>
SoftmaxCrossEntropy<T> softmax_crossentropy(const Tensor<T>& logits, std::span<const int> labels);

}  // namespace gait::tensornet::kernels
