#pragma once

// Serial, loop-for-loop reference kernels. They follow the textbook
// definitions with no im2col, GEMM or OpenMP, and exist so tests and the
// benchmark can compare the parallel kernels against them.

#include <span>

#include "gait/tensornet/kernels.hpp"

namespace gait::reference {

using tensornet::Shape;
using tensornet::Tensor;

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weights, std::span<const T> bias,
                         std::size_t stride, std::size_t pad);

template <typename T>
tensornet::kernels::Conv2dGrads<T> conv2d_backward(const Tensor<T>& grad_out, const Tensor<T>& input,
                                                   const Tensor<T>& weights, std::size_t stride,
                                                   std::size_t pad);

/// Train-mode batch normalization from direct mean/variance sums; no running statistics.
template <typename T>
Tensor<T> batchnorm_train(const Tensor<T>& input, std::span<const T> gamma, std::span<const T> beta,
                          double eps);

template <typename T>
Tensor<T> maxpool2(const Tensor<T>& input);

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& input, const Tensor<T>& weights, std::span<const T> bias);

}  // namespace gait::reference
