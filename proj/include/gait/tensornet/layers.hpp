#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gait/rng.hpp"
#include "gait/tensornet/kernels.hpp"
#include "gait/tensornet/param_store.hpp"
#include "gait/tensornet/tensor.hpp"

namespace gait::tensornet {

using kernels::BatchNormOptions;
using kernels::Mode;

enum class LayerKind { conv2d, batchnorm, relu, maxpool, avgpool, dense, dropout, softmax, residual_block };

std::string_view to_string(LayerKind kind);

/// Architecture description of one layer. Convolutions use square kernels
/// with pad = kernel / 2, so 3x3 convs keep spatial size and only strides and
/// pooling shrink it. A residual block is a pre-activation block
/// [BN, ReLU, conv(stride), BN, ReLU, conv] with an identity shortcut, or a
/// 1x1 projection of the activated input when channels or stride change.
struct LayerSpec {
  LayerKind kind{};
  std::string id;
  std::size_t in = 0;       // input channels (conv, bn, block) or features (dense)
  std::size_t filters = 0;  // output channels or units
  std::size_t kernel = 0;
  std::size_t stride = 1;
  bool bias = false;
  double dropout_p = 0.0;
  double l2_coeff = 0.0;        // dense weights only
  bool feature_output = false;  // descriptors are read after this layer

  bool operator==(const LayerSpec&) const = default;
};

template <typename T>
class Layer {
 public:
  explicit Layer(LayerSpec spec) : spec_(std::move(spec)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const LayerSpec& spec() const noexcept { return spec_; }

  virtual void init_params(ParamStore<T>&, Rng&) const {}
  virtual Shape output_shape(const Shape& input) const = 0;

  /// Eval-mode forward pass. Touches no layer state, so one network may serve
  /// concurrent callers.
  virtual Tensor<T> infer(const Tensor<T>& x, const ParamStore<T>& params) const = 0;

  /// Train-mode forward pass; caches what backward needs.
  virtual Tensor<T> forward_train(const Tensor<T>& x, ParamStore<T>& params, Rng& rng) = 0;

  /// Returns the input gradient and accumulates parameter gradients into `params`.
  virtual Tensor<T> backward(const Tensor<T>& grad_out, ParamStore<T>& params) = 0;

 protected:
  LayerSpec spec_;
};

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const BatchNormOptions& bn = {});

/// Sequential stack of layers. A trailing softmax layer is not run by
/// `forward`/`logits`; the loss applies it.
template <typename T>
class Network {
 public:
  explicit Network(std::vector<LayerSpec> specs, BatchNormOptions bn = {});
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const std::vector<LayerSpec>& specs() const noexcept { return specs_; }

  /// Adds freshly initialized entries for every layer (He-normal weights,
  /// zero biases, BN gamma 1 / beta 0 / running var 1).
  void init_params(ParamStore<T>& params, std::uint64_t seed) const;
  ParamStore<T> make_params(std::uint64_t seed) const;

  Shape output_shape(const Shape& input) const;
  /// Output shape after every layer, for architecture inspection.
  std::vector<std::pair<std::string, Shape>> trace_shapes(const Shape& input) const;

  Tensor<T> logits(const Tensor<T>& x, const ParamStore<T>& params) const;
  Tensor<T> probabilities(const Tensor<T>& x, const ParamStore<T>& params) const;
  /// Eval-mode activations of the layer flagged `feature_output`, flattened to (N, width).
  Tensor<T> features(const Tensor<T>& x, const ParamStore<T>& params) const;
  std::size_t feature_width(const Shape& input) const;

  Tensor<T> forward(const Tensor<T>& x, ParamStore<T>& params, Mode mode, Rng& rng);
  Tensor<T> backward(const Tensor<T>& grad_logits, ParamStore<T>& params);

 private:
  std::size_t logit_layer_count() const;
  std::size_t feature_layer_index() const;

  std::vector<LayerSpec> specs_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace gait::tensornet
