#include "gait/tensornet/layers.hpp"

#include <cmath>
#include <random>

namespace gait::tensornet {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool: return "maxpool";
    case LayerKind::avgpool: return "avgpool";
    case LayerKind::dense: return "dense";
    case LayerKind::dropout: return "dropout";
    case LayerKind::softmax: return "softmax";
    case LayerKind::residual_block: return "residual-block";
  }
  return "?";
}

namespace {

template <typename T>
Tensor<T> he_normal(Shape shape, std::size_t fan_in, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
void accumulate(Tensor<T>& into, const Tensor<T>& g) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += g[i];
}

template <typename T>
void accumulate(Tensor<T>& into, const std::vector<T>& g) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += g[i];
}

template <typename T>
class ConvLayer final : public Layer<T> {
 public:
  explicit ConvLayer(LayerSpec s) : Layer<T>(std::move(s)) {
    if (this->spec_.kernel != 3 && this->spec_.kernel != 1) {
      throw ConfigError("conv layer '" + this->spec_.id + "': only 3x3 and 1x1 kernels are supported");
    }
  }
  std::size_t pad() const { return this->spec_.kernel / 2; }
  std::string weight_name() const { return this->spec_.id + ".weight"; }
  std::string bias_name() const { return this->spec_.id + ".bias"; }

  void init_params(ParamStore<T>& ps, Rng& rng) const override {
    const auto& s = this->spec_;
    ps.add(weight_name(), he_normal<T>({s.filters, s.in, s.kernel, s.kernel}, s.in * s.kernel * s.kernel, rng));
    if (s.bias) ps.add(bias_name(), Tensor<T>({s.filters}));
  }

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 4 || in[1] != this->spec_.in) {
      throw DimensionError("conv layer '" + this->spec_.id + "': input " + shape_string(in) + " needs axis 1 = " +
                           std::to_string(this->spec_.in));
    }
    const auto& s = this->spec_;
    return {in[0], s.filters, kernels::conv_out_extent(in[2], s.kernel, s.stride, pad()),
            kernels::conv_out_extent(in[3], s.kernel, s.stride, pad())};
  }

  Tensor<T> infer(const Tensor<T>& x, const ParamStore<T>& ps) const override {
    std::span<const T> bias;
    if (this->spec_.bias) bias = ps.value(bias_name()).data();
    return kernels::conv2d_forward(x, ps.value(weight_name()), bias, this->spec_.stride, pad());
  }

  Tensor<T> forward_train(const Tensor<T>& x, ParamStore<T>& ps, Rng&) override {
    input_ = x;
    return infer(x, ps);
  }

  Tensor<T> backward(const Tensor<T>& g, ParamStore<T>& ps) override {
    auto& w = ps.at(weight_name());
    auto grads = kernels::conv2d_backward(g, input_, w.value, this->spec_.stride, pad());
    accumulate(w.grad, grads.weights);
    if (this->spec_.bias) accumulate(ps.at(bias_name()).grad, grads.bias);
    return std::move(grads.input);
  }

 private:
  Tensor<T> input_;
};

template <typename T>
class BatchNormLayer final : public Layer<T> {
 public:
  BatchNormLayer(LayerSpec s, BatchNormOptions opt) : Layer<T>(std::move(s)), opt_(opt) {}
  std::string name(const char* what) const { return this->spec_.id + "." + what; }

  void init_params(ParamStore<T>& ps, Rng&) const override {
    const std::size_t c = this->spec_.in;
    ps.add(name("gamma"), Tensor<T>({c}, T{1}));
    ps.add(name("beta"), Tensor<T>({c}));
    ps.add(name("running_mean"), Tensor<T>({c}), false);
    ps.add(name("running_var"), Tensor<T>({c}, T{1}), false);
  }

  Shape output_shape(const Shape& in) const override {
    if (in.size() != 4 || in[1] != this->spec_.in) {
      throw DimensionError("batchnorm '" + this->spec_.id + "': input " + shape_string(in) + " needs axis 1 = " +
                           std::to_string(this->spec_.in));
    }
    return in;
  }

  Tensor<T> infer(const Tensor<T>& x, const ParamStore<T>& ps) const override {
    return kernels::batchnorm_inference<T>(x, ps.value(name("gamma")).data(), ps.value(name("beta")).data(),
                                           ps.value(name("running_mean")).data(),
                                           ps.value(name("running_var")).data(), opt_);
  }

  Tensor<T> forward_train(const Tensor<T>& x, ParamStore<T>& ps, Rng&) override {
    return kernels::batchnorm_forward<T>(x, ps.value(name("gamma")).data(), ps.value(name("beta")).data(),
                                         Mode::train, ps.value(name("running_mean")).data(),
                                         ps.value(name("running_var")).data(), opt_, &cache_);
  }

  Tensor<T> backward(const Tensor<T>& g, ParamStore<T>& ps) override {
    auto& gamma = ps.at(name("gamma"));
    auto grads = kernels::batchnorm_backward<T>(g, cache_, gamma.value.data());
    accumulate(gamma.grad, grads.gamma);
    accumulate(ps.at(name("beta")).grad, grads.beta);
    return std::move(grads.input);
  }

 private:
  BatchNormOptions opt_;
  kernels::BatchNormCache<T> cache_;
};

template <typename T>
class ReluLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> infer(const Tensor<T>& x, const ParamStore<T>&) const override { return kernels::relu_forward(x); }
  Tensor<T> forward_train(const Tensor<T>& x, ParamStore<T>&, Rng&) override {
    output_ = kernels::relu_forward(x);
    return output_;
  }
  Tensor<T> backward(const Tensor<T>& g, ParamStore<T>&) override { return kernels::relu_backward(g, output_); }

 private:
  Tensor<T> output_;
};

template <typename T>
class MaxPoolLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Shape output_shape(const Shape& in) const override {
    if (in.size() != 4 || in[2] < 2 || in[3] < 2) {
      throw DimensionError("maxpool '" + this->spec_.id + "': input " + shape_string(in) + " too small");
    }
    return {in[0], in[1], in[2] / 2, in[3] / 2};
  }
  Tensor<T> infer(const Tensor<T>& x, const ParamStore<T>&) const override {
    return kernels::maxpool2_forward(x).output;
  }
  Tensor<T> forward_train(const Tensor<T>& x, ParamStore<T>&, Rng&) override {
    auto r = kernels::maxpool2_forward(x);
    argmax_ = std::move(r.argmax);
    input_shape_ = x.shape();
    return std::move(r.output);
  }
  Tensor<T> backward(const Tensor<T>& g, ParamStore<T>&) override {
    return kernels::maxpool2_backward(g, argmax_, input_shape_);
  }

 private:
  std::vector<std::uint32_t> argmax_;
  Shape input_shape_;
};

template <typename T>
class AvgPoolLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Shape output_shape(const Shape& in) const override {
    if (in.size() != 4) throw DimensionError("avgpool '" + this->spec_.id + "': input must be 4-D");
    return {in[0], in[1]};
  }
  Tensor<T> infer(const Tensor<T>& x, const ParamStore<T>&) const override {
    return kernels::avgpool_global_forward(x);
  }
  Tensor<T> forward_train(const Tensor<T>& x, ParamStore<T>&, Rng&) override {
    input_shape_ = x.shape();
    return kernels::avgpool_global_forward(x);
  }
  Tensor<T> backward(const Tensor<T>& g, ParamStore<T>&) override {
    return kernels::avgpool_global_backward(g, input_shape_);
  }

 private:
  Shape input_shape_;
};

template <typename T>
class DenseLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  std::string weight_name() const { return this->spec_.id + ".weight"; }
  std::string bias_name() const { return this->spec_.id + ".bias"; }

  void init_params(ParamStore<T>& ps, Rng& rng) const override {
    const auto& s = this->spec_;
    ps.add(weight_name(), he_normal<T>({s.filters, s.in}, s.in, rng), true, s.l2_coeff > 0.0);
    ps.add(bias_name(), Tensor<T>({s.filters}));
  }

  Shape output_shape(const Shape& in) const override {
    const std::size_t features = shape_volume(in) / in.at(0);
    if (features != this->spec_.in) {
      throw DimensionError("dense '" + this->spec_.id + "': input " + shape_string(in) + " flattens to " +
                           std::to_string(features) + " features, expected " + std::to_string(this->spec_.in));
    }
    return {in[0], this->spec_.filters};
  }

  Tensor<T> infer(const Tensor<T>& x, const ParamStore<T>& ps) const override {
    return kernels::dense_forward<T>(x, ps.value(weight_name()), ps.value(bias_name()).data());
  }
  Tensor<T> forward_train(const Tensor<T>& x, ParamStore<T>& ps, Rng&) override {
    input_ = x;
    return infer(x, ps);
  }
  Tensor<T> backward(const Tensor<T>& g, ParamStore<T>& ps) override {
    auto& w = ps.at(weight_name());
    auto grads = kernels::dense_backward(g, input_, w.value);
    accumulate(w.grad, grads.weights);
    accumulate(ps.at(bias_name()).grad, grads.bias);
    return std::move(grads.input);
  }

 private:
  Tensor<T> input_;
};

template <typename T>
class DropoutLayer final : public Layer<T> {
 public:
  explicit DropoutLayer(LayerSpec s) : Layer<T>(std::move(s)) {
    if (!(this->spec_.dropout_p >= 0.0 && this->spec_.dropout_p <= 1.0)) {
      throw ConfigError("dropout '" + this->spec_.id + "': probability outside [0,1]");
    }
  }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> infer(const Tensor<T>& x, const ParamStore<T>&) const override { return x; }
  Tensor<T> forward_train(const Tensor<T>& x, ParamStore<T>&, Rng& rng) override {
    return kernels::dropout_forward(x, this->spec_.dropout_p, rng, mask_);
  }
  Tensor<T> backward(const Tensor<T>& g, ParamStore<T>&) override {
    return kernels::dropout_backward<T>(g, mask_);
  }

 private:
  std::vector<T> mask_;
};

template <typename T>
class SoftmaxLayer final : public Layer<T> {
 public:
  using Layer<T>::Layer;
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor<T> infer(const Tensor<T>& x, const ParamStore<T>&) const override { return kernels::softmax(x); }
  Tensor<T> forward_train(const Tensor<T>& x, ParamStore<T>&, Rng&) override { return kernels::softmax(x); }
  Tensor<T> backward(const Tensor<T>&, ParamStore<T>&) override {
    throw ConfigError("softmax layer has no standalone backward; use softmax_crossentropy");
  }
};

template <typename T>
class ResidualBlockLayer final : public Layer<T> {
 public:
  ResidualBlockLayer(LayerSpec s, BatchNormOptions bn)
      : Layer<T>(std::move(s)),
        bn1_(sub(LayerKind::batchnorm, "bn1", this->spec_.in, this->spec_.in, 0, 1), bn),
        relu1_(sub(LayerKind::relu, "relu1", 0, 0, 0, 1)),
        conv1_(sub(LayerKind::conv2d, "conv1", this->spec_.in, this->spec_.filters, 3, this->spec_.stride)),
        bn2_(sub(LayerKind::batchnorm, "bn2", this->spec_.filters, this->spec_.filters, 0, 1), bn),
        relu2_(sub(LayerKind::relu, "relu2", 0, 0, 0, 1)),
        conv2_(sub(LayerKind::conv2d, "conv2", this->spec_.filters, this->spec_.filters, 3, 1)) {
    if (has_projection()) {
      proj_ = std::make_unique<ConvLayer<T>>(
          sub(LayerKind::conv2d, "proj", this->spec_.in, this->spec_.filters, 1, this->spec_.stride));
    }
  }

  bool has_projection() const { return this->spec_.in != this->spec_.filters || this->spec_.stride != 1; }

  void init_params(ParamStore<T>& ps, Rng& rng) const override {
    bn1_.init_params(ps, rng);
    conv1_.init_params(ps, rng);
    bn2_.init_params(ps, rng);
    conv2_.init_params(ps, rng);
    if (proj_) proj_->init_params(ps, rng);
  }

  Shape output_shape(const Shape& in) const override { return conv2_.output_shape(conv1_.output_shape(in)); }

  Tensor<T> infer(const Tensor<T>& x, const ParamStore<T>& ps) const override {
    Tensor<T> a1 = relu1_.infer(bn1_.infer(x, ps), ps);
    Tensor<T> out = conv2_.infer(relu2_.infer(bn2_.infer(conv1_.infer(a1, ps), ps), ps), ps);
    add_into(out, proj_ ? proj_->infer(a1, ps) : x);
    return out;
  }

  Tensor<T> forward_train(const Tensor<T>& x, ParamStore<T>& ps, Rng& rng) override {
    Tensor<T> a1 = relu1_.forward_train(bn1_.forward_train(x, ps, rng), ps, rng);
    Tensor<T> h = conv1_.forward_train(a1, ps, rng);
    Tensor<T> out = conv2_.forward_train(relu2_.forward_train(bn2_.forward_train(h, ps, rng), ps, rng), ps, rng);
    add_into(out, proj_ ? proj_->forward_train(a1, ps, rng) : x);
    return out;
  }

  Tensor<T> backward(const Tensor<T>& g, ParamStore<T>& ps) override {
    Tensor<T> g_h = bn2_.backward(relu2_.backward(conv2_.backward(g, ps), ps), ps);
    Tensor<T> g_a1 = conv1_.backward(g_h, ps);
    if (proj_) add_into(g_a1, proj_->backward(g, ps));
    Tensor<T> g_x = bn1_.backward(relu1_.backward(g_a1, ps), ps);
    if (!proj_) add_into(g_x, g);
    return g_x;
  }

 private:
  LayerSpec sub(LayerKind kind, const char* name, std::size_t in, std::size_t filters, std::size_t kernel,
                std::size_t stride) const {
    LayerSpec s;
    s.kind = kind;
    s.id = this->spec_.id + "." + name;
    s.in = in;
    s.filters = filters;
    s.kernel = kernel;
    s.stride = stride;
    return s;
  }

  static void add_into(Tensor<T>& into, const Tensor<T>& other) {
    if (into.shape() != other.shape()) {
      throw DimensionError("residual add: " + shape_string(into.shape()) + " vs " + shape_string(other.shape()));
    }
    for (std::size_t i = 0; i < into.size(); ++i) into[i] += other[i];
  }

  BatchNormLayer<T> bn1_;
  ReluLayer<T> relu1_;
  ConvLayer<T> conv1_;
  BatchNormLayer<T> bn2_;
  ReluLayer<T> relu2_;
  ConvLayer<T> conv2_;
  std::unique_ptr<ConvLayer<T>> proj_;
};

}  // namespace

template <typename T>
std::unique_ptr<Layer<T>> make_layer(const LayerSpec& spec, const BatchNormOptions& bn) {
  switch (spec.kind) {
    case LayerKind::conv2d: return std::make_unique<ConvLayer<T>>(spec);
    case LayerKind::batchnorm: return std::make_unique<BatchNormLayer<T>>(spec, bn);
    case LayerKind::relu: return std::make_unique<ReluLayer<T>>(spec);
    case LayerKind::maxpool: return std::make_unique<MaxPoolLayer<T>>(spec);
    case LayerKind::avgpool: return std::make_unique<AvgPoolLayer<T>>(spec);
    case LayerKind::dense: return std::make_unique<DenseLayer<T>>(spec);
    case LayerKind::dropout: return std::make_unique<DropoutLayer<T>>(spec);
    case LayerKind::softmax: return std::make_unique<SoftmaxLayer<T>>(spec);
    case LayerKind::residual_block: return std::make_unique<ResidualBlockLayer<T>>(spec, bn);
  }
  throw ConfigError("unknown layer kind");
}

template <typename T>
Network<T>::Network(std::vector<LayerSpec> specs, BatchNormOptions bn) : specs_(std::move(specs)) {
  layers_.reserve(specs_.size());
  for (const auto& s : specs_) layers_.push_back(make_layer<T>(s, bn));
}

template <typename T>
void Network<T>::init_params(ParamStore<T>& params, std::uint64_t seed) const {
  Rng rng = make_rng(seed, "init");
  for (const auto& layer : layers_) layer->init_params(params, rng);
}

template <typename T>
ParamStore<T> Network<T>::make_params(std::uint64_t seed) const {
  ParamStore<T> ps(seed);
  init_params(ps, seed);
  return ps;
}

template <typename T>
Shape Network<T>::output_shape(const Shape& input) const {
  Shape s = input;
  for (const auto& layer : layers_) s = layer->output_shape(s);
  return s;
}

template <typename T>
std::vector<std::pair<std::string, Shape>> Network<T>::trace_shapes(const Shape& input) const {
  std::vector<std::pair<std::string, Shape>> out;
  Shape s = input;
  for (const auto& layer : layers_) {
    s = layer->output_shape(s);
    out.emplace_back(layer->spec().id, s);
  }
  return out;
}

template <typename T>
std::size_t Network<T>::logit_layer_count() const {
  std::size_t n = layers_.size();
  while (n > 0 && specs_[n - 1].kind == LayerKind::softmax) --n;
  return n;
}

template <typename T>
std::size_t Network<T>::feature_layer_index() const {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (specs_[i].feature_output) return i;
  }
  throw ConfigError("network has no feature_output layer");
}

template <typename T>
Tensor<T> Network<T>::logits(const Tensor<T>& x, const ParamStore<T>& params) const {
  Tensor<T> h = x;
  for (std::size_t i = 0; i < logit_layer_count(); ++i) h = layers_[i]->infer(h, params);
  return h;
}

template <typename T>
Tensor<T> Network<T>::probabilities(const Tensor<T>& x, const ParamStore<T>& params) const {
  return kernels::softmax(logits(x, params));
}

template <typename T>
Tensor<T> Network<T>::features(const Tensor<T>& x, const ParamStore<T>& params) const {
  const std::size_t last = feature_layer_index();
  Tensor<T> h = x;
  for (std::size_t i = 0; i <= last; ++i) h = layers_[i]->infer(h, params);
  const std::size_t n = h.extent(0);
  return std::move(h).reshaped({n, h.size() / n});
}

template <typename T>
std::size_t Network<T>::feature_width(const Shape& input) const {
  Shape s = input;
  for (std::size_t i = 0; i <= feature_layer_index(); ++i) s = layers_[i]->output_shape(s);
  return shape_volume(s) / s[0];
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& x, ParamStore<T>& params, Mode mode, Rng& rng) {
  if (mode == Mode::eval) return logits(x, params);
  Tensor<T> h = x;
  for (std::size_t i = 0; i < logit_layer_count(); ++i) h = layers_[i]->forward_train(h, params, rng);
  return h;
}

template <typename T>
Tensor<T> Network<T>::backward(const Tensor<T>& grad_logits, ParamStore<T>& params) {
  Tensor<T> g = grad_logits;
  for (std::size_t i = logit_layer_count(); i-- > 0;) g = layers_[i]->backward(g, params);
  return g;
}

template std::unique_ptr<Layer<float>> make_layer(const LayerSpec&, const BatchNormOptions&);
template std::unique_ptr<Layer<double>> make_layer(const LayerSpec&, const BatchNormOptions&);
template class Network<float>;
template class Network<double>;

}  // namespace gait::tensornet
