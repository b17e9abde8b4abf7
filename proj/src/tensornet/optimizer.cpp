#include "gait/tensornet/optimizer.hpp"

namespace gait::tensornet {

template <typename T>
double apply_l2_penalty(ParamStore<T>& params, double coeff) {
  if (coeff == 0.0) return 0.0;
  double penalty = 0.0;
  for (auto& [_, e] : params.entries()) {
    if (!e.decay || !e.trainable) continue;
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const double w = e.value[i];
      penalty += w * w;
      e.grad[i] += static_cast<T>(2.0 * coeff * w);
    }
  }
  return coeff * penalty;
}

template <typename T>
void NesterovMomentum<T>::step(ParamStore<T>& params, double learning_rate) {
  const T mu = static_cast<T>(momentum_);
  const T lr = static_cast<T>(learning_rate);
  for (auto& [name, e] : params.entries()) {
    if (!e.trainable) continue;
    auto it = velocity_.find(name);
    if (it == velocity_.end() || it->second.shape() != e.value.shape()) {
      it = velocity_.insert_or_assign(name, Tensor<T>(e.value.shape())).first;
    }
    Tensor<T>& v = it->second;
    for (std::size_t i = 0; i < e.value.size(); ++i) {
      const T g = e.grad[i];
      v[i] = mu * v[i] - lr * g;
      e.value[i] += mu * v[i] - lr * g;
    }
  }
}

template double apply_l2_penalty(ParamStore<float>&, double);
template double apply_l2_penalty(ParamStore<double>&, double);
template class NesterovMomentum<float>;
template class NesterovMomentum<double>;

}  // namespace gait::tensornet
