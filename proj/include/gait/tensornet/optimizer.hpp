#pragma once

#include <map>
#include <string>

#include "gait/tensornet/param_store.hpp"

namespace gait::tensornet {

/// Adds coeff * sum(w^2) over entries flagged `decay` to the loss, and
/// 2 * coeff * w to their gradients. Returns the penalty value.
template <typename T>
double apply_l2_penalty(ParamStore<T>& params, double coeff);

/// Nesterov momentum in the form that stores the look-ahead point:
///   v <- mu * v - lr * g
///   p <- p + mu * v - lr * g
/// which is the classical "evaluate the gradient at p + mu * v" update after
/// the change of variables p' = p + mu * v.
template <typename T>
class NesterovMomentum {
 public:
  explicit NesterovMomentum(double momentum) : momentum_(momentum) {}

  /// Updates every trainable entry from its gradient. A velocity whose shape
  /// no longer matches its parameter (after widening) restarts from zero.
  void step(ParamStore<T>& params, double learning_rate);
  void reset() { velocity_.clear(); }
  double momentum() const noexcept { return momentum_; }

 private:
  double momentum_;
  std::map<std::string, Tensor<T>> velocity_;
};

extern template class NesterovMomentum<float>;
extern template class NesterovMomentum<double>;

}  // namespace gait::tensornet
