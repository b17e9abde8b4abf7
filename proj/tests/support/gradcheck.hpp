#pragma once

// Central finite-difference checks against analytic gradients. The scalar
// loss is sum(r * out) for a fixed random r, so d loss / d out = r.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gait/tensornet/param_store.hpp"
#include "gait/tensornet/tensor.hpp"

namespace gait::testing {

using tensornet::ParamStore;
using tensornet::Shape;
using tensornet::Tensor;

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;  // "<tensor>[index]"
  std::size_t checked = 0;
  std::size_t kinks = 0;  // probes skipped because [x-h, x+h] straddles a ReLU/max kink
};

inline double rel_error(double a, double n) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-5});
}

inline Tensor<double> random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.data()) v = d(rng);
  return t;
}

inline double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

/// Zero-initialized biases and BN affine terms put ReLU inputs exactly on the
/// kink when a whole input row is zero; move them off it.
inline void randomize_offsets(ParamStore<double>& ps, std::uint64_t seed) {
  for (auto& [name, e] : ps.entries()) {
    if (name.ends_with("gamma") || name.ends_with("beta") || name.ends_with("bias")) {
      e.value = random_tensor(e.value.shape(), seed ^ std::hash<std::string>{}(name), 0.5);
    }
  }
}

/// `fwd(x, ps)` must be a deterministic function (reseed any dropout rng
/// inside); `bwd(r, ps)` returns d/dx and accumulates into ps grads.
/// At most `per_tensor` coordinates of each tensor are probed.
template <class Fwd, class Bwd>
GradCheck gradcheck(Tensor<double> x, ParamStore<double>& ps, Fwd fwd, Bwd bwd, double h,
                    std::size_t per_tensor = 40, std::uint64_t seed = 7) {
  const Tensor<double> out = fwd(x, ps);
  const Tensor<double> r = random_tensor(out.shape(), seed ^ 0x5eed);
  const double base = dot(out, r);
  ps.zero_grad();
  const Tensor<double> gx = bwd(r, ps);

  GradCheck result;
  std::mt19937_64 pick(seed);
  auto probe = [&](std::vector<double>& values, const Tensor<double>& analytic, const std::string& name) {
    std::vector<std::size_t> idx(values.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::shuffle(idx.begin(), idx.end(), pick);
    idx.resize(std::min(idx.size(), per_tensor));
    for (std::size_t i : idx) {
      const double keep = values[i];
      values[i] = keep + h;
      const double up = dot(fwd(x, ps), r);
      values[i] = keep - h;
      const double down = dot(fwd(x, ps), r);
      values[i] = keep;
      // One-sided slopes disagree far beyond curvature effects only at a kink.
      if (rel_error((up - base) / h, (base - down) / h) > 1e-2) {
        ++result.kinks;
        continue;
      }
      const double numeric = (up - down) / (2.0 * h);
      const double e = rel_error(analytic[i], numeric);
      ++result.checked;
      if (e > result.max_rel_error || result.worst.empty()) {
        result.max_rel_error = e;
        result.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  };
  probe(x.storage(), gx, "input");
  for (auto& [name, e] : ps.entries()) {
    if (!e.trainable) continue;
    const Tensor<double> analytic = e.grad;
    probe(e.value.storage(), analytic, name);
  }
  return result;
}

}  // namespace gait::testing
