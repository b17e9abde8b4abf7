#include "gait/tensornet/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace gait::tensornet {

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ')';
  return os.str();
}

std::size_t shape_volume(const Shape& shape) {
  std::size_t v = 1;
  for (std::size_t e : shape) v *= e;
  return shape.empty() ? 0 : v;
}

namespace {
void check_extents(const Shape& shape) {
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == 0) {
      throw DimensionError("tensor extent on axis " + std::to_string(i) + " is zero in shape " +
                           shape_string(shape));
    }
  }
}
}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_volume(shape_), fill);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (data_.size() != shape_volume(shape_)) {
    throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_string(shape_));
  }
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const& {
  return Tensor(std::move(shape), data_);
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) && {
  return Tensor(std::move(shape), std::move(data_));
}

template <typename T>
void Tensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
std::span<T> Tensor<T>::item(std::size_t n) noexcept {
  const std::size_t stride = data_.size() / shape_[0];
  return std::span<T>(data_).subspan(n * stride, stride);
}

template <typename T>
std::span<const T> Tensor<T>::item(std::size_t n) const noexcept {
  const std::size_t stride = data_.size() / shape_[0];
  return std::span<const T>(data_).subspan(n * stride, stride);
}

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) +
                         " tensor, got shape " + shape_string(t.shape()));
  }
}

template class Tensor<float>;
template class Tensor<double>;
template void require_rank(const Tensor<float>&, std::size_t, const char*);
template void require_rank(const Tensor<double>&, std::size_t, const char*);

}  // namespace gait::tensornet
