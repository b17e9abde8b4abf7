#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "gait/tensornet/tensor.hpp"

namespace gait::tensornet {

template <typename T>
struct ParamEntry {
  Tensor<T> value;
  Tensor<T> grad;         // same shape as value; empty for non-trainable entries
  bool trainable = true;  // false for batch-norm running statistics
  bool decay = false;     // receives the L2 penalty (dense weights)
};

/// Named parameter tensors of one network plus the seed they were initialized
/// from. Names are `<layer-id>.<tensor>`, e.g. `b3.1.conv1.weight`.
///
/// Binary format (little-endian):
///   "GAITPRM\0" | u32 version | u64 seed | u32 count |
///   count x { u32 name_len | name | u8 dtype (0=f32, 1=f64) | u32 rank | rank x u64 | raw data }
template <typename T>
class ParamStore {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  explicit ParamStore(std::uint64_t seed = 0) : seed_(seed) {}

  ParamEntry<T>& add(const std::string& name, Tensor<T> value, bool trainable = true, bool decay = false);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  ParamEntry<T>& at(const std::string& name);
  const ParamEntry<T>& at(const std::string& name) const;
  Tensor<T>& value(const std::string& name) { return at(name).value; }
  const Tensor<T>& value(const std::string& name) const { return at(name).value; }

  std::map<std::string, ParamEntry<T>>& entries() noexcept { return entries_; }
  const std::map<std::string, ParamEntry<T>>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  std::uint64_t seed() const noexcept { return seed_; }

  void zero_grad();
  std::size_t parameter_count() const;  // scalar count over trainable entries

  /// Replace every value with the same-named value of `other`; names and shapes must match exactly.
  void assign_values(const ParamStore& other);

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out(seed_);
    for (const auto& [name, e] : entries_) out.add(name, e.value.template cast<U>(), e.trainable, e.decay);
    return out;
  }

  void write(std::ostream& os) const;
  static ParamStore read(std::istream& is);
  void save(const std::filesystem::path& path) const;
  static ParamStore load(const std::filesystem::path& path);

 private:
  std::uint64_t seed_;
  std::map<std::string, ParamEntry<T>> entries_;
};

extern template class ParamStore<float>;
extern template class ParamStore<double>;

}  // namespace gait::tensornet
