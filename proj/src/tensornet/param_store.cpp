#include "gait/tensornet/param_store.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <type_traits>

namespace gait::tensornet {

namespace {

constexpr std::array<char, 8> kMagic{'G', 'A', 'I', 'T', 'P', 'R', 'M', '\0'};

template <typename U>
void put_le(std::ostream& os, U value) {
  using Bits = std::conditional_t<sizeof(U) == 8, std::uint64_t,
                                  std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint8_t>>;
  auto bits = std::bit_cast<Bits>(value);
  char bytes[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  os.write(bytes, sizeof(U));
}

template <typename U>
U get_le(std::istream& is) {
  using Bits = std::conditional_t<sizeof(U) == 8, std::uint64_t,
                                  std::conditional_t<sizeof(U) == 4, std::uint32_t, std::uint8_t>>;
  unsigned char bytes[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(U))) throw InputError("param store: truncated file");
  Bits bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<Bits>(bytes[i]) << (8 * i);
  return std::bit_cast<U>(bits);
}

template <typename T>
constexpr std::uint8_t dtype_code() {
  return std::is_same_v<T, float> ? 0 : 1;
}

}  // namespace

template <typename T>
ParamEntry<T>& ParamStore<T>::add(const std::string& name, Tensor<T> value, bool trainable, bool decay) {
  if (entries_.count(name)) throw InputError("param store: duplicate entry '" + name + "'");
  ParamEntry<T> e;
  e.grad = trainable ? Tensor<T>(value.shape()) : Tensor<T>();
  e.value = std::move(value);
  e.trainable = trainable;
  e.decay = decay;
  return entries_.emplace(name, std::move(e)).first->second;
}

template <typename T>
ParamEntry<T>& ParamStore<T>::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw InputError("param store: no entry '" + name + "'");
  return it->second;
}

template <typename T>
const ParamEntry<T>& ParamStore<T>::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw InputError("param store: no entry '" + name + "'");
  return it->second;
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& [_, e] : entries_) {
    if (e.trainable) e.grad.fill(T{0});
  }
}

template <typename T>
std::size_t ParamStore<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [_, e] : entries_) {
    if (e.trainable) n += e.value.size();
  }
  return n;
}

template <typename T>
void ParamStore<T>::assign_values(const ParamStore& other) {
  if (other.entries_.size() != entries_.size()) {
    throw InputError("param store: entry count " + std::to_string(other.entries_.size()) + " != expected " +
                     std::to_string(entries_.size()));
  }
  for (auto& [name, e] : entries_) {
    const auto& src = other.at(name);
    if (src.value.shape() != e.value.shape()) {
      throw DimensionError("param store: '" + name + "' has shape " + shape_string(src.value.shape()) +
                           ", expected " + shape_string(e.value.shape()));
    }
    e.value = src.value;
  }
  seed_ = other.seed_;
}

template <typename T>
void ParamStore<T>::write(std::ostream& os) const {
  os.write(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(os, kFormatVersion);
  put_le<std::uint64_t>(os, seed_);
  put_le<std::uint32_t>(os, static_cast<std::uint32_t>(entries_.size()));
  for (const auto& [name, e] : entries_) {
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint8_t>(os, dtype_code<T>());
    put_le<std::uint32_t>(os, static_cast<std::uint32_t>(e.value.rank()));
    for (std::size_t ext : e.value.shape()) put_le<std::uint64_t>(os, ext);
    for (T v : e.value.data()) put_le<T>(os, v);
  }
  if (!os) throw InputError("param store: write failed");
}

template <typename T>
ParamStore<T> ParamStore<T>::read(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw InputError("param store: bad magic");
  const auto version = get_le<std::uint32_t>(is);
  if (version != kFormatVersion) throw InputError("param store: unsupported version " + std::to_string(version));
  ParamStore out(get_le<std::uint64_t>(is));
  const auto count = get_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = get_le<std::uint32_t>(is);
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) throw InputError("param store: truncated name");
    const auto dtype = get_le<std::uint8_t>(is);
    const auto rank = get_le<std::uint32_t>(is);
    Shape shape(rank);
    for (auto& ext : shape) ext = static_cast<std::size_t>(get_le<std::uint64_t>(is));
    std::vector<T> data(shape_volume(shape));
    for (auto& v : data) {
      if (dtype == 0) {
        v = static_cast<T>(get_le<float>(is));
      } else if (dtype == 1) {
        v = static_cast<T>(get_le<double>(is));
      } else {
        throw InputError("param store: unknown dtype " + std::to_string(dtype));
      }
    }
    out.add(name, Tensor<T>(std::move(shape), std::move(data)));
  }
  return out;
}

template <typename T>
void ParamStore<T>::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("param store: cannot open " + path.string());
  write(os);
}

template <typename T>
ParamStore<T> ParamStore<T>::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("param store: cannot open " + path.string());
  return read(is);
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace gait::tensornet
