#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gait/tensornet/layers.hpp"

namespace gait::nets {

using tensornet::LayerSpec;
using tensornet::Network;
using tensornet::ParamStore;
using tensornet::Shape;
using tensornet::Tensor;

enum class Architecture { vgg, wrn };

std::string_view to_string(Architecture a);
Architecture parse_architecture(std::string_view name);  // "vgg" | "wrn"; ConfigError otherwise

inline constexpr std::size_t kPatchSize = 48;
inline constexpr std::size_t kPatchChannels = 3;

struct NetworkSpec {
  Architecture arch = Architecture::wrn;
  std::size_t classes = 2;
  std::size_t input_size = kPatchSize;  // square input side; only miniature test nets change it
  // VGG-like
  std::size_t dense_width = 1024;
  std::size_t dense_width_max = 4096;
  std::size_t vgg_base = 64;  // filters of the first block; doubled per block up to 8x
  double dropout = 0.5;
  // Wide ResNet
  std::size_t base_width = 16;  // stem filters; group g has base * widen * 2^g filters
  std::size_t widen_factor = 4;
  std::size_t blocks_per_group = 3;
  // dense weight penalty, both architectures
  double l2 = 5e-4;

  bool operator==(const NetworkSpec&) const = default;
};

/// 1 block per group, 8 base filters, no widening: the miniature WRN used for
/// gradient checks and desk-scale experiments.
NetworkSpec tiny_wrn(std::size_t classes);

std::vector<LayerSpec> build_vgg(const NetworkSpec& spec);
std::vector<LayerSpec> build_wrn(const NetworkSpec& spec);
std::vector<LayerSpec> build_layers(const NetworkSpec& spec);

/// Length of the descriptor read from the last hidden layer.
std::size_t feature_width(const NetworkSpec& spec);

template <typename T>
struct Model {
  NetworkSpec spec;
  Network<T> net;
  ParamStore<T> params;
};

template <typename T>
Model<T> build_model(const NetworkSpec& spec, std::uint64_t seed);

/// Doubles both hidden dense layers of a VGG model. Old weights keep their
/// leading block; new rows and columns are freshly initialized, new biases
/// start at zero. Throws UnsupportedArchitectureError for WRN and ConfigError
/// when the width would exceed `dense_width_max`.
template <typename T>
void widen_dense(Model<T>& model);

/// Checkpoint = `<stem>.bin` (ParamStore) + `<stem>.json` (architecture manifest).
void save_model(const Model<float>& model, const std::filesystem::path& bin, const std::filesystem::path& manifest);
Model<float> load_model(const std::filesystem::path& bin, const std::filesystem::path& manifest);

std::string spec_to_json(const NetworkSpec& spec, std::uint64_t seed);
NetworkSpec spec_from_json(const std::string& text, std::uint64_t* seed = nullptr);

extern template struct Model<float>;
extern template struct Model<double>;

}  // namespace gait::nets
