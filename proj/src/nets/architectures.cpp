#include "gait/nets/architectures.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace gait::nets {

using tensornet::LayerKind;

std::string_view to_string(Architecture a) { return a == Architecture::vgg ? "vgg" : "wrn"; }

Architecture parse_architecture(std::string_view name) {
  if (name == "vgg") return Architecture::vgg;
  if (name == "wrn") return Architecture::wrn;
  throw ConfigError("unknown architecture '" + std::string(name) + "' (expected vgg or wrn)");
}

NetworkSpec tiny_wrn(std::size_t classes) {
  NetworkSpec s;
  s.arch = Architecture::wrn;
  s.classes = classes;
  s.base_width = 8;
  s.widen_factor = 1;
  s.blocks_per_group = 1;
  return s;
}

namespace {

LayerSpec make(LayerKind kind, std::string id, std::size_t in = 0, std::size_t filters = 0) {
  LayerSpec s;
  s.kind = kind;
  s.id = std::move(id);
  s.in = in;
  s.filters = filters;
  return s;
}

LayerSpec conv3(std::string id, std::size_t in, std::size_t out, bool bias) {
  auto s = make(LayerKind::conv2d, std::move(id), in, out);
  s.kernel = 3;
  s.bias = bias;
  return s;
}

void check_classes(const NetworkSpec& spec) {
  if (spec.classes < 2) throw ConfigError("network needs at least 2 classes, got " + std::to_string(spec.classes));
}

}  // namespace

std::vector<LayerSpec> build_vgg(const NetworkSpec& spec) {
  if (spec.arch != Architecture::vgg) throw ConfigError("build_vgg: spec is not vgg");
  check_classes(spec);
  if (spec.vgg_base == 0 || spec.dense_width == 0) throw ConfigError("vgg: zero width");
  std::vector<LayerSpec> L;
  const std::size_t convs[4] = {2, 2, 3, 3};
  std::size_t in = kPatchChannels, side = spec.input_size;
  if (side < 16) throw ConfigError("vgg: input side must be at least 16");
  for (std::size_t b = 0; b < 4; ++b) {
    const std::size_t out = spec.vgg_base << b;
    const std::string block = "b" + std::to_string(b + 1);
    for (std::size_t c = 0; c < convs[b]; ++c) {
      L.push_back(conv3(block + ".conv" + std::to_string(c + 1), in, out, true));
      L.push_back(make(LayerKind::relu, block + ".relu" + std::to_string(c + 1)));
      in = out;
    }
    L.push_back(make(LayerKind::maxpool, block + ".pool"));
    side /= 2;
  }
  std::size_t features = in * side * side;
  for (const char* name : {"f5", "f6"}) {
    auto dense = make(LayerKind::dense, std::string(name) + ".dense", features, spec.dense_width);
    dense.l2_coeff = spec.l2;
    L.push_back(dense);
    auto relu = make(LayerKind::relu, std::string(name) + ".relu");
    relu.feature_output = std::string(name) == "f6";
    L.push_back(relu);
    auto drop = make(LayerKind::dropout, std::string(name) + ".dropout");
    drop.dropout_p = spec.dropout;
    L.push_back(drop);
    features = spec.dense_width;
  }
  auto out = make(LayerKind::dense, "out.dense", features, spec.classes);
  out.l2_coeff = spec.l2;
  L.push_back(out);
  L.push_back(make(LayerKind::softmax, "out.softmax"));
  return L;
}

std::vector<LayerSpec> build_wrn(const NetworkSpec& spec) {
  if (spec.arch != Architecture::wrn) throw ConfigError("build_wrn: spec is not wrn");
  check_classes(spec);
  if (spec.base_width == 0 || spec.widen_factor == 0 || spec.blocks_per_group == 0) {
    throw ConfigError("wrn: zero width or depth");
  }
  std::vector<LayerSpec> L;
  L.push_back(conv3("stem.conv", kPatchChannels, spec.base_width, false));
  L.push_back(make(LayerKind::batchnorm, "stem.bn", spec.base_width, spec.base_width));
  L.push_back(make(LayerKind::relu, "stem.relu"));
  std::size_t in = spec.base_width;
  for (std::size_t g = 0; g < 3; ++g) {
    const std::size_t out = (spec.base_width * spec.widen_factor) << g;
    for (std::size_t b = 0; b < spec.blocks_per_group; ++b) {
      auto block = make(LayerKind::residual_block, "b" + std::to_string(g + 2) + "." + std::to_string(b), in, out);
      block.kernel = 3;
      block.stride = (g > 0 && b == 0) ? 2 : 1;
      L.push_back(block);
      in = out;
    }
  }
  L.push_back(make(LayerKind::batchnorm, "final.bn", in, in));
  L.push_back(make(LayerKind::relu, "final.relu"));
  auto pool = make(LayerKind::avgpool, "final.pool");
  pool.feature_output = true;
  L.push_back(pool);
  auto out = make(LayerKind::dense, "out.dense", in, spec.classes);
  out.l2_coeff = spec.l2;
  L.push_back(out);
  L.push_back(make(LayerKind::softmax, "out.softmax"));
  return L;
}

std::vector<LayerSpec> build_layers(const NetworkSpec& spec) {
  return spec.arch == Architecture::vgg ? build_vgg(spec) : build_wrn(spec);
}

std::size_t feature_width(const NetworkSpec& spec) {
  if (spec.arch == Architecture::vgg) return spec.dense_width;
  return spec.base_width * spec.widen_factor * 4;
}

template <typename T>
Model<T> build_model(const NetworkSpec& spec, std::uint64_t seed) {
  Network<T> net(build_layers(spec));
  auto params = net.make_params(seed);
  return Model<T>{spec, std::move(net), std::move(params)};
}

namespace {

// Copies `from` into the leading hyper-rectangle of `into` (same rank).
template <typename T>
void copy_leading(Tensor<T>& into, const Tensor<T>& from) {
  const Shape& a = into.shape();
  const Shape& b = from.shape();
  if (a.size() != b.size()) throw DimensionError("widen: rank changed");
  if (a.size() == 1) {
    std::copy(from.data().begin(), from.data().end(), into.data().begin());
    return;
  }
  if (a.size() != 2) {
    if (a != b) throw DimensionError("widen: non-dense tensor changed shape");
    into = from;
    return;
  }
  for (std::size_t r = 0; r < b[0]; ++r)
    for (std::size_t c = 0; c < b[1]; ++c) into(r, c) = from(r, c);
}

}  // namespace

template <typename T>
void widen_dense(Model<T>& model) {
  if (model.spec.arch != Architecture::vgg) {
    throw UnsupportedArchitectureError("widen_dense applies to the vgg architecture only");
  }
  NetworkSpec wider = model.spec;
  wider.dense_width *= 2;
  if (wider.dense_width > wider.dense_width_max) {
    throw ConfigError("widen_dense: width " + std::to_string(model.spec.dense_width) + " already at maximum " +
                      std::to_string(model.spec.dense_width_max));
  }
  Network<T> net(build_layers(wider));
  ParamStore<T> params(model.params.seed());
  net.init_params(params, derive_seed(model.params.seed(), "widen", {wider.dense_width}));
  for (auto& [name, e] : params.entries()) copy_leading(e.value, model.params.value(name));
  model = Model<T>{wider, std::move(net), std::move(params)};
}

std::string spec_to_json(const NetworkSpec& spec, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["format"] = "gait-model";
  j["architecture"] = std::string(to_string(spec.arch));
  j["classes"] = spec.classes;
  j["input_size"] = spec.input_size;
  j["dense_width"] = spec.dense_width;
  j["dense_width_max"] = spec.dense_width_max;
  j["vgg_base"] = spec.vgg_base;
  j["dropout"] = spec.dropout;
  j["base_width"] = spec.base_width;
  j["widen_factor"] = spec.widen_factor;
  j["blocks_per_group"] = spec.blocks_per_group;
  j["l2"] = spec.l2;
  j["seed"] = seed;
  j["feature_width"] = feature_width(spec);
  return j.dump(2) + "\n";
}

NetworkSpec spec_from_json(const std::string& text, std::uint64_t* seed) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model manifest: ") + e.what());
  }
  try {
    if (j.value("format", "") != "gait-model") throw InputError("model manifest: not a gait-model document");
    NetworkSpec s;
    s.arch = parse_architecture(j.at("architecture").get<std::string>());
    s.classes = j.at("classes").get<std::size_t>();
    s.input_size = j.at("input_size").get<std::size_t>();
    s.dense_width = j.at("dense_width").get<std::size_t>();
    s.dense_width_max = j.at("dense_width_max").get<std::size_t>();
    s.vgg_base = j.at("vgg_base").get<std::size_t>();
    s.dropout = j.at("dropout").get<double>();
    s.base_width = j.at("base_width").get<std::size_t>();
    s.widen_factor = j.at("widen_factor").get<std::size_t>();
    s.blocks_per_group = j.at("blocks_per_group").get<std::size_t>();
    s.l2 = j.at("l2").get<double>();
    if (seed) *seed = j.at("seed").get<std::uint64_t>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model manifest: ") + e.what());
  }
}

void save_model(const Model<float>& model, const std::filesystem::path& bin, const std::filesystem::path& manifest) {
  model.params.save(bin);
  std::ofstream os(manifest);
  if (!os) throw InputError("cannot write " + manifest.string());
  os << spec_to_json(model.spec, model.params.seed());
}

Model<float> load_model(const std::filesystem::path& bin, const std::filesystem::path& manifest) {
  std::ifstream is(manifest);
  if (!is) throw InputError("cannot open model manifest " + manifest.string());
  std::stringstream ss;
  ss << is.rdbuf();
  std::uint64_t seed = 0;
  auto spec = spec_from_json(ss.str(), &seed);
  auto model = build_model<float>(spec, seed);
  model.params.assign_values(ParamStore<float>::load(bin));
  return model;
}

template struct Model<float>;
template struct Model<double>;
template Model<float> build_model(const NetworkSpec&, std::uint64_t);
template Model<double> build_model(const NetworkSpec&, std::uint64_t);
template void widen_dense(Model<float>&);
template void widen_dense(Model<double>&);

}  // namespace gait::nets
