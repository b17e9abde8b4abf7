#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "gait/nets/architectures.hpp"
#include "gait/nets/trainer.hpp"
#include "gradcheck.hpp"

using namespace gait;
using namespace gait::nets;
using gait::testing::gradcheck;
using gait::testing::random_tensor;
using tensornet::Mode;

namespace {

Shape shape_after(const std::vector<std::pair<std::string, Shape>>& trace, const std::string& id) {
  for (const auto& [name, s] : trace) {
    if (name == id) return s;
  }
  FAIL("no layer " << id);
  return {};
}

NetworkSpec mini_vgg(std::size_t classes) {
  NetworkSpec s;
  s.arch = Architecture::vgg;
  s.classes = classes;
  s.input_size = 16;
  s.vgg_base = 2;
  s.dense_width = 6;
  s.dense_width_max = 24;
  return s;
}

// Two separable classes: a bright left half vs a bright right half, with noise.
TensorSource two_class_set(std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<float> noise(0.0f, 0.1f);
  std::vector<std::vector<float>> patches;
  std::vector<int> labels;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    const int label = static_cast<int>(i % 2);
    std::vector<float> p(3 * 48 * 48);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 0; y < 48; ++y)
        for (std::size_t x = 0; x < 48; ++x) {
          const bool lit = (x < 24) == (label == 0);
          p[(c * 48 + y) * 48 + x] = (lit ? 0.8f : 0.3f) + noise(rng);
        }
    patches.push_back(std::move(p));
    labels.push_back(label);
  }
  return TensorSource(std::move(patches), std::move(labels));
}

}  // namespace

TEST_CASE("vgg follows the block layout") {
  NetworkSpec s;
  s.arch = Architecture::vgg;
  s.classes = 155;
  s.dense_width = 4096;
  const auto layers = build_vgg(s);
  Network<float> net(layers);
  const auto trace = net.trace_shapes({1, 3, 48, 48});
  CHECK(shape_after(trace, "b1.pool") == Shape{1, 64, 24, 24});
  CHECK(shape_after(trace, "b2.pool") == Shape{1, 128, 12, 12});
  CHECK(shape_after(trace, "b3.pool") == Shape{1, 256, 6, 6});
  CHECK(shape_after(trace, "b4.pool") == Shape{1, 512, 3, 3});
  CHECK(shape_after(trace, "f6.dropout") == Shape{1, 4096});
  CHECK(net.output_shape({1, 3, 48, 48}) == Shape{1, 155});
  const auto& last = layers[layers.size() - 2];
  CHECK(last.kind == tensornet::LayerKind::dense);
  CHECK(last.in == 4096);
  CHECK(last.filters == 155);
  CHECK(net.feature_width({1, 3, 48, 48}) == 4096);

  std::size_t convs = 0, drops = 0;
  for (const auto& l : layers) {
    convs += l.kind == tensornet::LayerKind::conv2d;
    if (l.kind == tensornet::LayerKind::dropout) {
      ++drops;
      CHECK(l.dropout_p == 0.5);
    }
  }
  CHECK(convs == 10);
  CHECK(drops == 2);
}

TEST_CASE("vgg parameter count grows with width") {
  NetworkSpec s;
  s.arch = Architecture::vgg;
  s.classes = 10;
  s.vgg_base = 4;
  s.dense_width = 1024;
  const auto small = build_model<float>(s, 1).params.parameter_count();
  s.dense_width = 4096;
  const auto large = build_model<float>(s, 1).params.parameter_count();
  CHECK(small < large);
}

TEST_CASE("wrn follows the group layout") {
  NetworkSpec s;
  s.arch = Architecture::wrn;
  s.classes = 155;
  Network<float> net(build_wrn(s));
  const auto trace = net.trace_shapes({1, 3, 48, 48});
  CHECK(shape_after(trace, "stem.conv") == Shape{1, 16, 48, 48});
  CHECK(shape_after(trace, "b2.2") == Shape{1, 64, 48, 48});
  CHECK(shape_after(trace, "b3.0") == Shape{1, 128, 24, 24});
  CHECK(shape_after(trace, "b4.2") == Shape{1, 256, 12, 12});
  CHECK(shape_after(trace, "final.pool") == Shape{1, 256});
  CHECK(net.feature_width({1, 3, 48, 48}) == 256);
  CHECK(feature_width(s) == 256);
  CHECK(net.output_shape({2, 3, 48, 48}) == Shape{2, 155});
  std::size_t blocks = 0;
  for (const auto& l : build_wrn(s)) blocks += l.kind == tensornet::LayerKind::residual_block;
  CHECK(blocks == 9);
  CHECK(feature_width(tiny_wrn(4)) == 32);
}

TEST_CASE("zero input through fresh wrn gives a uniform softmax") {
  auto m = build_model<float>(tiny_wrn(5), 3);
  auto p = m.net.probabilities(Tensor<float>({2, 3, 48, 48}), m.params);
  for (float v : p.data()) CHECK(v == doctest::Approx(0.2f).epsilon(1e-6));
}

TEST_CASE("probabilities sum to one for both architectures") {
  auto wrn = build_model<float>(tiny_wrn(7), 3);
  NetworkSpec v;
  v.arch = Architecture::vgg;
  v.classes = 7;
  v.vgg_base = 4;
  v.dense_width = 32;
  auto vgg = build_model<float>(v, 3);
  auto x = random_tensor({3, 3, 48, 48}, 9).cast<float>();
  for (auto* m : {&wrn, &vgg}) {
    auto p = m->net.probabilities(x, m->params);
    for (std::size_t n = 0; n < 3; ++n) {
      double s = 0;
      for (std::size_t c = 0; c < 7; ++c) s += p(n, c);
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
  }
  CHECK_THROWS_AS(wrn.net.logits(Tensor<float>({1, 2, 48, 48}), wrn.params), DimensionError);
}

TEST_CASE("miniature networks pass full finite-difference checks") {
  for (auto spec : {tiny_wrn(3), mini_vgg(3)}) {
    spec.input_size = 16;
    auto m = build_model<double>(spec, 21);
    gait::testing::randomize_offsets(m.params, 3);
    auto fwd = [&](const Tensor<double>& x, ParamStore<double>& p) {
      Rng rng(4);
      return m.net.forward(x, p, Mode::train, rng);
    };
    auto bwd = [&](const Tensor<double>& r, ParamStore<double>& p) { return m.net.backward(r, p); };
    auto res = gradcheck(random_tensor({2, 3, 16, 16}, 22), m.params, fwd, bwd, 1e-6, 12);
    INFO(to_string(spec.arch), " worst ", res.worst);
    CHECK(res.max_rel_error < 1e-4);
    CHECK(res.checked > 100);
    CHECK(res.kinks * 20 < res.checked);
  }
}

TEST_CASE("widen_dense preserves old weights and doubles to the maximum") {
  NetworkSpec s;
  s.arch = Architecture::vgg;
  s.classes = 4;
  s.vgg_base = 2;
  auto m = build_model<float>(s, 5);
  const auto f5 = m.params.value("f5.dense.weight");
  const auto f6 = m.params.value("f6.dense.weight");
  const auto out = m.params.value("out.dense.weight");
  const auto conv = m.params.value("b3.conv2.weight");
  auto x = random_tensor({2, 3, 48, 48}, 6).cast<float>();
  const auto before = m.net.logits(x, m.params);

  widen_dense(m);
  CHECK(m.spec.dense_width == 2048);
  const auto& f6w = m.params.value("f6.dense.weight");
  CHECK(f6w.shape() == Shape{2048, 2048});
  bool core = true;
  for (std::size_t r = 0; r < 1024; ++r)
    for (std::size_t c = 0; c < 1024; ++c) core = core && f6w(r, c) == f6(r, c);
  CHECK(core);
  const auto& f5w = m.params.value("f5.dense.weight");
  CHECK(f5w.shape() == Shape{2048, f5.extent(1)});
  CHECK(f5w(1023, 7) == f5(1023, 7));
  CHECK(m.params.value("out.dense.weight")(3, 1023) == out(3, 1023));
  CHECK(m.params.value("b3.conv2.weight") == conv);
  CHECK(m.params.value("f6.dense.bias")[2047] == 0.0f);
  CHECK(m.params.seed() == 5);
  CHECK(m.net.logits(x, m.params) != before);

  widen_dense(m);
  CHECK(m.spec.dense_width == 4096);
  CHECK_THROWS_AS(widen_dense(m), ConfigError);

  auto w = build_model<float>(tiny_wrn(3), 1);
  CHECK_THROWS_AS(widen_dense(w), UnsupportedArchitectureError);
}

TEST_CASE("plateau schedule") {
  TrainConfig cfg;
  cfg.patience = 2;
  cfg.max_decays = 2;
  SUBCASE("wrn decays then stops") {
    PlateauSchedule s(cfg, false);
    CHECK(s.observe(0.5, false) == ScheduleEvent::none);
    CHECK(s.observe(0.5005, false) == ScheduleEvent::none);  // below min_improvement
    CHECK(s.observe(0.5, false) == ScheduleEvent::decay);
    CHECK(s.observe(0.6, false) == ScheduleEvent::none);
    CHECK(s.observe(0.6, false) == ScheduleEvent::none);
    CHECK(s.observe(0.6, false) == ScheduleEvent::decay);
    CHECK(s.observe(0.6, false) == ScheduleEvent::none);
    CHECK(s.observe(0.6, false) == ScheduleEvent::stop);
  }
  SUBCASE("vgg widens first") {
    PlateauSchedule s(cfg, true);
    s.observe(0.5, true);
    s.observe(0.5, true);
    CHECK(s.observe(0.5, true) == ScheduleEvent::widen);
    s.observe(0.5, false);
    CHECK(s.observe(0.5, false) == ScheduleEvent::decay);
  }
}

TEST_CASE("loss decreases over the first steps on a fixed batch") {
  auto data = two_class_set(8, 1);
  Tensor<float> x({16, 3, 48, 48});
  std::vector<int> labels(16);
  for (std::size_t i = 0; i < 16; ++i) {
    data.fill(i, nullptr, x.item(i));
    labels[i] = data.label(i);
  }
  auto m = build_model<float>(tiny_wrn(2), 2);
  tensornet::NesterovMomentum<float> opt(0.9);
  double prev = INFINITY;
  for (int step = 0; step < 5; ++step) {
    Rng rng(1);
    const double loss = train_step(m, x, labels, 0.01, opt, rng);
    CHECK(loss < prev);
    prev = loss;
  }
}

TEST_CASE("tiny wrn separates two classes; schedule and determinism") {
  auto data = two_class_set(16, 2);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 16;
  cfg.max_epochs = 50;
  cfg.patience = 2;
  cfg.max_decays = 2;
  cfg.seed = 9;
  std::ostringstream log1, log2;
  auto m1 = build_model<float>(tiny_wrn(2), 4);
  auto r1 = train(m1, data, nullptr, cfg, &log1);
  auto m2 = build_model<float>(tiny_wrn(2), 4);
  auto r2 = train(m2, data, nullptr, cfg, &log2);
  CHECK(r1.history == r2.history);
  CHECK(log1.str() == log2.str());
  CHECK(accuracy(m1, data) == 1.0);
  CHECK(log1.str().find("epoch=1 lr=0.05 train_loss=") == 0);

  // learning rate is piecewise constant, non-increasing, steps by exactly the decay factor
  std::set<double> rates;
  for (std::size_t i = 1; i < r1.history.size(); ++i) {
    const double a = r1.history[i - 1].learning_rate, b = r1.history[i].learning_rate;
    CHECK(b <= a);
    if (b != a) CHECK(a / b == doctest::Approx(cfg.lr_decay_factor));
  }
  CHECK(r1.history.size() <= cfg.max_epochs);
}

TEST_CASE("vgg training widens on plateaus") {
  auto data = two_class_set(4, 3);
  NetworkSpec s = mini_vgg(2);
  s.input_size = 48;
  s.dense_width = 4;
  s.dense_width_max = 16;
  auto m = build_model<float>(s, 1);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 8;
  cfg.max_epochs = 30;
  cfg.patience = 1;
  cfg.max_decays = 1;
  std::ostringstream log;
  auto r = train(m, data, nullptr, cfg, &log);
  CHECK(r.widenings == 2);
  CHECK(m.spec.dense_width == 16);
  CHECK(log.str().find("width=4") != std::string::npos);
  CHECK(log.str().find("width=8") != std::string::npos);
  CHECK(log.str().find("width=16") != std::string::npos);
}

TEST_CASE("non-finite input aborts training with diagnostics") {
  std::vector<std::vector<float>> patches(4, std::vector<float>(3 * 48 * 48, 0.5f));
  for (auto& p : patches) p[10] = NAN;
  TensorSource data(patches, {0, 1, 0, 1});
  auto m = build_model<float>(tiny_wrn(2), 1);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_epochs = 2;
  try {
    train(m, data, nullptr, cfg);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("epoch 1") != std::string::npos);
  }
  TensorSource bad_label(patches, {0, 1, 2, 1});
  CHECK_THROWS_AS(train(m, bad_label, nullptr, cfg), InputError);
  cfg.learning_rate = 0;
  CHECK_THROWS_AS(train(m, data, nullptr, cfg), ConfigError);
}

TEST_CASE("model checkpoint round trip") {
  auto dir = std::filesystem::temp_directory_path() / "gait_nets_test";
  std::filesystem::create_directories(dir);
  NetworkSpec s = mini_vgg(3);
  s.input_size = 48;
  auto m = build_model<float>(s, 77);
  save_model(m, dir / "m.bin", dir / "m.json");
  auto back = load_model(dir / "m.bin", dir / "m.json");
  CHECK(back.spec == m.spec);
  CHECK(back.params.seed() == 77);
  auto x = random_tensor({2, 3, 48, 48}, 1).cast<float>();
  CHECK(back.net.logits(x, back.params) == m.net.logits(x, m.params));
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(spec_from_json("{\"format\":\"other\"}"), InputError);
  CHECK_THROWS_AS(parse_architecture("resnet"), ConfigError);
}
