#include <cmath>
#include <complex>
#include <numeric>
#include <random>

#include "doctest.h"
#include "gait/error.hpp"
#include "gait/io/digest.hpp"
#include "gait/optflow/flow.hpp"
#include "gait/synthwalk/corpus.hpp"
#include "tempdir.hpp"

using namespace gait;
using namespace gait::synthwalk;
using posepatch::Joint;

namespace {

// dominant nonzero DFT bin of a real sequence, by direct summation
std::size_t dominant_bin(const std::vector<double>& x) {
  const std::size_t n = x.size();
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / double(n);
  std::size_t best = 0;
  double best_power = -1;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    std::complex<double> s = 0;
    for (std::size_t t = 0; t < n; ++t) s += (x[t] - mean) * std::polar(1.0, -2 * M_PI * double(k * t) / double(n));
    if (std::norm(s) > best_power) {
      best_power = std::norm(s);
      best = k;
    }
  }
  return best;
}

// union-find labelling, used as an independent oracle for the largest component
Mask largest_component_oracle(const std::vector<std::uint8_t>& fg, std::size_t w, std::size_t h) {
  std::vector<std::size_t> parent(w * h);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      if (!fg[y * w + x]) continue;
      // earlier neighbours only
      const long nb[4][2] = {{-1, 0}, {-1, -1}, {0, -1}, {1, -1}};
      for (const auto& d : nb) {
        const long nx = long(x) + d[0], ny = long(y) + d[1];
        if (nx < 0 || ny < 0 || nx >= long(w)) continue;
        const std::size_t j = std::size_t(ny) * w + std::size_t(nx);
        if (fg[j]) parent[find(y * w + x)] = find(j);
      }
    }
  std::vector<std::size_t> size(w * h, 0), first(w * h, w * h);
  for (std::size_t i = 0; i < w * h; ++i)
    if (fg[i]) {
      const auto r = find(i);
      ++size[r];
      first[r] = std::min(first[r], i);
    }
  std::size_t best = w * h;
  for (std::size_t i = 0; i < w * h; ++i) {
    if (size[i] == 0) continue;
    if (best == w * h || size[i] > size[best] || (size[i] == size[best] && first[i] < first[best])) best = i;
  }
  Mask m{w, h, std::vector<std::uint8_t>(w * h, 0)};
  for (std::size_t i = 0; i < w * h; ++i) m.bits[i] = fg[i] && find(i) == best;
  return m;
}

double iou(const Mask& a, const Mask& b) {
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    inter += a.bits[i] && b.bits[i];
    uni += a.bits[i] || b.bits[i];
  }
  return uni ? double(inter) / double(uni) : 1.0;
}

CorpusConfig small_corpus(std::uint64_t seed = 5) {
  CorpusConfig cfg;
  cfg.subjects = 3;
  cfg.videos_per_subject = 4;
  cfg.normal_videos = 2;
  cfg.gallery_videos = 1;
  cfg.train_subjects = 1;
  cfg.video.frames = 32;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("static figure gives identical frames and zero flow") {
  WalkerIdentity id;
  id.speed = 0;
  id.leg_amplitude = id.arm_amplitude = id.foot_lift = id.sway_amplitude = 0;
  Rng rng(1);
  const auto v = generate(id, Condition::normal, {}, rng);
  REQUIRE(v.frames.size() == 64);
  for (const auto& f : v.frames) CHECK(f == v.frames[0]);
  const auto flow = optflow::farneback_flow(v.frames[0], v.frames[1]);
  for (std::size_t i = 0; i < flow.u.size(); ++i) {
    CHECK(std::abs(flow.u[i]) < 1e-3);
    CHECK(std::abs(flow.v[i]) < 1e-3);
  }
}

TEST_CASE("same identity and seed give a bit-identical video") {
  const WalkerIdentity id;
  Rng a(42), b(42), c(43);
  const auto va = generate(id, Condition::perturbed_a, {}, a);
  const auto vb = generate(id, Condition::perturbed_a, {}, b);
  const auto vc = generate(id, Condition::perturbed_a, {}, c);
  CHECK(va.frames == vb.frames);
  CHECK(va.masks == vb.masks);
  CHECK(va.keypoints == vb.keypoints);
  CHECK(va.frames != vc.frames);
}

TEST_CASE("doubling the stride frequency doubles the dominant foot frequency") {
  WalkerIdentity slow;
  slow.speed = 0;
  slow.frequency = 1.0 / 32;
  WalkerIdentity fast = slow;
  fast.frequency = 2.0 / 32;
  VideoOptions opt;
  opt.frames = 256;
  for (Joint j : {Joint::left_foot, Joint::right_foot}) {
    Rng r1(9), r2(9);
    const auto a = generate(slow, Condition::normal, opt, r1);
    const auto b = generate(fast, Condition::normal, opt, r2);
    std::vector<double> ya, yb;
    for (std::size_t t = 0; t < opt.frames; ++t) {
      ya.push_back(a.keypoints[t][j]->y);
      yb.push_back(b.keypoints[t][j]->y);
    }
    const auto ka = dominant_bin(ya), kb = dominant_bin(yb);
    INFO("bins ", ka, " ", kb);
    CHECK(ka > 0);
    CHECK(kb == 2 * ka);
  }
}

TEST_CASE("keypoints lie on the rendered figure, which stays in frame") {
  CorpusConfig cfg;
  for (std::size_t s = 0; s < 6; ++s) {
    const auto id = corpus_identity(cfg, s);
    for (std::size_t v : {0u, 6u, 7u}) {
      const auto video = corpus_video(cfg, id, s, v);
      CHECK(video.frames.size() == video.masks.size());
      CHECK(video.frames.size() == video.keypoints.size());
      for (std::size_t t = 0; t < video.frames.size(); ++t) {
        const auto& m = video.masks[t];
        for (const auto& p : video.keypoints[t].joints) {
          REQUIRE(p.has_value());
          const long x = std::lround(p->x), y = std::lround(p->y);
          REQUIRE((x >= 0 && y >= 0 && x < long(m.width) && y < long(m.height)));
          CHECK(m.bits[std::size_t(y) * m.width + std::size_t(x)] == 1);
        }
        for (std::size_t y = 0; y < m.height; ++y) {
          CHECK(m.bits[y * m.width] == 0);
          CHECK(m.bits[y * m.width + m.width - 1] == 0);
        }
        for (std::size_t x = 0; x < m.width; ++x) CHECK(m.bits[x] == 0);
      }
    }
  }
}

TEST_CASE("a fast walker wraps instead of leaving the frame") {
  WalkerIdentity id;
  id.speed = 1.5;
  Rng rng(3);
  const auto v = generate(id, Condition::normal, {}, rng);
  std::size_t wraps = 0;
  for (std::size_t t = 0; t < v.frames.size(); ++t) {
    const auto box = bbox_from_mask(v.masks[t]).box;
    CHECK(box.x0 > 0);
    CHECK(box.x0 + box.w < 64);
    if (t > 0) wraps += v.keypoints[t][Joint::left_hip]->x < v.keypoints[t - 1][Joint::left_hip]->x;
  }
  CHECK(wraps >= 1);
  id.height = 200;
  CHECK_THROWS_AS(generate(id, Condition::normal, {}, rng), ConfigError);
}

TEST_CASE("conditions perturb by bounded factors") {
  const WalkerIdentity id;
  for (int i = 0; i < 200; ++i) {
    Rng rng(i);
    for (Condition c : {Condition::perturbed_a, Condition::perturbed_b}) {
      const auto p = perturb(id, c, rng);
      for (auto [x, y] : {std::pair{p.frequency, id.frequency}, {p.leg_amplitude, id.leg_amplitude},
                          {p.arm_amplitude, id.arm_amplitude}, {p.foot_lift, id.foot_lift},
                          {p.sway_amplitude, id.sway_amplitude}}) {
        CHECK(x >= 0.9 * y - 1e-12);
        CHECK(x <= 1.1 * y + 1e-12);
      }
      CHECK(p.height == id.height);
    }
    Rng rng2(i);
    CHECK(perturb(id, Condition::normal, rng2) == id);
  }
  CHECK(parse_condition("perturbed-b") == Condition::perturbed_b);
  CHECK_THROWS_AS(parse_condition("backpack"), InputError);
}

TEST_CASE("sampled identities are valid and pairwise distinct") {
  IdentityRanges r;
  Rng rng(7);
  std::vector<WalkerIdentity> ids;
  for (int i = 0; i < 50; ++i) {
    ids.push_back(sample_identity(r, rng));
    CHECK_NOTHROW(ids.back().validate());
    CHECK(ids.back().frequency > 0.01);
    CHECK(ids.back().frequency < 0.2);
  }
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t j = i + 1; j < ids.size(); ++j) CHECK(differing_fields(ids[i], ids[j]) >= 2);
  WalkerIdentity bad;
  bad.frequency = 0.25;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  r.frequency = {0.001, 0.05};
  CHECK_THROWS_AS(r.validate(), ConfigError);
}

TEST_CASE("bbox_from_mask") {
  Mask m{20, 15, std::vector<std::uint8_t>(300, 0)};
  m.bits[9 * 20 + 7] = 1;
  CHECK(bbox_from_mask(m).box == posepatch::Box{7, 9, 1, 1});
  std::fill(m.bits.begin(), m.bits.end(), 1);
  CHECK(bbox_from_mask(m).box == posepatch::Box{0, 0, 20, 15});
  std::fill(m.bits.begin(), m.bits.end(), 0);
  CHECK_THROWS_AS(bbox_from_mask(m), InputError);

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    std::fill(m.bits.begin(), m.bits.end(), 0);
    std::uniform_int_distribution<int> px(0, 19), py(0, 14), count(1, 12);
    const int n = count(rng);
    for (int i = 0; i < n; ++i) m.bits[py(rng) * 20 + px(rng)] = 1;
    // oracle via row and column occupancy
    std::vector<bool> rows(15), cols(20);
    for (std::size_t y = 0; y < 15; ++y)
      for (std::size_t x = 0; x < 20; ++x)
        if (m.bits[y * 20 + x]) rows[y] = cols[x] = true;
    const auto r0 = std::find(rows.begin(), rows.end(), true) - rows.begin();
    const auto r1 = rows.rend() - std::find(rows.rbegin(), rows.rend(), true);
    const auto c0 = std::find(cols.begin(), cols.end(), true) - cols.begin();
    const auto c1 = cols.rend() - std::find(cols.rbegin(), cols.rend(), true);
    CHECK(bbox_from_mask(m).box == posepatch::Box{double(c0), double(r0), double(c1 - c0), double(r1 - r0)});
  }
}

TEST_CASE("background subtraction recovers the silhouette") {
  CorpusConfig cfg;
  double worst = 1;
  for (std::size_t s = 0; s < 4; ++s) {
    const auto id = corpus_identity(cfg, s);
    const auto video = corpus_video(cfg, id, s, 2);
    const auto masks = subtract_background(video.frames, video.background);
    for (std::size_t t = 0; t < masks.size(); ++t) worst = std::min(worst, iou(masks[t], video.masks[t]));
  }
  INFO("worst IoU ", worst);
  CHECK(worst >= 0.9);
}

TEST_CASE("background subtraction edge cases") {
  optflow::Frame bg(20, 20, 0.5f);
  CHECK_THROWS_AS(bbox_from_mask(subtract_background(bg, bg)), InputError);
  auto f = bg;
  for (std::size_t x = 3; x < 9; ++x) f.at(x, 4) = 0.5f + 1.0f / 255;
  const auto all = subtract_background(f, bg, 0.0);
  CHECK(std::count(all.bits.begin(), all.bits.end(), 1) == 6);
  const auto none = subtract_background(f, bg, 0.1);
  CHECK(std::count(none.bits.begin(), none.bits.end(), 1) == 0);
  CHECK_THROWS_AS(subtract_background(f, optflow::Frame(20, 21)), DimensionError);
}

TEST_CASE("largest 8-connected component matches a union-find oracle") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t w = 5 + rng() % 20, h = 5 + rng() % 20;
    const double density = 0.2 + 0.4 * double(rng() % 100) / 100;
    optflow::Frame bg(w, h, 0.0f), f(w, h, 0.0f);
    std::vector<std::uint8_t> fg(w * h);
    std::bernoulli_distribution on(density);
    for (std::size_t i = 0; i < w * h; ++i) {
      fg[i] = on(rng);
      f.pixels[i] = fg[i] ? 1.0f : 0.0f;
    }
    CHECK(subtract_background(f, bg, 0.5) == largest_component_oracle(fg, w, h));
  }
}

TEST_CASE("pnm round trips") {
  TempDir dir;
  io::Image8 gray{13, 7, 1, {}};
  io::Image8 rgb{5, 3, 3, {}};
  io::Bitmap bits{11, 4, {}};
  std::mt19937 rng(2);
  for (std::size_t i = 0; i < 13 * 7; ++i) gray.data.push_back(std::uint8_t(rng()));
  for (std::size_t i = 0; i < 45; ++i) rgb.data.push_back(std::uint8_t(rng()));
  for (std::size_t i = 0; i < 44; ++i) bits.bits.push_back(std::uint8_t(rng() & 1));
  io::write_pgm(dir.path / "a.pgm", gray);
  io::write_ppm(dir.path / "b.ppm", rgb);
  io::write_pbm(dir.path / "c.pbm", bits);
  CHECK(io::read_pnm(dir.path / "a.pgm") == gray);
  CHECK(io::read_pnm(dir.path / "b.ppm") == rgb);
  CHECK(io::read_pbm(dir.path / "c.pbm") == bits);
  CHECK_THROWS_AS(io::read_pbm(dir.path / "a.pgm"), InputError);
  CHECK_THROWS_AS(io::read_pnm(dir.path / "missing.pgm"), InputError);
}

TEST_CASE("corpus layout round trips through the loader") {
  TempDir dir;
  const auto cfg = small_corpus();
  const auto m = write_corpus(dir.path / "c", cfg);
  CHECK(read_manifest(dir.path / "c") == m);
  CHECK(m.subjects.size() == 3);
  CHECK(m.train_subjects == std::vector<std::string>{"s000"});
  CHECK(m.eval_subjects == std::vector<std::string>{"s001", "s002"});
  CHECK(m.gallery_videos == std::vector<std::string>{"v00"});
  CHECK(m.probe_videos == std::vector<std::string>{"v01", "v02", "v03"});
  CHECK(m.subjects[1].videos[2].condition == Condition::perturbed_a);
  CHECK(m.subjects[1].videos[3].condition == Condition::perturbed_b);
  for (std::size_t s = 0; s < 3; ++s) {
    CHECK(m.subjects[s].identity == corpus_identity(cfg, s));
    for (std::size_t v = 0; v < 4; ++v) {
      const auto gen = corpus_video(cfg, m.subjects[s].identity, s, v);
      const auto loaded = load_video(video_dir(dir.path / "c", subject_name(s), video_name(v)));
      CHECK(loaded.frames == gen.frames);
      CHECK(loaded.masks == gen.masks);
      CHECK(loaded.keypoints == gen.keypoints);
      CHECK(loaded.background == gen.background);
    }
  }
  const auto truncated = load_video(video_dir(dir.path / "c", "s000", "v00"), 20);
  CHECK(truncated.frames.size() == 20);
  CHECK(truncated.keypoints.size() == 20);
}

TEST_CASE("corpus generation is deterministic and guarded") {
  TempDir dir;
  const auto cfg = small_corpus(11);
  write_corpus(dir.path / "a", cfg);
  write_corpus(dir.path / "b", cfg);
  CHECK(io::sha256_file(dir.path / "a" / "manifest.json") == io::sha256_file(dir.path / "b" / "manifest.json"));
  CHECK(io::read_file(dir.path / "a" / "s002" / "v03" / "frames" / "0031.pgm") ==
        io::read_file(dir.path / "b" / "s002" / "v03" / "frames" / "0031.pgm"));
  CHECK_THROWS_AS(write_corpus(dir.path / "a", cfg), ConfigError);
  CHECK_NOTHROW(write_corpus(dir.path / "a", cfg, true));
  auto zero = cfg;
  zero.subjects = 0;
  CHECK_THROWS_AS(write_corpus(dir.path / "z", zero), InputError);
  CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("default corpus arithmetic") {
  const CorpusConfig cfg;
  CHECK(cfg.subjects * cfg.videos_per_subject == 200);
  std::size_t normal = 0;
  for (std::size_t v = 0; v < cfg.videos_per_subject; ++v) normal += condition_of_video(cfg, v) == Condition::normal;
  CHECK(normal == 6);
}
