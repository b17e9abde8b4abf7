#include <cmath>
#include <random>

#include "doctest.h"
#include "gait/error.hpp"
#include "gait/posepatch/patches.hpp"

using namespace gait;
using namespace gait::posepatch;

namespace {

PoseKeypoints stick_figure(double cx = 50, double top = 10) {
  PoseKeypoints kp;
  kp[Joint::head] = Point{cx, top};
  kp[Joint::left_shoulder] = Point{cx - 8, top + 12};
  kp[Joint::right_shoulder] = Point{cx + 8, top + 12};
  kp[Joint::left_elbow] = Point{cx - 11, top + 24};
  kp[Joint::right_elbow] = Point{cx + 11, top + 24};
  kp[Joint::left_hand] = Point{cx - 13, top + 36};
  kp[Joint::right_hand] = Point{cx + 14, top + 35};
  kp[Joint::left_hip] = Point{cx - 5, top + 40};
  kp[Joint::right_hip] = Point{cx + 5, top + 40};
  kp[Joint::left_knee] = Point{cx - 7, top + 58};
  kp[Joint::right_knee] = Point{cx + 6, top + 59};
  kp[Joint::left_foot] = Point{cx - 9, top + 76};
  kp[Joint::right_foot] = Point{cx + 10, top + 80};
  return kp;
}

optflow::FlowMap byte_map(std::size_t w, std::size_t h, auto&& value) {
  optflow::FlowMap f;
  f.width = w;
  f.height = h;
  f.u.assign(w * h, 0.0f);
  f.v.assign(w * h, 0.0f);
  f.encoded.resize(3 * w * h);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) f.encoded[(c * h + y) * w + x] = value(c, x, y);
  return f;
}

// tent-weighted sum over every source pixel; equals bilinear interpolation with replicated borders
double tent_oracle(const optflow::FlowMap& f, std::size_t c, double x, double y) {
  x = std::clamp(x, 0.0, double(f.width - 1));
  y = std::clamp(y, 0.0, double(f.height - 1));
  double s = 0;
  for (std::size_t py = 0; py < f.height; ++py)
    for (std::size_t px = 0; px < f.width; ++px) {
      const double wgt = std::max(0.0, 1 - std::abs(x - double(px))) * std::max(0.0, 1 - std::abs(y - double(py)));
      if (wgt > 0) s += wgt * f.channel(c, px, py);
    }
  return s / 255.0;
}

bool contains(const Box& outer, const Box& inner) {
  const double e = 1e-9;
  return outer.x0 <= inner.x0 + e && outer.y0 <= inner.y0 + e && outer.x0 + outer.w + e >= inner.x0 + inner.w &&
         outer.y0 + outer.h + e >= inner.y0 + inner.h;
}

}  // namespace

TEST_CASE("full-body box spans all joints") {
  const auto kp = stick_figure();
  const auto boxes = part_boxes_unclamped(kp);
  const Box full = boxes[4].box;
  CHECK(boxes[4].part == Part::full_body);
  CHECK(full == Box{50 - 13, 10, 27, 80});
  // feet squares: side = 0.25 * 80
  CHECK(boxes[0].box == Box{60 - 10, 90 - 10, 20, 20});
  CHECK(boxes[1].box == Box{41 - 10, 86 - 10, 20, 20});
  // upper body from head to hips, hands included
  CHECK(boxes[2].box == Box{37, 10, 27, 40});
  // lower body from hips to feet, hands excluded
  CHECK(boxes[3].box == Box{41, 50, 19, 40});
}

TEST_CASE("foot square centring") {
  CHECK(square_box(Point{30, 90}, 24) == Box{18, 78, 24, 24});
  auto kp = stick_figure();
  // full-body height 96 gives side 24
  kp[Joint::left_foot] = Point{30, 90};
  kp[Joint::head] = Point{50, -6};
  CHECK(part_boxes_unclamped(kp)[1].box == Box{18, 78, 24, 24});
}

TEST_CASE("foot at the frame corner is clamped to a positive box") {
  auto kp = stick_figure(20, 0);
  kp[Joint::right_foot] = Point{0, 0};
  const auto boxes = build_part_boxes(kp, 64, 96);
  const Box b = boxes[0].box;
  CHECK(b.x0 >= 0);
  CHECK(b.y0 >= 0);
  CHECK(b.w > 0);
  CHECK(b.h > 0);
  for (const auto& s : boxes) {
    CHECK(s.box.x0 + s.box.w <= 64);
    CHECK(s.box.y0 + s.box.h <= 96);
  }
}

TEST_CASE("missing joint names the joint") {
  auto kp = stick_figure();
  kp[Joint::left_knee].reset();
  try {
    (void)build_part_boxes(kp, 100, 100);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("left_knee") != std::string::npos);
  }
  // elbows are optional
  auto no_elbows = stick_figure();
  no_elbows[Joint::left_elbow].reset();
  no_elbows[Joint::right_elbow].reset();
  CHECK_NOTHROW((void)build_part_boxes(no_elbows, 100, 100));
}

TEST_CASE("augmentation extension arithmetic") {
  const Box b{10, 10, 30, 60};
  CHECK(extend_box(b, {}) == b);
  CHECK(extend_box(b, {10, 10, 20, 20}) == Box{0, -10, 50, 100});
  CHECK(center_test_box({Part::full_body, b}, 1000, 1000).box == Box{5, 0, 40, 80});
  CHECK(center_test_box({Part::full_body, b}, 1000, 1000) == center_test_box({Part::full_body, b}, 1000, 1000));
}

TEST_CASE("extension samples are uniform with the expected means") {
  const Box b{10, 10, 30, 60};
  Rng rng(17);
  double l = 0, r = 0, t = 0, bo = 0;
  double lo = 1e9, hi = -1e9;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto e = sample_extensions(b, rng);
    l += e.left;
    r += e.right;
    t += e.top;
    bo += e.bottom;
    lo = std::min({lo, e.left, e.right});
    hi = std::max({hi, e.left, e.right});
    CHECK(e.top <= 20);
    CHECK(e.bottom >= 0);
  }
  CHECK(l / n == doctest::Approx(5.0).epsilon(0.02));
  CHECK(r / n == doctest::Approx(5.0).epsilon(0.02));
  CHECK(t / n == doctest::Approx(10.0).epsilon(0.02));
  CHECK(bo / n == doctest::Approx(10.0).epsilon(0.02));
  CHECK(lo >= 0);
  CHECK(hi <= 10);
}

TEST_CASE("augmented boxes contain the clamped original") {
  const auto kp = stick_figure();
  const auto boxes = build_part_boxes(kp, 100, 100);
  Rng rng(3);
  for (int i = 0; i < 500; ++i)
    for (const auto& s : boxes) {
      const auto a = sample_augmented_box(s, rng, 100, 100);
      CHECK(a.part == s.part);
      CHECK(contains(a.box, s.box));
      CHECK(a.box.x0 >= 0);
      CHECK(a.box.y0 + a.box.h <= 100);
    }
}

TEST_CASE("clamping") {
  CHECK(clamp_box({-5, -5, 20, 20}, 10, 12) == Box{0, 0, 10, 12});
  const Box tiny = clamp_box({3, 4, 1, 1}, 10, 10);
  CHECK(tiny.w * tiny.h >= 1);
  const Box c = center_test_box({Part::left_foot, Box{9.8, 9.8, 1, 1}}, 10, 10).box;
  CHECK(c.w >= 1);
  CHECK(c.h >= 1);
  CHECK(c.x0 + c.w <= 10);
  CHECK_THROWS_AS(clamp_box({20, 0, 5, 5}, 10, 10), InputError);
  CHECK_THROWS_AS(clamp_box({0, -9, 5, 5}, 10, 10), InputError);
}

TEST_CASE("48x48 box crop is the identity") {
  const auto f = byte_map(80, 60, [](auto c, auto x, auto y) { return std::uint8_t((x * 7 + y * 13 + c * 50) % 256); });
  const auto p = crop_resize(f, {Part::full_body, Box{10, 5, 48, 48}}, 4);
  CHECK(p.pair_index == 4);
  REQUIRE(p.values.size() == kPatchValues);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 48; ++i)
      for (std::size_t j = 0; j < 48; ++j)
        CHECK(p.values[(c * 48 + i) * 48 + j] == doctest::Approx(f.channel(c, j + 10, i + 5) / 255.0).epsilon(1e-6));
}

TEST_CASE("constant region gives a constant patch") {
  const auto f = byte_map(40, 30, [](auto c, auto, auto) { return std::uint8_t(c == 2 ? 77 : 200); });
  const auto p = crop_resize(f, {Part::upper_body, Box{3.3, 2.1, 17.7, 25.5}});
  for (std::size_t k = 0; k < kPatchValues; ++k) {
    const float expect = (k / (48 * 48) == 2 ? 77 : 200) / 255.0f;
    CHECK(p.values[k] == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("checkerboard downsizing matches a bilinear oracle") {
  const auto f = byte_map(120, 110, [](auto c, auto x, auto y) {
    return std::uint8_t(((x / 3 + y / 3) % 2) ? 230 - 10 * c : 20 + 5 * c);
  });
  for (const Box b : {Box{10, 7, 96, 96}, Box{0, 0, 96, 96}, Box{30.5, 20.25, 90, 90}, Box{-4, -4, 60, 33}}) {
    const auto p = crop_resize(f, {Part::full_body, b});
    double worst = 0;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 48; ++i)
        for (std::size_t j = 0; j < 48; ++j) {
          const double x = b.x0 + (j + 0.5) * b.w / 48 - 0.5, y = b.y0 + (i + 0.5) * b.h / 48 - 0.5;
          worst = std::max(worst, std::abs(p.values[(c * 48 + i) * 48 + j] - tent_oracle(f, c, x, y)));
        }
    CHECK(worst <= 1.0 / 255);
  }
}

TEST_CASE("crop errors") {
  auto f = byte_map(20, 20, [](auto, auto, auto) { return std::uint8_t(1); });
  CHECK_THROWS_AS(crop_resize(f, {Part::full_body, Box{25, 0, 5, 5}}), InputError);
  f.encoded.clear();
  CHECK_THROWS_AS(crop_resize(f, {Part::full_body, Box{0, 0, 5, 5}}), InputError);
}

TEST_CASE("five patches per pair in canonical order, deterministic under a seed") {
  const auto f = byte_map(100, 100, [](auto c, auto x, auto y) { return std::uint8_t((x * y + c) % 251); });
  const auto kp = stick_figure();
  const auto parts = canonical_parts({Part::full_body, Part::left_foot, Part::right_foot, Part::lower_body,
                                      Part::upper_body});
  CHECK(std::equal(parts.begin(), parts.end(), kCanonicalParts.begin(), kCanonicalParts.end()));
  Rng a(11), b(11);
  const auto pa = patches_for_pair(f, kp, parts, 2, &a);
  const auto pb = patches_for_pair(f, kp, parts, 2, &b);
  REQUIRE(pa.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(pa[i].part == kCanonicalParts[i]);
    CHECK(pa[i].values == pb[i].values);
    for (float v : pa[i].values) CHECK((v >= 0.0f && v <= 1.0f));
  }
  const auto t1 = patches_for_pair(f, kp, parts, 2, nullptr);
  const auto t2 = patches_for_pair(f, kp, parts, 2, nullptr);
  for (std::size_t i = 0; i < 5; ++i) CHECK(t1[i].values == t2[i].values);
}

TEST_CASE("a video of N frames yields (N-1) j patches") {
  const auto f = byte_map(100, 100, [](auto, auto x, auto) { return std::uint8_t(x); });
  for (std::size_t n : {2u, 5u, 9u}) {
    for (const std::vector<Part>& sel : {std::vector<Part>{Part::full_body},
                                         std::vector<Part>{Part::left_foot, Part::upper_body},
                                         std::vector<Part>(kCanonicalParts.begin(), kCanonicalParts.end())}) {
      std::size_t count = 0;
      for (std::size_t pair = 0; pair + 1 < n; ++pair) {
        const auto kp = stick_figure(50 + double(pair));
        count += patches_for_pair(f, kp, sel, pair, nullptr).size();
      }
      CHECK(count == (n - 1) * sel.size());
    }
  }
}

TEST_CASE("part names and selection") {
  for (Part p : kCanonicalParts) CHECK(parse_part(to_string(p)) == p);
  CHECK_THROWS_AS(parse_part("torso"), ConfigError);
  CHECK_THROWS_AS(canonical_parts({}), ConfigError);
  CHECK_THROWS_AS(canonical_parts({Part::left_foot, Part::left_foot}), ConfigError);
}

TEST_CASE("keypoint text round trip") {
  std::vector<PoseKeypoints> frames{stick_figure(), stick_figure(52.25, 11.5)};
  frames[1].frame = 1;
  frames[1][Joint::right_elbow].reset();
  const auto text = format_keypoints(frames);
  CHECK(parse_keypoints(text) == frames);
  CHECK(parse_keypoints("# comment\n0 head 1 2\n")[0][Joint::head] == Point{1, 2});
  CHECK_THROWS_AS(parse_keypoints("0 tail 1 2\n"), InputError);
  CHECK_THROWS_AS(parse_keypoints("0 head 1\n"), InputError);
  CHECK_THROWS_AS(parse_keypoints("0 head 1 2 3\n"), InputError);
  CHECK_THROWS_AS(parse_keypoints("0 head nan 2\n"), InputError);
}
