#include "gait/synthwalk/walker.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include "gait/error.hpp"

namespace gait::synthwalk {

namespace {

using posepatch::Joint;
using posepatch::Point;
using posepatch::PoseKeypoints;

constexpr double kTwoPi = 2 * std::numbers::pi;

struct Body {
  double thigh, shin, torso, neck, head_r, upper_arm, forearm, foot;
};

Body proportions(double h) { return {0.25 * h, 0.23 * h, 0.28 * h, 0.05 * h, 0.075 * h, 0.16 * h, 0.15 * h, 0.09 * h}; }

double bounded_asin(double ratio) { return std::asin(std::min(0.9, ratio)); }

Point along(Point p, double len, double angle) { return {p.x + len * std::sin(angle), p.y + len * std::cos(angle)}; }

double uniform(Rng& rng, std::pair<double, double> r) {
  return std::uniform_real_distribution<double>(r.first, r.second)(rng);
}

void check_range(std::pair<double, double> r, const char* name, double lo = 0.0) {
  if (!(r.first >= lo && r.second >= r.first && std::isfinite(r.second))) {
    throw ConfigError(std::string("identity range '") + name + "' is invalid");
  }
}

double segment_distance(double px, double py, Point a, Point b) {
  const double dx = b.x - a.x, dy = b.y - a.y, len2 = dx * dx + dy * dy;
  double t = len2 > 0 ? ((px - a.x) * dx + (py - a.y) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (a.x + t * dx), py - (a.y + t * dy));
}

struct Capsule {
  Point a, b;
  double r;
};

Point mid(Point a, Point b) { return {(a.x + b.x) / 2, (a.y + b.y) / 2}; }

std::vector<Capsule> capsules(const PoseKeypoints& kp, const WalkerIdentity& id) {
  const Body b = proportions(id.height);
  const double lw = id.limb_width;
  auto at = [&](Joint j) { return *kp[j]; };
  const Point hip = mid(at(Joint::left_hip), at(Joint::right_hip));
  const Point shoulder = mid(at(Joint::left_shoulder), at(Joint::right_shoulder));
  std::vector<Capsule> out{{hip, shoulder, 0.8 * lw}, {shoulder, at(Joint::head), 0.4 * lw}, {at(Joint::head), at(Joint::head), b.head_r}};
  const std::array<std::array<Joint, 6>, 2> sides{{
      {Joint::left_shoulder, Joint::left_elbow, Joint::left_hand, Joint::left_hip, Joint::left_knee, Joint::left_foot},
      {Joint::right_shoulder, Joint::right_elbow, Joint::right_hand, Joint::right_hip, Joint::right_knee,
       Joint::right_foot},
  }};
  for (const auto& s : sides) {
    if (kp[s[1]]) {
      out.push_back({at(s[0]), at(s[1]), 0.45 * lw});
      out.push_back({at(s[1]), at(s[2]), 0.45 * lw});
    } else {
      out.push_back({at(s[0]), at(s[2]), 0.45 * lw});
    }
    out.push_back({at(s[3]), at(s[4]), 0.55 * lw});
    out.push_back({at(s[4]), at(s[5]), 0.5 * lw});
    const Point toe{at(s[5]).x + (id.speed < 0 ? -b.foot : b.foot), at(s[5]).y};
    out.push_back({at(s[5]), toe, 0.4 * lw});
  }
  return out;
}

}  // namespace

void WalkerIdentity::validate() const {
  if (!(frequency > 0.01 && frequency < 0.2)) throw ConfigError("walker frequency must lie in (0.01, 0.2)");
  for (double a : {leg_amplitude, arm_amplitude, foot_lift, sway_amplitude}) {
    if (!(a >= 0 && std::isfinite(a))) throw ConfigError("walker amplitudes must be nonnegative");
  }
  if (!(height > 8 && std::isfinite(height))) throw ConfigError("walker height must exceed 8 px");
  if (!(limb_width > 0 && limb_width < height / 4)) throw ConfigError("walker limb width out of range");
  if (!std::isfinite(speed)) throw ConfigError("walker speed must be finite");
  for (double p : phase) {
    if (!std::isfinite(p)) throw ConfigError("walker phase must be finite");
  }
}

std::size_t differing_fields(const WalkerIdentity& a, const WalkerIdentity& b) {
  std::size_t n = 0;
  n += a.frequency != b.frequency;
  n += a.leg_amplitude != b.leg_amplitude;
  n += a.arm_amplitude != b.arm_amplitude;
  n += a.foot_lift != b.foot_lift;
  n += a.phase != b.phase;
  n += a.sway_amplitude != b.sway_amplitude;
  n += a.height != b.height;
  n += a.speed != b.speed;
  n += a.limb_width != b.limb_width;
  return n;
}

void IdentityRanges::validate() const {
  check_range(frequency, "frequency", 0.0);
  if (!(frequency.first > 0.01 && frequency.second < 0.2)) throw ConfigError("frequency range must lie in (0.01, 0.2)");
  check_range(leg_amplitude, "leg_amplitude");
  check_range(arm_amplitude, "arm_amplitude");
  check_range(foot_lift, "foot_lift");
  check_range(phase, "phase", -10.0);
  check_range(sway_amplitude, "sway_amplitude");
  check_range(height, "height", 8.0);
  check_range(speed, "speed", -10.0);
  check_range(limb_width, "limb_width", 0.5);
}

WalkerIdentity sample_identity(const IdentityRanges& ranges, Rng& rng) {
  ranges.validate();
  WalkerIdentity id;
  id.frequency = uniform(rng, ranges.frequency);
  id.leg_amplitude = uniform(rng, ranges.leg_amplitude);
  id.arm_amplitude = uniform(rng, ranges.arm_amplitude);
  id.foot_lift = uniform(rng, ranges.foot_lift);
  for (auto& p : id.phase) p = uniform(rng, ranges.phase);
  id.sway_amplitude = uniform(rng, ranges.sway_amplitude);
  id.height = uniform(rng, ranges.height);
  id.speed = uniform(rng, ranges.speed);
  id.limb_width = uniform(rng, ranges.limb_width);
  return id;
}

std::string_view to_string(Condition c) {
  switch (c) {
    case Condition::normal: return "normal";
    case Condition::perturbed_a: return "perturbed-a";
    case Condition::perturbed_b: return "perturbed-b";
  }
  return "normal";
}

Condition parse_condition(std::string_view s) {
  for (Condition c : {Condition::normal, Condition::perturbed_a, Condition::perturbed_b}) {
    if (to_string(c) == s) return c;
  }
  throw InputError("unknown condition '" + std::string(s) + "'");
}

PoseKeypoints pose_at(const WalkerIdentity& id, double t, double start_phase, double hip_x, double ground_y) {
  const Body b = proportions(id.height);
  const double phi = kTwoPi * id.frequency * t + start_phase;
  const double dir = id.speed < 0 ? -1.0 : 1.0;
  const double leg = b.thigh + b.shin;
  const double bob = 0.25 * id.foot_lift * std::cos(2 * phi);
  const Point hip{hip_x, ground_y - leg - 0.5 * id.limb_width + bob};
  const double depth = 0.25 * id.limb_width;

  const double lean = dir * (0.06 + bounded_asin(id.sway_amplitude / b.torso) * std::sin(2 * phi + id.phase[3]));
  const Point shoulder = along(hip, -b.torso, -lean);
  const Point neck_top = along(shoulder, -b.neck, -lean);
  const Point head = along(neck_top, -b.head_r, -lean);

  const double leg_max = bounded_asin(id.leg_amplitude / leg);
  const double knee_max = std::acos(std::max(-0.5, 1.0 - id.foot_lift / b.shin));
  const double arm_max = bounded_asin(id.arm_amplitude / (b.upper_arm + b.forearm));

  PoseKeypoints kp;
  kp[Joint::head] = head;
  for (int side = 0; side < 2; ++side) {
    const double psi = phi + side * std::numbers::pi;
    const double shift = side == 0 ? -depth : depth;
    const Point h{hip.x + shift, hip.y};
    const Point s{shoulder.x + shift, shoulder.y};

    const double a = leg_max * std::sin(psi);
    const double flex = 0.5 + 0.5 * std::sin(psi + id.phase[0]);
    const double k = knee_max * flex * flex;
    const Point knee = along(h, b.thigh, dir * a);
    const Point foot = along(knee, b.shin, dir * (a - k));

    const double psi_arm = psi + std::numbers::pi;
    const double u = arm_max * std::sin(psi_arm + id.phase[1]);
    const double e = 0.25 + 0.8 * arm_max * (0.5 + 0.5 * std::sin(psi_arm + id.phase[2]));
    const Point elbow = along(s, b.upper_arm, dir * u);
    const Point hand = along(elbow, b.forearm, dir * (u + e));

    if (side == 0) {
      kp[Joint::left_hip] = h;
      kp[Joint::left_shoulder] = s;
      kp[Joint::left_knee] = knee;
      kp[Joint::left_foot] = foot;
      kp[Joint::left_elbow] = elbow;
      kp[Joint::left_hand] = hand;
    } else {
      kp[Joint::right_hip] = h;
      kp[Joint::right_shoulder] = s;
      kp[Joint::right_knee] = knee;
      kp[Joint::right_foot] = foot;
      kp[Joint::right_elbow] = elbow;
      kp[Joint::right_hand] = hand;
    }
  }
  return kp;
}

std::vector<float> figure_coverage(const PoseKeypoints& kp, const WalkerIdentity& id, std::size_t width,
                                   std::size_t height) {
  kp.require_complete();
  std::vector<float> cov(width * height, 0.0f);
  for (const auto& c : capsules(kp, id)) {
    const double pad = c.r + 1;
    const long x0 = std::max(0L, long(std::floor(std::min(c.a.x, c.b.x) - pad)));
    const long x1 = std::min(long(width) - 1, long(std::ceil(std::max(c.a.x, c.b.x) + pad)));
    const long y0 = std::max(0L, long(std::floor(std::min(c.a.y, c.b.y) - pad)));
    const long y1 = std::min(long(height) - 1, long(std::ceil(std::max(c.a.y, c.b.y) + pad)));
    for (long y = y0; y <= y1; ++y)
      for (long x = x0; x <= x1; ++x) {
        const double v = std::clamp(c.r + 0.5 - segment_distance(double(x), double(y), c.a, c.b), 0.0, 1.0);
        float& dst = cov[std::size_t(y) * width + std::size_t(x)];
        dst = std::max(dst, float(v));
      }
  }
  return cov;
}

Frame textured_background(std::size_t width, std::size_t height, Rng& rng) {
  std::uniform_int_distribution<int> freq(1, 7);
  std::uniform_real_distribution<double> phase(0, kTwoPi), amp(0.5, 1.0);
  struct Wave {
    double fx, fy, ph, a;
  };
  std::vector<Wave> waves;
  for (int i = 0; i < 10; ++i) {
    const int fx = freq(rng), fy = freq(rng);
    waves.push_back({double(i % 2 ? fx : -fx), double(fy), phase(rng), amp(rng)});
  }
  std::vector<double> v(width * height);
  double lo = 1e300, hi = -1e300;
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      double s = 0;
      for (const auto& w : waves) s += w.a * std::sin(kTwoPi * (w.fx * x / double(width) + w.fy * y / double(height)) + w.ph);
      v[y * width + x] = s;
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  Frame f(width, height);
  const double span = hi > lo ? hi - lo : 1.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    f.pixels[i] = float(std::round(255.0 * (0.45 + 0.45 * (v[i] - lo) / span))) / 255.0f;
  }
  return f;
}

WalkerIdentity perturb(const WalkerIdentity& id, Condition condition, Rng& rng) {
  WalkerIdentity out = id;
  std::uniform_real_distribution<double> factor(0.9, 1.1);
  switch (condition) {
    case Condition::normal:
      break;
    case Condition::perturbed_a:
      out.frequency = std::clamp(out.frequency * factor(rng), 0.0101, 0.199);
      out.leg_amplitude *= factor(rng);
      out.foot_lift *= factor(rng);
      break;
    case Condition::perturbed_b:
      out.arm_amplitude *= factor(rng);
      out.sway_amplitude *= factor(rng);
      out.frequency = std::clamp(out.frequency * factor(rng), 0.0101, 0.199);
      break;
  }
  return out;
}

SyntheticVideo generate(const WalkerIdentity& id, Condition condition, const VideoOptions& options, Rng& rng,
                        int label) {
  id.validate();
  if (options.frames < 32) throw ConfigError("a synthetic video needs at least 32 frames");
  if (options.width < optflow::kMinFrameSide || options.height < optflow::kMinFrameSide) {
    throw ConfigError("synthetic frame is too small");
  }
  const WalkerIdentity eff = perturb(id, condition, rng);
  SyntheticVideo video;
  video.label = label;
  video.condition = condition;
  video.background = textured_background(options.width, options.height, rng);
  const double start_phase = std::uniform_real_distribution<double>(0, kTwoPi)(rng);
  const double ground = double(options.height) - 4.0;
  const std::size_t n = options.frames;
  const Body body = proportions(eff.height);

  // horizontal extent of the figure relative to its hip over the whole video
  double rel_lo = 0, rel_hi = 0, top = 1e300;
  for (std::size_t t = 0; t < n; ++t) {
    const auto kp = pose_at(eff, double(t), start_phase, 0.0, ground);
    for (const auto& j : kp.joints) {
      rel_lo = std::min(rel_lo, j->x);
      rel_hi = std::max(rel_hi, j->x);
    }
    top = std::min(top, kp[Joint::head]->y - body.head_r);
  }
  const double pad = eff.limb_width + 1.5;
  rel_lo -= pad + (eff.speed < 0 ? body.foot : 0.0);
  rel_hi += pad + (eff.speed < 0 ? 0.0 : body.foot);
  const double lo = -rel_lo, hi = double(options.width) - 1 - rel_hi;
  if (hi < lo || top < 1.0) throw ConfigError("walker does not fit in the frame");

  const double span = std::abs(eff.speed) * double(n - 1);
  const double slack = hi - lo - span;
  const double start = slack >= 0 ? std::uniform_real_distribution<double>(0, slack)(rng) : 0.0;
  auto hip_x = [&](double t) {
    const double travelled = start + std::abs(eff.speed) * t;
    const double along_range = slack >= 0 || hi == lo ? travelled : std::fmod(travelled, hi - lo);
    return eff.speed < 0 ? hi - along_range : lo + along_range;
  };

  const float fig = float(options.figure_intensity);
  for (std::size_t t = 0; t < n; ++t) {
    auto kp = pose_at(eff, double(t), start_phase, hip_x(double(t)), ground);
    kp.frame = t;
    const auto cov = figure_coverage(kp, eff, options.width, options.height);
    Frame f(options.width, options.height);
    Mask m{options.width, options.height, std::vector<std::uint8_t>(cov.size())};
    for (std::size_t i = 0; i < cov.size(); ++i) {
      const float v = video.background.pixels[i] * (1 - cov[i]) + fig * cov[i];
      f.pixels[i] = std::round(255.0f * v) / 255.0f;
      m.bits[i] = cov[i] >= 0.5f;
    }
    video.frames.push_back(std::move(f));
    video.masks.push_back(std::move(m));
    video.keypoints.push_back(std::move(kp));
  }
  return video;
}

posepatch::PatchSpec bbox_from_mask(const Mask& mask) {
  if (mask.bits.size() != mask.width * mask.height) throw DimensionError("mask size mismatch");
  std::size_t x0 = mask.width, y0 = mask.height, x1 = 0, y1 = 0;
  bool any = false;
  for (std::size_t y = 0; y < mask.height; ++y)
    for (std::size_t x = 0; x < mask.width; ++x) {
      if (!mask.bits[y * mask.width + x]) continue;
      any = true;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (!any) throw InputError("silhouette mask is empty");
  return {posepatch::Part::full_body, {double(x0), double(y0), double(x1 - x0 + 1), double(y1 - y0 + 1)}};
}

Mask subtract_background(const Frame& frame, const Frame& background, double threshold) {
  if (frame.width != background.width || frame.height != background.height) {
    throw DimensionError("frame and background differ in size");
  }
  const std::size_t w = frame.width, h = frame.height;
  std::vector<std::uint8_t> fg(w * h);
  for (std::size_t i = 0; i < fg.size(); ++i) {
    fg[i] = std::abs(double(frame.pixels[i]) - double(background.pixels[i])) > threshold;
  }
  std::vector<int> label(w * h, -1);
  int best = -1;
  std::size_t best_size = 0;
  int next = 0;
  std::deque<std::size_t> queue;
  for (std::size_t start = 0; start < fg.size(); ++start) {
    if (!fg[start] || label[start] >= 0) continue;
    const int id = next++;
    std::size_t size = 0;
    label[start] = id;
    queue.push_back(start);
    while (!queue.empty()) {
      const std::size_t i = queue.front();
      queue.pop_front();
      ++size;
      const long x = long(i % w), y = long(i / w);
      for (long dy = -1; dy <= 1; ++dy)
        for (long dx = -1; dx <= 1; ++dx) {
          const long nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= long(w) || ny >= long(h)) continue;
          const std::size_t j = std::size_t(ny) * w + std::size_t(nx);
          if (fg[j] && label[j] < 0) {
            label[j] = id;
            queue.push_back(j);
          }
        }
    }
    if (size > best_size) {
      best_size = size;
      best = id;
    }
  }
  Mask m{w, h, std::vector<std::uint8_t>(w * h, 0)};
  for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = best >= 0 && label[i] == best;
  return m;
}

std::vector<Mask> subtract_background(const std::vector<Frame>& frames, const Frame& background, double threshold) {
  std::vector<Mask> out(frames.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < frames.size(); ++i) out[i] = subtract_background(frames[i], background, threshold);
  return out;
}

Frame mask_to_frame(const Mask& m) {
  Frame f(m.width, m.height);
  for (std::size_t i = 0; i < m.bits.size(); ++i) f.pixels[i] = m.bits[i] ? 1.0f : 0.0f;
  return f;
}

io::Image8 to_image(const Frame& f) {
  io::Image8 img{f.width, f.height, 1, std::vector<std::uint8_t>(f.pixels.size())};
  for (std::size_t i = 0; i < f.pixels.size(); ++i) {
    img.data[i] = std::uint8_t(std::lround(std::clamp(f.pixels[i], 0.0f, 1.0f) * 255.0f));
  }
  return img;
}

Frame from_image(const io::Image8& img) {
  if (img.channels != 1) throw InputError("expected a grayscale image");
  Frame f(img.width, img.height);
  for (std::size_t i = 0; i < img.data.size(); ++i) f.pixels[i] = float(img.data[i]) / 255.0f;
  return f;
}

}  // namespace gait::synthwalk
