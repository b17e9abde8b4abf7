#include "gait/posepatch/patches.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gait/error.hpp"

namespace gait::posepatch {

namespace {

constexpr std::array<std::string_view, kJointCount> kJointNames{
    "head",      "left_shoulder", "right_shoulder", "left_elbow", "right_elbow", "left_hand", "right_hand",
    "left_hip",  "right_hip",     "left_knee",      "right_knee", "left_foot",   "right_foot"};

constexpr std::array<std::string_view, 5> kPartNames{"right_foot", "left_foot", "upper_body", "lower_body",
                                                     "full_body"};

std::vector<Point> collect(const PoseKeypoints& kp, std::initializer_list<Joint> joints) {
  std::vector<Point> pts;
  for (Joint j : joints) {
    if (kp[j]) pts.push_back(*kp[j]);
  }
  return pts;
}

}  // namespace

std::string_view to_string(Joint j) { return kJointNames[static_cast<std::size_t>(j)]; }

std::optional<Joint> parse_joint(std::string_view name) {
  for (std::size_t i = 0; i < kJointCount; ++i) {
    if (kJointNames[i] == name) return static_cast<Joint>(i);
  }
  return std::nullopt;
}

bool is_required(Joint j) { return j != Joint::left_elbow && j != Joint::right_elbow; }

void PoseKeypoints::require_complete() const {
  for (std::size_t i = 0; i < kJointCount; ++i) {
    const auto j = static_cast<Joint>(i);
    if (is_required(j) && !joints[i]) {
      throw InputError("keypoints of frame " + std::to_string(frame) + ": missing joint '" +
                       std::string(to_string(j)) + "'");
    }
  }
}

std::string_view to_string(Part p) { return kPartNames[static_cast<std::size_t>(p)]; }

Part parse_part(std::string_view name) {
  for (std::size_t i = 0; i < kPartNames.size(); ++i) {
    if (kPartNames[i] == name) return static_cast<Part>(i);
  }
  throw ConfigError("unknown body part '" + std::string(name) + "'");
}

std::vector<Part> canonical_parts(std::vector<Part> parts) {
  if (parts.empty()) throw ConfigError("part selection is empty");
  std::sort(parts.begin(), parts.end());
  if (std::adjacent_find(parts.begin(), parts.end()) != parts.end()) throw ConfigError("duplicate body part");
  return parts;
}

Box bounding_box(std::span<const Point> points) {
  if (points.empty()) throw InputError("bounding box of no points");
  double x0 = points[0].x, x1 = x0, y0 = points[0].y, y1 = y0;
  for (const auto& p : points) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  Box b{x0, y0, x1 - x0, y1 - y0};
  if (b.w < 1) {
    b.x0 -= (1 - b.w) / 2;
    b.w = 1;
  }
  if (b.h < 1) {
    b.y0 -= (1 - b.h) / 2;
    b.h = 1;
  }
  return b;
}

Box square_box(Point p, double side) { return {p.x - side / 2, p.y - side / 2, side, side}; }

Box clamp_box(const Box& box, std::size_t frame_w, std::size_t frame_h) {
  const double fw = static_cast<double>(frame_w), fh = static_cast<double>(frame_h);
  double x0 = std::max(box.x0, 0.0), y0 = std::max(box.y0, 0.0);
  double x1 = std::min(box.x0 + box.w, fw), y1 = std::min(box.y0 + box.h, fh);
  if (box.x0 > fw || box.y0 > fh || box.x0 + box.w < 0 || box.y0 + box.h < 0) {
    throw InputError("box does not intersect the frame");
  }
  if (x1 - x0 < 1) {
    const double c = std::clamp((x0 + x1) / 2, 0.5, fw - 0.5);
    x0 = c - 0.5;
    x1 = c + 0.5;
  }
  if (y1 - y0 < 1) {
    const double c = std::clamp((y0 + y1) / 2, 0.5, fh - 0.5);
    y0 = c - 0.5;
    y1 = c + 0.5;
  }
  return {x0, y0, x1 - x0, y1 - y0};
}

Box extend_box(const Box& box, const Extensions& e) {
  return {box.x0 - e.left, box.y0 - e.top, box.w + e.left + e.right, box.h + e.top + e.bottom};
}

Extensions sample_extensions(const Box& box, Rng& rng) {
  std::uniform_real_distribution<double> horizontal(0.0, box.w / 3.0), vertical(0.0, box.h / 3.0);
  Extensions e;
  e.left = horizontal(rng);
  e.right = horizontal(rng);
  e.top = vertical(rng);
  e.bottom = vertical(rng);
  return e;
}

std::array<PatchSpec, 5> part_boxes_unclamped(const PoseKeypoints& kp, double foot_fraction) {
  kp.require_complete();
  using J = Joint;
  std::vector<Point> all;
  for (const auto& p : kp.joints) {
    if (p) all.push_back(*p);
  }
  const Box full = bounding_box(all);
  const double side = std::max(1.0, foot_fraction * full.h);
  const auto upper = collect(kp, {J::head, J::left_shoulder, J::right_shoulder, J::left_elbow, J::right_elbow,
                                  J::left_hand, J::right_hand, J::left_hip, J::right_hip});
  const auto lower = collect(kp, {J::left_hip, J::right_hip, J::left_knee, J::right_knee, J::left_foot, J::right_foot});
  return {PatchSpec{Part::right_foot, square_box(*kp[J::right_foot], side)},
          PatchSpec{Part::left_foot, square_box(*kp[J::left_foot], side)},
          PatchSpec{Part::upper_body, bounding_box(upper)}, PatchSpec{Part::lower_body, bounding_box(lower)},
          PatchSpec{Part::full_body, full}};
}

std::array<PatchSpec, 5> build_part_boxes(const PoseKeypoints& kp, std::size_t frame_w, std::size_t frame_h,
                                          double foot_fraction) {
  auto boxes = part_boxes_unclamped(kp, foot_fraction);
  for (auto& s : boxes) s.box = clamp_box(s.box, frame_w, frame_h);
  return boxes;
}

PatchSpec sample_augmented_box(const PatchSpec& spec, Rng& rng, std::size_t frame_w, std::size_t frame_h) {
  return {spec.part, clamp_box(extend_box(spec.box, sample_extensions(spec.box, rng)), frame_w, frame_h)};
}

PatchSpec center_test_box(const PatchSpec& spec, std::size_t frame_w, std::size_t frame_h) {
  const Extensions e{spec.box.w / 6, spec.box.w / 6, spec.box.h / 6, spec.box.h / 6};
  return {spec.part, clamp_box(extend_box(spec.box, e), frame_w, frame_h)};
}

void crop_resize_into(const optflow::FlowMap& flow, const Box& box, std::span<float> out) {
  if (!flow.has_encoding()) throw InputError("crop: flow map has no byte encoding");
  if (out.size() != kPatchValues) throw DimensionError("crop: output is not 3x48x48");
  const double fw = double(flow.width), fh = double(flow.height);
  if (!(box.w > 0 && box.h > 0) || box.x0 >= fw || box.y0 >= fh || box.x0 + box.w <= 0 || box.y0 + box.h <= 0) {
    throw InputError("crop: box does not intersect the flow map");
  }
  const long W = long(flow.width), H = long(flow.height);
  const std::size_t plane = flow.width * flow.height;
  const double sx = box.w / double(kPatchSide), sy = box.h / double(kPatchSide);
  for (std::size_t i = 0; i < kPatchSide; ++i) {
    const double y = std::clamp(box.y0 + (i + 0.5) * sy - 0.5, 0.0, fh - 1);
    const long y0 = std::min(long(y), H - 1), y1 = std::min(y0 + 1, H - 1);
    const double ay = y - y0;
    for (std::size_t j = 0; j < kPatchSide; ++j) {
      const double x = std::clamp(box.x0 + (j + 0.5) * sx - 0.5, 0.0, fw - 1);
      const long x0 = std::min(long(x), W - 1), x1 = std::min(x0 + 1, W - 1);
      const double ax = x - x0;
      for (std::size_t c = 0; c < 3; ++c) {
        const std::uint8_t* p = flow.encoded.data() + c * plane;
        const double v = (1 - ay) * ((1 - ax) * p[y0 * W + x0] + ax * p[y0 * W + x1]) +
                         ay * ((1 - ax) * p[y1 * W + x0] + ax * p[y1 * W + x1]);
        out[(c * kPatchSide + i) * kPatchSide + j] = static_cast<float>(v / 255.0);
      }
    }
  }
}

Patch crop_resize(const optflow::FlowMap& flow, const PatchSpec& spec, std::size_t pair_index) {
  Patch p{spec.part, pair_index, std::vector<float>(kPatchValues)};
  crop_resize_into(flow, spec.box, p.values);
  return p;
}

void patch_from_spec_into(const optflow::FlowMap& flow, const PatchSpec& spec, Rng* rng, std::span<float> out) {
  const auto box = rng ? sample_augmented_box(spec, *rng, flow.width, flow.height)
                       : center_test_box(spec, flow.width, flow.height);
  crop_resize_into(flow, box.box, out);
}

std::vector<Patch> patches_for_pair(const optflow::FlowMap& flow, const PoseKeypoints& kp,
                                    std::span<const Part> parts, std::size_t pair_index, Rng* rng,
                                    double foot_fraction) {
  const auto boxes = build_part_boxes(kp, flow.width, flow.height, foot_fraction);
  std::vector<Patch> out;
  for (Part part : parts) {
    Patch p{part, pair_index, std::vector<float>(kPatchValues)};
    patch_from_spec_into(flow, boxes[static_cast<std::size_t>(part)], rng, p.values);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PoseKeypoints> parse_keypoints(std::string_view text) {
  std::vector<PoseKeypoints> frames;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    long long frame = -1;
    std::string name;
    double x = 0, y = 0;
    if (!(ls >> frame >> name >> x >> y) || frame < 0) {
      throw InputError("keypoints line " + std::to_string(line_no) + ": expected 'frame joint x y'");
    }
    std::string rest;
    if (ls >> rest) throw InputError("keypoints line " + std::to_string(line_no) + ": trailing data");
    const auto joint = parse_joint(name);
    if (!joint) throw InputError("keypoints line " + std::to_string(line_no) + ": unknown joint '" + name + "'");
    if (!std::isfinite(x) || !std::isfinite(y)) {
      throw InputError("keypoints line " + std::to_string(line_no) + ": non-finite coordinate");
    }
    if (frames.size() <= std::size_t(frame)) {
      const std::size_t old = frames.size();
      frames.resize(frame + 1);
      for (std::size_t i = old; i < frames.size(); ++i) frames[i].frame = i;
    }
    frames[frame][*joint] = Point{x, y};
  }
  return frames;
}

std::string format_keypoints(std::span<const PoseKeypoints> frames) {
  std::string out;
  char buf[64];
  auto num = [&](double v) {
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
  };
  for (const auto& kp : frames) {
    for (std::size_t j = 0; j < kJointCount; ++j) {
      if (!kp.joints[j]) continue;
      out += std::to_string(kp.frame);
      out += ' ';
      out += kJointNames[j];
      out += ' ';
      num(kp.joints[j]->x);
      out += ' ';
      num(kp.joints[j]->y);
      out += '\n';
    }
  }
  return out;
}

std::vector<PoseKeypoints> read_keypoints(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open keypoints " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_keypoints(ss.str());
}

void write_keypoints(const std::filesystem::path& path, std::span<const PoseKeypoints> frames) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write keypoints " + path.string());
  os << format_keypoints(frames);
}

}  // namespace gait::posepatch
