#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gait/optflow/flow.hpp"
#include "gait/rng.hpp"

namespace gait::posepatch {

enum class Joint {
  head,
  left_shoulder,
  right_shoulder,
  left_elbow,
  right_elbow,
  left_hand,
  right_hand,
  left_hip,
  right_hip,
  left_knee,
  right_knee,
  left_foot,
  right_foot,
};
inline constexpr std::size_t kJointCount = 13;

std::string_view to_string(Joint j);
std::optional<Joint> parse_joint(std::string_view name);
bool is_required(Joint j);  // elbows are optional

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

/// Joint positions of one frame.
struct PoseKeypoints {
  std::size_t frame = 0;
  std::array<std::optional<Point>, kJointCount> joints{};

  const std::optional<Point>& operator[](Joint j) const { return joints[static_cast<std::size_t>(j)]; }
  std::optional<Point>& operator[](Joint j) { return joints[static_cast<std::size_t>(j)]; }
  /// Throws InputError naming the first missing required joint.
  void require_complete() const;
  bool operator==(const PoseKeypoints&) const = default;
};

enum class Part { right_foot, left_foot, upper_body, lower_body, full_body };
inline constexpr std::array<Part, 5> kCanonicalParts{Part::right_foot, Part::left_foot, Part::upper_body,
                                                      Part::lower_body, Part::full_body};

std::string_view to_string(Part p);
Part parse_part(std::string_view name);  // ConfigError on unknown names
/// Sorts into canonical order and rejects duplicates and empty lists.
std::vector<Part> canonical_parts(std::vector<Part> parts);

struct Box {
  double x0 = 0.0;
  double y0 = 0.0;
  double w = 1.0;
  double h = 1.0;
  bool operator==(const Box&) const = default;
};

struct PatchSpec {
  Part part = Part::full_body;
  Box box;
  bool operator==(const PatchSpec&) const = default;
};

/// Bounding box of points; sides below 1 px are widened to 1 around the centre.
Box bounding_box(std::span<const Point> points);

/// Square of the given side centred on p.
Box square_box(Point p, double side);

/// Intersection with the frame [0, w] x [0, h], widened to at least 1 px inside
/// the frame. Throws InputError when the box misses the frame entirely.
Box clamp_box(const Box& box, std::size_t frame_w, std::size_t frame_h);

struct Extensions {
  double left = 0, right = 0, top = 0, bottom = 0;
};

Box extend_box(const Box& box, const Extensions& e);

/// Left/right ~ U[0, w/3], top/bottom ~ U[0, h/3], drawn independently.
Extensions sample_extensions(const Box& box, Rng& rng);

/// Part boxes in canonical order, before clamping. Foot squares have side
/// foot_fraction x full-body height.
std::array<PatchSpec, 5> part_boxes_unclamped(const PoseKeypoints& kp, double foot_fraction = 0.25);
std::array<PatchSpec, 5> build_part_boxes(const PoseKeypoints& kp, std::size_t frame_w, std::size_t frame_h,
                                          double foot_fraction = 0.25);

PatchSpec sample_augmented_box(const PatchSpec& spec, Rng& rng, std::size_t frame_w, std::size_t frame_h);
PatchSpec center_test_box(const PatchSpec& spec, std::size_t frame_w, std::size_t frame_h);

inline constexpr std::size_t kPatchSide = 48;
inline constexpr std::size_t kPatchValues = 3 * kPatchSide * kPatchSide;

struct Patch {
  Part part = Part::full_body;
  std::size_t pair_index = 0;
  std::vector<float> values;  // 3 x 48 x 48, channel-major, in [0, 1]
};

/// Bilinear resample of `box` from the encoded flow to 48x48; source pixel
/// coordinate of output column j is x0 + (j + 0.5) w / 48 - 0.5, borders replicate.
void crop_resize_into(const optflow::FlowMap& flow, const Box& box, std::span<float> out);
Patch crop_resize(const optflow::FlowMap& flow, const PatchSpec& spec, std::size_t pair_index = 0);

/// Training (rng given: augmented) or test (rng null: centred) patch for one box.
void patch_from_spec_into(const optflow::FlowMap& flow, const PatchSpec& spec, Rng* rng, std::span<float> out);

/// Patches of one frame pair for the selected parts, in canonical order.
std::vector<Patch> patches_for_pair(const optflow::FlowMap& flow, const PoseKeypoints& kp,
                                    std::span<const Part> parts, std::size_t pair_index, Rng* rng,
                                    double foot_fraction = 0.25);

/// Sidecar with one `frame joint x y` record per line. Frames are returned
/// densely indexed 0..max; frames without records have no joints.
std::vector<PoseKeypoints> read_keypoints(const std::filesystem::path& path);
void write_keypoints(const std::filesystem::path& path, std::span<const PoseKeypoints> frames);
std::vector<PoseKeypoints> parse_keypoints(std::string_view text);
std::string format_keypoints(std::span<const PoseKeypoints> frames);

}  // namespace gait::posepatch
