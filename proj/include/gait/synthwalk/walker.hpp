#pragma once

// Synthetic side-view walkers: an articulated stick figure whose joint
// trajectories are driven by per-identity gait parameters, rendered over a
// static textured background.

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gait/io/pnm.hpp"
#include "gait/optflow/flow.hpp"
#include "gait/posepatch/patches.hpp"
#include "gait/rng.hpp"

namespace gait::synthwalk {

using optflow::Frame;
using Mask = io::Bitmap;

struct WalkerIdentity {
  double frequency = 0.04;      // gait cycles per frame
  double leg_amplitude = 9.0;   // forward/back excursion of the foot, px
  double arm_amplitude = 5.0;   // excursion of the hand, px
  double foot_lift = 4.0;       // knee flexion expressed as foot lift, px
  std::array<double, 4> phase{};  // offsets of knee, arm, elbow and sway, rad
  double sway_amplitude = 1.5;  // torso lean oscillation at the shoulders, px
  double height = 66.0;         // sole to top of head, px
  double speed = 0.2;           // px per frame, positive = rightwards
  double limb_width = 3.5;      // px

  /// ConfigError unless frequency is in (0.01, 0.2), amplitudes and speed are
  /// nonnegative and sizes positive.
  void validate() const;
  bool operator==(const WalkerIdentity&) const = default;
};

/// Number of fields in which two identities differ.
std::size_t differing_fields(const WalkerIdentity& a, const WalkerIdentity& b);

struct IdentityRanges {
  std::pair<double, double> frequency{0.03, 0.06};
  std::pair<double, double> leg_amplitude{5.0, 12.0};
  std::pair<double, double> arm_amplitude{2.5, 8.0};
  std::pair<double, double> foot_lift{2.0, 7.0};
  std::pair<double, double> phase{-0.8, 0.8};
  std::pair<double, double> sway_amplitude{0.5, 3.0};
  std::pair<double, double> height{56.0, 78.0};
  std::pair<double, double> speed{0.05, 0.35};
  std::pair<double, double> limb_width{2.5, 5.0};

  void validate() const;
  bool operator==(const IdentityRanges&) const = default;
};

WalkerIdentity sample_identity(const IdentityRanges& ranges, Rng& rng);

enum class Condition { normal, perturbed_a, perturbed_b };
std::string_view to_string(Condition c);
Condition parse_condition(std::string_view s);

struct VideoOptions {
  std::size_t frames = 64;
  std::size_t width = 64;
  std::size_t height = 96;
  double figure_intensity = 0.12;
};

struct SyntheticVideo {
  int label = 0;
  Condition condition = Condition::normal;
  Frame background;
  std::vector<Frame> frames;  // quantized to 8-bit levels
  std::vector<Mask> masks;
  std::vector<posepatch::PoseKeypoints> keypoints;
};

/// Joint positions at time t for a figure whose hip sits at hip_x. The left
/// side leads by half a cycle relative to the right.
posepatch::PoseKeypoints pose_at(const WalkerIdentity& id, double t, double start_phase, double hip_x,
                                 double ground_y);

/// Anti-aliased coverage in [0, 1] of the figure described by the keypoints.
std::vector<float> figure_coverage(const posepatch::PoseKeypoints& kp, const WalkerIdentity& id, std::size_t width,
                                   std::size_t height);

/// Smooth random texture in roughly [0.45, 0.9].
Frame textured_background(std::size_t width, std::size_t height, Rng& rng);

/// Renders one video. Conditions other than normal scale amplitude and
/// frequency fields by factors drawn from [0.9, 1.1]. A figure whose path
/// does not fit horizontally wraps back to the left edge of its admissible
/// range.
SyntheticVideo generate(const WalkerIdentity& id, Condition condition, const VideoOptions& options, Rng& rng,
                        int label = 0);

/// Identity actually rendered for a condition (exposed for tests).
WalkerIdentity perturb(const WalkerIdentity& id, Condition condition, Rng& rng);

/// Tight box of the foreground pixels; InputError on an empty mask.
posepatch::PatchSpec bbox_from_mask(const Mask& mask);

/// Threshold |frame - background| > threshold and keep the largest
/// 8-connected component (ties: the one met first in raster order).
Mask subtract_background(const Frame& frame, const Frame& background, double threshold = 0.25);
std::vector<Mask> subtract_background(const std::vector<Frame>& frames, const Frame& background,
                                      double threshold = 0.25);

Frame mask_to_frame(const Mask& m);

io::Image8 to_image(const Frame& f);  // round(255 v)
Frame from_image(const io::Image8& img);

}  // namespace gait::synthwalk
