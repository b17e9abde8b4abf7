#pragma once

// Nearest-neighbour identification and pairwise verification.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gait::recognizer {

enum class Metric { l1, l2 };
std::string_view to_string(Metric m);
Metric parse_metric(std::string_view s);  // ConfigError

double distance(std::span<const double> a, std::span<const double> b, Metric m);

struct Labeled {
  std::vector<double> vector;
  int label = 0;
};

class Gallery {
 public:
  /// InputError on an empty gallery or ragged dimensions.
  Gallery(std::vector<Labeled> entries, Metric metric);

  const std::vector<Labeled>& entries() const { return entries_; }
  const std::vector<int>& labels() const { return labels_; }  // sorted, unique
  Metric metric() const { return metric_; }
  std::size_t dim() const { return dim_; }
  bool enrolled(int label) const;

 private:
  std::vector<Labeled> entries_;
  std::vector<int> labels_;
  Metric metric_;
  std::size_t dim_ = 0;
};

struct Ranked {
  int label = 0;
  double distance = 0.0;
  bool operator==(const Ranked&) const = default;
};

/// Subjects by their closest gallery entry, ascending; ties go to the smaller label.
std::vector<Ranked> classify(const Gallery& gallery, std::span<const double> probe);

struct Identification {
  std::vector<double> cmc;  // cmc[r - 1] = fraction of probes with the true subject in the top r
  std::vector<std::size_t> true_rank;  // 1-based, per probe
  double rank1 = 0.0;
  double rank5 = 0.0;
};

/// InputError on an empty probe set or a probe whose label is not enrolled.
Identification evaluate_identification(const Gallery& gallery, std::span<const Labeled> probes);

struct RocPoint {
  double threshold = 0.0;  // pairs with distance <= threshold are accepted
  double far = 0.0;
  double frr = 0.0;
  bool operator==(const RocPoint&) const = default;
};

struct Verification {
  std::vector<RocPoint> roc;  // one point per distinct score, thresholds ascending
  double eer = 0.0;
  std::size_t genuine = 0;
  std::size_t impostor = 0;
};

/// Step-function ROC over every distinct score and the equal error rate by
/// linear interpolation between the bracketing points, starting from the
/// implicit (FAR 0, FRR 1) point below every score. InputError unless both
/// score lists are non-empty.
Verification verification_from_scores(std::span<const double> genuine, std::span<const double> impostor);

enum class PairScoring {
  per_video,        // every (gallery entry, probe) pair is scored
  min_over_subject  // one score per (probe, gallery subject): the closest entry
};

Verification evaluate_verification(std::span<const Labeled> gallery_side, std::span<const Labeled> probe_side,
                                   Metric metric, PairScoring scoring = PairScoring::per_video);

struct EvalReport {
  Metric metric = Metric::l1;
  std::size_t gallery_size = 0;
  std::size_t probe_count = 0;
  Identification identification;
  Verification verification;

  std::string to_text() const;
  std::string cmc_csv() const;
  std::string roc_csv() const;
};

EvalReport evaluate(const Gallery& gallery, std::span<const Labeled> probes,
                    PairScoring scoring = PairScoring::per_video);

}  // namespace gait::recognizer
