#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <iosfwd>
#include <span>
#include <vector>

#include "gait/nets/architectures.hpp"
#include "gait/tensornet/optimizer.hpp"

namespace gait::nets {

/// Labelled patch source. `fill` writes one 3x48x48 patch; with an rng it may
/// augment, with nullptr it must be deterministic (validation).
class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::size_t size() const = 0;
  virtual int label(std::size_t i) const = 0;
  virtual void fill(std::size_t i, Rng* rng, std::span<float> out) const = 0;
};

/// In-memory samples, mostly for tests.
class TensorSource final : public SampleSource {
 public:
  TensorSource(std::vector<std::vector<float>> patches, std::vector<int> labels);
  std::size_t size() const override { return labels_.size(); }
  int label(std::size_t i) const override { return labels_[i]; }
  void fill(std::size_t i, Rng*, std::span<float> out) const override;

 private:
  std::vector<std::vector<float>> patches_;
  std::vector<int> labels_;
};

struct TrainConfig {
  double learning_rate = 0.1;
  double momentum = 0.9;
  double lr_decay_factor = 10.0;
  std::size_t max_decays = 3;
  std::size_t batch_size = 64;
  std::size_t batches_per_epoch = 0;  // 0: one pass worth of samples
  std::size_t max_epochs = 100;
  std::size_t patience = 5;
  double min_improvement = 0.001;  // absolute validation accuracy
  std::size_t queue_depth = 4;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double learning_rate = 0.0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  std::size_t dense_width = 0;  // vgg only

  bool operator==(const EpochRecord&) const = default;
};

enum class ScheduleEvent { none, widen, decay, stop };

/// Plateau policy. Validation accuracy must beat the best by `min_improvement`
/// within `patience` epochs; otherwise a VGG net below its maximum width is
/// widened, else the learning rate is divided by the decay factor, and after
/// `max_decays` decays training stops.
class PlateauSchedule {
 public:
  PlateauSchedule(const TrainConfig& cfg, bool can_widen) : cfg_(cfg), can_widen_(can_widen) {}
  ScheduleEvent observe(double val_accuracy, bool widen_available);
  std::size_t decays() const noexcept { return decays_; }

 private:
  TrainConfig cfg_;
  bool can_widen_;
  double best_ = -1.0;
  std::size_t since_best_ = 0;
  std::size_t decays_ = 0;
};

std::string format_epoch(const EpochRecord& r, Architecture arch);

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t widenings = 0;
  std::size_t decays = 0;
};

/// Trains `model` in place on class-balanced batches. Batches are assembled
/// by a producer thread; every random draw comes from substreams of
/// cfg.seed, so the loss curve does not depend on timing or thread count.
/// Validation accuracy uses `val` when non-null and non-empty, otherwise the
/// epoch's training accuracy. Each epoch line is written to `log` if given.
TrainResult train(Model<float>& model, const SampleSource& train_set, const SampleSource* val,
                  const TrainConfig& cfg, std::ostream* log = nullptr);

/// Mean softmax cross-entropy plus L2 penalty and gradient accumulation for
/// one batch; exposed for optimizer sanity tests.
double train_step(Model<float>& model, const Tensor<float>& batch, std::span<const int> labels, double lr,
                  tensornet::NesterovMomentum<float>& opt, Rng& dropout_rng, std::size_t* correct = nullptr);

/// Eval-mode accuracy over a source, in fixed order.
double accuracy(const Model<float>& model, const SampleSource& source, std::size_t batch_size = 64);

}  // namespace gait::nets
