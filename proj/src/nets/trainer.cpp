#include "gait/nets/trainer.hpp"

#include <atomic>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <exception>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

namespace gait::nets {

namespace k = tensornet::kernels;

TensorSource::TensorSource(std::vector<std::vector<float>> patches, std::vector<int> labels)
    : patches_(std::move(patches)), labels_(std::move(labels)) {
  if (patches_.size() != labels_.size()) throw InputError("TensorSource: patch and label counts differ");
  for (const auto& p : patches_) {
    if (p.size() != kPatchChannels * kPatchSize * kPatchSize) throw DimensionError("TensorSource: patch is not 3x48x48");
  }
}

void TensorSource::fill(std::size_t i, Rng*, std::span<float> out) const {
  std::copy(patches_.at(i).begin(), patches_.at(i).end(), out.begin());
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("train: learning_rate must be > 0");
  if (!(lr_decay_factor > 1)) throw ConfigError("train: lr_decay_factor must be > 1");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("train: momentum must be in [0, 1)");
  if (batch_size == 0) throw ConfigError("train: batch_size must be >= 1");
  if (max_epochs == 0) throw ConfigError("train: max_epochs must be >= 1");
  if (queue_depth == 0) throw ConfigError("train: queue_depth must be >= 1");
}

ScheduleEvent PlateauSchedule::observe(double val_accuracy, bool widen_available) {
  if (val_accuracy >= best_ + cfg_.min_improvement) {
    best_ = val_accuracy;
    since_best_ = 0;
    return ScheduleEvent::none;
  }
  if (++since_best_ < cfg_.patience) return ScheduleEvent::none;
  since_best_ = 0;
  if (can_widen_ && widen_available) return ScheduleEvent::widen;
  if (decays_ < cfg_.max_decays) {
    ++decays_;
    return ScheduleEvent::decay;
  }
  return ScheduleEvent::stop;
}

std::string format_epoch(const EpochRecord& r, Architecture arch) {
  std::ostringstream os;
  os << "epoch=" << r.epoch << std::setprecision(6) << " lr=" << r.learning_rate << " train_loss=" << r.train_loss
     << " train_acc=" << r.train_accuracy << " val_acc=" << r.val_accuracy;
  if (arch == Architecture::vgg) os << " width=" << r.dense_width;
  return os.str();
}

namespace {

struct Batch {
  Tensor<float> x;
  std::vector<int> labels;
};

template <typename Item>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity) {}

  bool push(Item item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }
  std::optional<Item> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    Item item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }
  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_full_.notify_all();
    not_empty_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<Item> items_;
  bool closed_ = false;
  std::mutex mu_;
  std::condition_variable not_full_, not_empty_;
};

constexpr std::size_t kPatchVolume = kPatchChannels * kPatchSize * kPatchSize;

class BalancedSampler {
 public:
  explicit BalancedSampler(const SampleSource& source) {
    for (std::size_t i = 0; i < source.size(); ++i) {
      const int label = source.label(i);
      if (label < 0) throw InputError("negative training label");
      if (static_cast<std::size_t>(label) >= by_class_.size()) by_class_.resize(label + 1);
      by_class_[label].push_back(i);
    }
    for (std::size_t c = 0; c < by_class_.size(); ++c) {
      if (!by_class_[c].empty()) classes_.push_back(c);
    }
    if (classes_.empty()) throw InputError("training set is empty");
  }

  // Cycles through a fresh class permutation so every batch is close to balanced.
  std::vector<std::size_t> draw(std::size_t count, Rng& rng) const {
    std::vector<std::size_t> out;
    out.reserve(count);
    std::vector<std::size_t> order = classes_;
    while (out.size() < count) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t c : order) {
        if (out.size() == count) break;
        const auto& members = by_class_[c];
        std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
        out.push_back(members[pick(rng)]);
      }
    }
    return out;
  }

 private:
  std::vector<std::vector<std::size_t>> by_class_;
  std::vector<std::size_t> classes_;
};

Batch make_batch(const SampleSource& source, const BalancedSampler& sampler, const TrainConfig& cfg,
                 std::size_t epoch, std::size_t index) {
  Rng rng = make_rng(cfg.seed, "sampling", {epoch, index});
  const auto picks = sampler.draw(cfg.batch_size, rng);
  Batch b{Tensor<float>({picks.size(), kPatchChannels, kPatchSize, kPatchSize}), std::vector<int>(picks.size())};
  const long n = static_cast<long>(picks.size());
#pragma omp parallel for schedule(static)
  for (long s = 0; s < n; ++s) {
    Rng aug = make_rng(cfg.seed, "augmentation", {epoch, index, static_cast<std::uint64_t>(s)});
    source.fill(picks[s], &aug, b.x.item(s));
  }
  for (std::size_t s = 0; s < picks.size(); ++s) b.labels[s] = source.label(picks[s]);
  return b;
}

}  // namespace

double train_step(Model<float>& model, const Tensor<float>& batch, std::span<const int> labels, double lr,
                  tensornet::NesterovMomentum<float>& opt, Rng& dropout_rng, std::size_t* correct) {
  model.params.zero_grad();
  auto logits = model.net.forward(batch, model.params, k::Mode::train, dropout_rng);
  auto sce = k::softmax_crossentropy<float>(logits, labels);
  model.net.backward(sce.grad_logits, model.params);
  const double penalty = tensornet::apply_l2_penalty(model.params, model.spec.l2);
  const double loss = sce.loss + penalty;
  if (!std::isfinite(loss)) {
    std::ostringstream os;
    os << "non-finite training loss (cross-entropy " << sce.loss << ", penalty " << penalty << ") at lr " << lr
       << ", batch of " << labels.size();
    throw NumericError(os.str());
  }
  opt.step(model.params, lr);
  if (correct) *correct = sce.correct;
  return loss;
}

double accuracy(const Model<float>& model, const SampleSource& source, std::size_t batch_size) {
  if (source.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t start = 0; start < source.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, source.size() - start);
    Tensor<float> x({n, kPatchChannels, kPatchSize, kPatchSize});
    const long nl = static_cast<long>(n);
#pragma omp parallel for schedule(static)
    for (long s = 0; s < nl; ++s) source.fill(start + s, nullptr, x.item(s));
    auto logits = model.net.logits(x, model.params);
    const std::size_t classes = logits.extent(1);
    for (std::size_t s = 0; s < n; ++s) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < classes; ++c) {
        if (logits(s, c) > logits(s, best)) best = c;
      }
      hits += static_cast<int>(best) == source.label(start + s);
    }
  }
  return static_cast<double>(hits) / static_cast<double>(source.size());
}

TrainResult train(Model<float>& model, const SampleSource& train_set, const SampleSource* val,
                  const TrainConfig& cfg, std::ostream* log) {
  cfg.validate();
  const BalancedSampler sampler(train_set);
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    if (static_cast<std::size_t>(train_set.label(i)) >= model.spec.classes) {
      throw InputError("training label " + std::to_string(train_set.label(i)) + " outside [0, " +
                       std::to_string(model.spec.classes) + ")");
    }
  }
  const std::size_t batches = cfg.batches_per_epoch
                                  ? cfg.batches_per_epoch
                                  : std::max<std::size_t>(1, (train_set.size() + cfg.batch_size - 1) / cfg.batch_size);
  const bool use_val = val && val->size() > 0;

  TrainResult result;
  PlateauSchedule schedule(cfg, model.spec.arch == Architecture::vgg);
  tensornet::NesterovMomentum<float> opt(cfg.momentum);
  double lr = cfg.learning_rate;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    BoundedQueue<Batch> queue(cfg.queue_depth);
    std::exception_ptr producer_error;
    std::thread producer([&] {
      try {
        for (std::size_t b = 0; b < batches; ++b) {
          if (!queue.push(make_batch(train_set, sampler, cfg, epoch, b))) return;
        }
      } catch (...) {
        producer_error = std::current_exception();
      }
      queue.close();
    });

    double loss_sum = 0.0;
    std::size_t hits = 0, seen = 0, b = 0;
    try {
      while (auto batch = queue.pop()) {
        Rng dropout = make_rng(cfg.seed, "dropout", {epoch, b++});
        std::size_t correct = 0;
        loss_sum += train_step(model, batch->x, batch->labels, lr, opt, dropout, &correct) *
                    static_cast<double>(batch->labels.size());
        hits += correct;
        seen += batch->labels.size();
      }
    } catch (const NumericError& e) {
      queue.close();
      producer.join();
      throw NumericError(std::string(e.what()) + "; epoch " + std::to_string(epoch) + ", batch " +
                         std::to_string(b));
    } catch (...) {
      queue.close();
      producer.join();
      throw;
    }
    producer.join();
    if (producer_error) std::rethrow_exception(producer_error);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = lr;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.train_accuracy = static_cast<double>(hits) / static_cast<double>(seen);
    rec.val_accuracy = use_val ? accuracy(model, *val, cfg.batch_size) : rec.train_accuracy;
    rec.dense_width = model.spec.arch == Architecture::vgg ? model.spec.dense_width : 0;
    result.history.push_back(rec);
    if (log) *log << format_epoch(rec, model.spec.arch) << '\n' << std::flush;

    const bool widen_available = model.spec.dense_width * 2 <= model.spec.dense_width_max;
    const auto event = schedule.observe(rec.val_accuracy, widen_available);
    if (event == ScheduleEvent::widen) {
      widen_dense(model);
      ++result.widenings;
    } else if (event == ScheduleEvent::decay) {
      lr /= cfg.lr_decay_factor;
    } else if (event == ScheduleEvent::stop) {
      break;
    }
  }
  result.decays = schedule.decays();
  return result;
}

}  // namespace gait::nets
