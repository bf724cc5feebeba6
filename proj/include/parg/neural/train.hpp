#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "parg/augment.hpp"
#include "parg/neural/checkpoint.hpp"
#include "parg/neural/loss.hpp"
#include "parg/neural/model.hpp"

namespace parg::neural {

/// Adam with bias correction.
class Adam {
 public:
  Adam() = default;
  explicit Adam(std::size_t n) : m_(n, 0.0), v_(n, 0.0) {}
  Adam(std::vector<double> m, std::vector<double> v, std::int64_t step);

  void update(std::vector<double>& params, std::span<const double> grad, double lr, const ModelConfig& cfg);

  const std::vector<double>& m() const { return m_; }
  const std::vector<double>& v() const { return v_; }
  std::int64_t step() const { return step_; }

 private:
  std::vector<double> m_, v_;
  std::int64_t step_ = 0;
};

/// Scales `grad` down to `max_norm` when its global L2 norm exceeds it.
/// Returns the norm before clipping.
double clip_global_norm(std::span<double> grad, double max_norm);

enum class PlateauEvent { improved, waiting, halved, stop };

std::string to_string(PlateauEvent e);

/// Learning-rate halving and early stopping on a per-epoch loss. Only a
/// strict decrease counts as improvement.
class PlateauSchedule {
 public:
  PlateauSchedule(double lr, int halve_patience, int stop_patience);

  PlateauEvent observe(double loss);

  double learning_rate() const { return lr_; }
  double best() const { return best_; }
  bool stopped() const { return stopped_; }

 private:
  double lr_;
  int halve_patience_;
  int stop_patience_;
  double best_ = std::numeric_limits<double>::infinity();
  int since_improvement_ = 0;
  int since_change_ = 0;
  bool stopped_ = false;
};

struct BatchResult {
  LossBreakdown loss;
  std::vector<double> grad;
  std::vector<ForwardPass> passes;
};

namespace serial {
/// Reference kernel: per-instance gradients summed in instance order.
BatchResult batch_gradient(const Model& model, std::span<const EncodedInstance> batch);
}  // namespace serial

namespace parallel {
/// OpenMP version of serial::batch_gradient with bit-identical results.
BatchResult batch_gradient(const Model& model, std::span<const EncodedInstance> batch, int threads);
}  // namespace parallel

/// Dispatches on model.config().threads.
BatchResult batch_gradient(const Model& model, std::span<const EncodedInstance> batch);

/// Joint loss of a whole set, computed instance by instance.
LossBreakdown evaluate_loss(const Model& model, std::span<const EncodedInstance> set);

/// Instances for one epoch; receives the current model so paraphrases can be
/// generated on the fly.
using InstanceStream = std::function<std::vector<TrainingInstance>(int epoch, const Model& model)>;
using BatchObserver = std::function<void(const Model&, std::span<const EncodedInstance>, const BatchResult&)>;

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_loss = 0.0;
  double learning_rate = 0.0;
  PlateauEvent event = PlateauEvent::waiting;
  std::size_t instances = 0;
};

struct TrainResult {
  Checkpoint best;
  std::vector<EpochRecord> history;
  bool early_stopped = false;
  /// Set when training hit a non-finite value; `best` is the last good state.
  std::optional<std::string> aborted;
};

struct TrainHooks {
  BatchObserver on_batch;
  std::function<void(const EpochRecord&)> on_epoch;
};

Checkpoint make_checkpoint(const Model& model, const Adam& adam, int epoch, double lr,
                           const std::vector<double>& dev_history);

/// Trains `model` in place and leaves the best-dev parameters in it.
TrainResult train(Model& model, const InstanceStream& stream, const std::vector<TrainingInstance>& dev,
                  const TrainHooks& hooks = {});

}  // namespace parg::neural
