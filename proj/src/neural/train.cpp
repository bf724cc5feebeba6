#include "parg/neural/train.hpp"

#include <cmath>

#include <omp.h>

#include "parg/log.hpp"

namespace parg::neural {

Adam::Adam(std::vector<double> m, std::vector<double> v, std::int64_t step)
    : m_(std::move(m)), v_(std::move(v)), step_(step) {
  if (m_.size() != v_.size()) throw ValidationError("adam moments differ in size");
}

void Adam::update(std::vector<double>& params, std::span<const double> grad, double lr, const ModelConfig& cfg) {
  if (params.size() != m_.size() || grad.size() != m_.size())
    throw ValidationError("adam state does not match the parameter count");
  ++step_;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grad[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg.adam_epsilon);
  }
}

double clip_global_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (double& g : grad) g *= s;
  }
  return norm;
}

std::string to_string(PlateauEvent e) {
  switch (e) {
    case PlateauEvent::improved: return "improved";
    case PlateauEvent::waiting: return "waiting";
    case PlateauEvent::halved: return "halved";
    case PlateauEvent::stop: return "stop";
  }
  return "?";
}

PlateauSchedule::PlateauSchedule(double lr, int halve_patience, int stop_patience)
    : lr_(lr), halve_patience_(halve_patience), stop_patience_(stop_patience) {
  if (!(lr > 0.0)) throw ValidationError("learning rate must be positive");
  if (halve_patience < 1 || stop_patience < 1) throw ValidationError("patience values must be at least 1");
}

PlateauEvent PlateauSchedule::observe(double loss) {
  if (stopped_) return PlateauEvent::stop;
  if (loss < best_) {
    best_ = loss;
    since_improvement_ = 0;
    since_change_ = 0;
    return PlateauEvent::improved;
  }
  ++since_improvement_;
  ++since_change_;
  if (since_improvement_ >= stop_patience_) {
    stopped_ = true;
    return PlateauEvent::stop;
  }
  if (since_change_ >= halve_patience_) {
    lr_ *= 0.5;
    since_change_ = 0;
    return PlateauEvent::halved;
  }
  return PlateauEvent::waiting;
}

namespace {

std::array<int, 4> encoded_counts(std::span<const EncodedInstance> batch, const ModelConfig& cfg) {
  std::array<int, 4> c{};
  for (const auto& e : batch) {
    if (cfg.paraphrase_model) {
      c[kAction] += static_cast<int>(e.action.size());
      if (e.has_paraphrase_target) c[kParaphrase] += static_cast<int>(e.paraphrase.size());
    }
    c[kBelief] += static_cast<int>(e.belief.size());
    c[kResponse] += static_cast<int>(e.response.size());
  }
  return c;
}

}  // namespace

namespace serial {

BatchResult batch_gradient(const Model& model, std::span<const EncodedInstance> batch) {
  const std::size_t n = model.params().size();
  const LossScales scales = mean_scales(encoded_counts(batch, model.config()));
  BatchResult out;
  out.grad.assign(n, 0.0);
  std::vector<double> local(n);
  for (const auto& inst : batch) {
    std::fill(local.begin(), local.end(), 0.0);
    out.passes.push_back(model.forward(inst));
    model.backward(out.passes.back(), inst, scales, local);
    for (std::size_t j = 0; j < n; ++j) out.grad[j] += local[j];
  }
  out.loss = joint_loss(out.passes);
  return out;
}

}  // namespace serial

namespace parallel {

BatchResult batch_gradient(const Model& model, std::span<const EncodedInstance> batch, int threads) {
  const std::size_t n = model.params().size();
  const auto b = static_cast<std::ptrdiff_t>(batch.size());
  const LossScales scales = mean_scales(encoded_counts(batch, model.config()));
  BatchResult out;
  out.passes.resize(batch.size());
  std::vector<std::vector<double>> local(batch.size());
  const int nt = threads > 0 ? threads : omp_get_max_threads();

#pragma omp parallel for schedule(dynamic, 1) num_threads(nt)
  for (std::ptrdiff_t i = 0; i < b; ++i) {
    const auto k = static_cast<std::size_t>(i);
    local[k].assign(n, 0.0);
    out.passes[k] = model.forward(batch[k]);
    model.backward(out.passes[k], batch[k], scales, local[k]);
  }

  out.grad.assign(n, 0.0);
  const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static) num_threads(nt)
  for (std::ptrdiff_t j = 0; j < nn; ++j) {
    double acc = 0.0;
    for (const auto& g : local) acc += g[static_cast<std::size_t>(j)];
    out.grad[static_cast<std::size_t>(j)] = acc;
  }
  out.loss = joint_loss(out.passes);
  return out;
}

}  // namespace parallel

BatchResult batch_gradient(const Model& model, std::span<const EncodedInstance> batch) {
  if (model.config().threads == 1) return serial::batch_gradient(model, batch);
  return parallel::batch_gradient(model, batch, model.config().threads);
}

LossBreakdown evaluate_loss(const Model& model, std::span<const EncodedInstance> set) {
  LossAccumulator acc;
  for (const auto& inst : set) acc.add(model.forward(inst));
  return acc.result();
}

Checkpoint make_checkpoint(const Model& model, const Adam& adam, int epoch, double lr,
                           const std::vector<double>& dev_history) {
  Checkpoint c;
  c.config = model.config();
  c.vocab_tokens = model.vocab().tokens();
  c.vocab_reserved = model.vocab().reserved();
  c.params = model.params();
  c.adam_m = adam.m();
  c.adam_v = adam.v();
  c.step = adam.step();
  c.epoch = epoch;
  c.learning_rate = lr;
  c.dev_history = dev_history;
  return c;
}

namespace {

std::vector<EncodedInstance> encode_all(const Model& model, const std::vector<TrainingInstance>& instances) {
  std::vector<EncodedInstance> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(encode_instance(model.vocab(), inst, model.config()));
  return out;
}

}  // namespace

TrainResult train(Model& model, const InstanceStream& stream, const std::vector<TrainingInstance>& dev,
                  const TrainHooks& hooks) {
  const ModelConfig cfg = model.config();
  const auto dev_set = encode_all(model, dev);
  if (dev_set.empty()) logger().warn("no dev instances; early stopping follows the training loss");

  Adam adam(model.params().size());
  PlateauSchedule schedule(cfg.learning_rate, cfg.lr_halve_patience, cfg.early_stop_patience);
  std::vector<double> dev_history;
  TrainResult result;
  result.best = make_checkpoint(model, adam, 0, cfg.learning_rate, dev_history);

  try {
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
      const double lr = schedule.learning_rate();
      const auto instances = stream(epoch, model);
      const auto encoded = encode_all(model, instances);
      LossAccumulator train_acc;
      const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);
      for (std::size_t start = 0; start < encoded.size(); start += bs) {
        const std::span<const EncodedInstance> batch(encoded.data() + start, std::min(bs, encoded.size() - start));
        BatchResult r = batch_gradient(model, batch);
        if (hooks.on_batch) hooks.on_batch(model, batch, r);
        for (const auto& fp : r.passes) train_acc.add(fp);
        for (double g : r.grad)
          if (!std::isfinite(g)) throw NumericError("non-finite gradient in epoch " + std::to_string(epoch));
        clip_global_norm(r.grad, cfg.grad_clip);
        adam.update(model.params(), r.grad, lr, cfg);
      }

      EpochRecord rec;
      rec.epoch = epoch;
      rec.instances = encoded.size();
      rec.learning_rate = lr;
      rec.train_loss = train_acc.result().total;
      rec.dev_loss = dev_set.empty() ? rec.train_loss : evaluate_loss(model, dev_set).total;
      dev_history.push_back(rec.dev_loss);
      rec.event = schedule.observe(rec.dev_loss);
      logger().info("epoch {}: train {:.5f} dev {:.5f} lr {:.6g} ({})", epoch, rec.train_loss, rec.dev_loss, lr,
                    to_string(rec.event));
      if (rec.event == PlateauEvent::improved) result.best = make_checkpoint(model, adam, epoch, lr, dev_history);
      result.history.push_back(rec);
      if (hooks.on_epoch) hooks.on_epoch(rec);
      if (rec.event == PlateauEvent::stop) {
        result.early_stopped = true;
        break;
      }
    }
  } catch (const NumericError& e) {
    logger().error("training aborted: {}; keeping the checkpoint from epoch {}", e.what(), result.best.epoch);
    result.aborted = e.what();
  }
  model.params() = result.best.params;
  return result;
}

}  // namespace parg::neural
