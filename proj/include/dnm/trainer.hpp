#ifndef DNM_TRAINER_HPP
#define DNM_TRAINER_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dnm/dualnet.hpp"
#include "dnm/objectives.hpp"
#include "dnm/scene.hpp"

namespace dnm {

struct TrainConfig {
  ModelKind model = ModelKind::dnm6;
  std::size_t epochs = 50;
  std::size_t steps_per_epoch = 100;
  std::size_t batch_size = 2;
  LossWeights weights{};
  double lr_phase1 = 1e-4;
  double lr_phase2 = 0.5e-4;
  double lr_phase3 = 0.25e-4;
  std::size_t phase1_end = 30;  // first epoch of phase 2
  std::size_t phase2_end = 40;  // first epoch of phase 3
  AugmentOptions augment{};
  SmoothnessWeightSource smoothness_source = SmoothnessWeightSource::network_input;
  NetworkConfig network{};
  std::uint64_t seed = 0;

  void validate() const {
    weights.validate();
    network.validate();
    if (!(lr_phase1 > 0.0 && lr_phase2 > 0.0 && lr_phase3 > 0.0)) {
      throw ConfigError("TrainConfig: learning rates must be positive");
    }
    if (phase1_end > phase2_end) throw ConfigError("TrainConfig: phase boundaries must be ascending");
    if (batch_size == 0) throw ConfigError("TrainConfig: batch_size must be >= 1");
    if (steps_per_epoch == 0) throw ConfigError("TrainConfig: steps_per_epoch must be >= 1");
  }
};

/// Piecewise-constant learning-rate schedule.
inline double lr_at(const TrainConfig& cfg, std::size_t epoch) {
  if (epoch >= cfg.epochs) {
    throw ConfigError("lr_at: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(cfg.epochs) + ")");
  }
  if (epoch < cfg.phase1_end) return cfg.lr_phase1;
  if (epoch < cfg.phase2_end) return cfg.lr_phase2;
  return cfg.lr_phase3;
}

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::size_t step = 0;
};

/// Bias-corrected Adam update in place. A non-finite gradient aborts the step
/// before anything is modified.
inline void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state, double lr,
                      const AdamOptions& opt = {}) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient counts differ");
  for (std::size_t k = 0; k < params.size(); ++k) {
    require_same_shape(params[k], grads[k], "adam_step");
    for (double g : grads[k].values()) {
      if (!std::isfinite(g)) throw NumericalError("adam_step: non-finite gradient in parameter tensor " + std::to_string(k));
    }
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.shape(), 0.0);
      state.v.emplace_back(p.shape(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: optimizer state does not match parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(opt.beta1, t);
  const double c2 = 1.0 - std::pow(opt.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k].values();
    auto g = grads[k].values();
    auto m = state.m[k].values();
    auto v = state.v[k].values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g[i];
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + opt.eps);
    }
  }
}

struct LossRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  double lr = 0.0;
  LossBreakdown breakdown;
};

struct TrainCallbacks {
  std::function<void(const LossRecord&)> on_step;
  std::function<void(std::size_t epoch, const DualModel&)> on_epoch_end;
};

struct TrainResult {
  DualModel model;
  std::vector<LossRecord> history;
};

/// Forward both networks on a batch, evaluate the objective and return
/// gradients for [CNN-L params..., CNN-R params...].
struct StepEvaluation {
  LossBreakdown breakdown;
  std::vector<Tensor> grads;
};

inline StepEvaluation evaluate_step(const DualModel& model, const Tensor& left, const Tensor& right,
                                    const LossWeights& weights, const ObjectiveOptions& opt = {}) {
  Tape tape;
  const auto pl = add_params(tape, model.left);
  const auto pr = add_params(tape, model.right);
  std::vector<Var> pyr_l, pyr_r;
  for (auto& t : build_pyramid(left, kOutputScales)) pyr_l.push_back(tape.constant(std::move(t)));
  for (auto& t : build_pyramid(right, kOutputScales)) pyr_r.push_back(tape.constant(std::move(t)));
  const auto disp_l = forward(model.left.config, pl, pyr_l[0]);
  const auto disp_r = forward(model.right.config, pr, pyr_r[0]);
  const CostResult cost = total_cost(model.kind, pyr_l, pyr_r, disp_l, disp_r, weights, opt);
  StepEvaluation ev;
  ev.breakdown = cost.breakdown();
  if (!std::isfinite(ev.breakdown.total)) return ev;
  tape.backward(cost.total);
  for (const Var& v : pl) ev.grads.push_back(tape.grad(v));
  for (const Var& v : pr) ev.grads.push_back(tape.grad(v));
  return ev;
}

/// Batch `step` of an in-order pass over the dataset.
inline std::vector<const StereoSample*> batch_for_step(std::span<const StereoSample> data, std::size_t step,
                                                       std::size_t batch_size) {
  std::vector<const StereoSample*> out;
  for (std::size_t k = 0; k < batch_size; ++k) out.push_back(&data[(step * batch_size + k) % data.size()]);
  return out;
}

/// Joint optimisation of CNN-L and CNN-R. Samples are consumed in order,
/// cycling over `data`; each is augmented with draws from a generator seeded
/// with cfg.seed. Throws NumericalError on a non-finite loss; callbacks have
/// already seen every completed epoch by then.
inline TrainResult train(const TrainConfig& cfg, std::span<const StereoSample> data, const TrainCallbacks& cb = {}) {
  cfg.validate();
  if (data.empty() && cfg.epochs > 0) throw ConfigError("train: empty dataset");
  NetworkConfig net = cfg.network;
  net.seed = cfg.seed;
  TrainResult result{make_dual_model(cfg.model, net), {}};
  DualModel& model = result.model;
  const ObjectiveOptions opt{SsimConstants{}, cfg.smoothness_source};
  Rng aug_rng(cfg.seed ^ 0xA5A5A5A5DEADBEEFull);
  AdamState adam;

  std::vector<Tensor> params;
  auto gather = [&] {
    params.clear();
    params.insert(params.end(), model.left.tensors.begin(), model.left.tensors.end());
    params.insert(params.end(), model.right.tensors.begin(), model.right.tensors.end());
  };
  auto scatter = [&] {
    const std::size_t nl = model.left.tensors.size();
    for (std::size_t i = 0; i < params.size(); ++i) {
      (i < nl ? model.left.tensors[i] : model.right.tensors[i - nl]) = params[i];
    }
  };

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(cfg, epoch);
    for (std::size_t s = 0; s < cfg.steps_per_epoch; ++s, ++step) {
      std::vector<Tensor> lefts, rights;
      for (const StereoSample* sample : batch_for_step(data, step, cfg.batch_size)) {
        StereoSample a = augment(*sample, aug_rng, cfg.augment);
        lefts.push_back(std::move(a.left));
        rights.push_back(std::move(a.right));
      }
      StepEvaluation ev = evaluate_step(model, stack_batch(lefts), stack_batch(rights), cfg.weights, opt);
      if (!std::isfinite(ev.breakdown.total)) {
        throw NumericalError("train: non-finite loss at step " + std::to_string(step));
      }
      LossRecord rec{step, epoch, lr, std::move(ev.breakdown)};
      if (cb.on_step) cb.on_step(rec);
      result.history.push_back(std::move(rec));
      gather();
      adam_step(params, ev.grads, adam, lr);
      scatter();
    }
    if (cb.on_epoch_end) cb.on_epoch_end(epoch, model);
  }
  return result;
}

}  // namespace dnm

#endif  // DNM_TRAINER_HPP
