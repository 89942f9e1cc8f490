// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sinn/data.hpp"
#include "sinn/error.hpp"
#include "sinn/model.hpp"
#include "sinn/numerics.hpp"
#include "sinn/rng.hpp"

namespace sinn {

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 50;
  double clip_threshold = 25.0;
  double weight_decay = 0.0005;
  int epochs = 30;
  double lr_decay_factor = 0.1;
  int lr_decay_interval = 0;  // 0 selects the default max(1, epochs/3)
  std::uint64_t seed = 1;

  void validate() const {
    if (!(learning_rate >= 0.0)) throw Error("learning_rate must be nonnegative");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw Error("momentum must lie in [0, 1)");
    if (batch_size < 1) throw Error("batch_size must be at least 1");
    if (!(clip_threshold > 0.0)) throw Error("clip_threshold must be positive");
    if (!(weight_decay >= 0.0)) throw Error("weight_decay must be nonnegative");
    if (epochs < 0) throw Error("epochs must be nonnegative");
    if (lr_decay_interval < 0) throw Error("lr_decay_interval must be nonnegative");
  }

  int effective_decay_interval() const {
    if (lr_decay_interval > 0) return lr_decay_interval;
    return std::max(1, epochs / 3);
  }
};

/// Gradients share the parameter layout; tensor_refs applies to both.
using GradientSet = ModelParams;

struct EpochRecord {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double wall_time_s = 0.0;
  double lr = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
};

namespace detail {

inline void check_targets(const ModelParams& p, const std::vector<BinaryVec>& targets) {
  require(static_cast<int>(targets.size()) == p.num_layers(),
          "targets cover " + std::to_string(targets.size()) + " layers, model has " +
              std::to_string(p.num_layers()));
  for (int t = 0; t < p.num_layers(); ++t) {
    require(static_cast<int>(targets[t].size()) == p.layer_sizes[t],
            "targets for layer " + std::to_string(t) + " have wrong length");
    for (std::uint8_t v : targets[t])
      if (v > 1) throw Error("targets must be 0 or 1");
  }
}

/// Stable per-label cross-entropy on a logit: max(a,0) - a*y + log(1+e^-|a|).
inline double bce_logit(double a, double y) {
  return (a > 0.0 ? a : 0.0) - a * y + std::log1p(std::exp(-std::abs(a)));
}

}  // namespace detail

/// Cross-entropy of the trace's final activations against binary targets,
/// summed over layers and labels. Evaluated in log-sum form, never through a
/// saturated sigmoid.
inline double loss(const ForwardTrace& trace, const std::vector<BinaryVec>& targets) {
  if (trace.act.size() != targets.size())
    throw ShapeError("loss: trace and targets cover different layer counts");
  double total = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (trace.act[t].size() != targets[t].size())
      throw ShapeError("loss: layer " + std::to_string(t) + " size mismatch");
    for (std::size_t i = 0; i < targets[t].size(); ++i) {
      const std::uint8_t y = targets[t][i];
      if (y > 1) throw Error("loss: targets must be 0 or 1");
      total += detail::bce_logit(trace.act[t][i], static_cast<double>(y));
    }
  }
  return total;
}

namespace detail {

inline double relu_gate(double pre) { return pre > 0.0 ? 1.0 : 0.0; }

inline Vector gated(const Vector& adjoint, const Vector& pre, double sign) {
  Vector g(adjoint.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = sign * adjoint[i] * relu_gate(pre[i]);
  return g;
}

}  // namespace detail

/// Exact analytic gradient of loss() for the trace's variant. A trace built
/// under partial observation must be passed back with the same plan used for
/// the forward pass: clamped layers contribute no loss gradient of their own
/// and behave as constant message inputs, so no adjoint flows into them.
inline GradientSet backward(const ModelParams& p, const MaskSet& masks, const ForwardTrace& trace,
                            const std::vector<BinaryVec>& targets,
                            const ObservationPlan* plan = nullptr) {
  if (trace.variant != p.variant) throw Error("backward: trace was made by a different variant");
  if (trace.observed_any && !plan)
    throw Error("backward: a trace built under observation needs its observation plan");
  if (!trace.observed_any && plan)
    for (int t = 0; t < p.num_layers(); ++t)
      if (plan->is_observed(t))
        throw Error("backward: observation plan does not match an unobserved trace");
  detail::check_plan(p, plan);
  detail::check_targets(p, targets);

  const int T = p.num_layers();
  GradientSet g = zeros_like(p);
  const auto observed = [&](int t) { return plan && plan->is_observed(t); };
  // The message input layer `src` actually fed forward: clamped when observed.
  const auto src_in = [&](const std::vector<Vector>& acts, int src) -> const Vector& {
    return detail::message_source(acts, plan, src);
  };

  // dL/da_t of the final activations; a clamped layer's final activation is a
  // constant, so its loss term carries no gradient.
  std::vector<Vector> delta(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const Vector& prob = trace.prob[static_cast<std::size_t>(t)];
    Vector d(prob.size(), 0.0);
    if (!observed(t))
      for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = prob[i] - static_cast<double>(targets[static_cast<std::size_t>(t)][i]);
    delta[static_cast<std::size_t>(t)] = std::move(d);
  }

  // dL/dx_t accumulates from every path that consumes the visual activations.
  std::vector<Vector> dx(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t)
    dx[static_cast<std::size_t>(t)].assign(static_cast<std::size_t>(p.layer_sizes[t]), 0.0);

  auto axpy = [](Vector& acc, const Vector& v) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
  };

  switch (p.variant) {
    case Variant::logistic: {
      for (int t = 0; t < T; ++t) dx[t] = delta[t];
      break;
    }
    case Variant::topdown: {
      // Chain adjoint flows bottom layer to top: a_{t+1} consumes a_t.
      std::vector<Vector> gd(static_cast<std::size_t>(T));
      for (int t = T - 1; t >= 0; --t) {
        gd[t] = delta[t];
        if (t + 1 < T && !observed(t)) axpy(gd[t], matvec_transposed(p.down.inter[t], gd[t + 1]));
        if (t > 0) add_outer(g.down.inter[t - 1], gd[t], src_in(trace.down.act, t - 1));
        add_outer(g.down.intra[t], gd[t], trace.visual[t]);
        axpy(g.down.bias[t], gd[t]);
        axpy(dx[t], matvec_transposed(p.down.intra[t], gd[t]));
      }
      break;
    }
    case Variant::binn: {
      std::vector<Vector> gd(static_cast<std::size_t>(T)), gu(static_cast<std::size_t>(T));
      for (int t = 0; t < T; ++t) {
        add_outer(g.agg_down[t], delta[t], trace.down.act[t]);
        add_outer(g.agg_up[t], delta[t], trace.up.act[t]);
        axpy(g.agg_bias[t], delta[t]);
      }
      for (int t = T - 1; t >= 0; --t) {
        gd[t] = matvec_transposed(p.agg_down[t], delta[t]);
        if (t + 1 < T && !observed(t)) axpy(gd[t], matvec_transposed(p.down.inter[t], gd[t + 1]));
        if (t > 0) add_outer(g.down.inter[t - 1], gd[t], src_in(trace.down.act, t - 1));
        add_outer(g.down.intra[t], gd[t], trace.visual[t]);
        axpy(g.down.bias[t], gd[t]);
        axpy(dx[t], matvec_transposed(p.down.intra[t], gd[t]));
      }
      for (int t = 0; t < T; ++t) {
        gu[t] = matvec_transposed(p.agg_up[t], delta[t]);
        if (t > 0 && !observed(t)) axpy(gu[t], matvec_transposed(p.up.inter[t - 1], gu[t - 1]));
        if (t + 1 < T) add_outer(g.up.inter[t], gu[t], src_in(trace.up.act, t + 1));
        add_outer(g.up.intra[t], gu[t], trace.visual[t]);
        axpy(g.up.bias[t], gu[t]);
        axpy(dx[t], matvec_transposed(p.up.intra[t], gu[t]));
      }
      break;
    }
    case Variant::sinn: {
      std::vector<Vector> gd(static_cast<std::size_t>(T)), gu(static_cast<std::size_t>(T));
      for (int t = 0; t < T; ++t) {
        add_outer(g.agg_down[t], delta[t], trace.down.act[t]);
        add_outer(g.agg_up[t], delta[t], trace.up.act[t]);
        axpy(g.agg_bias[t], delta[t]);
      }
      // Down chain: layer t+1's rectified inter channels consume a_t.
      for (int t = T - 1; t >= 0; --t) {
        gd[t] = matvec_transposed(p.agg_down[t], delta[t]);
        if (t + 1 < T) {
          const Vector hp = detail::gated(gd[t + 1], trace.down.pre_inter[t + 1], 1.0);
          const Vector hn = detail::gated(gd[t + 1], trace.down.pre_inter_neg[t + 1], -1.0);
          if (!observed(t)) {
            axpy(gd[t], masked_matvec_transposed(p.down.inter[t], masks.inter_pos_down[t], hp));
            axpy(gd[t], masked_matvec_transposed(p.down.inter_neg[t], masks.inter_neg_down[t], hn));
          }
          add_outer(g.down.inter[t], hp, src_in(trace.down.act, t));
          add_outer(g.down.inter_neg[t], hn, src_in(trace.down.act, t));
        }
        const Vector hp = detail::gated(gd[t], trace.down.pre_intra[t], 1.0);
        const Vector hn = detail::gated(gd[t], trace.down.pre_intra_neg[t], -1.0);
        add_outer(g.down.intra[t], hp, trace.visual[t]);
        add_outer(g.down.intra_neg[t], hn, trace.visual[t]);
        axpy(g.down.bias[t], gd[t]);
        axpy(dx[t], masked_matvec_transposed(p.down.intra[t], masks.intra_pos[t], hp));
        axpy(dx[t], masked_matvec_transposed(p.down.intra_neg[t], masks.intra_neg[t], hn));
      }
      // Up chain: layer t-1's rectified inter channels consume a_t.
      for (int t = 0; t < T; ++t) {
        gu[t] = matvec_transposed(p.agg_up[t], delta[t]);
        if (t > 0) {
          const Vector hp = detail::gated(gu[t - 1], trace.up.pre_inter[t - 1], 1.0);
          const Vector hn = detail::gated(gu[t - 1], trace.up.pre_inter_neg[t - 1], -1.0);
          if (!observed(t)) {
            axpy(gu[t], masked_matvec_transposed(p.up.inter[t - 1], masks.inter_pos_up[t - 1], hp));
            axpy(gu[t],
                 masked_matvec_transposed(p.up.inter_neg[t - 1], masks.inter_neg_up[t - 1], hn));
          }
          add_outer(g.up.inter[t - 1], hp, src_in(trace.up.act, t));
          add_outer(g.up.inter_neg[t - 1], hn, src_in(trace.up.act, t));
        }
        const Vector hp = detail::gated(gu[t], trace.up.pre_intra[t], 1.0);
        const Vector hn = detail::gated(gu[t], trace.up.pre_intra_neg[t], -1.0);
        add_outer(g.up.intra[t], hp, trace.visual[t]);
        add_outer(g.up.intra_neg[t], hn, trace.visual[t]);
        axpy(g.up.bias[t], gu[t]);
        axpy(dx[t], masked_matvec_transposed(p.up.intra[t], masks.intra_pos[t], hp));
        axpy(dx[t], masked_matvec_transposed(p.up.intra_neg[t], masks.intra_neg[t], hn));
      }
      break;
    }
  }

  for (int t = 0; t < T; ++t) {
    add_outer(g.vis_weight[t], dx[t], trace.feature);
    axpy(g.vis_bias[t], dx[t]);
  }

  // Frozen entries receive exactly zero gradient.
  if (p.has_neg())
    for (TensorRef& r : tensor_refs(g, &masks))
      if (r.mask) apply_mask(*r.mat, *r.mask);
  return g;
}

/// One momentum-SGD update: weight decay on non-bias tensors, global-norm
/// clipping, velocity update, parameter update, then re-zeroing of masked
/// structured entries and their velocities. Returns the clipping scale.
inline double sgd_step(ModelParams& p, ModelParams& velocity, GradientSet& grads,
                       const TrainConfig& cfg, const MaskSet* masks = nullptr) {
  cfg.validate();
  std::vector<TensorRef> rp = tensor_refs(p, masks);
  std::vector<TensorRef> rv = tensor_refs(velocity, masks);
  std::vector<TensorRef> rg = tensor_refs(grads, masks);
  detail::require(rp.size() == rv.size() && rp.size() == rg.size(),
                  "sgd_step: parameter/velocity/gradient layout mismatch");

  if (cfg.weight_decay > 0.0)
    for (std::size_t k = 0; k < rp.size(); ++k) {
      if (rp[k].is_bias) continue;
      double* g = rg[k].data();
      const double* w = rp[k].data();
      for (std::size_t i = 0; i < rp[k].size(); ++i) g[i] += cfg.weight_decay * w[i];
    }

  std::vector<TensorView> views;
  views.reserve(rg.size());
  for (const TensorRef& r : rg) views.push_back(r.view());
  const double scale = clip_global_norm(views, cfg.clip_threshold);

  for (std::size_t k = 0; k < rp.size(); ++k) {
    detail::require(rp[k].size() == rv[k].size() && rp[k].size() == rg[k].size(),
                    "sgd_step: tensor shape mismatch at " + rp[k].name);
    double* w = rp[k].data();
    double* v = rv[k].data();
    const double* gr = rg[k].data();
    for (std::size_t i = 0; i < rp[k].size(); ++i) {
      v[i] = cfg.momentum * v[i] - cfg.learning_rate * gr[i];
      w[i] += v[i];
    }
    if (rp[k].mask) {
      apply_mask(*rp[k].mat, *rp[k].mask);
      apply_mask(*rv[k].mat, *rv[k].mask);
    }
  }
  return scale;
}

/// Mini-batch SGD over the dataset: per-epoch reshuffle from cfg.seed,
/// fixed-order gradient accumulation within each batch, stepped learning-rate
/// decay. Deterministic given (dataset order, cfg).
inline TrainLog fit(const Dataset& ds, ModelParams& p, const MaskSet& masks,
                    const TrainConfig& cfg,
                    const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  if (ds.samples.empty()) throw Error("fit: dataset is empty");
  detail::require(ds.feature_dim == p.feature_dim, "fit: dataset feature dim differs from model");

  const int N = static_cast<int>(ds.samples.size());
  Rng rng(cfg.seed);
  ModelParams velocity = zeros_like(p);
  const MaskSet* step_masks = p.has_neg() ? &masks : nullptr;
  const int interval = cfg.effective_decay_interval();

  TrainLog log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    TrainConfig step_cfg = cfg;
    step_cfg.learning_rate = cfg.learning_rate;
    for (int k = 0; k < epoch / interval; ++k) step_cfg.learning_rate *= cfg.lr_decay_factor;

    const std::vector<int> perm = rng.permutation(N);
    double loss_sum = 0.0;
    for (int start = 0; start < N; start += cfg.batch_size) {
      const int stop = std::min(N, start + cfg.batch_size);
      GradientSet batch = zeros_like(p);
      std::vector<TensorRef> acc = tensor_refs(batch);
      for (int k = start; k < stop; ++k) {
        const Sample& s = ds.samples[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
        const ForwardTrace trace = run_forward(p, masks, s.feature);
        const double l = loss(trace, s.targets);
        if (!std::isfinite(l)) throw NumericError("fit: loss diverged to a non-finite value");
        loss_sum += l;
        GradientSet gs = backward(p, masks, trace, s.targets);
        std::vector<TensorRef> add = tensor_refs(gs);
        for (std::size_t r = 0; r < acc.size(); ++r) {
          double* a = acc[r].data();
          const double* b = add[r].data();
          for (std::size_t i = 0; i < acc[r].size(); ++i) a[i] += b[i];
        }
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (TensorRef& r : acc)
        for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] *= inv;
      sgd_step(p, velocity, batch, step_cfg, step_masks);
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.mean_loss = loss_sum / static_cast<double>(N);
    rec.lr = step_cfg.learning_rate;
    rec.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return log;
}

}  // namespace sinn
