// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "sinn/error.hpp"
#include "sinn/graph.hpp"
#include "sinn/numerics.hpp"
#include "sinn/observation.hpp"
#include "sinn/rng.hpp"

namespace sinn {

enum class Variant { logistic, topdown, binn, sinn };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::logistic: return "logistic";
    case Variant::topdown: return "topdown";
    case Variant::binn: return "binn";
    case Variant::sinn: return "sinn";
  }
  throw Error("unknown variant tag");
}

inline Variant variant_from_string(std::string_view s) {
  if (s == "logistic") return Variant::logistic;
  if (s == "topdown") return Variant::topdown;
  if (s == "binn") return Variant::binn;
  if (s == "sinn") return Variant::sinn;
  throw Error("unknown variant '" + std::string(s) + "'");
}

/// Weights for one propagation direction. `inter[k]` carries the message
/// across adjacent pair k: downward it maps layer k into layer k+1 (shape
/// n_{k+1} x n_k), upward it maps layer k+1 into layer k (n_k x n_{k+1}).
/// `intra[t]` couples layer t's visual activations into itself (n_t x n_t).
/// The *_neg channels exist only for the structured variant.
struct DirectionalParams {
  std::vector<Matrix> inter;
  std::vector<Matrix> inter_neg;
  std::vector<Matrix> intra;
  std::vector<Matrix> intra_neg;
  std::vector<Vector> bias;

  bool operator==(const DirectionalParams&) const = default;
};

/// All learnable tensors of one model plus the shape metadata needed to
/// reconstruct them. Which families are populated depends on the variant:
/// logistic has only the visual projection; topdown adds the down direction;
/// binn and sinn add the up direction and the aggregation.
struct ModelParams {
  Variant variant = Variant::logistic;
  int feature_dim = 0;
  std::vector<int> layer_sizes;
  std::uint64_t graph_hash = 0;

  std::vector<Matrix> vis_weight;  // n_t x d
  std::vector<Vector> vis_bias;
  DirectionalParams down, up;
  std::vector<Matrix> agg_down, agg_up;  // dense n_t x n_t, never masked
  std::vector<Vector> agg_bias;

  int num_layers() const { return static_cast<int>(layer_sizes.size()); }
  bool has_down() const { return variant != Variant::logistic; }
  bool has_up() const { return variant == Variant::binn || variant == Variant::sinn; }
  bool has_neg() const { return variant == Variant::sinn; }

  bool operator==(const ModelParams&) const = default;
};

/// Activations of one directional pass. The pre_* fields hold the structured
/// variant's pre-ReLU channel products; entries stay empty for layers where a
/// channel does not exist (no inter term at the pass's starting layer).
struct DirectionalTrace {
  std::vector<Vector> act;
  std::vector<Vector> pre_inter, pre_inter_neg;
  std::vector<Vector> pre_intra, pre_intra_neg;
};

/// Everything a forward pass computed, retained for exact backpropagation.
struct ForwardTrace {
  Variant variant = Variant::logistic;
  Vector feature;
  std::vector<Vector> visual;  // x_t
  DirectionalTrace down, up;   // populated per variant
  std::vector<Vector> act;     // final activations a_t, every variant
  std::vector<Vector> prob;    // sigmoid(a_t)
  bool observed_any = false;   // true when built under partial observation
};

namespace detail {

inline void check_feature(const ModelParams& p, const Vector& feature) {
  require(static_cast<int>(feature.size()) == p.feature_dim,
          "feature has length " + std::to_string(feature.size()) + ", model expects " +
              std::to_string(p.feature_dim));
}

/// Source activation layer `t` feeds into its neighbor: the clamped vector
/// when the layer is observed, its own computed activation otherwise.
inline const Vector& message_source(const std::vector<Vector>& act, const ObservationPlan* plan,
                                    int t) {
  if (plan && plan->is_observed(t)) return plan->act[static_cast<std::size_t>(t)];
  return act[static_cast<std::size_t>(t)];
}

/// One step of the dense recursion: inter * src + intra * x + b. The same
/// code path serves the top-down model and both directions of the
/// bidirectional one, which keeps their arithmetic identical operation for
/// operation.
inline Vector chain_step(const Matrix* inter, const Vector* src, const Matrix& intra,
                         const Vector& x, const Vector& b) {
  Vector acc = inter ? matvec(*inter, *src) : Vector(intra.rows, 0.0);
  const Vector hx = matvec(intra, x);
  require(acc.size() == hx.size() && hx.size() == b.size(), "chain_step: shape mismatch");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += hx[i] + b[i];
  return acc;
}

}  // namespace detail

/// Allocates zero-filled tensors of the right shapes for (variant, sizes, d).
inline ModelParams make_params(Variant variant, std::vector<int> layer_sizes, int feature_dim,
                               std::uint64_t graph_hash = 0) {
  if (feature_dim < 1) throw Error("feature_dim must be at least 1");
  if (layer_sizes.empty()) throw Error("model needs at least one layer");
  for (int n : layer_sizes)
    if (n < 1) throw Error("every layer needs at least one label");

  ModelParams p;
  p.variant = variant;
  p.feature_dim = feature_dim;
  p.layer_sizes = std::move(layer_sizes);
  p.graph_hash = graph_hash;
  const int T = p.num_layers();

  for (int t = 0; t < T; ++t) {
    p.vis_weight.emplace_back(p.layer_sizes[t], feature_dim);
    p.vis_bias.emplace_back(p.layer_sizes[t], 0.0);
  }

  auto fill_direction = [&](DirectionalParams& d, bool downward) {
    for (int k = 0; k + 1 < T; ++k) {
      const int r = downward ? p.layer_sizes[k + 1] : p.layer_sizes[k];
      const int c = downward ? p.layer_sizes[k] : p.layer_sizes[k + 1];
      d.inter.emplace_back(r, c);
      if (p.has_neg()) d.inter_neg.emplace_back(r, c);
    }
    for (int t = 0; t < T; ++t) {
      d.intra.emplace_back(p.layer_sizes[t], p.layer_sizes[t]);
      if (p.has_neg()) d.intra_neg.emplace_back(p.layer_sizes[t], p.layer_sizes[t]);
      d.bias.emplace_back(p.layer_sizes[t], 0.0);
    }
  };
  if (p.has_down()) fill_direction(p.down, true);
  if (p.has_up()) {
    fill_direction(p.up, false);
    for (int t = 0; t < T; ++t) {
      p.agg_down.emplace_back(p.layer_sizes[t], p.layer_sizes[t]);
      p.agg_up.emplace_back(p.layer_sizes[t], p.layer_sizes[t]);
      p.agg_bias.emplace_back(p.layer_sizes[t], 0.0);
    }
  }
  return p;
}

inline ModelParams make_params(const LabelGraph& g, int feature_dim, Variant variant) {
  return make_params(variant, g.layer_sizes(), feature_dim, graph_hash(g));
}

/// Handle to one learnable tensor; the enumeration order of tensor_refs is
/// the canonical order used by the optimizer, the clipping set, and the
/// checkpoint layout. `mask` is non-null only for structured tensors.
struct TensorRef {
  std::string name;
  Matrix* mat = nullptr;
  Vector* vec = nullptr;
  bool is_bias = false;
  const Mask* mask = nullptr;

  double* data() const { return mat ? mat->data.data() : vec->data(); }
  std::size_t size() const { return mat ? mat->data.size() : vec->size(); }
  TensorView view() const { return {data(), size()}; }
};

/// Enumerates every learnable tensor in a fixed order. Pass the compiled
/// masks to have structured tensors annotated with their connectivity.
inline std::vector<TensorRef> tensor_refs(ModelParams& p, const MaskSet* masks = nullptr) {
  std::vector<TensorRef> refs;
  const int T = p.num_layers();
  auto mat = [&](const std::string& name, Matrix& m, const Mask* mask = nullptr) {
    refs.push_back({name, &m, nullptr, false, mask});
  };
  auto vec = [&](const std::string& name, Vector& v) {
    refs.push_back({name, nullptr, &v, true, nullptr});
  };
  auto idx = [](const std::string& stem, int i) { return stem + "." + std::to_string(i); };

  for (int t = 0; t < T; ++t) mat(idx("vis_weight", t), p.vis_weight[t]);
  for (int t = 0; t < T; ++t) vec(idx("vis_bias", t), p.vis_bias[t]);

  const bool structured = p.has_neg() && masks != nullptr;
  auto direction = [&](const std::string& stem, DirectionalParams& d, bool downward) {
    const std::vector<Mask>* ip = nullptr;
    const std::vector<Mask>* in = nullptr;
    if (structured) {
      ip = downward ? &masks->inter_pos_down : &masks->inter_pos_up;
      in = downward ? &masks->inter_neg_down : &masks->inter_neg_up;
    }
    for (int k = 0; k + 1 < T; ++k)
      mat(idx(stem + ".inter", k), d.inter[k], ip ? &(*ip)[k] : nullptr);
    for (int k = 0; k + 1 < T && p.has_neg(); ++k)
      mat(idx(stem + ".inter_neg", k), d.inter_neg[k], in ? &(*in)[k] : nullptr);
    for (int t = 0; t < T; ++t)
      mat(idx(stem + ".intra", t), d.intra[t], structured ? &masks->intra_pos[t] : nullptr);
    for (int t = 0; t < T && p.has_neg(); ++t)
      mat(idx(stem + ".intra_neg", t), d.intra_neg[t],
          structured ? &masks->intra_neg[t] : nullptr);
    for (int t = 0; t < T; ++t) vec(idx(stem + ".bias", t), d.bias[t]);
  };
  if (p.has_down()) direction("down", p.down, true);
  if (p.has_up()) {
    direction("up", p.up, false);
    for (int t = 0; t < T; ++t) mat(idx("agg_down", t), p.agg_down[t]);
    for (int t = 0; t < T; ++t) mat(idx("agg_up", t), p.agg_up[t]);
    for (int t = 0; t < T; ++t) vec(idx("agg_bias", t), p.agg_bias[t]);
  }
  return refs;
}

/// Same-shaped parameter set with every tensor zeroed; gradient and velocity
/// storage reuse the ModelParams layout.
inline ModelParams zeros_like(const ModelParams& p) {
  return make_params(p.variant, p.layer_sizes, p.feature_dim, p.graph_hash);
}

/// Draws every weight matrix uniform in [-s, s] with s = sqrt(6/(fan_in +
/// fan_out)), leaves biases at zero, and zeroes masked-out structured
/// entries. Deterministic given the seed.
inline ModelParams init_params(const LabelGraph& g, const MaskSet& masks, int feature_dim,
                               Variant variant, std::uint64_t seed) {
  ModelParams p = make_params(g, feature_dim, variant);
  Rng rng(seed);
  for (TensorRef& r : tensor_refs(p, &masks)) {
    if (r.is_bias) continue;
    const double s = std::sqrt(6.0 / (r.mat->rows + r.mat->cols));
    for (double& w : r.mat->data) w = rng.uniform_pm(s);
    if (r.mask) apply_mask(*r.mat, *r.mask);
  }
  return p;
}

/// Throws unless every structured entry at a false mask position is exactly
/// zero; cheap scan used as the forward pass's precondition.
inline void check_masked_zero(const ModelParams& p, const MaskSet& masks) {
  auto check = [](const Matrix& w, const Mask& mask, const std::string& name) {
    detail::require(w.data.size() == mask.data.size(), "check_masked_zero: shape mismatch");
    for (std::size_t i = 0; i < w.data.size(); ++i)
      if (!mask.data[i] && w.data[i] != 0.0)
        throw Error("masked-out entry of " + name + " is nonzero");
  };
  const int T = p.num_layers();
  for (int k = 0; k + 1 < T; ++k) {
    check(p.down.inter[k], masks.inter_pos_down[k], "down.inter." + std::to_string(k));
    check(p.down.inter_neg[k], masks.inter_neg_down[k], "down.inter_neg." + std::to_string(k));
    check(p.up.inter[k], masks.inter_pos_up[k], "up.inter." + std::to_string(k));
    check(p.up.inter_neg[k], masks.inter_neg_up[k], "up.inter_neg." + std::to_string(k));
  }
  for (int t = 0; t < T; ++t) {
    check(p.down.intra[t], masks.intra_pos[t], "down.intra." + std::to_string(t));
    check(p.down.intra_neg[t], masks.intra_neg[t], "down.intra_neg." + std::to_string(t));
    check(p.up.intra[t], masks.intra_pos[t], "up.intra." + std::to_string(t));
    check(p.up.intra_neg[t], masks.intra_neg[t], "up.intra_neg." + std::to_string(t));
  }
}

/// x_t = W_t * feature + b_t for every layer.
inline std::vector<Vector> visual_activations(const ModelParams& p, const Vector& feature) {
  detail::check_feature(p, feature);
  std::vector<Vector> xs;
  xs.reserve(p.vis_weight.size());
  for (std::size_t t = 0; t < p.vis_weight.size(); ++t)
    xs.push_back(affine(p.vis_weight[t], feature, p.vis_bias[t]));
  return xs;
}

namespace detail {

/// Shared dense directional recursion. `downward` controls which boundary
/// lacks the inter-layer term and which neighbor feeds each layer.
inline std::vector<Vector> dense_pass(const DirectionalParams& d, const std::vector<Vector>& xs,
                                      bool downward, const ObservationPlan* plan) {
  const int T = static_cast<int>(xs.size());
  std::vector<Vector> act(static_cast<std::size_t>(T));
  const int first = downward ? 0 : T - 1;
  const int step = downward ? 1 : -1;
  for (int t = first; t >= 0 && t < T; t += step) {
    if (t == first) {
      act[t] = chain_step(nullptr, nullptr, d.intra[t], xs[t], d.bias[t]);
    } else {
      const int src = t - step;
      const int pair = downward ? t - 1 : t;  // adjacent pair index of the inter matrix
      const Vector& in = message_source(act, plan, src);
      act[t] = chain_step(&d.inter[pair], &in, d.intra[t], xs[t], d.bias[t]);
    }
  }
  return act;
}

/// Structured directional recursion with rectified signed channels. Stores
/// every pre-ReLU product in the trace.
inline void structured_pass(const DirectionalParams& d, const MaskSet& masks,
                            const std::vector<Vector>& xs, bool downward,
                            const ObservationPlan* plan, DirectionalTrace& tr) {
  const int T = static_cast<int>(xs.size());
  tr.act.resize(T);
  tr.pre_inter.resize(T);
  tr.pre_inter_neg.resize(T);
  tr.pre_intra.resize(T);
  tr.pre_intra_neg.resize(T);
  const std::vector<Mask>& inter_pos = downward ? masks.inter_pos_down : masks.inter_pos_up;
  const std::vector<Mask>& inter_neg = downward ? masks.inter_neg_down : masks.inter_neg_up;

  const int first = downward ? 0 : T - 1;
  const int step = downward ? 1 : -1;
  for (int t = first; t >= 0 && t < T; t += step) {
    const bool has_inter = t != first;
    if (has_inter) {
      const int src = t - step;
      const int pair = downward ? t - 1 : t;
      const Vector& in = message_source(tr.act, plan, src);
      tr.pre_inter[t] = masked_matvec(d.inter[pair], inter_pos[pair], in);
      tr.pre_inter_neg[t] = masked_matvec(d.inter_neg[pair], inter_neg[pair], in);
    }
    tr.pre_intra[t] = masked_matvec(d.intra[t], masks.intra_pos[t], xs[t]);
    tr.pre_intra_neg[t] = masked_matvec(d.intra_neg[t], masks.intra_neg[t], xs[t]);

    const std::size_t n = tr.pre_intra[t].size();
    Vector a(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double gp_inter = has_inter ? relu(tr.pre_inter[t][i]) : 0.0;
      const double gn_inter = has_inter ? relu(tr.pre_inter_neg[t][i]) : 0.0;
      a[i] = gp_inter + relu(tr.pre_intra[t][i]) - gn_inter - relu(tr.pre_intra_neg[t][i]) +
             d.bias[t][i];
    }
    tr.act[t] = std::move(a);
  }
}

/// Final activations: aggregation of both directions for bidirectional
/// variants, then the observed layers' clamped vectors substituted in.
inline void finish_trace(const ModelParams& p, const ObservationPlan* plan, ForwardTrace& tr) {
  const int T = p.num_layers();
  if (p.has_up()) {
    tr.act.resize(T);
    for (int t = 0; t < T; ++t) {
      Vector a = matvec(p.agg_down[t], tr.down.act[t]);
      const Vector u = matvec(p.agg_up[t], tr.up.act[t]);
      for (int i = 0; i < p.layer_sizes[t]; ++i) a[i] += u[i] + p.agg_bias[t][i];
      tr.act[t] = std::move(a);
    }
  } else if (p.has_down()) {
    tr.act = tr.down.act;
  } else {
    tr.act = tr.visual;
  }
  if (plan) {
    for (int t = 0; t < T; ++t)
      if (plan->is_observed(t)) {
        tr.act[t] = plan->act[t];
        tr.observed_any = true;
      }
  }
  tr.prob.resize(T);
  for (int t = 0; t < T; ++t) tr.prob[t] = sigmoid(tr.act[t]);
}

inline void check_plan(const ModelParams& p, const ObservationPlan* plan) {
  if (!plan) return;
  require(static_cast<int>(plan->observed.size()) == p.num_layers(),
          "observation plan covers a different number of layers than the model");
  for (int t = 0; t < p.num_layers(); ++t)
    if (plan->is_observed(t))
      require(static_cast<int>(plan->act[t].size()) == p.layer_sizes[t],
              "observation plan layer size mismatch");
}

}  // namespace detail

inline ForwardTrace forward_topdown(const ModelParams& p, const std::vector<Vector>& xs,
                                    const ObservationPlan* plan = nullptr) {
  if (p.variant != Variant::topdown) throw Error("forward_topdown: wrong variant");
  detail::check_plan(p, plan);
  ForwardTrace tr;
  tr.variant = p.variant;
  tr.visual = xs;
  tr.down.act = detail::dense_pass(p.down, xs, true, plan);
  detail::finish_trace(p, plan, tr);
  return tr;
}

inline ForwardTrace forward_binn(const ModelParams& p, const std::vector<Vector>& xs,
                                 const ObservationPlan* plan = nullptr) {
  if (p.variant != Variant::binn) throw Error("forward_binn: wrong variant");
  detail::check_plan(p, plan);
  ForwardTrace tr;
  tr.variant = p.variant;
  tr.visual = xs;
  tr.down.act = detail::dense_pass(p.down, xs, true, plan);
  tr.up.act = detail::dense_pass(p.up, xs, false, plan);
  detail::finish_trace(p, plan, tr);
  return tr;
}

inline ForwardTrace forward_sinn(const ModelParams& p, const MaskSet& masks,
                                 const std::vector<Vector>& xs,
                                 const ObservationPlan* plan = nullptr) {
  if (p.variant != Variant::sinn) throw Error("forward_sinn: wrong variant");
  detail::check_plan(p, plan);
  check_masked_zero(p, masks);
  ForwardTrace tr;
  tr.variant = p.variant;
  tr.visual = xs;
  detail::structured_pass(p.down, masks, xs, true, plan, tr.down);
  detail::structured_pass(p.up, masks, xs, false, plan, tr.up);
  detail::finish_trace(p, plan, tr);
  return tr;
}

/// Runs the visual projection and the variant's forward pass; the trace keeps
/// the input feature for backpropagation.
inline ForwardTrace run_forward(const ModelParams& p, const MaskSet& masks,
                                const Vector& feature,
                                const ObservationPlan* plan = nullptr) {
  const std::vector<Vector> xs = visual_activations(p, feature);
  ForwardTrace tr;
  switch (p.variant) {
    case Variant::logistic: {
      detail::check_plan(p, plan);
      tr.variant = p.variant;
      tr.visual = xs;
      detail::finish_trace(p, plan, tr);
      break;
    }
    case Variant::topdown: tr = forward_topdown(p, xs, plan); break;
    case Variant::binn: tr = forward_binn(p, xs, plan); break;
    case Variant::sinn: tr = forward_sinn(p, masks, xs, plan); break;
  }
  tr.feature = feature;
  return tr;
}

/// Per-layer label probabilities, optionally under partial observation.
inline std::vector<Vector> predict(const ModelParams& p, const MaskSet& masks,
                                   const Vector& feature,
                                   const ObservationPlan* plan = nullptr) {
  return run_forward(p, masks, feature, plan).prob;
}

}  // namespace sinn
