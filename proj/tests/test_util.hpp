// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sinn/sinn.hpp"

namespace testutil {

/// T = 3, sizes (2, 3, 4), every relation type populated: positive and
/// negative edges across both adjacent pairs plus intra-layer edges.
inline sinn::LabelGraph chain_graph() {
  return sinn::parse_graph(R"(# three-level chain exercising all channel types
layer A: a0, a1
layer B: b0, b1, b2
layer C: c0, c1, c2, c3
pos A.a0 B.b0
pos A.a0 B.b1
pos A.a1 B.b2
pos B.b0 C.c0
pos B.b0 C.c1
pos B.b1 C.c2
pos B.b2 C.c3
neg A.a1 B.b0
neg B.b1 C.c3
neg B.b2 C.c0
pos B.b0 B.b1
neg A.a0 A.a1
neg C.c0 C.c3
)");
}

/// Two-layer scene toy: exclusive coarse layer over four concrete places.
inline sinn::LabelGraph scenes_graph() {
  return sinn::parse_graph(R"(layer scene: indoor, outdoor
layer place: office, kitchen, beach, street
pos scene.indoor place.office
pos scene.indoor place.kitchen
pos scene.outdoor place.beach
pos scene.outdoor place.street
neg scene.indoor place.beach
neg scene.outdoor place.office
neg scene.indoor scene.outdoor
)");
}

inline sinn::Vector random_feature(int d, sinn::Rng& rng) {
  sinn::Vector f(static_cast<std::size_t>(d));
  for (double& v : f) v = rng.gaussian();
  return f;
}

inline std::vector<sinn::BinaryVec> random_targets(const sinn::LabelGraph& g, sinn::Rng& rng) {
  std::vector<sinn::BinaryVec> ys;
  for (int t = 0; t < g.num_layers(); ++t) {
    sinn::BinaryVec y(static_cast<std::size_t>(g.layer_size(t)));
    for (auto& bit : y) bit = rng.uniform() < 0.5 ? 1 : 0;
    ys.push_back(std::move(y));
  }
  return ys;
}

/// True when every live pre-ReLU value sits safely away from the kink, so a
/// +-h parameter perturbation cannot flip any rectifier state. Rows whose
/// mask is entirely false always hold a pre-activation of exactly zero and
/// cannot flip, so they are not counted.
inline bool trace_kink_safe(const sinn::ForwardTrace& trace, const sinn::MaskSet& masks,
                            double margin) {
  auto scan = [&](const std::vector<sinn::Vector>& pre, const std::vector<sinn::Mask>& mask_list,
                  bool inter, bool downward) {
    for (std::size_t t = 0; t < pre.size(); ++t) {
      if (pre[t].empty()) continue;
      std::size_t mi = t;
      if (inter) mi = downward ? t - 1 : t;  // adjacent-pair index of this layer's inter mask
      const sinn::Mask& m = mask_list[mi];
      for (std::size_t i = 0; i < pre[t].size(); ++i) {
        if (!m.row_any(static_cast<int>(i))) continue;
        if (std::abs(pre[t][i]) < margin) return false;
      }
    }
    return true;
  };
  return scan(trace.down.pre_inter, masks.inter_pos_down, true, true) &&
         scan(trace.down.pre_inter_neg, masks.inter_neg_down, true, true) &&
         scan(trace.down.pre_intra, masks.intra_pos, false, true) &&
         scan(trace.down.pre_intra_neg, masks.intra_neg, false, true) &&
         scan(trace.up.pre_inter, masks.inter_pos_up, true, false) &&
         scan(trace.up.pre_inter_neg, masks.inter_neg_up, true, false) &&
         scan(trace.up.pre_intra, masks.intra_pos, false, false) &&
         scan(trace.up.pre_intra_neg, masks.intra_neg, false, false);
}

struct FdReport {
  bool ok = true;
  int checked = 0;
  double max_err = 0.0;
  std::string detail;
};

/// Central-difference check of every learnable coordinate against the
/// analytic gradient. Coordinates at false mask positions are asserted to
/// carry an exactly-zero gradient instead of being differenced.
inline FdReport fd_check(sinn::ModelParams& p, const sinn::MaskSet& masks,
                         const sinn::Vector& feature, const std::vector<sinn::BinaryVec>& targets,
                         double h = 1e-5, double rtol = 1e-5, double afloor = 1e-8,
                         const sinn::ObservationPlan* plan = nullptr) {
  FdReport rep;
  const sinn::ForwardTrace trace = sinn::run_forward(p, masks, feature, plan);
  sinn::GradientSet analytic = sinn::backward(p, masks, trace, targets, plan);

  std::vector<sinn::TensorRef> rp = sinn::tensor_refs(p, &masks);
  std::vector<sinn::TensorRef> rg = sinn::tensor_refs(analytic, &masks);
  for (std::size_t k = 0; k < rp.size(); ++k) {
    double* data = rp[k].data();
    const double* grad = rg[k].data();
    for (std::size_t i = 0; i < rp[k].size(); ++i) {
      if (rp[k].mask && !rp[k].mask->data[i]) {
        if (grad[i] != 0.0) {
          rep.ok = false;
          rep.detail = rp[k].name + "[" + std::to_string(i) + "]: masked coordinate has gradient " +
                       std::to_string(grad[i]);
          return rep;
        }
        continue;
      }
      const double saved = data[i];
      data[i] = saved + h;
      const double lp = sinn::loss(sinn::run_forward(p, masks, feature, plan), targets);
      data[i] = saved - h;
      const double lm = sinn::loss(sinn::run_forward(p, masks, feature, plan), targets);
      data[i] = saved;
      const double fd = (lp - lm) / (2.0 * h);
      const double err = std::abs(grad[i] - fd);
      const double tol = std::max(rtol * std::max(std::abs(grad[i]), std::abs(fd)), afloor);
      ++rep.checked;
      rep.max_err = std::max(rep.max_err, err);
      if (err > tol) {
        rep.ok = false;
        rep.detail = rp[k].name + "[" + std::to_string(i) + "]: analytic " +
                     std::to_string(grad[i]) + " vs fd " + std::to_string(fd);
        return rep;
      }
    }
  }
  return rep;
}

/// Draws instances until the trace is kink-safe (always true for the
/// rectifier-free variants), then finite-difference checks all coordinates.
inline FdReport fd_check_variant(const sinn::LabelGraph& g, const sinn::MaskSet& masks, int d,
                                 sinn::Variant variant, std::uint64_t seed) {
  const double margin = 1e-3;  // h = 1e-5 perturbations move any pre-ReLU far less than this
  for (int attempt = 0; attempt < 50; ++attempt) {
    const std::uint64_t s = seed + 1000 * static_cast<std::uint64_t>(attempt);
    sinn::ModelParams p = sinn::init_params(g, masks, d, variant, s);
    sinn::Rng rng(s ^ 0x9e3779b97f4a7c15ull);
    const sinn::Vector feature = random_feature(d, rng);
    const std::vector<sinn::BinaryVec> targets = random_targets(g, rng);
    if (variant == sinn::Variant::sinn) {
      const sinn::ForwardTrace trace = sinn::run_forward(p, masks, feature);
      if (!trace_kink_safe(trace, masks, margin)) continue;
    }
    return fd_check(p, masks, feature, targets);
  }
  return {false, 0, 0.0, "no kink-safe instance found in 50 attempts"};
}

}  // namespace testutil
