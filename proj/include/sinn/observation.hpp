// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "sinn/error.hpp"
#include "sinn/graph.hpp"
#include "sinn/numerics.hpp"

namespace sinn {

/// How a clamped binary label is turned into an activation.
/// `paper_formula` uses a = log(1/(1-g)), which is asymmetric around zero:
/// positives map to log(1/epsilon), negatives to the small positive value
/// log(1/(1-epsilon)). `true_logit` uses the sigmoid inverse log(g/(1-g)),
/// which is antisymmetric and pushes negatives strongly below zero.
enum class ObservationMode { paper_formula, true_logit };

struct ObservationConfig {
  double epsilon = 0.001;
  ObservationMode mode = ObservationMode::paper_formula;
};

/// Activation that stands in for a layer's output when its labels are given.
inline double observed_activation(std::uint8_t y, const ObservationConfig& cfg) {
  if (cfg.epsilon <= 0.0 || cfg.epsilon >= 0.5)
    throw Error("observation epsilon must lie in (0, 0.5)");
  const double g = y ? 1.0 - cfg.epsilon : cfg.epsilon;
  if (cfg.mode == ObservationMode::paper_formula) return std::log(1.0 / (1.0 - g));
  return std::log(g / (1.0 - g));
}

inline Vector observed_activations(const BinaryVec& y, const ObservationConfig& cfg) {
  Vector a(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) a[i] = observed_activation(y[i], cfg);
  return a;
}

/// Ground-truth label vectors for a subset of layers, keyed by layer index.
struct ObservationSet {
  std::map<int, BinaryVec> labels;
};

/// Per-layer observation state resolved against a concrete graph: which layers
/// are clamped and the activation vector each clamped layer contributes.
struct ObservationPlan {
  std::vector<char> observed;  // per layer
  std::vector<Vector> act;     // act[t] valid iff observed[t]

  bool is_observed(int t) const { return observed[static_cast<std::size_t>(t)] != 0; }
};

/// Validates layer indices and label-vector sizes, then precomputes the
/// clamped activations.
inline ObservationPlan plan_observation(const LabelGraph& g, const ObservationSet& obs,
                                        const ObservationConfig& cfg = {}) {
  ObservationPlan plan;
  plan.observed.assign(g.layers.size(), 0);
  plan.act.resize(g.layers.size());
  for (const auto& [t, y] : obs.labels) {
    if (t < 0 || t >= g.num_layers())
      throw Error("observation references nonexistent layer index " + std::to_string(t));
    if (static_cast<int>(y.size()) != g.layer_size(t))
      throw Error("observation for layer '" + g.layers[t].name + "' has " +
                  std::to_string(y.size()) + " entries, expected " +
                  std::to_string(g.layer_size(t)));
    for (std::uint8_t v : y)
      if (v > 1) throw Error("observation labels must be 0 or 1");
    plan.observed[static_cast<std::size_t>(t)] = 1;
    plan.act[static_cast<std::size_t>(t)] = observed_activations(y, cfg);
  }
  return plan;
}

}  // namespace sinn
