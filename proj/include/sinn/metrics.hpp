// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sinn/data.hpp"
#include "sinn/error.hpp"
#include "sinn/model.hpp"
#include "sinn/numerics.hpp"
#include "sinn/observation.hpp"

namespace sinn {

/// AP of one ranking; `defined` is false when the relevance vector has no
/// positive item, in which case the value must not enter any mean.
struct ApResult {
  double value = 0.0;
  bool defined = false;
};

namespace detail {

/// Indices ordered by descending score; equal scores rank by ascending index
/// so every ranking is deterministic.
inline std::vector<int> ranking(const Vector& scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
      return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    return a < b;
  });
  return order;
}

}  // namespace detail

/// Mean of precision-at-rank over the relevant items, under the canonical
/// deterministic ranking.
inline ApResult average_precision(const Vector& scores, const BinaryVec& relevance) {
  if (scores.size() != relevance.size())
    throw ShapeError("average_precision: scores and relevance differ in length");
  int nrel = 0;
  for (std::uint8_t r : relevance) {
    if (r > 1) throw Error("average_precision: relevance must be 0 or 1");
    nrel += r;
  }
  if (nrel == 0) return {0.0, false};
  const std::vector<int> order = detail::ranking(scores);
  int hits = 0;
  double sum = 0.0;
  for (std::size_t rank = 1; rank <= order.size(); ++rank) {
    if (relevance[static_cast<std::size_t>(order[rank - 1])]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(rank);
    }
  }
  return {sum / static_cast<double>(nrel), true};
}

namespace detail {

inline void check_grid(const std::vector<Vector>& scores, const std::vector<BinaryVec>& targets) {
  require(scores.size() == targets.size(), "score and target row counts differ");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    require(scores[i].size() == targets[i].size(), "score and target row lengths differ");
    require(scores[i].size() == scores[0].size(), "ragged score rows");
  }
}

}  // namespace detail

/// Mean AP over label columns (each column ranks images). Columns without a
/// positive are excluded; throws when every column is excluded.
inline double map_per_label(const std::vector<Vector>& scores,
                            const std::vector<BinaryVec>& targets) {
  detail::check_grid(scores, targets);
  if (scores.empty()) throw Error("map_per_label: no images");
  const std::size_t L = scores[0].size();
  double sum = 0.0;
  int defined = 0;
  for (std::size_t j = 0; j < L; ++j) {
    Vector col(scores.size());
    BinaryVec rel(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
      col[i] = scores[i][j];
      rel[i] = targets[i][j];
    }
    const ApResult ap = average_precision(col, rel);
    if (ap.defined) {
      sum += ap.value;
      ++defined;
    }
  }
  if (defined == 0) throw Error("map_per_label: no label has a positive image");
  return sum / defined;
}

/// Mean AP over image rows (each row ranks labels). Rows without a positive
/// are excluded; throws when every row is excluded.
inline double map_per_image(const std::vector<Vector>& scores,
                            const std::vector<BinaryVec>& targets) {
  detail::check_grid(scores, targets);
  double sum = 0.0;
  int defined = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const ApResult ap = average_precision(scores[i], targets[i]);
    if (ap.defined) {
      sum += ap.value;
      ++defined;
    }
  }
  if (defined == 0) throw Error("map_per_image: no image has a positive label");
  return sum / defined;
}

/// Unweighted mean of per-class argmax accuracies for a single-label layer.
/// Ties resolve to the lowest index; classes with no images are excluded.
inline double mc_acc(const std::vector<Vector>& scores, const std::vector<int>& classes,
                     int num_classes) {
  detail::require(scores.size() == classes.size(), "mc_acc: row counts differ");
  if (num_classes < 1) throw Error("mc_acc: need at least one class");
  std::vector<int> correct(static_cast<std::size_t>(num_classes), 0);
  std::vector<int> total(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int c = classes[i];
    if (c < 0 || c >= num_classes) throw Error("mc_acc: class index out of range");
    int best = 0;
    for (std::size_t j = 1; j < scores[i].size(); ++j)
      if (scores[i][j] > scores[i][static_cast<std::size_t>(best)]) best = static_cast<int>(j);
    ++total[static_cast<std::size_t>(c)];
    if (best == c) ++correct[static_cast<std::size_t>(c)];
  }
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < num_classes; ++c)
    if (total[static_cast<std::size_t>(c)] > 0) {
      sum += static_cast<double>(correct[static_cast<std::size_t>(c)]) /
             static_cast<double>(total[static_cast<std::size_t>(c)]);
      ++present;
    }
  if (present == 0) throw Error("mc_acc: no class has any image");
  return sum / present;
}

/// Mean per-image Jaccard index between the thresholded prediction set and
/// the target set; both sets empty counts as 1.
inline double iou_acc(const std::vector<Vector>& probs, const std::vector<BinaryVec>& targets,
                      double threshold = 0.5) {
  detail::check_grid(probs, targets);
  if (probs.empty()) throw Error("iou_acc: no images");
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    int inter = 0, uni = 0;
    for (std::size_t j = 0; j < probs[i].size(); ++j) {
      const bool pred = probs[i][j] > threshold;
      const bool truth = targets[i][j] != 0;
      inter += pred && truth;
      uni += pred || truth;
    }
    sum += uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  }
  return sum / static_cast<double>(probs.size());
}

struct PrecRec {
  double prec_label = 0.0;
  double rec_label = 0.0;
  double prec_image = 0.0;
  double rec_image = 0.0;
};

/// Top-n decoding per image, scored two ways: per-image precision/recall
/// averaged over images (recall over images with a positive), and per-label
/// precision/recall macro-averaged over labels with defined denominators.
inline PrecRec prec_rec_at_n(const std::vector<Vector>& scores,
                             const std::vector<BinaryVec>& targets, int n = 3) {
  detail::check_grid(scores, targets);
  if (scores.empty()) throw Error("prec_rec_at_n: no images");
  const int L = static_cast<int>(scores[0].size());
  if (n < 1 || n > L) throw Error("prec_rec_at_n: n must lie in [1, label count]");

  std::vector<int> predicted(static_cast<std::size_t>(L), 0);
  std::vector<int> hit(static_cast<std::size_t>(L), 0);
  std::vector<int> positives(static_cast<std::size_t>(L), 0);
  double prec_sum = 0.0, rec_sum = 0.0;
  int images_with_pos = 0;

  for (std::size_t i = 0; i < scores.size(); ++i) {
    const std::vector<int> order = detail::ranking(scores[i]);
    int hits = 0;
    for (int r = 0; r < n; ++r) {
      const int j = order[static_cast<std::size_t>(r)];
      ++predicted[static_cast<std::size_t>(j)];
      if (targets[i][static_cast<std::size_t>(j)]) {
        ++hits;
        ++hit[static_cast<std::size_t>(j)];
      }
    }
    int npos = 0;
    for (std::size_t j = 0; j < targets[i].size(); ++j) {
      positives[j] += targets[i][j];
      npos += targets[i][j];
    }
    prec_sum += static_cast<double>(hits) / static_cast<double>(n);
    if (npos > 0) {
      rec_sum += static_cast<double>(hits) / static_cast<double>(npos);
      ++images_with_pos;
    }
  }

  PrecRec out;
  out.prec_image = prec_sum / static_cast<double>(scores.size());
  out.rec_image = images_with_pos > 0 ? rec_sum / images_with_pos : 0.0;
  double psum = 0.0, rsum = 0.0;
  int pdef = 0, rdef = 0;
  for (int j = 0; j < L; ++j) {
    if (predicted[static_cast<std::size_t>(j)] > 0) {
      psum += static_cast<double>(hit[static_cast<std::size_t>(j)]) /
              static_cast<double>(predicted[static_cast<std::size_t>(j)]);
      ++pdef;
    }
    if (positives[static_cast<std::size_t>(j)] > 0) {
      rsum += static_cast<double>(hit[static_cast<std::size_t>(j)]) /
              static_cast<double>(positives[static_cast<std::size_t>(j)]);
      ++rdef;
    }
  }
  out.prec_label = pdef > 0 ? psum / pdef : 0.0;
  out.rec_label = rdef > 0 ? rsum / rdef : 0.0;
  return out;
}

/// Per-layer slice of an evaluation.
struct LayerEval {
  std::string layer;
  double map_l = 0.0;
  double map_i = 0.0;
  double iou = 0.0;
  std::optional<double> mc;  // present only for exclusive layers
};

/// Full evaluation summary; pooled metrics run over the concatenation of all
/// layers' label columns.
struct EvalResult {
  double map_l = 0.0;
  double map_i = 0.0;
  double iou = 0.0;
  double prec_l = 0.0;
  double rec_l = 0.0;
  double prec_i = 0.0;
  double rec_i = 0.0;
  std::vector<LayerEval> layers;

  /// Flat `key value` text record; keys: map_l, map_i, mc_acc.<layer>,
  /// iou_acc, prec_l, rec_l, prec_i, rec_i.
  std::string to_record() const {
    auto fmt = [](const std::string& key, double v) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      return key + " " + buf + "\n";
    };
    std::string out;
    out += fmt("map_l", map_l);
    out += fmt("map_i", map_i);
    for (const LayerEval& le : layers)
      if (le.mc) out += fmt("mc_acc." + le.layer, *le.mc);
    out += fmt("iou_acc", iou);
    out += fmt("prec_l", prec_l);
    out += fmt("rec_l", rec_l);
    out += fmt("prec_i", prec_i);
    out += fmt("rec_i", rec_i);
    return out;
  }

  static EvalResult from_record(const std::string& text) {
    EvalResult r;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto space = line.find(' ');
      if (space == std::string::npos)
        throw ParseError("eval record line " + std::to_string(lineno) + ": expected 'key value'");
      const std::string key = line.substr(0, space);
      char* end = nullptr;
      const double value = std::strtod(line.c_str() + space + 1, &end);
      if (end == line.c_str() + space + 1)
        throw ParseError("eval record line " + std::to_string(lineno) + ": bad number");
      if (key == "map_l")
        r.map_l = value;
      else if (key == "map_i")
        r.map_i = value;
      else if (key == "iou_acc")
        r.iou = value;
      else if (key == "prec_l")
        r.prec_l = value;
      else if (key == "rec_l")
        r.rec_l = value;
      else if (key == "prec_i")
        r.prec_i = value;
      else if (key == "rec_i")
        r.rec_i = value;
      else if (key.rfind("mc_acc.", 0) == 0) {
        LayerEval le;
        le.layer = key.substr(7);
        le.mc = value;
        r.layers.push_back(std::move(le));
      } else {
        throw ParseError("eval record line " + std::to_string(lineno) + ": unknown key '" + key +
                         "'");
      }
    }
    return r;
  }
};

struct EvalOptions {
  int topn = 3;
  double iou_threshold = 0.5;
  int observe_layer = -1;  // feed this layer's true labels at predict time
  ObservationConfig obs;
};

/// Runs the model over every sample and scores all layers, optionally with
/// one layer's ground truth observed during inference.
inline EvalResult evaluate(const ModelParams& p, const MaskSet& masks, const Dataset& ds,
                           const EvalOptions& opt = {}) {
  if (ds.samples.empty()) throw Error("evaluate: dataset is empty");
  const int T = ds.graph.num_layers();
  detail::require(static_cast<int>(p.layer_sizes.size()) == T,
                  "evaluate: model and dataset disagree on layer count");
  if (opt.observe_layer >= T) throw Error("evaluate: observed layer index out of range");

  const std::size_t N = ds.samples.size();
  std::vector<std::vector<Vector>> layer_scores(
      static_cast<std::size_t>(T), std::vector<Vector>(N));
  std::vector<std::vector<BinaryVec>> layer_targets(
      static_cast<std::size_t>(T), std::vector<BinaryVec>(N));

  for (std::size_t i = 0; i < N; ++i) {
    const Sample& s = ds.samples[i];
    std::vector<Vector> probs;
    if (opt.observe_layer >= 0) {
      ObservationSet obs;
      obs.labels[opt.observe_layer] = s.targets[static_cast<std::size_t>(opt.observe_layer)];
      const ObservationPlan plan = plan_observation(ds.graph, obs, opt.obs);
      probs = predict(p, masks, s.feature, &plan);
    } else {
      probs = predict(p, masks, s.feature);
    }
    for (int t = 0; t < T; ++t) {
      layer_scores[static_cast<std::size_t>(t)][i] = std::move(probs[static_cast<std::size_t>(t)]);
      layer_targets[static_cast<std::size_t>(t)][i] = s.targets[static_cast<std::size_t>(t)];
    }
  }

  EvalResult result;
  for (int t = 0; t < T; ++t) {
    LayerEval le;
    le.layer = ds.graph.layers[t].name;
    le.map_l = map_per_label(layer_scores[t], layer_targets[t]);
    le.map_i = map_per_image(layer_scores[t], layer_targets[t]);
    le.iou = iou_acc(layer_scores[t], layer_targets[t], opt.iou_threshold);
    if (ds.is_exclusive(t)) {
      std::vector<int> classes(N);
      for (std::size_t i = 0; i < N; ++i) {
        const BinaryVec& y = layer_targets[t][i];
        classes[i] = static_cast<int>(std::find(y.begin(), y.end(), 1) - y.begin());
      }
      le.mc = mc_acc(layer_scores[t], classes, ds.graph.layer_size(t));
    }
    result.layers.push_back(std::move(le));
  }

  std::vector<Vector> pooled_scores(N);
  std::vector<BinaryVec> pooled_targets(N);
  for (std::size_t i = 0; i < N; ++i) {
    for (int t = 0; t < T; ++t) {
      const Vector& sc = layer_scores[static_cast<std::size_t>(t)][i];
      const BinaryVec& ta = layer_targets[static_cast<std::size_t>(t)][i];
      pooled_scores[i].insert(pooled_scores[i].end(), sc.begin(), sc.end());
      pooled_targets[i].insert(pooled_targets[i].end(), ta.begin(), ta.end());
    }
  }
  result.map_l = map_per_label(pooled_scores, pooled_targets);
  result.map_i = map_per_image(pooled_scores, pooled_targets);
  result.iou = iou_acc(pooled_scores, pooled_targets, opt.iou_threshold);
  const PrecRec pr = prec_rec_at_n(pooled_scores, pooled_targets, opt.topn);
  result.prec_l = pr.prec_label;
  result.rec_l = pr.rec_label;
  result.prec_i = pr.prec_image;
  result.rec_i = pr.rec_image;
  return result;
}

}  // namespace sinn
