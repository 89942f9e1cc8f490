// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sinn/error.hpp"
#include "sinn/graph.hpp"
#include "sinn/numerics.hpp"
#include "sinn/rng.hpp"

namespace sinn {

/// One labeled instance: a feature vector standing in for an image embedding
/// plus a full binary target vector for every layer.
struct Sample {
  std::string id;
  Vector feature;
  std::vector<BinaryVec> targets;
};

/// Immutable labeled collection bound to the graph it was built against.
/// `exclusive[t]` marks layers whose samples carry exactly one positive label.
struct Dataset {
  LabelGraph graph;
  int feature_dim = 0;
  std::vector<Sample> samples;
  std::vector<char> exclusive;

  bool is_exclusive(int t) const { return exclusive[static_cast<std::size_t>(t)] != 0; }

  /// Finest-to-coarsest search for the layer splitting should stratify on;
  /// -1 when no layer is exclusive.
  int bottom_exclusive_layer() const {
    for (int t = static_cast<int>(exclusive.size()) - 1; t >= 0; --t)
      if (exclusive[static_cast<std::size_t>(t)]) return t;
    return -1;
  }
};

/// Controls for the synthetic generator; the graph itself is passed alongside.
struct SynthSpec {
  int samples_per_class = 40;
  int feature_dim = 32;
  double noise_sigma = 0.25;
  double flip_prob = 0.0;
  std::uint64_t seed = 1;
};

namespace detail {

inline std::string hash_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}

inline std::uint64_t hash_from_hex(const std::string& s) {
  if (s.size() != 16) throw ParseError("graph hash must be 16 hex digits");
  std::uint64_t h = 0;
  for (char c : s) {
    h <<= 4;
    if (c >= '0' && c <= '9')
      h |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f')
      h |= static_cast<std::uint64_t>(c - 'a' + 10);
    else
      throw ParseError("graph hash must be 16 hex digits");
  }
  return h;
}

/// Positive ancestor sets: active[t][c] lists layer-t labels reachable from
/// bottom-layer class c along positive inter-layer edges.
inline std::vector<std::vector<std::set<int>>> positive_ancestors(const LabelGraph& g) {
  const int T = g.num_layers();
  const int C = g.layer_size(T - 1);
  std::vector<std::vector<std::set<int>>> active(T, std::vector<std::set<int>>(C));
  for (int c = 0; c < C; ++c) active[T - 1][c].insert(c);
  for (int t = T - 2; t >= 0; --t)
    for (const auto& e : g.edges) {
      if (e.sign != RelationSign::positive) continue;
      if (e.from.layer != t || e.to.layer != t + 1) continue;
      for (int c = 0; c < C; ++c)
        if (active[t + 1][c].count(e.to.label)) active[t][c].insert(e.from.label);
    }
  return active;
}

}  // namespace detail

/// Builds a layered dataset whose targets follow the graph's positive edges
/// upward from each bottom-layer class, with class-prototype features plus
/// Gaussian noise and optional label flips on non-exclusive layers.
inline Dataset generate_synthetic(const LabelGraph& g, const SynthSpec& spec) {
  if (auto diags = validate_graph(g); !diags.empty())
    throw Error("generate_synthetic: invalid graph: " + diags.front());
  if (spec.samples_per_class < 1) throw Error("samples_per_class must be at least 1");
  if (spec.feature_dim < 1) throw Error("feature_dim must be at least 1");
  if (spec.noise_sigma < 0.0) throw Error("noise_sigma must be nonnegative");
  if (spec.flip_prob < 0.0 || spec.flip_prob >= 0.5) throw Error("flip_prob must lie in [0, 0.5)");

  const int T = g.num_layers();
  const int C = g.layer_size(T - 1);
  const auto active = detail::positive_ancestors(g);

  Dataset ds;
  ds.graph = g;
  ds.feature_dim = spec.feature_dim;
  ds.exclusive.assign(static_cast<std::size_t>(T), 0);
  ds.exclusive[static_cast<std::size_t>(T - 1)] = 1;
  for (int t = 0; t + 1 < T; ++t) {
    std::size_t largest = 0;
    for (int c = 0; c < C; ++c) largest = std::max(largest, active[t][c].size());
    if (largest == 0)
      throw Error("layer '" + g.layers[t].name +
                  "' is not reachable from any bottom-layer class along positive edges");
    if (largest == 1) {
      for (int c = 0; c < C; ++c)
        if (active[t][c].empty())
          throw Error("bottom-layer class '" + g.layers[T - 1].labels[c] +
                      "' has no positive path into exclusive layer '" + g.layers[t].name + "'");
      ds.exclusive[static_cast<std::size_t>(t)] = 1;
    }
  }

  // Reject graphs whose positive structure contradicts a negative edge; with
  // flip_prob = 0 every emitted sample must satisfy all negative relations.
  for (const auto& e : g.edges) {
    if (e.sign != RelationSign::negative) continue;
    for (int c = 0; c < C; ++c) {
      const bool a = active[e.from.layer][c].count(e.from.label) > 0;
      const bool b = active[e.to.layer][c].count(e.to.label) > 0;
      if (a && b)
        throw Error("class '" + g.layers[T - 1].labels[c] +
                    "' activates both ends of a negative edge between '" +
                    g.layers[e.from.layer].labels[e.from.label] + "' and '" +
                    g.layers[e.to.layer].labels[e.to.label] + "'");
    }
  }

  // Directions are drawn hierarchically around a shared root: every label's
  // unit direction is the normalized sum of its positive parents' mean
  // direction and an own Gaussian refinement. The refinement scale shrinks
  // toward the bottom layer, so sibling classes sit in tight clusters while
  // coarser regions spread wide enough to overlap under feature noise. That
  // layered clustering is the signal structured inference can exploit over a
  // flat per-label readout. Prototypes are the bottom-layer directions.
  constexpr double kSpreadTop = 1.4;
  constexpr double kSpreadBottom = 0.34;
  Rng rng(spec.seed);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(spec.feature_dim));
  const auto normalized = [](Vector v) {
    double norm_sq = 0.0;
    for (double x : v) norm_sq += x * x;
    const double norm = std::sqrt(norm_sq);
    if (norm == 0.0) throw NumericError("degenerate zero prototype direction");
    for (double& x : v) x /= norm;
    return v;
  };
  Vector root(static_cast<std::size_t>(spec.feature_dim));
  for (double& x : root) x = rng.gaussian();
  root = normalized(std::move(root));
  std::vector<std::vector<Vector>> dir(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const double depth = (T > 1) ? static_cast<double>(t) / static_cast<double>(T - 1) : 1.0;
    const double spread = kSpreadTop + (kSpreadBottom - kSpreadTop) * depth;
    dir[static_cast<std::size_t>(t)].resize(static_cast<std::size_t>(g.layer_size(t)));
    for (int j = 0; j < g.layer_size(t); ++j) {
      Vector v(static_cast<std::size_t>(spec.feature_dim));
      for (double& x : v) x = spread * inv_sqrt_d * rng.gaussian();
      int parents = 0;
      Vector mean(static_cast<std::size_t>(spec.feature_dim), 0.0);
      for (const auto& e : g.edges) {
        if (e.sign != RelationSign::positive) continue;
        if (e.from.layer != t - 1 || e.to.layer != t || e.to.label != j) continue;
        const Vector& pd = dir[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(e.from.label)];
        for (int i = 0; i < spec.feature_dim; ++i) mean[static_cast<std::size_t>(i)] += pd[static_cast<std::size_t>(i)];
        ++parents;
      }
      const Vector& anchor = (parents > 0) ? mean : root;
      const double scale = (parents > 0) ? 1.0 / static_cast<double>(parents) : 1.0;
      for (int i = 0; i < spec.feature_dim; ++i)
        v[static_cast<std::size_t>(i)] += scale * anchor[static_cast<std::size_t>(i)];
      dir[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] = normalized(std::move(v));
    }
  }
  const std::vector<Vector>& prototypes = dir[static_cast<std::size_t>(T - 1)];

  for (int c = 0; c < C; ++c) {
    for (int k = 0; k < spec.samples_per_class; ++k) {
      Sample s;
      s.id = g.layers[T - 1].labels[c] + "_" + std::to_string(k);
      s.feature.resize(static_cast<std::size_t>(spec.feature_dim));
      for (int i = 0; i < spec.feature_dim; ++i)
        s.feature[static_cast<std::size_t>(i)] =
            prototypes[c][static_cast<std::size_t>(i)] + spec.noise_sigma * rng.gaussian();
      s.targets.resize(static_cast<std::size_t>(T));
      for (int t = 0; t < T; ++t) {
        BinaryVec y(static_cast<std::size_t>(g.layer_size(t)), 0);
        for (int li : active[t][c]) y[static_cast<std::size_t>(li)] = 1;
        if (spec.flip_prob > 0.0 && !ds.is_exclusive(t))
          for (auto& bit : y)
            if (rng.uniform() < spec.flip_prob) bit ^= 1;
        s.targets[static_cast<std::size_t>(t)] = std::move(y);
      }
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

/// Writes the line-delimited dataset format: a header object binding the
/// graph hash, feature dim, and exclusivity flags, then one object per sample.
inline void save_dataset(const Dataset& ds, std::ostream& out) {
  nlohmann::ordered_json header;
  header["graph_hash"] = detail::hash_hex(graph_hash(ds.graph));
  header["feature_dim"] = ds.feature_dim;
  nlohmann::ordered_json excl = nlohmann::ordered_json::array();
  for (int t = 0; t < ds.graph.num_layers(); ++t)
    if (ds.is_exclusive(t)) excl.push_back(ds.graph.layers[t].name);
  header["exclusive"] = std::move(excl);
  out << header.dump() << "\n";

  for (const Sample& s : ds.samples) {
    nlohmann::ordered_json rec;
    rec["id"] = s.id;
    rec["feature"] = s.feature;
    nlohmann::ordered_json labels;
    for (int t = 0; t < ds.graph.num_layers(); ++t) {
      nlohmann::ordered_json names = nlohmann::ordered_json::array();
      const BinaryVec& y = s.targets[static_cast<std::size_t>(t)];
      for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i]) names.push_back(ds.graph.layers[t].labels[i]);
      labels[ds.graph.layers[t].name] = std::move(names);
    }
    rec["labels"] = std::move(labels);
    out << rec.dump() << "\n";
  }
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  save_dataset(ds, out);
}

/// Parses and validates a dataset against the graph it claims to be built
/// for. Every diagnostic names the offending record number.
inline Dataset load_dataset(std::istream& in, const LabelGraph& g) {
  auto fail = [](int record, const std::string& what) -> void {
    throw ParseError("dataset record " + std::to_string(record) + ": " + what);
  };

  Dataset ds;
  ds.graph = g;
  ds.exclusive.assign(static_cast<std::size_t>(g.num_layers()), 0);

  std::string line;
  int record = 0;
  bool have_header = false;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++record;
    if (line.empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(record, std::string("invalid JSON: ") + e.what());
    }
    try {
      if (!have_header) {
        const std::uint64_t claimed = detail::hash_from_hex(rec.at("graph_hash").get<std::string>());
        if (claimed != graph_hash(g))
          fail(record, "dataset was built for a different graph (hash mismatch)");
        ds.feature_dim = rec.at("feature_dim").get<int>();
        if (ds.feature_dim < 1) fail(record, "feature_dim must be at least 1");
        for (const auto& name : rec.at("exclusive")) {
          const int t = g.layer_index(name.get<std::string>());
          if (t < 0) fail(record, "exclusive flag names unknown layer '" + name.get<std::string>() + "'");
          ds.exclusive[static_cast<std::size_t>(t)] = 1;
        }
        have_header = true;
        continue;
      }

      Sample s;
      s.id = rec.at("id").get<std::string>();
      if (!ids.insert(s.id).second) fail(record, "duplicate sample id '" + s.id + "'");
      s.feature = rec.at("feature").get<Vector>();
      if (static_cast<int>(s.feature.size()) != ds.feature_dim)
        fail(record, "feature has length " + std::to_string(s.feature.size()) + ", header says " +
                         std::to_string(ds.feature_dim));
      for (double v : s.feature)
        if (!std::isfinite(v)) fail(record, "feature contains a non-finite value");

      const auto& labels = rec.at("labels");
      s.targets.resize(static_cast<std::size_t>(g.num_layers()));
      for (int t = 0; t < g.num_layers(); ++t) {
        const std::string& lname = g.layers[t].name;
        if (!labels.contains(lname)) fail(record, "missing targets for layer '" + lname + "'");
        BinaryVec y(static_cast<std::size_t>(g.layer_size(t)), 0);
        for (const auto& name : labels.at(lname)) {
          const int li = g.label_index(t, name.get<std::string>());
          if (li < 0)
            fail(record, "unknown label '" + name.get<std::string>() + "' in layer '" + lname + "'");
          y[static_cast<std::size_t>(li)] = 1;
        }
        if (ds.is_exclusive(t)) {
          int positives = 0;
          for (auto bit : y) positives += bit;
          if (positives != 1)
            fail(record, "exclusive layer '" + lname + "' has " + std::to_string(positives) +
                             " positive labels");
        }
        s.targets[static_cast<std::size_t>(t)] = std::move(y);
      }
      for (const auto& item : labels.items())
        if (g.layer_index(item.key()) < 0)
          fail(record, "targets name unknown layer '" + item.key() + "'");
      ds.samples.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      fail(record, std::string("malformed record: ") + e.what());
    }
  }
  if (!have_header) throw ParseError("dataset has no header record");
  return ds;
}

inline Dataset load_dataset(const std::string& path, const LabelGraph& g) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return load_dataset(in, g);
}

namespace detail {

inline Dataset take_samples(const Dataset& ds, const std::vector<int>& idx) {
  Dataset out;
  out.graph = ds.graph;
  out.feature_dim = ds.feature_dim;
  out.exclusive = ds.exclusive;
  out.samples.reserve(idx.size());
  for (int i : idx) out.samples.push_back(ds.samples[static_cast<std::size_t>(i)]);
  return out;
}

inline int train_count(double fraction, int n) {
  const int wanted = static_cast<int>(std::lround(fraction * n));
  if (n >= 2) return std::clamp(wanted, 1, n - 1);
  return std::clamp(wanted, 0, n);
}

}  // namespace detail

/// Deterministic disjoint train/test partition. When an exclusive layer
/// exists the split is stratified by its class so every class with at least
/// two samples lands on both sides.
inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction,
                                         std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error("train_fraction must lie strictly between 0 and 1");
  const int N = static_cast<int>(ds.samples.size());
  if (N < 2) throw Error("cannot split a dataset with fewer than 2 samples");

  Rng rng(seed);
  std::vector<int> train_idx, test_idx;
  const int strat = ds.bottom_exclusive_layer();
  if (strat < 0) {
    const std::vector<int> perm = rng.permutation(N);
    const int n_train = detail::train_count(train_fraction, N);
    for (int i = 0; i < N; ++i)
      (i < n_train ? train_idx : test_idx).push_back(perm[static_cast<std::size_t>(i)]);
  } else {
    std::vector<std::vector<int>> groups(
        static_cast<std::size_t>(ds.graph.layer_size(strat)));
    for (int i = 0; i < N; ++i) {
      const BinaryVec& y = ds.samples[static_cast<std::size_t>(i)].targets[static_cast<std::size_t>(strat)];
      for (std::size_t li = 0; li < y.size(); ++li)
        if (y[li]) groups[li].push_back(i);
    }
    for (const auto& group : groups) {
      const int n = static_cast<int>(group.size());
      if (n == 0) continue;
      const std::vector<int> perm = rng.permutation(n);
      const int n_train = detail::train_count(train_fraction, n);
      for (int i = 0; i < n; ++i)
        (i < n_train ? train_idx : test_idx)
            .push_back(group[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
    }
  }
  if (train_idx.empty() || test_idx.empty())
    throw Error("train_fraction " + std::to_string(train_fraction) + " leaves one side empty");
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {detail::take_samples(ds, train_idx), detail::take_samples(ds, test_idx)};
}

}  // namespace sinn
