// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sinn/error.hpp"
#include "sinn/numerics.hpp"

namespace sinn {

/// One level of the label hierarchy. Index 0 is the top (coarsest) layer.
struct ConceptLayer {
  std::string name;
  std::vector<std::string> labels;
};

enum class RelationSign { positive, negative };

/// (layer, label) endpoint of a relation.
struct NodeRef {
  int layer = -1;
  int label = -1;
  bool operator==(const NodeRef&) const = default;
  auto operator<=>(const NodeRef&) const = default;
};

/// Undirected correlation between two labels in the same or adjacent layers.
/// Stored canonically: `from` is the endpoint with the lower layer index, or
/// the lower label index for intra-layer edges.
struct RelationEdge {
  NodeRef from;
  NodeRef to;
  RelationSign sign = RelationSign::positive;
  bool operator==(const RelationEdge&) const = default;
};

/// Layered label space plus its signed relation edges.
struct LabelGraph {
  std::vector<ConceptLayer> layers;
  std::vector<RelationEdge> edges;
  bool self_gate = true;  // every label sees its own visual activation by default

  int num_layers() const { return static_cast<int>(layers.size()); }
  int layer_size(int t) const { return static_cast<int>(layers[t].labels.size()); }

  std::vector<int> layer_sizes() const {
    std::vector<int> n(layers.size());
    for (std::size_t t = 0; t < layers.size(); ++t) n[t] = static_cast<int>(layers[t].labels.size());
    return n;
  }

  /// Index of the named layer, -1 when absent.
  int layer_index(std::string_view name) const {
    for (std::size_t t = 0; t < layers.size(); ++t)
      if (layers[t].name == name) return static_cast<int>(t);
    return -1;
  }

  /// Index of the named label within layer t, -1 when absent.
  int label_index(int t, std::string_view label) const {
    const auto& ls = layers[t].labels;
    for (std::size_t i = 0; i < ls.size(); ++i)
      if (ls[i] == label) return static_cast<int>(i);
    return -1;
  }
};

/// Boolean connectivity compiled from a LabelGraph. Inter-layer masks exist per
/// adjacent pair and direction: down[k] couples source layer k into target
/// layer k+1 (shape n_{k+1} x n_k); up[k] couples source layer k+1 into target
/// layer k (shape n_k x n_{k+1}). Per sign, up[k] is the transpose of down[k].
struct MaskSet {
  std::vector<Mask> inter_pos_down, inter_neg_down;
  std::vector<Mask> inter_pos_up, inter_neg_up;
  std::vector<Mask> intra_pos, intra_neg;  // per layer, n_t x n_t
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  std::size_t e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline bool valid_name(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (c == '.' || c == ',' || c == ':' || c == '#' || c == ' ' || c == '\t' || c == '\r' ||
        c == '\n')
      return false;
  return true;
}

struct EdgeKey {
  NodeRef from, to;
  auto operator<=>(const EdgeKey&) const = default;
};

inline EdgeKey canonical_key(NodeRef a, NodeRef b) {
  if (b.layer < a.layer || (b.layer == a.layer && b.label < a.label)) std::swap(a, b);
  return {a, b};
}

[[noreturn]] inline void parse_fail(int line, const std::string& what) {
  throw ParseError("graph line " + std::to_string(line) + ": " + what);
}

}  // namespace detail

/// Parses the line-oriented graph file format. Layers must be declared (in
/// top-down order) before any edge that references them.
inline LabelGraph parse_graph(std::string_view text) {
  LabelGraph g;
  std::map<detail::EdgeKey, RelationSign> edge_signs;
  std::vector<detail::EdgeKey> edge_order;

  std::istringstream in{std::string(text)};
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;

    if (line.rfind("layer ", 0) == 0) {
      const auto colon = line.find(':');
      if (colon == std::string::npos) detail::parse_fail(lineno, "expected ':' after layer name");
      ConceptLayer layer;
      layer.name = detail::trim(std::string_view(line).substr(6, colon - 6));
      if (!detail::valid_name(layer.name)) detail::parse_fail(lineno, "invalid layer name");
      if (g.layer_index(layer.name) >= 0)
        detail::parse_fail(lineno, "duplicate layer '" + layer.name + "'");
      std::string rest = line.substr(colon + 1);
      std::size_t pos = 0;
      while (pos <= rest.size()) {
        const auto comma = rest.find(',', pos);
        const std::string label =
            detail::trim(std::string_view(rest).substr(pos, comma == std::string::npos
                                                                ? std::string::npos
                                                                : comma - pos));
        if (!detail::valid_name(label)) detail::parse_fail(lineno, "invalid label name");
        if (std::find(layer.labels.begin(), layer.labels.end(), label) != layer.labels.end())
          detail::parse_fail(lineno, "duplicate label '" + label + "' in layer '" + layer.name + "'");
        layer.labels.push_back(label);
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      g.layers.push_back(std::move(layer));
    } else if (line.rfind("pos ", 0) == 0 || line.rfind("neg ", 0) == 0) {
      const RelationSign sign =
          line[0] == 'p' ? RelationSign::positive : RelationSign::negative;
      std::istringstream args(line.substr(4));
      std::string ref_a, ref_b, extra;
      if (!(args >> ref_a >> ref_b) || (args >> extra))
        detail::parse_fail(lineno, "expected exactly two <layer>.<label> references");
      NodeRef refs[2];
      const std::string* texts[2] = {&ref_a, &ref_b};
      for (int k = 0; k < 2; ++k) {
        const auto dot = texts[k]->find('.');
        if (dot == std::string::npos)
          detail::parse_fail(lineno, "expected <layer>.<label>, got '" + *texts[k] + "'");
        const std::string lname = texts[k]->substr(0, dot);
        const std::string label = texts[k]->substr(dot + 1);
        const int t = g.layer_index(lname);
        if (t < 0) detail::parse_fail(lineno, "unknown layer '" + lname + "'");
        const int li = g.label_index(t, label);
        if (li < 0)
          detail::parse_fail(lineno, "unknown label '" + label + "' in layer '" + lname + "'");
        refs[k] = {t, li};
      }
      const int dt = refs[0].layer - refs[1].layer;
      if (dt > 1 || dt < -1)
        detail::parse_fail(lineno, "edge joins non-adjacent layers '" +
                                       g.layers[refs[0].layer].name + "' and '" +
                                       g.layers[refs[1].layer].name + "'");
      if (dt == 0 && refs[0].label == refs[1].label)
        detail::parse_fail(lineno,
                           "self edge; the diagonal is controlled by the no_self_gate option");
      const auto key = detail::canonical_key(refs[0], refs[1]);
      if (auto it = edge_signs.find(key); it != edge_signs.end()) {
        if (it->second != sign)
          detail::parse_fail(lineno, "edge between '" + *texts[0] + "' and '" + *texts[1] +
                                         "' already declared with the opposite sign");
        continue;  // benign duplicate
      }
      edge_signs.emplace(key, sign);
      edge_order.push_back(key);
    } else if (line.rfind("option ", 0) == 0) {
      const std::string opt = detail::trim(std::string_view(line).substr(7));
      if (opt == "no_self_gate")
        g.self_gate = false;
      else
        detail::parse_fail(lineno, "unknown option '" + opt + "'");
    } else {
      detail::parse_fail(lineno, "unrecognized directive '" + line.substr(0, line.find(' ')) + "'");
    }
  }

  if (g.layers.empty()) throw ParseError("graph file declares no layers");
  for (const auto& key : edge_order)
    g.edges.push_back({key.from, key.to, edge_signs.at(key)});
  return g;
}

/// Canonical text form: layers in order, then options, then pos edges, then
/// neg edges, each edge list lexicographically sorted.
inline std::string serialize_graph(const LabelGraph& g) {
  std::ostringstream out;
  for (const auto& layer : g.layers) {
    out << "layer " << layer.name << ": ";
    for (std::size_t i = 0; i < layer.labels.size(); ++i) {
      if (i) out << ", ";
      out << layer.labels[i];
    }
    out << "\n";
  }
  if (!g.self_gate) out << "option no_self_gate\n";
  std::vector<std::string> pos_lines, neg_lines;
  for (const auto& e : g.edges) {
    std::string body = g.layers[e.from.layer].name + "." + g.layers[e.from.layer].labels[e.from.label] +
                       " " + g.layers[e.to.layer].name + "." + g.layers[e.to.layer].labels[e.to.label];
    (e.sign == RelationSign::positive ? pos_lines : neg_lines).push_back(std::move(body));
  }
  std::sort(pos_lines.begin(), pos_lines.end());
  std::sort(neg_lines.begin(), neg_lines.end());
  for (const auto& l : pos_lines) out << "pos " << l << "\n";
  for (const auto& l : neg_lines) out << "neg " << l << "\n";
  return out.str();
}

/// Checks every structural invariant; returns one human-readable diagnostic
/// per violation. Empty result means the graph is well formed.
inline std::vector<std::string> validate_graph(const LabelGraph& g) {
  std::vector<std::string> diags;
  if (g.layers.empty()) diags.push_back("graph has no layers");
  for (std::size_t t = 0; t < g.layers.size(); ++t) {
    const auto& layer = g.layers[t];
    if (layer.labels.empty())
      diags.push_back("layer '" + layer.name + "' has no labels");
    for (std::size_t i = 0; i < layer.labels.size(); ++i)
      for (std::size_t j = i + 1; j < layer.labels.size(); ++j)
        if (layer.labels[i] == layer.labels[j])
          diags.push_back("duplicate label '" + layer.labels[i] + "' in layer '" + layer.name + "'");
    for (std::size_t u = 0; u < g.layers.size(); ++u)
      if (u > t && g.layers[u].name == layer.name)
        diags.push_back("duplicate layer name '" + layer.name + "'");
  }

  auto describe = [&](const RelationEdge& e) {
    auto side = [&](const NodeRef& r) {
      if (r.layer < 0 || r.layer >= g.num_layers()) return "layer#" + std::to_string(r.layer);
      const auto& layer = g.layers[r.layer];
      if (r.label < 0 || r.label >= static_cast<int>(layer.labels.size()))
        return layer.name + ".label#" + std::to_string(r.label);
      return layer.name + "." + layer.labels[r.label];
    };
    return side(e.from) + " -- " + side(e.to);
  };

  std::map<detail::EdgeKey, RelationSign> seen;
  for (const auto& e : g.edges) {
    bool in_range = true;
    for (const NodeRef* r : {&e.from, &e.to}) {
      if (r->layer < 0 || r->layer >= g.num_layers()) {
        diags.push_back("edge " + describe(e) + " references a nonexistent layer");
        in_range = false;
      } else if (r->label < 0 || r->label >= g.layer_size(r->layer)) {
        diags.push_back("edge " + describe(e) + " references a nonexistent label");
        in_range = false;
      }
    }
    if (!in_range) continue;
    const int dt = e.from.layer - e.to.layer;
    if (dt > 1 || dt < -1)
      diags.push_back("edge " + describe(e) + " joins non-adjacent layers");
    if (dt == 0 && e.from.label == e.to.label)
      diags.push_back("edge " + describe(e) + " is a self edge");
    const auto key = detail::canonical_key(e.from, e.to);
    if (auto it = seen.find(key); it != seen.end()) {
      if (it->second != e.sign)
        diags.push_back("edge " + describe(e) + " declared with conflicting sign");
    } else {
      seen.emplace(key, e.sign);
    }
  }
  return diags;
}

/// Compiles connectivity masks. Requires validate_graph(g) to be empty.
inline MaskSet compile_masks(const LabelGraph& g) {
  if (auto diags = validate_graph(g); !diags.empty())
    throw Error("compile_masks: invalid graph: " + diags.front());

  const int T = g.num_layers();
  MaskSet m;
  for (int k = 0; k + 1 < T; ++k) {
    m.inter_pos_down.emplace_back(g.layer_size(k + 1), g.layer_size(k));
    m.inter_neg_down.emplace_back(g.layer_size(k + 1), g.layer_size(k));
  }
  for (int t = 0; t < T; ++t) {
    m.intra_pos.emplace_back(g.layer_size(t), g.layer_size(t));
    m.intra_neg.emplace_back(g.layer_size(t), g.layer_size(t));
  }

  for (const auto& e : g.edges) {
    if (e.from.layer == e.to.layer) {
      Mask& target = e.sign == RelationSign::positive ? m.intra_pos[e.from.layer]
                                                      : m.intra_neg[e.from.layer];
      target.at(e.from.label, e.to.label) = 1;
      target.at(e.to.label, e.from.label) = 1;
    } else {
      // canonical storage puts the lower (coarser) layer in `from`
      const int k = e.from.layer;
      Mask& target =
          e.sign == RelationSign::positive ? m.inter_pos_down[k] : m.inter_neg_down[k];
      target.at(e.to.label, e.from.label) = 1;
    }
  }

  // The self gate opens the diagonal in both gated channels: with only the
  // excitatory diagonal, relu(h+ v) - relu(h- v) cannot reproduce a plain
  // signed unary term v, so negative unary evidence would be unrepresentable.
  if (g.self_gate)
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < g.layer_size(t); ++i) {
        m.intra_pos[t].at(i, i) = 1;
        m.intra_neg[t].at(i, i) = 1;
      }

  for (int k = 0; k + 1 < T; ++k) {
    m.inter_pos_up.push_back(m.inter_pos_down[k].transposed());
    m.inter_neg_up.push_back(m.inter_neg_down[k].transposed());
  }
  return m;
}

/// FNV-1a over the canonical serialization; binds datasets and checkpoints to
/// the graph they were built against.
inline std::uint64_t graph_hash(const LabelGraph& g) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : serialize_graph(g)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace sinn
