#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "nmode/genome.hpp"
#include "nmode/rng.hpp"

namespace nmode {

enum class EdgeInsertionMode { uniform, distance };

struct MutationParams {
  double edge_add = 0.0;  // p of synapse insertion
  EdgeInsertionMode edge_add_mode = EdgeInsertionMode::uniform;
  double min_distance = 0.1;     // meters
  double weight_init_max = 1.0;  // |w| bound of inserted synapses
  double edge_del = 0.0;
  double edge_mod = 0.0;
  double edge_delta = 0.5;
  double edge_max = 5.0;
  double node_add = 0.0;
  double node_del = 0.0;
  double node_mod = 0.0;
  double node_delta = 0.01;
  double node_max = 1.0;

  void validate() const {
    for (double p : {edge_add, edge_del, edge_mod, node_add, node_del, node_mod})
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("mutation probability outside [0,1]");
    for (double b : {min_distance, weight_init_max, edge_delta, edge_max, node_delta, node_max})
      if (!(b > 0.0) || !std::isfinite(b))
        throw std::invalid_argument("mutation bounds must be positive");
  }
};

// Synapse insertion over the dis-connectivity matrix of legal, absent pairs.
// Every candidate consumes one draw, in (source label, target label) order.
inline ModuleSpec insert_synapses(ModuleSpec m, const ModuleContext& ctx,
                                  const MutationParams& p, Rng& rng) {
  normalize(m);
  struct Candidate {
    std::size_t source, target;
    double d;
  };
  std::vector<Candidate> candidates;
  double max_d = 0.0;
  for (std::size_t s = 0; s < m.nodes.size(); ++s) {
    if (!can_emit(ctx.effective_kind(m.nodes[s]))) continue;
    for (std::size_t t = 0; t < m.nodes.size(); ++t) {
      if (!can_receive(ctx.effective_kind(m.nodes[t]))) continue;
      if (m.has_edge(m.nodes[s].label, m.nodes[t].label)) continue;
      double d = 1.0;
      if (p.edge_add_mode == EdgeInsertionMode::distance) {
        const double dist = distance(ctx.position(m.nodes[s]), ctx.position(m.nodes[t]));
        d = 1.0 / std::max(dist, p.min_distance);
      }
      candidates.push_back({s, t, d});
      max_d = std::max(max_d, d);
    }
  }
  if (candidates.empty()) return m;

  std::vector<EdgeSpec> added;
  for (const auto& c : candidates) {
    if (rng.uniform() < p.edge_add * (c.d / max_d)) {
      const double w = p.weight_init_max * (2.0 * rng.uniform() - 1.0);
      added.push_back({m.nodes[c.source].label, m.nodes[c.target].label, w});
    }
  }
  m.edges.insert(m.edges.end(), added.begin(), added.end());
  normalize(m);
  return m;
}

// Removes floor(u * p * |E|) synapses drawn without replacement.
inline ModuleSpec delete_synapses(ModuleSpec m, const MutationParams& p, Rng& rng) {
  if (m.edges.empty()) return m;
  const auto count = static_cast<std::size_t>(
      std::floor(rng.uniform() * p.edge_del * static_cast<double>(m.edges.size())));
  for (std::size_t k = 0; k < count && !m.edges.empty(); ++k)
    m.edges.erase(m.edges.begin() + static_cast<std::ptrdiff_t>(rng.below(m.edges.size())));
  return m;
}

inline ModuleSpec modify_synapses(ModuleSpec m, const MutationParams& p, Rng& rng) {
  for (auto& e : m.edges) {
    if (rng.uniform() < p.edge_mod) {
      e.weight += p.edge_delta * (2.0 * rng.uniform() - 1.0);
      e.weight = std::clamp(e.weight, -p.edge_max, p.edge_max);
    }
  }
  return m;
}

inline std::string fresh_hidden_label(const ModuleSpec& m) {
  for (std::size_t k = 0;; ++k) {
    std::string label = "h" + std::to_string(k);
    if (!m.find_node(label)) return label;
  }
}

// Splits one uniformly drawn synapse (i, j) into (i, k) with weight 1 and
// (k, j) with the original weight; k is a new hidden node at the midpoint.
// New nodes get tanh and zero bias.
inline ModuleSpec insert_neuron(ModuleSpec m, const ModuleContext& ctx, const MutationParams& p,
                                Rng& rng) {
  if (!(rng.uniform() < p.node_add) || m.edges.empty()) return m;
  const auto pick = rng.below(m.edges.size());
  const EdgeSpec split = m.edges[pick];
  m.edges.erase(m.edges.begin() + static_cast<std::ptrdiff_t>(pick));

  NodeSpec k;
  k.label = fresh_hidden_label(m);
  k.kind = NodeKind::hidden;
  k.position = midpoint(ctx.position(*m.find_node(split.source)),
                        ctx.position(*m.find_node(split.target)));
  k.bias = 0.0;
  k.transfer = TransferKind::tanh;
  m.edges.push_back({split.source, k.label, 1.0});
  m.edges.push_back({k.label, split.target, split.weight});
  m.nodes.push_back(std::move(k));
  normalize(m);
  return m;
}

// At most one hidden node is removed, with all incident synapses. Interface,
// sensor and actuator nodes are never candidates.
inline ModuleSpec delete_neuron(ModuleSpec m, const MutationParams& p, Rng& rng) {
  if (!(rng.uniform() < p.node_del)) return m;
  std::vector<std::size_t> hidden;
  for (std::size_t i = 0; i < m.nodes.size(); ++i)
    if (m.nodes[i].kind == NodeKind::hidden) hidden.push_back(i);
  if (hidden.empty()) return m;
  const std::string label = m.nodes[hidden[rng.below(hidden.size())]].label;
  std::erase_if(m.nodes, [&](const NodeSpec& n) { return n.label == label; });
  std::erase_if(m.edges,
                [&](const EdgeSpec& e) { return e.source == label || e.target == label; });
  return m;
}

// Bias perturbation on every node that owns a bias (not sensors, not connectors).
inline ModuleSpec modify_neurons(ModuleSpec m, const MutationParams& p, Rng& rng) {
  for (auto& n : m.nodes) {
    if (n.kind == NodeKind::sensor || n.kind == NodeKind::connector) continue;
    if (rng.uniform() < p.node_mod) {
      n.bias += p.node_delta * (2.0 * rng.uniform() - 1.0);
      n.bias = std::clamp(n.bias, -p.node_max, p.node_max);
    }
  }
  return m;
}

// Applies, per evolvable module and in module-name order:
// insert_neuron, delete_neuron, insert_synapses, delete_synapses,
// modify_synapses, modify_neurons. Frozen modules are left untouched.
inline Genome mutate_genome(Genome g, const MutationParams& p, Rng& rng) {
  normalize(g);
  for (auto& m : g.modules) {
    if (!m.evolvable) continue;
    const auto ctx = module_context(g, m.name);
    ModuleSpec next = insert_neuron(std::move(m), ctx, p, rng);
    next = delete_neuron(std::move(next), p, rng);
    next = insert_synapses(std::move(next), ctx, p, rng);
    next = delete_synapses(std::move(next), p, rng);
    next = modify_synapses(std::move(next), p, rng);
    next = modify_neurons(std::move(next), p, rng);
    normalize(next);
    m = std::move(next);
  }
  return g;
}

}  // namespace nmode
