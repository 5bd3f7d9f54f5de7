#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

namespace nmode {

class GenomeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NodeKind { sensor, actuator, hidden, input, output, connector };

inline constexpr std::array<NodeKind, 6> kNodeKinds{NodeKind::sensor, NodeKind::actuator,
                                                    NodeKind::hidden, NodeKind::input,
                                                    NodeKind::output, NodeKind::connector};

inline std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::sensor: return "sensor";
    case NodeKind::actuator: return "actuator";
    case NodeKind::hidden: return "hidden";
    case NodeKind::input: return "input";
    case NodeKind::output: return "output";
    case NodeKind::connector: return "connector";
  }
  return "?";
}

inline std::optional<NodeKind> parse_node_kind(std::string_view s) {
  for (auto k : kNodeKinds)
    if (to_string(k) == s) return k;
  return std::nullopt;
}

enum class TransferKind { identity, sigmoid, tanh };

inline std::string_view to_string(TransferKind t) {
  switch (t) {
    case TransferKind::identity: return "id";
    case TransferKind::sigmoid: return "sigm";
    case TransferKind::tanh: return "tanh";
  }
  return "?";
}

inline std::optional<TransferKind> parse_transfer(std::string_view s) {
  if (s == "id") return TransferKind::identity;
  if (s == "sigm") return TransferKind::sigmoid;
  if (s == "tanh") return TransferKind::tanh;
  return std::nullopt;
}

inline double apply_transfer(TransferKind t, double x) {
  switch (t) {
    case TransferKind::identity: return x;
    case TransferKind::sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case TransferKind::tanh: return std::tanh(x);
  }
  return x;
}

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double distance(const Vec3& a, const Vec3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

inline Vec3 midpoint(const Vec3& a, const Vec3& b) {
  return {(a.x + b.x) / 2.0, (a.y + b.y) / 2.0, (a.z + b.z) / 2.0};
}

// Target of a connector: an interface node of an instantiated module.
struct NodeRef {
  std::string module;  // instance name
  std::string node;    // label in the instance's template
  friend bool operator==(const NodeRef&, const NodeRef&) = default;
  friend auto operator<=>(const NodeRef&, const NodeRef&) = default;
};

struct NodeSpec {
  std::string label;
  NodeKind kind = NodeKind::hidden;
  Vec3 position;
  double bias = 0.0;
  TransferKind transfer = TransferKind::identity;
  std::optional<std::string> binding;  // sensor/actuator channel
  std::optional<NodeRef> reference;    // connectors only
  friend bool operator==(const NodeSpec&, const NodeSpec&) = default;
};

struct EdgeSpec {
  std::string source;
  std::string target;
  double weight = 0.0;
  friend bool operator==(const EdgeSpec&, const EdgeSpec&) = default;
};

enum class ModuleRole { standard, cpg };

struct ModuleSpec {
  std::string name;
  ModuleRole role = ModuleRole::standard;
  bool evolvable = true;
  std::vector<NodeSpec> nodes;
  std::vector<EdgeSpec> edges;

  const NodeSpec* find_node(std::string_view label) const {
    for (const auto& n : nodes)
      if (n.label == label) return &n;
    return nullptr;
  }
  NodeSpec* find_node(std::string_view label) {
    for (auto& n : nodes)
      if (n.label == label) return &n;
    return nullptr;
  }
  bool has_edge(std::string_view source, std::string_view target) const {
    return std::any_of(edges.begin(), edges.end(), [&](const EdgeSpec& e) {
      return e.source == source && e.target == target;
    });
  }

  friend bool operator==(const ModuleSpec&, const ModuleSpec&) = default;
};

struct ModuleInstance {
  std::string template_name;
  std::string name;
  bool mirror = false;
  std::map<std::string, std::string> bindings;  // template channel -> concrete channel
  friend bool operator==(const ModuleInstance&, const ModuleInstance&) = default;
};

struct Genome {
  std::vector<ModuleSpec> modules;
  std::vector<ModuleInstance> instances;
  std::map<std::string, std::string> metadata;

  const ModuleSpec* find_module(std::string_view name) const {
    for (const auto& m : modules)
      if (m.name == name) return &m;
    return nullptr;
  }
  ModuleSpec* find_module(std::string_view name) {
    for (auto& m : modules)
      if (m.name == name) return &m;
    return nullptr;
  }

  friend bool operator==(const Genome&, const Genome&) = default;
};

// ---------------------------------------------------------------------------
// Normal form

inline void normalize(ModuleSpec& m) {
  for (auto& n : m.nodes) {
    if (n.kind == NodeKind::connector) {
      n.position = {};
      n.bias = 0.0;
      n.transfer = TransferKind::identity;
    }
  }
  std::sort(m.nodes.begin(), m.nodes.end(),
            [](const NodeSpec& a, const NodeSpec& b) { return a.label < b.label; });
  std::sort(m.edges.begin(), m.edges.end(), [](const EdgeSpec& a, const EdgeSpec& b) {
    return std::tie(a.source, a.target) < std::tie(b.source, b.target);
  });
}

// Modules by name, nodes by label, edges by (source, target). Instance order is
// semantically relevant (compiled index assignment) and is kept.
inline void normalize(Genome& g) {
  for (auto& m : g.modules) normalize(m);
  std::sort(g.modules.begin(), g.modules.end(),
            [](const ModuleSpec& a, const ModuleSpec& b) { return a.name < b.name; });
}

inline bool structurally_equal(Genome a, Genome b) {
  normalize(a);
  normalize(b);
  return a == b;
}

// ---------------------------------------------------------------------------
// Instancing

// Modules without an explicit instance are instantiated once under their own
// name with identity channel bindings.
inline std::vector<ModuleInstance> instance_list(const Genome& g) {
  std::vector<ModuleInstance> out = g.instances;
  std::set<std::string> used;
  for (const auto& i : g.instances) used.insert(i.template_name);
  for (const auto& m : g.modules) {
    if (used.count(m.name)) continue;
    ModuleInstance inst{m.name, m.name, false, {}};
    for (const auto& n : m.nodes)
      if (n.binding) inst.bindings[*n.binding] = *n.binding;
    out.push_back(std::move(inst));
  }
  return out;
}

inline std::string prefixed(std::string_view instance, std::string_view label) {
  std::string s(instance);
  s += '.';
  s += label;
  return s;
}

inline Vec3 mirrored(Vec3 p, bool mirror) {
  if (mirror) p.x = -p.x;
  return p;
}

// Effective role and position of a connector after resolving its reference.
struct ConnectorTraits {
  NodeKind effective_kind = NodeKind::hidden;
  Vec3 position;
  double bias = 0.0;
  TransferKind transfer = TransferKind::identity;
};

// Connector resolutions for the nodes of one template module.
struct ModuleContext {
  std::map<std::string, ConnectorTraits> connectors;

  NodeKind effective_kind(const NodeSpec& n) const {
    if (n.kind != NodeKind::connector) return n.kind;
    auto it = connectors.find(n.label);
    return it == connectors.end() ? NodeKind::connector : it->second.effective_kind;
  }
  Vec3 position(const NodeSpec& n) const {
    if (n.kind != NodeKind::connector) return n.position;
    auto it = connectors.find(n.label);
    return it == connectors.end() ? Vec3{} : it->second.position;
  }
};

// Within a module, output nodes never emit edges and sensor/input nodes never
// receive them. A connector takes the opposite role of the node it references.
inline bool can_emit(NodeKind effective) { return effective != NodeKind::output; }
inline bool can_receive(NodeKind effective) {
  return effective != NodeKind::sensor && effective != NodeKind::input;
}

namespace detail {

inline const ModuleInstance* find_instance(const std::vector<ModuleInstance>& list,
                                           std::string_view name) {
  for (const auto& i : list)
    if (i.name == name) return &i;
  return nullptr;
}

inline ConnectorTraits resolve_connector(const Genome& g,
                                         const std::vector<ModuleInstance>& instances,
                                         std::string_view module, const NodeSpec& n) {
  const auto ctx = [&] { return "module '" + std::string(module) + "', node '" + n.label + "'"; };
  if (!n.reference) throw GenomeError("connector without reference in " + ctx());
  const auto* inst = find_instance(instances, n.reference->module);
  if (!inst)
    throw GenomeError("connector references missing module '" + n.reference->module + "' in " +
                      ctx());
  const auto* tmpl = g.find_module(inst->template_name);
  if (!tmpl) throw GenomeError("instance '" + inst->name + "' has missing template");
  if (tmpl->name == module)
    throw GenomeError("connector references its own module in " + ctx());
  const auto* target = tmpl->find_node(n.reference->node);
  if (!target)
    throw GenomeError("connector references missing node '" + n.reference->module + "." +
                      n.reference->node + "' in " + ctx());
  if (target->kind != NodeKind::input && target->kind != NodeKind::output)
    throw GenomeError("connector must reference an input or output node in " + ctx());
  ConnectorTraits t;
  t.effective_kind = target->kind == NodeKind::input ? NodeKind::output : NodeKind::input;
  t.position = mirrored(target->position, inst->mirror);
  t.bias = target->bias;
  t.transfer = target->transfer;
  return t;
}

}  // namespace detail

inline ModuleContext module_context(const Genome& g, std::string_view module_name) {
  const auto* m = g.find_module(module_name);
  if (!m) throw GenomeError("unknown module '" + std::string(module_name) + "'");
  const auto instances = instance_list(g);
  ModuleContext ctx;
  for (const auto& n : m->nodes)
    if (n.kind == NodeKind::connector)
      ctx.connectors[n.label] = detail::resolve_connector(g, instances, m->name, n);
  return ctx;
}

// ---------------------------------------------------------------------------
// Validation

inline void validate_module_local(const ModuleSpec& m) {
  const auto where = [&](const std::string& label) {
    return "module '" + m.name + "', node '" + label + "'";
  };
  std::set<std::string> labels;
  for (const auto& n : m.nodes) {
    if (n.label.empty()) throw GenomeError("empty node label in module '" + m.name + "'");
    if (!labels.insert(n.label).second) throw GenomeError("duplicate label in " + where(n.label));
    const bool needs_binding = n.kind == NodeKind::sensor || n.kind == NodeKind::actuator;
    if (needs_binding != n.binding.has_value())
      throw GenomeError(std::string(needs_binding ? "missing" : "unexpected") + " binding in " +
                        where(n.label));
    if ((n.kind == NodeKind::connector) != n.reference.has_value())
      throw GenomeError("reference must be present exactly on connectors in " + where(n.label));
    if (!std::isfinite(n.bias) || !std::isfinite(n.position.x) || !std::isfinite(n.position.y) ||
        !std::isfinite(n.position.z))
      throw GenomeError("non-finite value in " + where(n.label));
  }
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& e : m.edges) {
    const std::string edge = "edge " + e.source + "->" + e.target + " in module '" + m.name + "'";
    if (!labels.count(e.source) || !labels.count(e.target))
      throw GenomeError("dangling " + edge);
    if (!seen.emplace(e.source, e.target).second) throw GenomeError("duplicate " + edge);
    if (!std::isfinite(e.weight)) throw GenomeError("non-finite weight on " + edge);
  }
}

inline void validate_edges(const ModuleSpec& m, const ModuleContext& ctx) {
  for (const auto& e : m.edges) {
    const auto src = ctx.effective_kind(*m.find_node(e.source));
    const auto dst = ctx.effective_kind(*m.find_node(e.target));
    const std::string edge = "edge " + e.source + "->" + e.target + " in module '" + m.name + "'";
    if (dst == NodeKind::sensor) throw GenomeError("illegal incoming edge on sensor: " + edge);
    if (dst == NodeKind::input) throw GenomeError("illegal incoming edge on input: " + edge);
    if (src == NodeKind::output) throw GenomeError("illegal outgoing edge on output: " + edge);
  }
}

// Concrete channel names of every bound node, in instance order.
inline std::vector<std::string> concrete_channels(const Genome& g) {
  std::vector<std::string> out;
  for (const auto& inst : instance_list(g)) {
    const auto* m = g.find_module(inst.template_name);
    if (!m) continue;
    for (const auto& n : m->nodes) {
      if (!n.binding) continue;
      auto it = inst.bindings.find(*n.binding);
      if (it != inst.bindings.end()) out.push_back(it->second);
    }
  }
  return out;
}

inline void validate(const Genome& g) {
  std::set<std::string> names;
  for (const auto& m : g.modules) {
    if (m.name.empty()) throw GenomeError("module without name");
    if (!names.insert(m.name).second) throw GenomeError("duplicate module '" + m.name + "'");
    validate_module_local(m);
  }

  const auto instances = instance_list(g);
  std::set<std::string> instance_names;
  for (const auto& inst : instances) {
    if (!instance_names.insert(inst.name).second)
      throw GenomeError("duplicate instance name '" + inst.name + "'");
    const auto* m = g.find_module(inst.template_name);
    if (!m)
      throw GenomeError("instance '" + inst.name + "' references missing template '" +
                        inst.template_name + "'");
    std::set<std::string> channels;
    for (const auto& n : m->nodes)
      if (n.binding) channels.insert(*n.binding);
    for (const auto& ch : channels)
      if (!inst.bindings.count(ch))
        throw GenomeError("instance '" + inst.name + "' has no binding for channel '" + ch + "'");
    for (const auto& [from, to] : inst.bindings) {
      if (!channels.count(from))
        throw GenomeError("instance '" + inst.name + "' binds unknown channel '" + from + "'");
      if (to.empty()) throw GenomeError("instance '" + inst.name + "' binds to empty channel");
    }
  }

  for (const auto& m : g.modules) validate_edges(m, module_context(g, m.name));

  std::set<std::string> seen;
  for (const auto& ch : concrete_channels(g))
    if (!seen.insert(ch).second) throw GenomeError("duplicate binding channel '" + ch + "'");
}

// Deep copies of every instantiated module: labels prefixed with the instance
// name, bindings replaced by concrete channels, x mirrored where requested.
// Connector references are rewritten to the prefixed label of their target.
inline std::vector<ModuleSpec> instantiate(const Genome& g) {
  std::vector<ModuleSpec> out;
  for (const auto& inst : instance_list(g)) {
    const auto* tmpl = g.find_module(inst.template_name);
    if (!tmpl) throw GenomeError("missing template '" + inst.template_name + "'");
    ModuleSpec copy;
    copy.name = inst.name;
    copy.role = tmpl->role;
    copy.evolvable = tmpl->evolvable;
    for (auto n : tmpl->nodes) {
      n.label = prefixed(inst.name, n.label);
      if (n.kind != NodeKind::connector) n.position = mirrored(n.position, inst.mirror);
      if (n.binding) {
        auto it = inst.bindings.find(*n.binding);
        if (it == inst.bindings.end())
          throw GenomeError("instance '" + inst.name + "' has no binding for channel '" +
                            *n.binding + "'");
        n.binding = it->second;
      }
      if (n.reference) n.reference->node = prefixed(n.reference->module, n.reference->node);
      copy.nodes.push_back(std::move(n));
    }
    for (auto e : tmpl->edges) {
      e.source = prefixed(inst.name, e.source);
      e.target = prefixed(inst.name, e.target);
      copy.edges.push_back(std::move(e));
    }
    out.push_back(std::move(copy));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Merging for incremental evolution

inline std::string part_name(const Genome& g, std::size_t index) {
  auto it = g.metadata.find("name");
  if (it != g.metadata.end() && !it->second.empty()) return it->second;
  return "part" + std::to_string(index);
}

// Non-CPG modules and instances are appended; every CPG-role module is folded
// into a single CPG module. CPG node labels that occur in more than one source
// module are prefixed with "<part name>:".
inline Genome merge_genomes(const std::vector<Genome>& parts) {
  if (parts.empty()) return {};
  if (parts.size() == 1) {
    validate(parts.front());
    return parts.front();
  }

  Genome out;
  std::vector<std::string> part_names;
  for (std::size_t p = 0; p < parts.size(); ++p) part_names.push_back(part_name(parts[p], p));

  // Concrete channel collisions.
  std::map<std::string, std::size_t> owner;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    validate(parts[p]);
    for (const auto& ch : concrete_channels(parts[p])) {
      auto [it, inserted] = owner.emplace(ch, p);
      if (!inserted)
        throw GenomeError("binding-channel collision on '" + ch + "' between '" +
                          part_names[it->second] + "' and '" + part_names[p] + "'");
    }
  }

  // Label frequencies over all CPG modules.
  std::map<std::string, int> cpg_label_count;
  std::string cpg_name;
  for (const auto& part : parts)
    for (const auto& m : part.modules) {
      if (m.role != ModuleRole::cpg) continue;
      if (cpg_name.empty()) cpg_name = m.name;
      for (const auto& n : m.nodes) ++cpg_label_count[n.label];
      for (const auto& i : part.instances)
        if (i.template_name == m.name)
          throw GenomeError("CPG module '" + m.name + "' must not be explicitly instanced");
    }

  // (part, cpg module name, old label) -> new label
  std::map<std::tuple<std::size_t, std::string, std::string>, std::string> relabel;
  ModuleSpec cpg;
  cpg.name = cpg_name;
  cpg.role = ModuleRole::cpg;
  cpg.evolvable = false;

  const auto rewrite_ref = [&](std::size_t p, NodeSpec& n) {
    if (!n.reference) return;
    const auto* target = parts[p].find_module(n.reference->module);
    if (!target || target->role != ModuleRole::cpg) return;
    auto it = relabel.find({p, target->name, n.reference->node});
    if (it == relabel.end()) return;  // left for validate() to report
    n.reference = NodeRef{cpg_name, it->second};
  };

  for (std::size_t p = 0; p < parts.size(); ++p)
    for (const auto& m : parts[p].modules) {
      if (m.role != ModuleRole::cpg) continue;
      for (const auto& n : m.nodes) {
        const bool clash = cpg_label_count[n.label] > 1;
        relabel[{p, m.name, n.label}] = clash ? part_names[p] + ":" + n.label : n.label;
      }
    }

  std::set<std::string> module_names;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    for (const auto& m : parts[p].modules) {
      if (m.role == ModuleRole::cpg) {
        cpg.evolvable = cpg.evolvable || m.evolvable;
        for (auto n : m.nodes) {
          n.label = relabel.at({p, m.name, n.label});
          rewrite_ref(p, n);
          cpg.nodes.push_back(std::move(n));
        }
        for (auto e : m.edges) {
          e.source = relabel.at({p, m.name, e.source});
          e.target = relabel.at({p, m.name, e.target});
          cpg.edges.push_back(std::move(e));
        }
        continue;
      }
      if (m.name == cpg_name || !module_names.insert(m.name).second)
        throw GenomeError("module name collision on '" + m.name + "' (part '" + part_names[p] +
                          "')");
      ModuleSpec copy = m;
      for (auto& n : copy.nodes) rewrite_ref(p, n);
      out.modules.push_back(std::move(copy));
    }
    for (const auto& inst : parts[p].instances) out.instances.push_back(inst);
  }
  if (!cpg_name.empty()) out.modules.push_back(std::move(cpg));

  std::string from;
  for (const auto& n : part_names) from += (from.empty() ? "" : ",") + n;
  out.metadata["merged-from"] = from;
  out.metadata["name"] = "merged";

  normalize(out);
  try {
    validate(out);
  } catch (const GenomeError& e) {
    throw GenomeError(std::string("merged genome is invalid: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Search-space dimension

struct DimensionCounts {
  std::int64_t sensors = 0;    // n_s
  std::int64_t actuators = 0;  // n_a
  std::int64_t inputs = 0;     // n_i
  std::int64_t outputs = 0;    // n_o
  std::int64_t hidden = 0;     // n_h
};

enum class DimensionMode { modular_leg, modular_cpg, unrestricted };

inline std::string_view to_string(DimensionMode m) {
  switch (m) {
    case DimensionMode::modular_leg: return "modular-leg";
    case DimensionMode::modular_cpg: return "modular-cpg";
    case DimensionMode::unrestricted: return "unrestricted";
  }
  return "?";
}

// Maximal number of synapses for the given node counts.
inline std::int64_t dimension(const DimensionCounts& c, DimensionMode mode) {
  const auto s = c.sensors, a = c.actuators, i = c.inputs, o = c.outputs, h = c.hidden;
  switch (mode) {
    case DimensionMode::modular_leg:
      return s * (o + a) + i * (i + a) + o * (i + a) + a * (o + a);
    case DimensionMode::modular_cpg:
      return i * o + o * i;
    case DimensionMode::unrestricted:
      return s * (h + a) + h * (h + a) + a * (h + a);
  }
  return 0;
}

// Counts by effective kind: connectors count as the role they take on.
inline DimensionCounts count_nodes(const ModuleSpec& m, const ModuleContext& ctx) {
  DimensionCounts c;
  for (const auto& n : m.nodes) {
    switch (ctx.effective_kind(n)) {
      case NodeKind::sensor: ++c.sensors; break;
      case NodeKind::actuator: ++c.actuators; break;
      case NodeKind::input: ++c.inputs; break;
      case NodeKind::output: ++c.outputs; break;
      case NodeKind::hidden: ++c.hidden; break;
      case NodeKind::connector: break;
    }
  }
  return c;
}

inline DimensionMode dimension_mode(const ModuleSpec& m, const DimensionCounts& c) {
  if (m.role == ModuleRole::cpg || (c.sensors == 0 && c.actuators == 0))
    return DimensionMode::modular_cpg;
  return DimensionMode::modular_leg;
}

}  // namespace nmode
