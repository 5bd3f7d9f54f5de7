#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "nmode/genome.hpp"

namespace nmode {

class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CompiledNode {
  std::string label;  // "<instance>.<label>" of the owning (non-connector) node
  NodeKind kind = NodeKind::hidden;
  double bias = 0.0;
  TransferKind transfer = TransferKind::identity;
  std::optional<std::string> channel;
};

struct CompiledEdge {
  std::size_t source = 0;
  std::size_t target = 0;
  double weight = 0.0;
};

// Flat synchronous recurrent network. Connectors are unified with the
// interface node they reference, so each compiled node is a real neuron.
class CompiledNetwork {
 public:
  CompiledNetwork() = default;
  CompiledNetwork(std::vector<CompiledNode> nodes, std::vector<CompiledEdge> edges)
      : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      if (!n.channel) continue;
      if (n.kind == NodeKind::sensor) {
        if (!sensor_index_.emplace(*n.channel, sensors_.size()).second)
          throw NetworkError("duplicate binding channel '" + *n.channel + "'");
        sensors_.push_back(i);
        sensor_channels_.push_back(*n.channel);
      } else if (n.kind == NodeKind::actuator) {
        if (std::find(actuator_channels_.begin(), actuator_channels_.end(), *n.channel) !=
            actuator_channels_.end())
          throw NetworkError("duplicate binding channel '" + *n.channel + "'");
        actuators_.push_back(i);
        actuator_channels_.push_back(*n.channel);
      }
    }
    for (const auto& e : edges_) {
      if (e.source >= nodes_.size() || e.target >= nodes_.size())
        throw NetworkError("edge index out of range");
      const auto dst = nodes_[e.target].kind;
      if (dst == NodeKind::sensor) throw NetworkError("illegal incoming edge on sensor");
    }
    // Incoming adjacency, edges kept in declaration order per target.
    offsets_.assign(nodes_.size() + 1, 0);
    for (const auto& e : edges_) ++offsets_[e.target + 1];
    std::partial_sum(offsets_.begin(), offsets_.end(), offsets_.begin());
    incoming_.resize(edges_.size());
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (std::size_t k = 0; k < edges_.size(); ++k) incoming_[fill[edges_[k].target]++] = k;
  }

  std::size_t size() const { return nodes_.size(); }
  const std::vector<CompiledNode>& nodes() const { return nodes_; }
  const std::vector<CompiledEdge>& edges() const { return edges_; }

  const std::vector<std::string>& sensor_channels() const { return sensor_channels_; }
  const std::vector<std::string>& actuator_channels() const { return actuator_channels_; }
  std::span<const std::size_t> sensor_nodes() const { return sensors_; }
  std::span<const std::size_t> actuator_nodes() const { return actuators_; }

  std::optional<std::size_t> node_index(std::string_view label) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      if (nodes_[i].label == label) return i;
    return std::nullopt;
  }

  // Edge ids arriving at `target`.
  std::span<const std::size_t> incoming(std::size_t target) const {
    return {incoming_.data() + offsets_[target], offsets_[target + 1] - offsets_[target]};
  }

 private:
  std::vector<CompiledNode> nodes_;
  std::vector<CompiledEdge> edges_;
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> incoming_;
  std::vector<std::size_t> sensors_;
  std::vector<std::size_t> actuators_;
  std::vector<std::string> sensor_channels_;
  std::vector<std::string> actuator_channels_;
  std::unordered_map<std::string, std::size_t> sensor_index_;
};

// Node indices follow instance order, then label order within an instance.
inline CompiledNetwork compile(const Genome& genome) {
  try {
    validate(genome);
  } catch (const GenomeError& e) {
    throw NetworkError(std::string("cannot compile genome: ") + e.what());
  }
  const auto modules = instantiate(genome);

  std::vector<CompiledNode> nodes;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& m : modules)
    for (const auto& n : m.nodes) {
      if (n.kind == NodeKind::connector) continue;
      index.emplace(n.label, nodes.size());
      nodes.push_back({n.label, n.kind, n.bias, n.transfer, n.binding});
    }
  for (const auto& m : modules)
    for (const auto& n : m.nodes) {
      if (n.kind != NodeKind::connector) continue;
      auto it = index.find(n.reference->node);
      if (it == index.end())
        throw NetworkError("unresolved connector '" + n.label + "' -> '" + n.reference->node + "'");
      index.emplace(n.label, it->second);
    }

  std::vector<CompiledEdge> edges;
  for (const auto& m : modules)
    for (const auto& e : m.edges) edges.push_back({index.at(e.source), index.at(e.target), e.weight});
  return CompiledNetwork(std::move(nodes), std::move(edges));
}

struct NetworkState {
  std::vector<double> activation;
  std::vector<double> output;
  std::uint64_t t = 0;
  friend bool operator==(const NetworkState&, const NetworkState&) = default;
};

// a = 0, o = 0 at t = 0.
inline NetworkState initial_state(const CompiledNetwork& net) {
  return {std::vector<double>(net.size(), 0.0), std::vector<double>(net.size(), 0.0), 0};
}

namespace detail {

inline void update_node(const CompiledNetwork& net, const NetworkState& from, NetworkState& to,
                        std::size_t i) {
  const auto& node = net.nodes()[i];
  if (node.kind == NodeKind::sensor) return;  // set from the sensor values
  double a = node.bias;
  for (std::size_t k : net.incoming(i)) {
    const auto& e = net.edges()[k];
    a += e.weight * from.output[e.source];
  }
  to.activation[i] = a;
  to.output[i] = apply_transfer(node.transfer, a);
}

inline void set_sensors(const CompiledNetwork& net, std::span<const double> values,
                        NetworkState& to) {
  if (values.size() != net.sensor_nodes().size())
    throw NetworkError("expected " + std::to_string(net.sensor_nodes().size()) +
                       " sensor values, got " + std::to_string(values.size()));
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k]))
      throw NetworkError("non-finite value on sensor channel '" + net.sensor_channels()[k] + "'");
    const auto i = net.sensor_nodes()[k];
    to.activation[i] = values[k];
    to.output[i] = values[k];
  }
}

}  // namespace detail

// One synchronous update: every a(t+1) is computed from o(t) only, then
// o(t+1) = transfer(a(t+1)). Sensor values are given in sensor_channels() order.
inline void step_into(const CompiledNetwork& net, const NetworkState& from,
                      std::span<const double> sensor_values, NetworkState& to) {
  to.activation.resize(net.size());
  to.output.resize(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) detail::update_node(net, from, to, i);
  detail::set_sensors(net, sensor_values, to);
  to.t = from.t + 1;
}

// Same update visiting nodes in the given order.
inline void step_into(const CompiledNetwork& net, const NetworkState& from,
                      std::span<const double> sensor_values, NetworkState& to,
                      std::span<const std::size_t> order) {
  if (order.size() != net.size()) throw NetworkError("evaluation order must cover every node");
  to.activation.resize(net.size());
  to.output.resize(net.size());
  for (std::size_t i : order) detail::update_node(net, from, to, i);
  detail::set_sensors(net, sensor_values, to);
  to.t = from.t + 1;
}

inline NetworkState step(const CompiledNetwork& net, const NetworkState& state,
                         std::span<const double> sensor_values) {
  NetworkState next;
  step_into(net, state, sensor_values, next);
  return next;
}

inline NetworkState step(const CompiledNetwork& net, const NetworkState& state,
                         const std::map<std::string, double>& sensors) {
  std::vector<double> values;
  values.reserve(net.sensor_channels().size());
  for (const auto& ch : net.sensor_channels()) {
    auto it = sensors.find(ch);
    if (it == sensors.end()) throw NetworkError("missing sensor channel '" + ch + "'");
    values.push_back(it->second);
  }
  return step(net, state, values);
}

inline std::map<std::string, double> read_actuators(const CompiledNetwork& net,
                                                    const NetworkState& state) {
  std::map<std::string, double> out;
  for (std::size_t k = 0; k < net.actuator_nodes().size(); ++k)
    out[net.actuator_channels()[k]] = state.output[net.actuator_nodes()[k]];
  return out;
}

}  // namespace nmode
