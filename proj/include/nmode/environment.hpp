#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nmode/genome.hpp"
#include "nmode/network.hpp"
#include "nmode/rng.hpp"
#include "nmode/xml.hpp"

namespace nmode {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ParamMap = std::map<std::string, std::string>;

struct EvaluationConfig {
  std::uint64_t lifetime = 500;  // T, in steps
  std::string environment;
  ParamMap params;

  void validate() const {
    if (lifetime < 1) throw ConfigError("lifetime must be at least 1 step");
    if (environment.empty()) throw ConfigError("environment name is empty");
  }
};

// Per-step record kept in the trace.
struct Observation {
  double y = 0.0;
  double z = 0.0;
  int stance_count = 0;
};

struct TraceRow {
  std::uint64_t t = 0;
  Observation body;
  std::vector<double> actuators;   // in actuator channel order
  std::vector<double> activation;  // network a(t), empty unless requested
  std::vector<double> output;      // network o(t), empty unless requested
};

struct EvaluationTrace {
  Observation initial;  // state before the first step (z(0), y(0))
  std::vector<std::string> actuator_channels;
  std::vector<TraceRow> rows;
};

struct EvaluationResult {
  double fitness = 0.0;
  bool aborted = false;
  EvaluationTrace trace;
};

// Evaluation lifecycle: new_individual, then per step update_controller and
// abort, then evaluation_completed exactly once. The per-step fitness update is
// part of update_controller.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual const std::vector<std::string>& sensor_channels() const = 0;
  virtual const std::vector<std::string>& actuator_channels() const = 0;

  virtual void new_individual(Rng& rng) = 0;
  // Current sensor readings, in sensor_channels() order.
  virtual std::span<const double> sensors() const = 0;
  // Advances the environment by one step with actuator values in
  // actuator_channels() order.
  virtual void update_controller(std::span<const double> actuators) = 0;
  virtual bool abort() const = 0;
  virtual void evaluation_completed() = 0;
  virtual double fitness() const = 0;
  virtual Observation observe() const = 0;
};

// ---------------------------------------------------------------------------
// Fitness functions over traces

// F = sum_{t=1..T} y(t).
inline double fitness_forward(const EvaluationTrace& trace) {
  double f = 0.0;
  for (const auto& r : trace.rows) f += r.body.y;
  return f;
}

// F = sum_{t=1..T} [y(t) - gamma (z(t) - z(t-1))], z(0) the initial height.
inline double fitness_forward_with_height(const EvaluationTrace& trace, double gamma) {
  double f = 0.0;
  double z_prev = trace.initial.z;
  for (const auto& r : trace.rows) {
    f += r.body.y - gamma * (r.body.z - z_prev);
    z_prev = r.body.z;
  }
  return f;
}

// Sum of |y(t) - y(t-1)|, each term capped at `cap`.
inline double oscillator_fitness(const EvaluationTrace& trace, double cap = 0.5) {
  double f = 0.0;
  double prev = trace.initial.y;
  for (const auto& r : trace.rows) {
    f += std::min(std::abs(r.body.y - prev), cap);
    prev = r.body.y;
  }
  return f;
}

// ---------------------------------------------------------------------------
// Parameter helpers shared by environments

inline double param_real(const ParamMap& p, const std::string& key, double fallback) {
  auto it = p.find(key);
  if (it == p.end()) return fallback;
  auto v = xml::parse_real(it->second);
  if (!v) throw ConfigError("parameter '" + key + "' is not a real: '" + it->second + "'");
  return *v;
}

inline std::int64_t param_int(const ParamMap& p, const std::string& key, std::int64_t fallback) {
  auto it = p.find(key);
  if (it == p.end()) return fallback;
  try {
    std::size_t used = 0;
    auto v = std::stoll(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("parameter '" + key + "' is not an integer: '" + it->second + "'");
  }
}

inline void check_known_params(const ParamMap& p, std::initializer_list<std::string_view> known,
                               std::string_view env) {
  for (const auto& [k, v] : p)
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw ConfigError("unknown parameter '" + k + "' for environment '" + std::string(env) + "'");
}

// ---------------------------------------------------------------------------
// Sensorimotor loop

struct EvaluateOptions {
  bool record_network = false;  // keep a(t), o(t) per row
};

// Runs the lifecycle on an already constructed environment.
inline EvaluationResult run_lifecycle(const CompiledNetwork& net, Environment& env,
                                      std::uint64_t lifetime, Rng& rng,
                                      const EvaluateOptions& options = {}) {
  if (lifetime < 1) throw ConfigError("lifetime must be at least 1 step");

  // Map network channels onto environment channels.
  const auto& env_sensors = env.sensor_channels();
  const auto& env_actuators = env.actuator_channels();
  std::vector<std::size_t> sensor_src;
  for (const auto& ch : net.sensor_channels()) {
    auto it = std::find(env_sensors.begin(), env_sensors.end(), ch);
    if (it == env_sensors.end()) throw ConfigError("unbound sensor channel '" + ch + "'");
    sensor_src.push_back(static_cast<std::size_t>(it - env_sensors.begin()));
  }
  std::vector<std::size_t> actuator_dst;
  for (const auto& ch : net.actuator_channels()) {
    auto it = std::find(env_actuators.begin(), env_actuators.end(), ch);
    if (it == env_actuators.end()) throw ConfigError("unbound actuator channel '" + ch + "'");
    actuator_dst.push_back(static_cast<std::size_t>(it - env_actuators.begin()));
  }

  EvaluationResult result;
  result.trace.actuator_channels = env_actuators;

  env.new_individual(rng);
  result.trace.initial = env.observe();

  NetworkState state = initial_state(net), next;
  std::vector<double> sensor_values(sensor_src.size());
  std::vector<double> actuator_values(env_actuators.size(), 0.0);
  for (std::uint64_t t = 1; t <= lifetime; ++t) {
    const auto readings = env.sensors();
    for (std::size_t k = 0; k < sensor_src.size(); ++k) sensor_values[k] = readings[sensor_src[k]];
    step_into(net, state, sensor_values, next);
    std::swap(state, next);
    for (std::size_t k = 0; k < actuator_dst.size(); ++k)
      actuator_values[actuator_dst[k]] = state.output[net.actuator_nodes()[k]];

    env.update_controller(actuator_values);

    TraceRow row;
    row.t = t;
    row.body = env.observe();
    row.actuators = actuator_values;
    if (options.record_network) {
      row.activation = state.activation;
      row.output = state.output;
    }
    result.trace.rows.push_back(std::move(row));

    if (env.abort()) {
      result.aborted = true;
      break;
    }
  }
  env.evaluation_completed();
  result.fitness = env.fitness();
  return result;
}

// CSV columns: t,y,z,stance_count,a_0..a_k,o_0..o_k over compiled nodes.
inline void write_trace_csv(std::ostream& os, const EvaluationTrace& trace, std::size_t nodes) {
  using xml::format_real;
  os << "t,y,z,stance_count";
  for (std::size_t i = 0; i < nodes; ++i) os << ",a_" << i;
  for (std::size_t i = 0; i < nodes; ++i) os << ",o_" << i;
  os << '\n';
  for (const auto& r : trace.rows) {
    os << r.t << ',' << format_real(r.body.y) << ',' << format_real(r.body.z) << ','
       << r.body.stance_count;
    for (std::size_t i = 0; i < nodes; ++i)
      os << ',' << format_real(i < r.activation.size() ? r.activation[i] : 0.0);
    for (std::size_t i = 0; i < nodes; ++i)
      os << ',' << format_real(i < r.output.size() ? r.output[i] : 0.0);
    os << '\n';
  }
}

}  // namespace nmode
