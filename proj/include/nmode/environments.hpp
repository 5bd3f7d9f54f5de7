#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "nmode/environment.hpp"
#include "nmode/hexapod.hpp"
#include "nmode/oscillator.hpp"

namespace nmode {

using EnvironmentFactory = std::function<std::unique_ptr<Environment>(const ParamMap&)>;

namespace detail {

struct Registry {
  std::mutex mutex;
  std::map<std::string, EnvironmentFactory> factories;

  Registry() {
    factories["hexapod"] = [](const ParamMap& p) {
      return std::make_unique<HexapodEnvironment>(HexapodParams::from(p));
    };
    factories["oscillator"] = [](const ParamMap& p) {
      return std::make_unique<OscillatorEnvironment>(p);
    };
  }
};

inline Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace detail

// Environments are selected by name; extensions register here before a run.
inline void register_environment(const std::string& name, EnvironmentFactory factory) {
  auto& r = detail::registry();
  std::lock_guard lock(r.mutex);
  r.factories[name] = std::move(factory);
}

inline std::unique_ptr<Environment> make_environment(const std::string& name,
                                                     const ParamMap& params) {
  EnvironmentFactory factory;
  {
    auto& r = detail::registry();
    std::lock_guard lock(r.mutex);
    auto it = r.factories.find(name);
    if (it == r.factories.end()) throw ConfigError("unknown environment '" + name + "'");
    factory = it->second;
  }
  return factory(params);
}

// Compiles the genome once and runs one evaluation in a fresh environment.
// Deterministic in (genome, config, rng seed).
inline EvaluationResult evaluate(const Genome& genome, const EvaluationConfig& config, Rng& rng,
                                 const EvaluateOptions& options = {}) {
  config.validate();
  const auto net = compile(genome);
  auto env = make_environment(config.environment, config.params);
  return run_lifecycle(net, *env, config.lifetime, rng, options);
}

}  // namespace nmode
