#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "nmode/environment.hpp"

namespace nmode {

// Sensorless task that rewards sustained oscillation of one output channel.
// The channel value is recorded as y in the trace.
class OscillatorEnvironment final : public Environment {
 public:
  explicit OscillatorEnvironment(const ParamMap& params) {
    check_known_params(params, {"channel", "cap"}, "oscillator");
    auto it = params.find("channel");
    actuator_channels_.push_back(it == params.end() ? "osc" : it->second);
    cap_ = param_real(params, "cap", 0.5);
    if (!(cap_ > 0.0)) throw ConfigError("oscillator cap must be positive");
  }

  const std::vector<std::string>& sensor_channels() const override { return sensor_channels_; }
  const std::vector<std::string>& actuator_channels() const override { return actuator_channels_; }

  void new_individual(Rng&) override {
    value_ = 0.0;
    fitness_ = 0.0;
  }
  std::span<const double> sensors() const override { return {}; }

  void update_controller(std::span<const double> actuators) override {
    const double v = actuators[0];
    fitness_ += std::min(std::abs(v - value_), cap_);
    value_ = v;
  }

  bool abort() const override { return false; }
  void evaluation_completed() override {}
  double fitness() const override { return fitness_; }
  Observation observe() const override { return {value_, 0.0, 0}; }

 private:
  std::vector<std::string> sensor_channels_;
  std::vector<std::string> actuator_channels_;
  double cap_ = 0.5;
  double value_ = 0.0;
  double fitness_ = 0.0;
};

}  // namespace nmode
