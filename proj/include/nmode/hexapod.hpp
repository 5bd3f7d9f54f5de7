#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "nmode/environment.hpp"

namespace nmode {

inline constexpr double deg(double d) { return d * std::numbers::pi / 180.0; }

// Kinematic stand-in for a legged body: joints track actuator targets with a
// rate limit, legs whose knee is below the stance threshold support the body,
// and backward shoulder motion of supporting legs moves the body forward.
struct HexapodParams {
  std::vector<std::string> legs{"fl", "fr", "ml", "mr", "rl", "rr"};
  double leg_length = 1.0;         // L
  double body_height = 0.5;        // h0
  double max_rate = 0.1;           // joint change per step [rad]
  double stance_threshold = 0.0;   // knee angle below which a leg supports [rad]
  double shoulder_min = deg(-35.0);
  double shoulder_max = deg(35.0);
  double knee_min = deg(-15.0);
  double knee_max = deg(25.0);
  double actuator_min = -1.0;      // actuator value mapped onto the joint minimum
  double actuator_max = 1.0;
  double initial_knee = deg(-5.0);
  int min_support = 2;             // stance legs required for propulsion
  int abort_steps = 20;            // consecutive steps without stance before abort
  double gamma = 0.0;              // height-change punishment

  static HexapodParams from(const ParamMap& p) {
    check_known_params(p,
                       {"legs", "leg_length", "body_height", "max_rate", "stance_threshold",
                        "shoulder_min", "shoulder_max", "knee_min", "knee_max", "actuator_min",
                        "actuator_max", "initial_knee", "min_support", "abort_steps", "gamma"},
                       "hexapod");
    HexapodParams h;
    if (auto it = p.find("legs"); it != p.end()) {
      h.legs.clear();
      std::stringstream ss(it->second);
      for (std::string leg; std::getline(ss, leg, ',');)
        if (!leg.empty()) h.legs.push_back(leg);
    }
    h.leg_length = param_real(p, "leg_length", h.leg_length);
    h.body_height = param_real(p, "body_height", h.body_height);
    h.max_rate = param_real(p, "max_rate", h.max_rate);
    h.stance_threshold = param_real(p, "stance_threshold", h.stance_threshold);
    h.shoulder_min = param_real(p, "shoulder_min", h.shoulder_min);
    h.shoulder_max = param_real(p, "shoulder_max", h.shoulder_max);
    h.knee_min = param_real(p, "knee_min", h.knee_min);
    h.knee_max = param_real(p, "knee_max", h.knee_max);
    h.actuator_min = param_real(p, "actuator_min", h.actuator_min);
    h.actuator_max = param_real(p, "actuator_max", h.actuator_max);
    h.initial_knee = param_real(p, "initial_knee", h.initial_knee);
    h.min_support = static_cast<int>(param_int(p, "min_support", h.min_support));
    h.abort_steps = static_cast<int>(param_int(p, "abort_steps", h.abort_steps));
    h.gamma = param_real(p, "gamma", h.gamma);
    h.validate();
    return h;
  }

  void validate() const {
    if (legs.empty()) throw ConfigError("hexapod needs at least one leg");
    if (!(max_rate > 0.0)) throw ConfigError("max_rate must be positive");
    if (!(shoulder_min < shoulder_max) || !(knee_min < knee_max))
      throw ConfigError("joint ranges must be non-empty");
    if (!(actuator_min < actuator_max)) throw ConfigError("actuator range must be non-empty");
    if (min_support < 1) throw ConfigError("min_support must be at least 1");
    if (abort_steps < 1) throw ConfigError("abort_steps must be at least 1");
  }
};

struct BodyState {
  double y = 0.0;  // forward position
  double z = 0.0;  // body height
  std::vector<double> shoulder;
  std::vector<double> knee;
  std::vector<bool> stance;

  int stance_count() const { return static_cast<int>(std::count(stance.begin(), stance.end(), true)); }
};

inline BodyState initial_body(const HexapodParams& p) {
  BodyState b;
  const auto n = p.legs.size();
  b.shoulder.assign(n, 0.0);
  b.knee.assign(n, p.initial_knee);
  b.stance.assign(n, p.initial_knee < p.stance_threshold);
  b.z = p.body_height * b.stance_count() / static_cast<double>(n);
  return b;
}

namespace detail {
inline double joint_target(double v, const HexapodParams& p, double lo, double hi) {
  const double c = std::clamp(v, p.actuator_min, p.actuator_max);
  return lo + (c - p.actuator_min) / (p.actuator_max - p.actuator_min) * (hi - lo);
}
inline double track(double angle, double target, double rate) {
  return angle + std::clamp(target - angle, -rate, rate);
}
}  // namespace detail

// Actuators are (shoulder, knee) per leg in leg order.
inline BodyState hexapod_step(const BodyState& body, std::span<const double> actuators,
                              const HexapodParams& p) {
  const auto n = p.legs.size();
  if (actuators.size() != 2 * n) throw ConfigError("hexapod expects two actuator values per leg");
  BodyState next = body;
  double backward = 0.0;
  int support = 0;
  for (std::size_t leg = 0; leg < n; ++leg) {
    const double shoulder_target =
        detail::joint_target(actuators[2 * leg], p, p.shoulder_min, p.shoulder_max);
    const double knee_target = detail::joint_target(actuators[2 * leg + 1], p, p.knee_min, p.knee_max);
    next.shoulder[leg] = detail::track(body.shoulder[leg], shoulder_target, p.max_rate);
    next.knee[leg] = detail::track(body.knee[leg], knee_target, p.max_rate);
    next.stance[leg] = next.knee[leg] < p.stance_threshold;
    if (next.stance[leg]) {
      ++support;
      backward += -(next.shoulder[leg] - body.shoulder[leg]);
    }
  }
  if (support >= p.min_support) next.y = body.y + p.leg_length / support * backward;
  next.z = p.body_height * support / static_cast<double>(n);
  return next;
}

class HexapodEnvironment final : public Environment {
 public:
  explicit HexapodEnvironment(HexapodParams params) : p_(std::move(params)) {
    p_.validate();
    for (const auto& leg : p_.legs) {
      sensor_channels_.push_back(leg + "_shoulder_angle");
      sensor_channels_.push_back(leg + "_knee_angle");
      sensor_channels_.push_back(leg + "_foot_contact");
      actuator_channels_.push_back(leg + "_shoulder");
      actuator_channels_.push_back(leg + "_knee");
    }
    sensor_values_.resize(sensor_channels_.size());
  }

  const std::vector<std::string>& sensor_channels() const override { return sensor_channels_; }
  const std::vector<std::string>& actuator_channels() const override { return actuator_channels_; }

  void new_individual(Rng&) override {
    body_ = initial_body(p_);
    fitness_ = 0.0;
    airborne_steps_ = 0;
    refresh_sensors();
  }

  std::span<const double> sensors() const override { return sensor_values_; }

  void update_controller(std::span<const double> actuators) override {
    const double z_prev = body_.z;
    body_ = hexapod_step(body_, actuators, p_);
    fitness_ += body_.y - p_.gamma * (body_.z - z_prev);
    airborne_steps_ = body_.stance_count() == 0 ? airborne_steps_ + 1 : 0;
    refresh_sensors();
  }

  bool abort() const override { return airborne_steps_ >= p_.abort_steps; }
  void evaluation_completed() override {}
  double fitness() const override { return fitness_; }
  Observation observe() const override { return {body_.y, body_.z, body_.stance_count()}; }

  const BodyState& body() const { return body_; }

 private:
  void refresh_sensors() {
    for (std::size_t leg = 0; leg < p_.legs.size(); ++leg) {
      sensor_values_[3 * leg] = body_.shoulder[leg];
      sensor_values_[3 * leg + 1] = body_.knee[leg];
      sensor_values_[3 * leg + 2] = body_.stance[leg] ? 1.0 : 0.0;
    }
  }

  HexapodParams p_;
  std::vector<std::string> sensor_channels_;
  std::vector<std::string> actuator_channels_;
  std::vector<double> sensor_values_;
  BodyState body_;
  double fitness_ = 0.0;
  int airborne_steps_ = 0;
};

}  // namespace nmode
