#include <cmath>
#include <numbers>

#include "isl/envs.hpp"

namespace isl {

Cartpole::Cartpole(CartpoleConfig config) : config_(config) { config_.validate(); }

Eigen::VectorXd Cartpole::observation() const {
  Eigen::VectorXd obs(5);
  obs << std::cos(state_.theta), std::sin(state_.theta), state_.theta_dot, state_.x, state_.x_dot;
  return obs;
}

EnvStep Cartpole::reset(Rng& rng) {
  state_ = CartpoleState{};
  state_.theta = std::numbers::pi + uniform(rng, -config_.reset_jitter, config_.reset_jitter);
  t_ = 0;
  done_ = false;
  return EnvStep{observation(), 0.0, false, false};
}

void Cartpole::set_state(const CartpoleState& state) {
  state_ = state;
  done_ = false;
}

// Semi-implicit Euler on the classical cart-pole equations of motion.
void Cartpole::integrate(double force) {
  const CartpolePhysics& p = config_.physics;
  const double total_mass = p.cart_mass + p.pole_mass;
  const double pole_moment = p.pole_mass * p.pole_half_length;
  for (int i = 0; i < p.substeps; ++i) {
    const double sin_t = std::sin(state_.theta);
    const double cos_t = std::cos(state_.theta);
    const double temp = (force + pole_moment * state_.theta_dot * state_.theta_dot * sin_t) / total_mass;
    const double theta_acc = (p.gravity * sin_t - cos_t * temp) /
                             (p.pole_half_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total_mass));
    const double x_acc = temp - pole_moment * theta_acc * cos_t / total_mass;
    state_.x_dot += p.timestep * x_acc;
    state_.x += p.timestep * state_.x_dot;
    state_.theta_dot += p.timestep * theta_acc;
    state_.theta += p.timestep * state_.theta_dot;
  }
}

EnvStep Cartpole::step(int action, Rng& /*rng*/) {
  if (done_) throw InvalidArgument("Cartpole::step called after the episode ended");
  require(action >= 0 && action <= 2, "Cartpole::step: action must be 0, 1 or 2");
  const double push = static_cast<double>(action - 1);
  integrate(push * config_.physics.force);
  ++t_;

  EnvStep out;
  if (action != 1) out.reward -= config_.move_cost;
  const double threshold = config_.n / 20.0;
  if (std::cos(state_.theta) > threshold && std::abs(state_.theta_dot) < 1.0 &&
      std::abs(state_.x) < 1.0 - threshold) {
    out.reward += 1.0;
    out.goal = true;
  }
  done_ = std::abs(state_.x) > config_.x_limit || t_ >= config_.horizon;
  out.terminal = done_;
  out.observation = observation();
  return out;
}

}  // namespace isl
