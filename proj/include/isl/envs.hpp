#ifndef ISL_ENVS_HPP_
#define ISL_ENVS_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "isl/common.hpp"
#include "isl/dp.hpp"

namespace isl {

struct EnvStep {
  Eigen::VectorXd observation;
  double reward = 0.0;
  bool terminal = false;
  bool goal = false;  // the step earned the environment's sparse bonus
};

/// Episodic environment driven by a caller-owned generator.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual EnvStep reset(Rng& rng) = 0;
  virtual EnvStep step(int action, Rng& rng) = 0;

  virtual int num_actions() const = 0;
  virtual int observation_size() const = 0;
  virtual int horizon() const = 0;
  virtual std::string name() const = 0;

  /// Number of discrete states, 0 for continuous environments.
  virtual int num_states() const { return 0; }
  /// Index of the current discrete state; only valid when num_states() > 0.
  virtual int state_index() const { throw InvalidArgument(name() + " has no discrete state index"); }
  /// Largest undiscounted episode return, when known.
  virtual double max_return() const { return 0.0; }
};

// ---------------------------------------------------------------------------
// Deep Sea

struct DeepSeaConfig {
  int n = 10;
  bool stochastic = false;
  std::uint64_t mask_seed = 0;
  double noise_std = 1.0;

  void validate() const {
    require(n >= 2, "DeepSeaConfig: n must be at least 2");
    require(noise_std >= 0, "DeepSeaConfig: noise_std must be non-negative");
  }
};

/// N x N grid. The agent starts top-left, descends one row per step and moves
/// left or right according to a fixed per-cell action mask. Right moves cost
/// 0.01/N; a right move taken from the bottom-right cell earns +1. Episodes last
/// exactly N steps. The stochastic variant lets intended right moves fail with
/// probability 1/N and adds Gaussian noise to the final reward.
class DeepSea final : public Environment {
 public:
  explicit DeepSea(DeepSeaConfig config);

  EnvStep reset(Rng& rng) override;
  EnvStep step(int action, Rng& rng) override;

  int num_actions() const override { return 2; }
  int observation_size() const override { return config_.n * config_.n; }
  int horizon() const override { return config_.n; }
  std::string name() const override { return config_.stochastic ? "deep_sea_stochastic" : "deep_sea"; }
  int num_states() const override { return config_.n * config_.n + 1; }
  int state_index() const override;
  double max_return() const override { return 0.99; }

  const DeepSeaConfig& config() const noexcept { return config_; }
  /// Action id that moves right in cell (row, col).
  int right_action(int row, int col) const;
  int row() const noexcept { return row_; }
  int column() const noexcept { return col_; }
  double move_cost() const noexcept { return 0.01 / config_.n; }

 private:
  Eigen::VectorXd observation() const;

  DeepSeaConfig config_;
  std::vector<std::uint8_t> right_is_one_;  // mask, row-major N x N
  int row_ = 0;
  int col_ = 0;
  bool done_ = true;
};

/// Exact tabular form: N^2 grid cells plus an absorbing zero-reward terminal
/// state (index N^2). Expected rewards drop the zero-mean noise.
TabularMdp<double> deep_sea_as_tabular(const DeepSeaConfig& config, double gamma);

// ---------------------------------------------------------------------------
// Cartpole swing-up

struct CartpolePhysics {
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double pole_half_length = 0.5;
  double gravity = 9.8;
  double force = 10.0;
  double timestep = 0.01;
  int substeps = 10;
};

struct CartpoleConfig {
  int n = 0;  // difficulty
  CartpolePhysics physics;
  int horizon = 1000;
  double x_limit = 3.0;
  double move_cost = 0.1;
  double reset_jitter = 0.05;

  void validate() const {
    require(n >= 0 && n <= 19, "CartpoleConfig: difficulty must lie in [0, 19]");
    require(horizon == 1000, "CartpoleConfig: horizon is fixed at 1000 steps");
    require(physics.substeps >= 1 && physics.timestep > 0, "CartpoleConfig: invalid integration settings");
  }
};

struct CartpoleState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 0.0;  // 0 is upright
  double theta_dot = 0.0;
};

/// Actions {left, stay, right} push with {-F, 0, +F}. Left/right cost 0.1; +1
/// whenever cos(theta) > N/20, |theta_dot| < 1 and |x| < 1 - N/20. The episode
/// ends when |x| > 3 or after 1000 steps. Starts hanging down.
class Cartpole final : public Environment {
 public:
  explicit Cartpole(CartpoleConfig config);

  EnvStep reset(Rng& rng) override;
  EnvStep step(int action, Rng& rng) override;

  int num_actions() const override { return 3; }
  int observation_size() const override { return 5; }
  int horizon() const override { return config_.horizon; }
  std::string name() const override { return "cartpole"; }

  const CartpoleConfig& config() const noexcept { return config_; }
  const CartpoleState& state() const noexcept { return state_; }
  /// Places the system in an arbitrary state mid-episode (tests and diagnostics).
  void set_state(const CartpoleState& state);

 private:
  Eigen::VectorXd observation() const;
  void integrate(double force);

  CartpoleConfig config_;
  CartpoleState state_;
  int t_ = 0;
  bool done_ = true;
};

// ---------------------------------------------------------------------------

/// Random MDP: kernel rows are normalized uniform positives, rewards uniform in
/// [-1, 1] with bounds (-1, 1). Reproducible from `seed`.
TabularMdp<double> random_mdp(std::uint64_t seed, int n_states, int n_actions, double gamma);

}  // namespace isl

#endif  // ISL_ENVS_HPP_
