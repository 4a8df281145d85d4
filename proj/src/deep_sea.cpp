#include <algorithm>

#include "isl/envs.hpp"

namespace isl {

DeepSea::DeepSea(DeepSeaConfig config) : config_(config) {
  config_.validate();
  Rng mask_rng(config_.mask_seed);
  right_is_one_.resize(static_cast<std::size_t>(config_.n * config_.n));
  for (auto& cell : right_is_one_) cell = static_cast<std::uint8_t>(mask_rng() >> 63);
}

int DeepSea::right_action(int row, int col) const {
  return right_is_one_[static_cast<std::size_t>(row * config_.n + col)] ? 1 : 0;
}

int DeepSea::state_index() const {
  return done_ && row_ == config_.n ? config_.n * config_.n : row_ * config_.n + col_;
}

Eigen::VectorXd DeepSea::observation() const {
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(config_.n * config_.n);
  const int r = std::min(row_, config_.n - 1);
  obs(r * config_.n + col_) = 1.0;
  return obs;
}

EnvStep DeepSea::reset(Rng& /*rng*/) {
  row_ = 0;
  col_ = 0;
  done_ = false;
  return EnvStep{observation(), 0.0, false, false};
}

EnvStep DeepSea::step(int action, Rng& rng) {
  if (done_) throw InvalidArgument("DeepSea::step called after the episode ended");
  require(action == 0 || action == 1, "DeepSea::step: action must be 0 or 1");
  const int n = config_.n;
  const bool right = action == right_action(row_, col_);

  EnvStep out;
  if (right) {
    out.reward -= move_cost();
    if (row_ == n - 1 && col_ == n - 1) {
      out.reward += 1.0;
      out.goal = true;
    }
    const bool moved = !config_.stochastic || uniform01(rng) < 1.0 - 1.0 / n;
    if (moved) col_ = std::min(col_ + 1, n - 1);
  } else {
    col_ = std::max(col_ - 1, 0);
  }
  if (config_.stochastic && row_ == n - 1) out.reward += config_.noise_std * standard_normal(rng);

  ++row_;
  done_ = row_ == n;
  out.terminal = done_;
  out.observation = observation();
  return out;
}

TabularMdp<double> deep_sea_as_tabular(const DeepSeaConfig& config, double gamma) {
  config.validate();
  const DeepSea env(config);
  const int n = config.n;
  const int terminal = n * n;

  TabularMdp<double> mdp;
  mdp.n_states = n * n + 1;
  mdp.n_actions = 2;
  mdp.gamma = gamma;
  mdp.kernel = Matrix<double>::Zero(mdp.n_states * 2, mdp.n_states);
  mdp.reward = Matrix<double>::Zero(mdp.n_states, 2);
  const double cost = env.move_cost();
  mdp.r_min = -cost;
  mdp.r_max = 1.0 - cost;

  for (int row = 0; row < n; ++row) {
    for (int col = 0; col < n; ++col) {
      const int s = row * n + col;
      for (int a = 0; a < 2; ++a) {
        const Index k = mdp.row(s, a);
        auto target = [&](int c) { return row + 1 == n ? terminal : (row + 1) * n + c; };
        if (a == env.right_action(row, col)) {
          mdp.reward(s, a) = -cost + (row == n - 1 && col == n - 1 ? 1.0 : 0.0);
          const int moved = target(std::min(col + 1, n - 1));
          if (config.stochastic) {
            mdp.kernel(k, moved) += 1.0 - 1.0 / n;
            mdp.kernel(k, target(col)) += 1.0 / n;
          } else {
            mdp.kernel(k, moved) = 1.0;
          }
        } else {
          mdp.kernel(k, target(std::max(col - 1, 0))) = 1.0;
        }
      }
    }
  }
  for (int a = 0; a < 2; ++a) mdp.kernel(mdp.row(terminal, a), terminal) = 1.0;
  mdp.validate();
  return mdp;
}

TabularMdp<double> random_mdp(std::uint64_t seed, int n_states, int n_actions, double gamma) {
  require(n_states >= 1 && n_actions >= 1, "random_mdp: sizes must be positive");
  Rng rng(seed);
  TabularMdp<double> mdp;
  mdp.n_states = n_states;
  mdp.n_actions = n_actions;
  mdp.gamma = gamma;
  mdp.r_min = -1.0;
  mdp.r_max = 1.0;
  mdp.kernel.resize(n_states * n_actions, n_states);
  for (Index r = 0; r < mdp.kernel.rows(); ++r) {
    for (Index t = 0; t < n_states; ++t) mdp.kernel(r, t) = 1.0 - uniform01(rng);  // (0, 1]
    mdp.kernel.row(r) /= mdp.kernel.row(r).sum();
  }
  mdp.reward.resize(n_states, n_actions);
  for (Index s = 0; s < n_states; ++s) {
    for (Index a = 0; a < n_actions; ++a) mdp.reward(s, a) = uniform(rng, -1.0, 1.0);
  }
  mdp.validate();
  return mdp;
}

}  // namespace isl
