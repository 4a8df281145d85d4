#ifndef ISL_TABULAR_HPP_
#define ISL_TABULAR_HPP_

// Online tabular learner: q, rho and ell tables updated from single
// transitions, acting by the closed-form uc-optimal policy.

#include <vector>

#include "isl/common.hpp"
#include "isl/envs.hpp"
#include "isl/policy.hpp"

namespace isl {

struct LearnerConfig {
  double mu_q = 1.0;
  double mu_rho = 1.0;
  double mu_ell = 1.0;
  double eta1 = 0.0;  // 0 for deterministic MDPs, towards 1 for stochastic ones
  double kappa = 1.0;
  double gamma = 0.99;
  double ell_init = 100.0;
  double ell_floor = kDefaultEllFloor;

  void validate() const;
};

/// One sampled transition between discrete states.
struct Transition {
  int s = 0;
  int a = 0;
  double r = 0.0;
  int s_next = 0;
  bool terminal = false;
};

struct LearnerTables {
  Matrix<double> q;
  Matrix<double> rho;
  Matrix<double> ell;

  /// q = rho = 0 and ell = cfg.ell_init everywhere.
  static LearnerTables fresh(int n_states, int n_actions, const LearnerConfig& cfg);

  int n_states() const noexcept { return static_cast<int>(q.rows()); }
  int n_actions() const noexcept { return static_cast<int>(q.cols()); }
};

struct StepReport {
  double delta = 0.0;
  double q = 0.0;
  double rho = 0.0;
  double ell = 0.0;
};

/// delta = r + gamma v(s') (1 - terminal) - q(s, a).
double td_error(const Transition& tr, const LearnerTables& tables, const LearnerConfig& cfg);

/// Applies the q, rho and ell updates at (s, a). delta and rho are read before
/// any table is written, so the three updates are simultaneous.
StepReport update(const Transition& tr, LearnerTables& tables, const LearnerConfig& cfg);

/// Probability vector used for acting in state s. When every action ties in
/// both value and uncertainty (fresh tables) it is uniform.
Eigen::VectorXd acting_policy(int s, const LearnerTables& tables, const LearnerConfig& cfg);

/// Inverse-CDF sample from `probs`.
int sample_action(const Eigen::VectorXd& probs, Rng& rng);

int act(int s, const LearnerTables& tables, const LearnerConfig& cfg, Rng& rng);

struct EpisodeRecord {
  double episode_return = 0.0;
  int length = 0;
  bool goal = false;
  std::vector<Transition> transitions;
};

/// Interleaves act / step / update until the episode terminates or `horizon` steps.
/// A non-positive horizon means the environment's own horizon.
EpisodeRecord run_episode(Environment& env, LearnerTables& tables, const LearnerConfig& cfg, Rng& rng,
                          int horizon = 0, bool learn = true);

}  // namespace isl

#endif  // ISL_TABULAR_HPP_
