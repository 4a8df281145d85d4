#ifndef ISL_DP_HPP_
#define ISL_DP_HPP_

// Exact dynamic programming on explicit finite MDPs: the uncertainty-aware
// soft backup, its policy evaluation, the uncertainty backup, their
// alternation, and classical value iteration as a reference.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "isl/common.hpp"
#include "isl/policy.hpp"

namespace isl {

/// Finite MDP with dense kernel. Row `s * n_actions + a` of `kernel` is P(. | s, a).
template <typename Scalar = double>
struct TabularMdp {
  Index n_states = 0;
  Index n_actions = 0;
  Matrix<Scalar> kernel;  // (S*A) x S
  Matrix<Scalar> reward;  // S x A, expected reward
  Scalar gamma = 0;
  Scalar r_min = 0;
  Scalar r_max = 0;

  Index row(Index s, Index a) const noexcept { return s * n_actions + a; }

  /// Width of the widest possible value error, (r_max - r_min) / (1 - gamma).
  Scalar ell_init() const { return (r_max - r_min) / (Scalar(1) - gamma); }

  void validate() const {
    require(n_states >= 1 && n_actions >= 1, "TabularMdp: sizes must be positive");
    require(kernel.rows() == n_states * n_actions && kernel.cols() == n_states,
            "TabularMdp: kernel must be (S*A) x S");
    require(reward.rows() == n_states && reward.cols() == n_actions, "TabularMdp: reward must be S x A");
    require(gamma >= 0 && gamma < 1, "TabularMdp: gamma must lie in [0, 1)");
    require(kernel.allFinite() && reward.allFinite(), "TabularMdp: non-finite entry");
    require(kernel.minCoeff() >= 0, "TabularMdp: negative transition probability");
    for (Index r = 0; r < kernel.rows(); ++r) {
      require(std::abs(static_cast<double>(kernel.row(r).sum()) - 1.0) <= 1e-12,
              "TabularMdp: kernel row does not sum to 1");
    }
    require(r_min <= reward.minCoeff() && reward.maxCoeff() <= r_max,
            "TabularMdp: reward outside [r_min, r_max]");
  }
};

template <typename Scalar = double>
using QTable = Matrix<Scalar>;
template <typename Scalar = double>
using LTable = Matrix<Scalar>;

namespace detail {

template <typename Scalar>
void check_table_shape(const Matrix<Scalar>& table, const TabularMdp<Scalar>& mdp, const char* what) {
  require(table.rows() == mdp.n_states && table.cols() == mdp.n_actions,
          std::string(what) + ": table shape does not match the MDP");
}

// E_{s'} f(s') for every (s, a), reshaped to S x A.
template <typename Scalar>
Matrix<Scalar> expect_next(const TabularMdp<Scalar>& mdp, const Vector<Scalar>& per_state) {
  const Vector<Scalar> flat = mdp.kernel * per_state;
  return Eigen::Map<const Matrix<Scalar>>(flat.data(), mdp.n_states, mdp.n_actions);
}

}  // namespace detail

/// v(s) = state_value(q(s, .), ell(s, .), kappa) for every state.
template <typename Scalar>
Vector<Scalar> state_values(const QTable<Scalar>& q, const LTable<Scalar>& ell, Temperature<Scalar> kappa) {
  require(q.rows() == ell.rows() && q.cols() == ell.cols(), "state_values: q and ell shapes differ");
  Vector<Scalar> v(q.rows());
  for (Index s = 0; s < q.rows(); ++s) v(s) = state_value(q.row(s), ell.row(s), kappa);
  return v;
}

/// One synchronous sweep of (T q)(s,a) = r(s,a) + gamma E_{s'} v(s').
template <typename Scalar>
QTable<Scalar> bellman_uc_operator(const QTable<Scalar>& q, const LTable<Scalar>& ell,
                                   const TabularMdp<Scalar>& mdp, Temperature<Scalar> kappa) {
  detail::check_table_shape(q, mdp, "bellman_uc_operator");
  detail::check_table_shape(ell, mdp, "bellman_uc_operator");
  return mdp.reward + mdp.gamma * detail::expect_next(mdp, state_values(q, ell, kappa));
}

template <typename Scalar = double>
struct EvaluationResult {
  QTable<Scalar> q;
  long iterations = 0;
  std::vector<Scalar> residuals;  // sup-norm of q^{n+1} - q^n per sweep
};

/// Iterates the soft backup for a fixed `ell` until the sup-norm step is below
/// `tol`. The contraction bound lets it stop one sweep early once gamma times the
/// last step is already below `tol` (immediately when gamma = 0).
template <typename Scalar>
EvaluationResult<Scalar> ell_policy_evaluation(const TabularMdp<Scalar>& mdp, const LTable<Scalar>& ell,
                                               Temperature<Scalar> kappa, Scalar tol, long max_iters,
                                               std::optional<QTable<Scalar>> q0 = std::nullopt) {
  require(tol > 0, "ell_policy_evaluation: tol must be positive");
  require(max_iters >= 1, "ell_policy_evaluation: max_iters must be positive");
  EvaluationResult<Scalar> result;
  result.q = q0 ? std::move(*q0) : QTable<Scalar>::Zero(mdp.n_states, mdp.n_actions);
  detail::check_table_shape(result.q, mdp, "ell_policy_evaluation");
  for (long n = 1; n <= max_iters; ++n) {
    QTable<Scalar> next = bellman_uc_operator(result.q, ell, mdp, kappa);
    const Scalar residual = (next - result.q).cwiseAbs().maxCoeff();
    result.q = std::move(next);
    result.iterations = n;
    result.residuals.push_back(residual);
    if (residual < tol || mdp.gamma * residual < tol) return result;
  }
  throw NonConvergence("ell_policy_evaluation did not converge",
                       static_cast<double>(result.residuals.back()), max_iters);
}

/// Uncertainty backup: ell'(s,a) = |E delta(s,a)| + gamma E_{s'} max_a' ell(s',a'),
/// clamped to [ell_floor, ell_init]. Mean TD errors no larger than `delta_deadband`
/// count as zero (used when q is only known to be a fixed point up to that accuracy).
template <typename Scalar>
LTable<Scalar> ell_backup(const QTable<Scalar>& q, const LTable<Scalar>& ell, const TabularMdp<Scalar>& mdp,
                          Temperature<Scalar> kappa, Scalar ell_floor = Scalar(kDefaultEllFloor),
                          Scalar delta_deadband = Scalar(0)) {
  detail::check_table_shape(q, mdp, "ell_backup");
  detail::check_table_shape(ell, mdp, "ell_backup");
  const Scalar cap = mdp.ell_init();
  require(ell_floor > 0 && ell_floor < cap, "ell_backup: need 0 < ell_floor < ell_init");
  require(delta_deadband >= 0, "ell_backup: deadband must be non-negative");
  Matrix<Scalar> mean_delta = (bellman_uc_operator(q, ell, mdp, kappa) - q).cwiseAbs();
  mean_delta = (mean_delta.array() <= delta_deadband).select(Scalar(0), mean_delta);
  const Vector<Scalar> ell_max = ell.rowwise().maxCoeff();
  const Matrix<Scalar> target = mean_delta + mdp.gamma * detail::expect_next(mdp, ell_max);
  return target.cwiseMax(ell_floor).cwiseMin(cap);
}

template <typename Scalar = double>
struct UcIterate {
  long outer = 0;
  const QTable<Scalar>* q = nullptr;    // converged for `ell`
  const LTable<Scalar>* ell = nullptr;  // uncertainties used to compute `q`
  long inner_iterations = 0;
};

template <typename Scalar = double>
struct UcOptions {
  Scalar tol = Scalar(1e-10);
  long outer_iters = 10000;
  long inner_max_iters = 1000000;
  Scalar ell_floor = Scalar(kDefaultEllFloor);
  /// Starting uncertainties; defaults to ell_init everywhere.
  std::optional<LTable<Scalar>> initial_ell;
  /// Called after every inner evaluation.
  std::function<void(const UcIterate<Scalar>&)> observer;
};

template <typename Scalar = double>
struct UcResult {
  QTable<Scalar> q;
  LTable<Scalar> ell;
  long outer_iterations = 0;
  std::vector<Scalar> max_ell;  // max ell before each outer step, then the final one
  Scalar stop_threshold = 0;
};

/// Alternates ell-policy evaluation and the uncertainty backup, starting from
/// ell_init everywhere, until max ell <= 10 ell_floor. The acting policy is then
/// greedy and q is the optimal action-value function.
///
/// The inner evaluation stops with |T q - q| < tol, so mean TD errors below tol
/// are indistinguishable from the exact fixed point's zero and are dropped from
/// the backup; otherwise that residue dominates ell once ell nears tol and skews
/// the uncertainty ratios the policy depends on.
template <typename Scalar>
UcResult<Scalar> uc_policy_evaluation(const TabularMdp<Scalar>& mdp, Temperature<Scalar> kappa,
                                      UcOptions<Scalar> options = {}) {
  mdp.validate();
  require(options.tol > 0, "uc_policy_evaluation: tol must be positive");
  require(options.outer_iters >= 1, "uc_policy_evaluation: outer_iters must be positive");
  require(options.ell_floor > 0 && options.ell_floor < mdp.ell_init(),
          "uc_policy_evaluation: ell floor must lie in (0, ell_init)");

  UcResult<Scalar> result;
  result.stop_threshold = Scalar(10) * options.ell_floor;
  result.ell = options.initial_ell ? *options.initial_ell
                                   : LTable<Scalar>::Constant(mdp.n_states, mdp.n_actions, mdp.ell_init());
  detail::check_table_shape(result.ell, mdp, "uc_policy_evaluation");
  result.q = QTable<Scalar>::Zero(mdp.n_states, mdp.n_actions);

  for (long outer = 0;; ++outer) {
    EvaluationResult<Scalar> inner = ell_policy_evaluation(mdp, result.ell, kappa, options.tol,
                                                           options.inner_max_iters,
                                                           std::optional<QTable<Scalar>>(result.q));
    result.q = std::move(inner.q);
    result.max_ell.push_back(result.ell.maxCoeff());
    if (options.observer) options.observer(UcIterate<Scalar>{outer, &result.q, &result.ell, inner.iterations});
    if (result.ell.maxCoeff() <= result.stop_threshold) {
      result.outer_iterations = outer;
      return result;
    }
    if (outer == options.outer_iters) {
      throw NonConvergence("uc_policy_evaluation: uncertainties still above the floor",
                           static_cast<double>(result.ell.maxCoeff()), outer);
    }
    result.ell = ell_backup(result.q, result.ell, mdp, kappa, options.ell_floor, options.tol);
  }
}

/// Classical Bellman-optimality iteration from zero until the sup-norm step is below `tol`.
template <typename Scalar>
QTable<Scalar> standard_value_iteration(const TabularMdp<Scalar>& mdp, Scalar tol, long max_iters = 10000000) {
  require(tol > 0, "standard_value_iteration: tol must be positive");
  QTable<Scalar> q = QTable<Scalar>::Zero(mdp.n_states, mdp.n_actions);
  for (long n = 0; n < max_iters; ++n) {
    const Vector<Scalar> v = q.rowwise().maxCoeff();
    QTable<Scalar> next = mdp.reward + mdp.gamma * detail::expect_next(mdp, v);
    const Scalar residual = (next - q).cwiseAbs().maxCoeff();
    q = std::move(next);
    if (residual < tol) return q;
  }
  throw NonConvergence("standard_value_iteration did not converge", 0.0, max_iters);
}

/// Greedy action per state (lowest index on ties).
template <typename Scalar>
std::vector<Index> greedy_actions(const QTable<Scalar>& q) {
  std::vector<Index> out(static_cast<std::size_t>(q.rows()));
  for (Index s = 0; s < q.rows(); ++s) q.row(s).maxCoeff(&out[static_cast<std::size_t>(s)]);
  return out;
}

}  // namespace isl

#endif  // ISL_DP_HPP_
