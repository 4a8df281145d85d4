#ifndef ISL_POLICY_HPP_
#define ISL_POLICY_HPP_

// Per-state math of the uncertainty-regularized objective: the KL term between
// uniform error mixtures, Pareto filtering of actions, the closed-form
// uc-optimal policy and its state value.
//
// All routines accept any Eigen vector expression (columns, table rows, maps)
// and are pure functions of their arguments.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "isl/common.hpp"

namespace isl {

/// Strictly positive weight of the KL regularizer, in reward units.
template <typename Scalar = double>
class Temperature {
 public:
  explicit Temperature(Scalar kappa) : kappa_(kappa) {
    require(kappa > Scalar(0) && std::isfinite(static_cast<double>(kappa)),
            "temperature must be positive and finite");
  }

  Scalar value() const noexcept { return kappa_; }

 private:
  Scalar kappa_;
};

/// Per-state action statistics: value estimates, uncertainty half-widths and
/// TD-mean estimates.
template <typename Scalar = double>
struct ActionBelief {
  Vector<Scalar> q_hat;
  Vector<Scalar> ell;
  Vector<Scalar> rho;

  Index size() const noexcept { return q_hat.size(); }

  /// Validating constructor. `rho` defaults to zeros when empty.
  static ActionBelief make(Vector<Scalar> q_hat, Vector<Scalar> ell, Vector<Scalar> rho = {},
                           Scalar ell_floor = Scalar(kDefaultEllFloor),
                           Scalar ell_cap = Scalar(kDefaultEllCap)) {
    require(Scalar(0) < ell_floor && ell_floor < ell_cap, "ActionBelief: need 0 < ell_floor < ell_cap");
    if (rho.size() == 0) rho = Vector<Scalar>::Zero(q_hat.size());
    require(q_hat.size() >= 1, "ActionBelief: empty action set");
    require(ell.size() == q_hat.size() && rho.size() == q_hat.size(),
            "ActionBelief: q_hat, ell and rho lengths differ");
    require(q_hat.allFinite() && ell.allFinite() && rho.allFinite(), "ActionBelief: non-finite entry");
    require(ell.minCoeff() >= ell_floor && ell.maxCoeff() <= ell_cap,
            "ActionBelief: ell outside [ell_floor, ell_cap]");
    return ActionBelief{std::move(q_hat), std::move(ell), std::move(rho)};
  }
};

/// Surviving Pareto-optimal actions ordered by ascending uncertainty.
/// `ell_sorted` is strictly increasing and `q_sorted` strictly decreasing.
template <typename Scalar = double>
struct ParetoSet {
  std::vector<Index> sigma;
  Vector<Scalar> ell_sorted;
  Vector<Scalar> q_sorted;

  Index size() const noexcept { return static_cast<Index>(sigma.size()); }

  bool contains(Index action) const {
    return std::find(sigma.begin(), sigma.end(), action) != sigma.end();
  }
};

namespace detail {

template <typename DerivedQ, typename DerivedL>
void check_action_vectors(const Eigen::MatrixBase<DerivedQ>& q_hat,
                          const Eigen::MatrixBase<DerivedL>& ell, const char* who) {
  const std::string prefix = std::string(who) + ": ";
  require(q_hat.size() >= 1, prefix + "empty action set");
  require(ell.size() == q_hat.size(), prefix + "q_hat and ell lengths differ");
  for (Index a = 0; a < q_hat.size(); ++a) {
    require(std::isfinite(static_cast<double>(q_hat(a))) && std::isfinite(static_cast<double>(ell(a))),
            prefix + "non-finite entry");
    require(ell(a) > 0, prefix + "uncertainties must be positive");
  }
}

// Action k (with l_j < l_k < l_i) lies on or below the chord joining j and i
// in the (l, l*q) plane. Equality counts as dominated: a collinear action would
// receive exactly zero mass.
template <typename Scalar>
bool mixed_dominated(Scalar lj, Scalar qj, Scalar lk, Scalar qk, Scalar li, Scalar qi) {
  const Scalar lhs = (li - lk) * lj * qj + (lk - lj) * li * qi;
  const Scalar rhs = (li - lj) * lk * qk;
  return lhs >= rhs;
}

template <typename Scalar>
Scalar log_sum_exp_shift(const Vector<Scalar>& log_weights) {
  return log_weights.maxCoeff();
}

}  // namespace detail

/// Removes Pareto-dominated and mixed-Pareto-dominated actions.
///
/// Uncertainties closer than `kEllTieGap` form a tie group of which only the
/// highest-value action is kept (lowest index on equal value). Plain dominance
/// and the triple-wise mixed test are repeated until nothing changes.
template <typename DerivedQ, typename DerivedL>
ParetoSet<typename DerivedQ::Scalar> pareto_filter(const Eigen::MatrixBase<DerivedQ>& q_hat,
                                                   const Eigen::MatrixBase<DerivedL>& ell) {
  using Scalar = typename DerivedQ::Scalar;
  detail::check_action_vectors(q_hat, ell, "pareto_filter");
  const Index n = q_hat.size();

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return ell(a) < ell(b); });

  std::vector<Index> kept;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    Index best = order[i];
    while (j + 1 < order.size() && ell(order[j + 1]) - ell(order[j]) < Scalar(kEllTieGap)) {
      ++j;
      const Index c = order[j];
      if (q_hat(c) > q_hat(best) || (q_hat(c) == q_hat(best) && c < best)) best = c;
    }
    kept.push_back(best);
    i = j + 1;
  }

  auto dominated_pass = [&](std::vector<Index>& s) {
    std::vector<Index> out;
    Scalar best_q = -std::numeric_limits<Scalar>::infinity();
    for (auto it = s.rbegin(); it != s.rend(); ++it) {
      if (q_hat(*it) > best_q) {
        out.push_back(*it);
        best_q = q_hat(*it);
      }
    }
    std::reverse(out.begin(), out.end());
    const bool removed = out.size() != s.size();
    s = std::move(out);
    return removed;
  };

  auto mixed_pass = [&](std::vector<Index>& s) {
    for (std::size_t k = 1; k + 1 < s.size(); ++k) {
      for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = k + 1; i < s.size(); ++i) {
          if (detail::mixed_dominated(ell(s[j]), q_hat(s[j]), ell(s[k]), q_hat(s[k]), ell(s[i]),
                                      q_hat(s[i]))) {
            s.erase(s.begin() + static_cast<std::ptrdiff_t>(k));
            return true;
          }
        }
      }
    }
    return false;
  };

  bool changed = true;
  while (changed) {
    changed = dominated_pass(kept);
    while (mixed_pass(kept)) changed = true;
  }

  ParetoSet<Scalar> result;
  result.sigma = kept;
  result.ell_sorted.resize(result.size());
  result.q_sorted.resize(result.size());
  for (Index j = 0; j < result.size(); ++j) {
    result.ell_sorted(j) = ell(kept[static_cast<std::size_t>(j)]);
    result.q_sorted(j) = q_hat(kept[static_cast<std::size_t>(j)]);
  }
  return result;
}

/// Exponents of the policy weights p_j, one per surviving action, with the
/// uncertainty of the (virtual) zeroth action taken as 0. Never exponentiated here.
template <typename Scalar>
Vector<Scalar> log_weights(const ParetoSet<Scalar>& pareto, Temperature<Scalar> kappa) {
  Vector<Scalar> out(pareto.size());
  Scalar prev_l = 0;
  Scalar prev_lq = 0;
  for (Index j = 0; j < pareto.size(); ++j) {
    const Scalar l = pareto.ell_sorted(j);
    const Scalar lq = l * pareto.q_sorted(j);
    out(j) = (lq - prev_lq) / (kappa.value() * (l - prev_l));
    prev_l = l;
    prev_lq = lq;
  }
  return out;
}

/// Closed-form maximizer of  sum_a pi(a) q(a) - kappa * KL(u^pi || u^max).
/// Dominated actions receive exactly zero mass.
template <typename DerivedQ, typename DerivedL>
Vector<typename DerivedQ::Scalar> optimal_policy(const Eigen::MatrixBase<DerivedQ>& q_hat,
                                                 const Eigen::MatrixBase<DerivedL>& ell,
                                                 Temperature<typename DerivedQ::Scalar> kappa) {
  using Scalar = typename DerivedQ::Scalar;
  const ParetoSet<Scalar> pareto = pareto_filter(q_hat, ell);
  const Vector<Scalar> lp = log_weights(pareto, kappa);
  const Index m = pareto.size();
  const Scalar shift = detail::log_sum_exp_shift(lp);

  // pi(sigma_j) ~ l_j (p_j - p_{j+1}); p_j - p_{j+1} = -p_j expm1(lp_{j+1} - lp_j).
  Vector<Scalar> numer(m);
  Scalar denom = 0;
  Scalar prev_l = 0;
  for (Index j = 0; j < m; ++j) {
    const Scalar l = pareto.ell_sorted(j);
    const Scalar w = std::exp(lp(j) - shift);
    denom += (l - prev_l) * w;
    const Scalar gap = (j + 1 < m) ? -std::expm1(lp(j + 1) - lp(j)) : Scalar(1);
    numer(j) = l * w * gap;
    prev_l = l;
  }
  for (Index j = 0; j < m; ++j) {
    if (numer(j) / denom < -Scalar(kNegativeMassTolerance)) {
      throw InternalError("optimal_policy: negative probability for a surviving action");
    }
    if (numer(j) < 0) numer(j) = 0;
  }

  Vector<Scalar> probs = Vector<Scalar>::Zero(q_hat.size());
  const Scalar total = numer.sum();
  for (Index j = 0; j < m; ++j) probs(pareto.sigma[static_cast<std::size_t>(j)]) = numer(j) / total;
  return probs;
}

template <typename Scalar>
Vector<Scalar> optimal_policy(const ActionBelief<Scalar>& belief, Temperature<Scalar> kappa) {
  return optimal_policy(belief.q_hat, belief.ell, kappa);
}

/// Value of the uc-optimal policy: kappa * log sum_j ((l_j - l_{j-1}) / l_max) p_j,
/// with l_max taken over the full action set.
template <typename DerivedQ, typename DerivedL>
typename DerivedQ::Scalar state_value(const Eigen::MatrixBase<DerivedQ>& q_hat,
                                      const Eigen::MatrixBase<DerivedL>& ell,
                                      Temperature<typename DerivedQ::Scalar> kappa) {
  using Scalar = typename DerivedQ::Scalar;
  const ParetoSet<Scalar> pareto = pareto_filter(q_hat, ell);
  const Vector<Scalar> lp = log_weights(pareto, kappa);
  const Scalar shift = detail::log_sum_exp_shift(lp);
  const Scalar ell_max = ell.maxCoeff();
  Scalar sum = 0;
  Scalar prev_l = 0;
  for (Index j = 0; j < pareto.size(); ++j) {
    const Scalar l = pareto.ell_sorted(j);
    sum += (l - prev_l) / ell_max * std::exp(lp(j) - shift);
    prev_l = l;
  }
  return kappa.value() * (shift + std::log(sum));
}

template <typename Scalar>
Scalar state_value(const ActionBelief<Scalar>& belief, Temperature<Scalar> kappa) {
  return state_value(belief.q_hat, belief.ell, kappa);
}

/// Checks the probability-vector invariants: non-negative, sums to one within 1e-12.
template <typename Derived>
bool is_probability_vector(const Eigen::MatrixBase<Derived>& p, double tolerance = 1e-12) {
  if (p.size() == 0 || !p.allFinite()) return false;
  if (p.minCoeff() < 0) return false;
  return std::abs(static_cast<double>(p.sum()) - 1.0) <= tolerance;
}

/// KL(u^pi || u^max) between mixtures of zero-mean uniform error densities of
/// half-widths `ell`. Equal half-widths are merged by summing their mass.
template <typename DerivedP, typename DerivedL>
typename DerivedP::Scalar kl_uncertainty(const Eigen::MatrixBase<DerivedP>& policy,
                                         const Eigen::MatrixBase<DerivedL>& ell) {
  using Scalar = typename DerivedP::Scalar;
  require(policy.size() == ell.size(), "kl_uncertainty: policy and ell lengths differ");
  require(is_probability_vector(policy), "kl_uncertainty: policy is not a probability vector");
  for (Index a = 0; a < ell.size(); ++a) {
    require(std::isfinite(static_cast<double>(ell(a))) && ell(a) > 0,
            "kl_uncertainty: uncertainties must be positive and finite");
  }

  std::vector<Index> order(static_cast<std::size_t>(ell.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return ell(a) < ell(b); });

  std::vector<Scalar> widths;
  std::vector<Scalar> mass;
  for (Index a : order) {
    if (!widths.empty() && widths.back() == ell(a)) {
      mass.back() += policy(a);
    } else {
      widths.push_back(ell(a));
      mass.push_back(policy(a));
    }
  }

  const std::size_t n = widths.size();
  const Scalar l_top = widths.back();
  // suffix(n) = sum_{k >= n} pi_k / l_k is the mixture density (times 2) on the n-th shell.
  std::vector<Scalar> suffix(n + 1, Scalar(0));
  for (std::size_t k = n; k-- > 0;) suffix[k] = suffix[k + 1] + mass[k] / widths[k];

  Scalar kl = 0;
  Scalar prev_l = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (suffix[k] > 0) kl += (widths[k] - prev_l) * suffix[k] * std::log(l_top * suffix[k]);
    prev_l = widths[k];
  }
  return std::max(kl, Scalar(0));
}

/// sum_a pi(a) q(a) - kappa * KL(u^pi || u^max).
template <typename DerivedP, typename DerivedQ, typename DerivedL>
typename DerivedP::Scalar regularized_objective(const Eigen::MatrixBase<DerivedP>& policy,
                                                const Eigen::MatrixBase<DerivedQ>& q_hat,
                                                const Eigen::MatrixBase<DerivedL>& ell,
                                                Temperature<typename DerivedP::Scalar> kappa) {
  using Scalar = typename DerivedP::Scalar;
  require(policy.size() == q_hat.size(), "regularized_objective: policy and q_hat lengths differ");
  Scalar expected = 0;
  for (Index a = 0; a < policy.size(); ++a) expected += policy(a) * q_hat(a);
  return expected - kappa.value() * kl_uncertainty(policy, ell);
}

}  // namespace isl

#endif  // ISL_POLICY_HPP_
