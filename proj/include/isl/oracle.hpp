#ifndef ISL_ORACLE_HPP_
#define ISL_ORACLE_HPP_

// Brute-force references for the closed forms. Nothing here calls into the
// policy, dp or learner code; inputs and outputs are plain vectors.

#include <cstdint>
#include <functional>
#include <vector>

namespace isl::oracle {

/// Midpoint-rule integral of u^pi log(u^pi / u^max) over [-l_max, l_max], where
/// u^pi is the policy mixture of zero-mean uniform densities of half-widths `ell`
/// and u^max the uniform density of the widest action. Bins are laid out so that
/// none straddles a density discontinuity at +-ell[a]; each segment between
/// breakpoints receives a share of `bins` proportional to its length.
double kl_by_quadrature(const std::vector<double>& policy, const std::vector<double>& ell, long bins = 1000000);

struct SearchResult {
  std::vector<double> policy;
  double objective = 0.0;
};

/// sum pi q - kappa * KL(u^pi || u^max), the KL evaluated by `kl_by_quadrature`.
double objective_by_quadrature(const std::vector<double>& policy, const std::vector<double>& q_hat,
                               const std::vector<double>& ell, double kappa, long bins = 1000000);

/// Maximizes the regularized objective over the probability simplex. A <= 3:
/// full grid of step `resolution`, then local refinement. A in {4, 5}: `samples`
/// uniform simplex draws (seeded), then pairwise mass-transfer refinement.
SearchResult best_policy_by_search(const std::vector<double>& q_hat, const std::vector<double>& ell, double kappa,
                                   double resolution = 1e-3, long samples = 200000, std::uint64_t seed = 0);

/// Surviving action indices (ascending) after repeatedly removing actions that
/// are dominated (value <= and uncertainty < another action, with near-equal
/// uncertainties settled by value then index) or that lie strictly below the
/// chord of two other actions in the (l, l q) plane.
std::vector<int> dominance_by_enumeration(const std::vector<double>& q_hat, const std::vector<double>& ell);

/// Central differences (f(x + h e_i) - f(x - h e_i)) / 2h for every coordinate.
std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                      std::vector<double> x, double h = 1e-5);

struct PathValue {
  double value = 0.0;
  std::vector<bool> moves_right;  // one entry per step
};

/// Best discounted return over all 2^n left/right move sequences of the
/// deterministic Deep Sea of size n (gamma = 1 gives the undiscounted return).
PathValue deep_sea_exhaustive_value(int n, double gamma = 1.0);

/// Return of one move sequence in the deterministic Deep Sea.
double deep_sea_path_return(int n, const std::vector<bool>& moves_right, double gamma = 1.0);

}  // namespace isl::oracle

#endif  // ISL_ORACLE_HPP_
