#include "isl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace isl::oracle {

namespace {

void check_inputs(const std::vector<double>& policy, const std::vector<double>& ell) {
  if (policy.empty() || policy.size() != ell.size()) throw std::invalid_argument("oracle: bad vector lengths");
  for (double l : ell) {
    if (!(l > 0.0)) throw std::invalid_argument("oracle: half-widths must be positive");
  }
}

// Sorted distinct breakpoints of the mixture density on [-l_max, l_max].
std::vector<double> breakpoints(const std::vector<double>& ell) {
  std::vector<double> cuts;
  for (double l : ell) {
    cuts.push_back(-l);
    cuts.push_back(l);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

double mixture_density(const std::vector<double>& policy, const std::vector<double>& ell, double x) {
  double u = 0.0;
  for (std::size_t a = 0; a < ell.size(); ++a) {
    if (std::abs(x) <= ell[a]) u += policy[a] / (2.0 * ell[a]);
  }
  return u;
}

double integrand(double u, double u_ref) { return u > 0.0 ? u * std::log(u / u_ref) : 0.0; }

// Same sum as the per-bin loop, collapsed: every bin inside a segment sees the
// same density value. Segment geometry is fixed per (ell) and cached.
class GroupedObjective {
 public:
  GroupedObjective(const std::vector<double>& q_hat, const std::vector<double>& ell, double kappa)
      : q_hat_(q_hat), ell_(ell), kappa_(kappa) {
    const double l_max = *std::max_element(ell.begin(), ell.end());
    u_ref_ = 1.0 / (2.0 * l_max);
    const std::vector<double> cuts = breakpoints(ell);
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      const double mid = 0.5 * (cuts[i] + cuts[i + 1]);
      std::vector<std::size_t> covering;
      for (std::size_t a = 0; a < ell.size(); ++a) {
        if (std::abs(mid) <= ell[a]) covering.push_back(a);
      }
      segments_.push_back(Segment{cuts[i + 1] - cuts[i], std::move(covering)});
    }
  }

  double operator()(const std::vector<double>& policy) const {
    double value = 0.0;
    for (std::size_t a = 0; a < q_hat_.size(); ++a) value += policy[a] * q_hat_[a];
    double kl = 0.0;
    for (const Segment& seg : segments_) {
      double u = 0.0;
      for (std::size_t a : seg.covering) u += policy[a] / (2.0 * ell_[a]);
      kl += seg.length * integrand(u, u_ref_);
    }
    return value - kappa_ * kl;
  }

 private:
  struct Segment {
    double length;
    std::vector<std::size_t> covering;
  };
  std::vector<double> q_hat_;
  std::vector<double> ell_;
  double kappa_;
  double u_ref_ = 0.0;
  std::vector<Segment> segments_;
};

double uniform_draw(std::uint64_t& state) {
  // splitmix64
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return static_cast<double>(z >> 11) * 0x1.0p-53;
}

// Pairwise mass-transfer hill climbing with a halving step.
void refine(std::vector<double>& p, double& best, const GroupedObjective& objective, double step) {
  const std::size_t n = p.size();
  for (int guard = 0; step > 1e-13 && guard < 200000; ++guard) {
    bool improved = false;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j || p[j] <= 0.0) continue;
        const double t = std::min(step, p[j]);
        std::vector<double> trial = p;
        trial[i] += t;
        trial[j] = std::max(0.0, trial[j] - t);
        const double value = objective(trial);
        if (value > best) {
          best = value;
          p = std::move(trial);
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
}

}  // namespace

double kl_by_quadrature(const std::vector<double>& policy, const std::vector<double>& ell, long bins) {
  check_inputs(policy, ell);
  if (bins < 1) throw std::invalid_argument("kl_by_quadrature: bins must be positive");
  const double l_max = *std::max_element(ell.begin(), ell.end());
  const double u_ref = 1.0 / (2.0 * l_max);
  const std::vector<double> cuts = breakpoints(ell);

  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double lo = cuts[i];
    const double hi = cuts[i + 1];
    const long n = std::max(1L, std::lround(static_cast<double>(bins) * (hi - lo) / (2.0 * l_max)));
    const double width = (hi - lo) / static_cast<double>(n);
    double segment = 0.0;
    for (long k = 0; k < n; ++k) {
      const double x = lo + (static_cast<double>(k) + 0.5) * width;
      segment += integrand(mixture_density(policy, ell, x), u_ref);
    }
    total += segment * width;
  }
  return total;
}

double objective_by_quadrature(const std::vector<double>& policy, const std::vector<double>& q_hat,
                               const std::vector<double>& ell, double kappa, long bins) {
  check_inputs(policy, ell);
  double value = 0.0;
  for (std::size_t a = 0; a < q_hat.size(); ++a) value += policy[a] * q_hat[a];
  return value - kappa * kl_by_quadrature(policy, ell, bins);
}

SearchResult best_policy_by_search(const std::vector<double>& q_hat, const std::vector<double>& ell, double kappa,
                                   double resolution, long samples, std::uint64_t seed) {
  check_inputs(q_hat, ell);
  const std::size_t n = q_hat.size();
  if (n > 5) throw std::invalid_argument("best_policy_by_search: at most 5 actions");
  if (!(resolution > 0.0 && resolution <= 0.5)) throw std::invalid_argument("best_policy_by_search: bad resolution");

  SearchResult result;
  if (n == 1) {
    result.policy = {1.0};
    result.objective = q_hat[0];
    return result;
  }

  const GroupedObjective objective(q_hat, ell, kappa);
  std::vector<double> best_p;
  double best = -INFINITY;
  auto consider = [&](const std::vector<double>& p) {
    const double value = objective(p);
    if (value > best) {
      best = value;
      best_p = p;
    }
  };

  const long steps = std::lround(1.0 / resolution);
  if (n == 2) {
    for (long i = 0; i <= steps; ++i) {
      const double p0 = static_cast<double>(i) / static_cast<double>(steps);
      consider({p0, 1.0 - p0});
    }
  } else if (n == 3) {
    for (long i = 0; i <= steps; ++i) {
      for (long j = 0; i + j <= steps; ++j) {
        const double p0 = static_cast<double>(i) / static_cast<double>(steps);
        const double p1 = static_cast<double>(j) / static_cast<double>(steps);
        consider({p0, p1, std::max(0.0, 1.0 - p0 - p1)});
      }
    }
  } else {
    std::uint64_t state = seed;
    for (std::size_t v = 0; v < n; ++v) {
      std::vector<double> vertex(n, 0.0);
      vertex[v] = 1.0;
      consider(vertex);
    }
    std::vector<double> p(n);
    for (long s = 0; s < samples; ++s) {
      double total = 0.0;
      for (auto& x : p) {
        x = -std::log(1.0 - uniform_draw(state));
        total += x;
      }
      for (auto& x : p) x /= total;
      consider(p);
    }
  }

  refine(best_p, best, objective, resolution);
  result.policy = best_p;
  result.objective = best;
  return result;
}

std::vector<int> dominance_by_enumeration(const std::vector<double>& q_hat, const std::vector<double>& ell) {
  check_inputs(q_hat, ell);
  const int n = static_cast<int>(q_hat.size());
  if (n > 8) throw std::invalid_argument("dominance_by_enumeration: at most 8 actions");
  std::vector<bool> alive(static_cast<std::size_t>(n), true);

  auto dominates = [&](int i, int j) {
    if (std::abs(ell[i] - ell[j]) < 1e-9) return q_hat[i] > q_hat[j] || (q_hat[i] == q_hat[j] && i < j);
    return ell[j] < ell[i] && q_hat[j] <= q_hat[i];
  };

  for (bool changed = true; changed;) {
    changed = false;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j && alive[i] && alive[j] && dominates(i, j)) {
          alive[j] = false;
          changed = true;
        }
      }
    }
    if (changed) continue;
    for (int k = 0; k < n && !changed; ++k) {
      for (int j = 0; j < n && !changed; ++j) {
        for (int i = 0; i < n && !changed; ++i) {
          if (!alive[i] || !alive[j] || !alive[k]) continue;
          if (!(ell[j] < ell[k] && ell[k] < ell[i])) continue;
          const double lhs = (ell[i] - ell[k]) * ell[j] * q_hat[j] + (ell[k] - ell[j]) * ell[i] * q_hat[i];
          const double rhs = (ell[i] - ell[j]) * ell[k] * q_hat[k];
          if (lhs > rhs) {
            alive[k] = false;
            changed = true;
          }
        }
      }
    }
  }

  std::vector<int> survivors;
  for (int a = 0; a < n; ++a) {
    if (alive[a]) survivors.push_back(a);
  }
  return survivors;
}

std::vector<double> finite_difference(const std::function<double(const std::vector<double>&)>& f,
                                      std::vector<double> x, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw std::invalid_argument("finite_difference: h must lie in [1e-7, 1e-3]");
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double deep_sea_path_return(int n, const std::vector<bool>& moves_right, double gamma) {
  if (static_cast<int>(moves_right.size()) != n) throw std::invalid_argument("deep_sea_path_return: need n moves");
  int col = 0;
  double ret = 0.0;
  double discount = 1.0;
  for (int t = 0; t < n; ++t) {
    double r = 0.0;
    if (moves_right[static_cast<std::size_t>(t)]) {
      r -= 0.01 / n;
      if (t == n - 1 && col == n - 1) r += 1.0;
      col = std::min(col + 1, n - 1);
    } else {
      col = std::max(col - 1, 0);
    }
    ret += discount * r;
    discount *= gamma;
  }
  return ret;
}

PathValue deep_sea_exhaustive_value(int n, double gamma) {
  if (n < 1 || n > 16) throw std::invalid_argument("deep_sea_exhaustive_value: n must lie in [1, 16]");
  PathValue best;
  best.value = -INFINITY;
  std::vector<bool> moves(static_cast<std::size_t>(n));
  for (std::uint32_t code = 0; code < (1U << n); ++code) {
    for (int t = 0; t < n; ++t) moves[static_cast<std::size_t>(t)] = ((code >> t) & 1U) != 0;
    const double value = deep_sea_path_return(n, moves, gamma);
    if (value > best.value) {
      best.value = value;
      best.moves_right = moves;
    }
  }
  return best;
}

}  // namespace isl::oracle
