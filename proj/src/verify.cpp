// Differential suites behind `verify`: each compares a closed form or solver
// against the brute-force oracles and dumps the first failing instance.

#include <algorithm>
#include <functional>
#include <ostream>
#include <utility>

#include "json.hpp"

#include "isl/dp.hpp"
#include "isl/harness.hpp"
#include "isl/oracle.hpp"
#include "isl/policy.hpp"

namespace isl {

namespace {

using nlohmann::json;

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

json to_json(const Eigen::VectorXd& v) { return to_std(v); }

json to_json(const Matrix<double>& m) {
  json rows = json::array();
  for (Index r = 0; r < m.rows(); ++r) rows.push_back(to_std(m.row(r).transpose()));
  return rows;
}

class Suite {
 public:
  Suite(std::ostream& out, std::string name, std::string measure) : out_(out), name_(std::move(name)), measure_(std::move(measure)) {}

  void record(double value, bool ok, const json& instance) {
    ++count_;
    worst_ = std::max(worst_, value);
    if (!ok) {
      ++failures_;
      if (first_failure_.is_null()) first_failure_ = instance;
    }
  }

  bool finish() const {
    char worst[32];
    std::snprintf(worst, sizeof(worst), "%.3e", worst_);
    out_ << name_ << ": " << count_ << " instances, worst " << measure_ << " " << worst << ", "
         << (failures_ == 0 ? "PASS" : "FAIL (" + std::to_string(failures_) + " failing)") << "\n";
    if (failures_ > 0) out_ << "  first failing instance: " << first_failure_.dump() << "\n";
    return failures_ == 0;
  }

 private:
  std::ostream& out_;
  std::string name_;
  std::string measure_;
  long count_ = 0;
  long failures_ = 0;
  double worst_ = 0.0;
  json first_failure_;
};

struct Instance {
  Eigen::VectorXd q;
  Eigen::VectorXd ell;
};

Instance random_instance(Rng& rng, Index n) {
  Instance x{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  for (Index a = 0; a < n; ++a) {
    x.q(a) = uniform(rng, -1, 1);
    x.ell(a) = uniform(rng, 0.1, 3);
  }
  return x;
}

double total_variation_to_greedy(const Eigen::VectorXd& pi, const Eigen::VectorXd& q) {
  Index best = 0;
  q.maxCoeff(&best);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(q.size());
  g(best) = 1.0;
  return 0.5 * (pi - g).cwiseAbs().sum();
}

// Runs `policy`, turning exceptions and malformed output into an empty vector.
Eigen::VectorXd safe_policy(const PolicyFunction& policy, const Eigen::VectorXd& q, const Eigen::VectorXd& l, double kappa) {
  try {
    Eigen::VectorXd pi = policy(q, l, kappa);
    if (pi.size() != q.size() || !is_probability_vector(pi, 1e-9)) return {};
    return pi;
  } catch (const std::exception&) {
    return {};
  }
}

bool policy_vs_search(const PolicyFunction& policy, bool full, std::ostream& out) {
  Suite suite(out, "policy-vs-search", "shortfall");
  Rng rng(2024);
  const int n = full ? 200 : 20;
  const double kappas[] = {0.1, 1.0, 10.0};
  for (int i = 0; i < n; ++i) {
    const Instance x = random_instance(rng, 2 + i % 4);
    const double kappa = kappas[i % 3];
    const Eigen::VectorXd pi = safe_policy(policy, x.q, x.ell, kappa);
    const auto search = oracle::best_policy_by_search(to_std(x.q), to_std(x.ell), kappa, 1e-3, full ? 200000 : 20000,
                                                      static_cast<std::uint64_t>(i));
    double shortfall = INFINITY;
    if (pi.size() > 0) {
      shortfall = search.objective - oracle::objective_by_quadrature(to_std(pi), to_std(x.q), to_std(x.ell), kappa);
    }
    suite.record(std::max(shortfall, 0.0), shortfall <= 1e-4,
                 json{{"q", to_json(x.q)}, {"ell", to_json(x.ell)}, {"kappa", kappa}, {"policy", to_json(pi)},
                      {"search_policy", search.policy}, {"search_objective", search.objective}});
  }
  return suite.finish();
}

bool greedy_limits(const PolicyFunction& policy, bool full, std::ostream& out) {
  Suite suite(out, "greedy-limits", "total variation");
  Rng rng(77);
  const int n = full ? 100 : 20;
  for (int i = 0; i < n; ++i) {
    const Instance x = random_instance(rng, 2 + i % 4);
    const Eigen::VectorXd cold = safe_policy(policy, x.q, x.ell, 1e-8);
    const Eigen::VectorXd flat_ell = Eigen::VectorXd::Constant(x.q.size(), x.ell(0));
    const Eigen::VectorXd flat = safe_policy(policy, x.q, flat_ell, 1.0);
    const double tv_cold = cold.size() > 0 ? total_variation_to_greedy(cold, x.q) : INFINITY;
    const double tv_flat = flat.size() > 0 ? total_variation_to_greedy(flat, x.q) : INFINITY;
    const double worst = std::max(tv_cold, tv_flat);
    suite.record(worst, worst < 1e-5, json{{"q", to_json(x.q)}, {"ell", to_json(x.ell)}, {"tv_cold_kappa", tv_cold},
                                           {"tv_equal_ell", tv_flat}});
  }
  return suite.finish();
}

bool kl_vs_quadrature(bool full, std::ostream& out) {
  Suite suite(out, "kl-vs-quadrature", "abs error");
  Rng rng(31);
  const int n = full ? 100 : 20;
  for (int i = 0; i < n; ++i) {
    const Instance x = random_instance(rng, 1 + i % 5);
    Eigen::VectorXd pi(x.q.size());
    for (Index a = 0; a < pi.size(); ++a) pi(a) = -std::log(1.0 - uniform01(rng));
    pi /= pi.sum();
    const double closed = kl_uncertainty(pi, x.ell);
    const double quad = oracle::kl_by_quadrature(to_std(pi), to_std(x.ell), 1000000);
    const double err = std::abs(closed - quad);
    suite.record(err, err <= 1e-5, json{{"policy", to_json(pi)}, {"ell", to_json(x.ell)}, {"closed_form", closed}, {"quadrature", quad}});
  }
  return suite.finish();
}

bool dominance(bool full, std::ostream& out) {
  Suite suite(out, "dominance-vs-enumeration", "mismatch");
  Rng rng(78);
  const int n = full ? 1000 : 100;
  for (int i = 0; i < n; ++i) {
    const Instance x = random_instance(rng, 1 + static_cast<Index>(uniform_index(rng, 8)));
    auto sigma = pareto_filter(x.q, x.ell).sigma;
    std::sort(sigma.begin(), sigma.end());
    const std::vector<int> mine(sigma.begin(), sigma.end());
    const std::vector<int> theirs = oracle::dominance_by_enumeration(to_std(x.q), to_std(x.ell));
    const bool ok = mine == theirs;
    suite.record(ok ? 0.0 : 1.0, ok, json{{"q", to_json(x.q)}, {"ell", to_json(x.ell)}, {"filter", mine}, {"enumeration", theirs}});
  }
  return suite.finish();
}

Matrix<double> random_table(Rng& rng, Index rows, Index cols, double lo, double hi) {
  Matrix<double> m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = uniform(rng, lo, hi);
  return m;
}

bool contraction(bool full, std::ostream& out) {
  Suite suite(out, "contraction", "ratio - gamma");
  Rng rng(404);
  const int mdps = full ? 20 : 5;
  const int pairs = 5;
  for (int m = 0; m < mdps; ++m) {
    const int states = 2 + static_cast<int>(uniform_index(rng, 9));
    const int actions = 2 + static_cast<int>(uniform_index(rng, 3));
    const auto mdp = random_mdp(static_cast<std::uint64_t>(1000 + m), states, actions, 0.9);
    const Matrix<double> ell = random_table(rng, states, actions, 0.1, 3);
    const Temperature<double> kappa(uniform(rng, 0.1, 10));
    for (int p = 0; p < pairs; ++p) {
      const Matrix<double> q1 = random_table(rng, states, actions, -10, 10);
      const Matrix<double> q2 = random_table(rng, states, actions, -10, 10);
      const double before = (q1 - q2).cwiseAbs().maxCoeff();
      const double after =
          (bellman_uc_operator(q1, ell, mdp, kappa) - bellman_uc_operator(q2, ell, mdp, kappa)).cwiseAbs().maxCoeff();
      const double excess = after / before - mdp.gamma;
      suite.record(std::max(excess, 0.0), excess <= 1e-12,
                   json{{"mdp_seed", 1000 + m}, {"states", states}, {"actions", actions}, {"kappa", kappa.value()},
                        {"ell", to_json(ell)}, {"q1", to_json(q1)}, {"q2", to_json(q2)}});
    }
  }
  return suite.finish();
}

bool uc_vs_value_iteration(bool full, std::ostream& out) {
  Suite suite(out, "uc-vs-value-iteration", "sup error");
  Rng rng(505);
  const int n = full ? 50 : 5;
  const double tol = 1e-10;
  const double gamma = 0.9;
  const double bound = std::max(1e-3, 10 * tol / (1 - gamma));
  for (int i = 0; i < n; ++i) {
    const int states = 2 + static_cast<int>(uniform_index(rng, 19));
    const int actions = 2 + static_cast<int>(uniform_index(rng, 3));
    const auto mdp = random_mdp(static_cast<std::uint64_t>(2000 + i), states, actions, gamma);
    UcOptions<double> options;
    options.tol = tol;
    double err = INFINITY;
    try {
      const auto uc = uc_policy_evaluation(mdp, Temperature<double>(1.0), options);
      err = (uc.q - standard_value_iteration(mdp, tol)).cwiseAbs().maxCoeff();
    } catch (const std::exception&) {
    }
    suite.record(err, err <= bound, json{{"mdp_seed", 2000 + i}, {"states", states}, {"actions", actions}, {"gamma", gamma}});
  }
  return suite.finish();
}

double kink_margin(const Mlp& net, const Eigen::MatrixXd& x) {
  MlpCache cache;
  net.forward(x, cache);
  double margin = INFINITY;
  for (std::size_t k = 0; k + 1 < cache.pre.size(); ++k) margin = std::min(margin, cache.pre[k].cwiseAbs().minCoeff());
  return margin;
}

double worst_relative_error(const Eigen::VectorXd& g, const std::vector<double>& fd) {
  double worst = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    const double scale = std::max({std::abs(g(i)), std::abs(fd[static_cast<std::size_t>(i)]), 1e-6});
    worst = std::max(worst, std::abs(g(i) - fd[static_cast<std::size_t>(i)]) / scale);
  }
  return worst;
}

bool gradients(bool full, std::ostream& out) {
  Suite suite(out, "loss-gradients", "relative error");
  const std::vector<double> etas = full ? std::vector<double>{0.0, 0.5, 1.0} : std::vector<double>{0.5};
  const int d = 5, actions = 3, hidden = 8, batch_size = 16;
  for (double eta1 : etas) {
    for (double eta2 : etas) {
      Rng rng(900 + static_cast<std::uint64_t>(10 * eta1 + 100 * eta2));
      IslNetworks nets = IslNetworks::create(d, actions, hidden, rng);
      nets.q_target = Mlp({d, hidden, hidden, actions}, Head::kLinear, rng);
      for (auto& n : nets.ell_target) n = Mlp({d, hidden, hidden, 1}, Head::kBoundedSigmoid, rng);
      DeepIslConfig cfg;
      cfg.eta1 = eta1;
      cfg.eta2 = eta2;

      Batch batch;
      for (int attempt = 0;; ++attempt) {
        std::vector<Experience> samples;
        for (int i = 0; i < batch_size; ++i) {
          Experience e;
          e.obs = Eigen::VectorXd(d);
          e.next_obs = Eigen::VectorXd(d);
          for (int k = 0; k < d; ++k) {
            e.obs(k) = uniform(rng, -1, 1);
            e.next_obs(k) = uniform(rng, -1, 1);
          }
          e.action = static_cast<int>(uniform_index(rng, actions));
          e.reward = uniform(rng, -1, 1);
          e.terminal = i % 4 == 3;
          samples.push_back(e);
        }
        batch = Batch::from(samples);
        double margin = std::min(kink_margin(nets.q, batch.obs), kink_margin(nets.rho, batch.obs));
        for (const auto& n : nets.ell) margin = std::min(margin, kink_margin(n, batch.obs));
        if (margin >= 1e-3 || attempt > 1000) break;
      }

      auto check = [&](const char* which, const Eigen::VectorXd& grad, const Mlp& net,
                       const std::function<void(IslNetworks&, const Eigen::VectorXd&)>& assign,
                       const std::function<double(const IslNetworks&)>& loss) {
        const auto fd = oracle::finite_difference(
            [&](const std::vector<double>& p) {
              IslNetworks probe = nets;
              assign(probe, to_eigen(p));
              return loss(probe);
            },
            to_std(net.flat()), 1e-5);
        const double err = worst_relative_error(grad, fd);
        suite.record(err, err <= 1e-4, json{{"loss", which}, {"eta1", eta1}, {"eta2", eta2}, {"seed", 900 + static_cast<int>(10 * eta1 + 100 * eta2)}});
      };
      check("q", loss_q(batch, nets, cfg).grads[0], nets.q,
            [](IslNetworks& n, const Eigen::VectorXd& p) { n.q.set_flat(p); },
            [&](const IslNetworks& n) { return loss_q(batch, n, cfg).value; });
      check("rho", loss_rho(batch, nets, cfg).grads[0], nets.rho,
            [](IslNetworks& n, const Eigen::VectorXd& p) { n.rho.set_flat(p); },
            [&](const IslNetworks& n) { return loss_rho(batch, n, cfg).value; });
      const LossResult ell = loss_ell(batch, nets, cfg);
      for (std::size_t a = 0; a < nets.ell.size(); ++a) {
        check("ell", ell.grads[a], nets.ell[a],
              [a](IslNetworks& n, const Eigen::VectorXd& p) { n.ell[a].set_flat(p); },
              [&](const IslNetworks& n) { return loss_ell(batch, n, cfg).value; });
      }
    }
  }
  return suite.finish();
}

}  // namespace

bool verify(const VerifyOptions& options, std::ostream& out) {
  const bool full = options.level == VerifyLevel::kFull;
  PolicyFunction policy = options.policy;
  if (!policy) {
    policy = [](const Eigen::VectorXd& q, const Eigen::VectorXd& l, double kappa) {
      return optimal_policy(q, l, Temperature<double>(kappa));
    };
  }
  using Runner = std::function<bool(std::ostream&)>;
  const std::vector<std::pair<std::string, Runner>> suites{
      {"policy-vs-search", [&](std::ostream& o) { return policy_vs_search(policy, full, o); }},
      {"greedy-limits", [&](std::ostream& o) { return greedy_limits(policy, full, o); }},
      {"kl-vs-quadrature", [&](std::ostream& o) { return kl_vs_quadrature(full, o); }},
      {"dominance-vs-enumeration", [&](std::ostream& o) { return dominance(full, o); }},
      {"contraction", [&](std::ostream& o) { return contraction(full, o); }},
      {"uc-vs-value-iteration", [&](std::ostream& o) { return uc_vs_value_iteration(full, o); }},
      {"loss-gradients", [&](std::ostream& o) { return gradients(full, o); }},
  };
  if (!options.only.empty()) {
    const bool known = std::any_of(suites.begin(), suites.end(), [&](const auto& s) { return s.first == options.only; });
    if (!known) throw InvalidArgument("verify: unknown suite " + options.only);
  }
  out << "verify level " << (full ? "full" : "quick") << "\n";
  bool ok = true;
  for (const auto& [name, run] : suites) {
    if (options.only.empty() || options.only == name) ok = run(out) && ok;
  }
  out << (ok ? "all suites passed" : "verification FAILED") << "\n";
  return ok;
}

}  // namespace isl
