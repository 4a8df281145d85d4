#include <cmath>

#include "doctest.h"
#include "isl/policy.hpp"

using isl::Temperature;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

VectorXd greedy(const VectorXd& q) {
  Eigen::Index best = 0;
  q.maxCoeff(&best);
  VectorXd g = VectorXd::Zero(q.size());
  g(best) = 1.0;
  return g;
}

double total_variation(const VectorXd& a, const VectorXd& b) { return 0.5 * (a - b).cwiseAbs().sum(); }

}  // namespace

TEST_CASE("temperature rejects non-positive values") {
  CHECK_THROWS_AS(Temperature<double>(0.0), isl::InvalidArgument);
  CHECK_THROWS_AS(Temperature<double>(-1.0), isl::InvalidArgument);
  CHECK(Temperature<double>(0.5).value() == 0.5);
}

TEST_CASE("action belief validates its invariants") {
  CHECK_NOTHROW(isl::ActionBelief<double>::make(vec({1, 2}), vec({0.5, 1})));
  CHECK_THROWS_AS(isl::ActionBelief<double>::make(vec({1, 2}), vec({0.5})), isl::InvalidArgument);
  CHECK_THROWS_AS(isl::ActionBelief<double>::make(vec({1}), vec({200})), isl::InvalidArgument);
  CHECK_THROWS_AS(isl::ActionBelief<double>::make(vec({NAN}), vec({1})), isl::InvalidArgument);
}

TEST_CASE("kl with equal widths or a single action is zero") {
  CHECK(isl::kl_uncertainty(vec({0.2, 0.3, 0.5}), vec({1, 1, 1})) == 0.0);
  CHECK(isl::kl_uncertainty(vec({1}), vec({5})) == 0.0);
}

TEST_CASE("kl closed form matches piecewise integration") {
  // Reference values from tests/fixtures/derive_values.py.
  CHECK(isl::kl_uncertainty(vec({0.5, 0.5}), vec({1, 2})) == doctest::Approx(0.13081203594113697).epsilon(1e-12));
  CHECK(isl::kl_uncertainty(vec({1, 0}), vec({1, 2})) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // Order of actions is irrelevant.
  CHECK(isl::kl_uncertainty(vec({0.5, 0.5}), vec({2, 1})) == doctest::Approx(0.13081203594113697).epsilon(1e-12));
  // Mass on the widest action only is the reference distribution itself.
  CHECK(isl::kl_uncertainty(vec({0, 0, 1}), vec({0.3, 1, 2})) == 0.0);
}

TEST_CASE("kl rejects bad input") {
  CHECK_THROWS_AS(isl::kl_uncertainty(vec({0.5, 0.5}), vec({1})), isl::InvalidArgument);
  CHECK_THROWS_AS(isl::kl_uncertainty(vec({0.5, 0.5}), vec({1, 0})), isl::InvalidArgument);
  CHECK_THROWS_AS(isl::kl_uncertainty(vec({0.6, 0.6}), vec({1, 2})), isl::InvalidArgument);
}

TEST_CASE("pareto filter examples") {
  auto a = isl::pareto_filter(vec({0, 1}), vec({1, 2}));
  CHECK(a.sigma == std::vector<Eigen::Index>{1});

  auto b = isl::pareto_filter(vec({2, 1}), vec({1, 2}));
  CHECK(b.sigma == std::vector<Eigen::Index>{0, 1});

  auto c = isl::pareto_filter(vec({3, 2.05, 2}), vec({1, 2, 3}));
  CHECK(c.sigma == std::vector<Eigen::Index>{0, 2});

  CHECK_THROWS_AS(isl::pareto_filter(VectorXd(0), VectorXd(0)), isl::InvalidArgument);
}

TEST_CASE("pareto filter tie rules") {
  // Equal widths keep the higher value; equal values and widths keep the lowest index.
  CHECK(isl::pareto_filter(vec({0.2, 0.7}), vec({1, 1})).sigma == std::vector<Eigen::Index>{1});
  CHECK(isl::pareto_filter(vec({0.5, 0.5, 0.5}), vec({1, 1, 1})).sigma == std::vector<Eigen::Index>{0});
  // Collinear middle action gets no mass and is removed.
  CHECK(isl::pareto_filter(vec({1.0, 0.75, 2.0 / 3.0}), vec({1, 2, 3})).sigma ==
        std::vector<Eigen::Index>{0, 2});
}

TEST_CASE("pareto filter is idempotent and orders survivors") {
  isl::Rng rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + isl::uniform_index(rng, 6));
    VectorXd q(n), l(n);
    for (Eigen::Index a = 0; a < n; ++a) {
      q(a) = isl::uniform(rng, -1, 1);
      l(a) = isl::uniform(rng, 0.1, 3);
    }
    const auto first = isl::pareto_filter(q, l);
    REQUIRE(first.size() >= 1);
    Eigen::Index best = 0;
    q.maxCoeff(&best);
    CHECK(first.contains(best));
    for (Eigen::Index j = 1; j < first.size(); ++j) {
      CHECK(first.ell_sorted(j) > first.ell_sorted(j - 1));
      CHECK(first.q_sorted(j) < first.q_sorted(j - 1));
    }
    const auto again = isl::pareto_filter(first.q_sorted, first.ell_sorted);
    CHECK(again.size() == first.size());
  }
}

TEST_CASE("log weights") {
  auto single = isl::pareto_filter(vec({2}), vec({1}));
  CHECK(isl::log_weights(single, Temperature<double>(1.0))(0) == doctest::Approx(2.0));

  auto two = isl::pareto_filter(vec({2, 1}), vec({1, 2}));
  const VectorXd lw = isl::log_weights(two, Temperature<double>(1.0));
  CHECK(lw(0) == doctest::Approx(2.0));
  CHECK(lw(1) == doctest::Approx(0.0));

  const VectorXd hot = isl::log_weights(two, Temperature<double>(1e12));
  CHECK(hot.cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("optimal policy examples") {
  const VectorXd single = isl::optimal_policy(vec({1, 0}), vec({2, 1}), Temperature<double>(1.0));
  CHECK(single(0) == 1.0);
  CHECK(single(1) == 0.0);

  const VectorXd cold = isl::optimal_policy(vec({1, 0}), vec({1, 2}), Temperature<double>(1e-8));
  CHECK(cold(1) < 1e-6);

  // Reference value by direct maximization of the objective (derive_values.py).
  const VectorXd warm = isl::optimal_policy(vec({1, 0}), vec({1, 2}), Temperature<double>(1.0));
  CHECK(warm(0) == doctest::Approx(0.7615941548478508).epsilon(1e-8));
  CHECK(warm(0) == doctest::Approx(std::tanh(1.0)).epsilon(1e-14));
}

TEST_CASE("state value examples") {
  CHECK(isl::state_value(vec({3}), vec({0.7}), Temperature<double>(2.0)) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(std::abs(isl::state_value(vec({1, 0}), vec({1, 2}), Temperature<double>(1e-8)) - 1.0) < 1e-6);

  const VectorXd q = vec({1, 0});
  const VectorXd l = vec({1, 2});
  const Temperature<double> kappa(1.0);
  const VectorXd pi = isl::optimal_policy(q, l, kappa);
  const double v = isl::state_value(q, l, kappa);
  CHECK(std::abs(v - isl::regularized_objective(pi, q, l, kappa)) < 1e-9);
  CHECK(v == doctest::Approx(0.43378083048302724).epsilon(1e-9));
}

TEST_CASE("policy properties on random instances") {
  isl::Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + isl::uniform_index(rng, 5));
    VectorXd q(n), l(n);
    for (Eigen::Index a = 0; a < n; ++a) {
      q(a) = isl::uniform(rng, -1, 1);
      l(a) = isl::uniform(rng, 0.1, 3);
    }
    const double kappas[] = {0.1, 1.0, 10.0};
    const Temperature<double> kappa(kappas[trial % 3]);
    const VectorXd pi = isl::optimal_policy(q, l, kappa);
    CHECK(isl::is_probability_vector(pi));

    // Support is exactly the Pareto set.
    const auto pareto = isl::pareto_filter(q, l);
    for (Eigen::Index a = 0; a < n; ++a) CHECK((pi(a) > 0) == pareto.contains(a));

    // The value is the objective attained by the policy.
    CHECK(std::abs(isl::state_value(q, l, kappa) - isl::regularized_objective(pi, q, l, kappa)) < 1e-9);

    // Scaling q and kappa together leaves the policy unchanged.
    const VectorXd scaled = isl::optimal_policy(VectorXd(3.7 * q), l, Temperature<double>(3.7 * kappa.value()));
    CHECK((scaled - pi).cwiseAbs().maxCoeff() < 1e-9);

    // Greedy limits.
    CHECK(total_variation(isl::optimal_policy(q, l, Temperature<double>(1e-8)), greedy(q)) < 1e-5);
    const VectorXd flat = VectorXd::Constant(n, l(0)) + VectorXd::LinSpaced(n, 0.0, 5e-10);
    CHECK(total_variation(isl::optimal_policy(q, flat, kappa), greedy(q)) < 1e-5);

    CHECK(isl::kl_uncertainty(pi, l) >= 0.0);
  }
}

TEST_CASE("policy works in single precision") {
  Eigen::VectorXf q(2), l(2);
  q << 1.0f, 0.0f;
  l << 1.0f, 2.0f;
  const Eigen::VectorXf pi = isl::optimal_policy(q, l, Temperature<float>(1.0f));
  CHECK(pi(0) == doctest::Approx(std::tanh(1.0)).epsilon(1e-6));
}

TEST_CASE("policy accepts table rows") {
  isl::Matrix<double> q(2, 2), l(2, 2);
  q << 1, 0, 0, 1;
  l << 1, 2, 2, 1;
  const VectorXd pi = isl::optimal_policy(q.row(1), l.row(1), Temperature<double>(1.0));
  CHECK(pi(1) == doctest::Approx(std::tanh(1.0)));
}
