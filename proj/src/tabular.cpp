#include "isl/tabular.hpp"

#include <algorithm>
#include <cmath>

namespace isl {

void LearnerConfig::validate() const {
  require(mu_q > 0 && mu_q <= 1 && mu_rho > 0 && mu_rho <= 1 && mu_ell > 0 && mu_ell <= 1,
          "LearnerConfig: step sizes must lie in (0, 1]");
  require(eta1 >= 0 && eta1 <= 1, "LearnerConfig: eta1 must lie in [0, 1]");
  require(kappa > 0, "LearnerConfig: kappa must be positive");
  require(gamma >= 0 && gamma < 1, "LearnerConfig: gamma must lie in [0, 1)");
  require(ell_floor > 0 && ell_floor < ell_init, "LearnerConfig: need 0 < ell_floor < ell_init");
}

LearnerTables LearnerTables::fresh(int n_states, int n_actions, const LearnerConfig& cfg) {
  cfg.validate();
  require(n_states >= 1 && n_actions >= 1, "LearnerTables: sizes must be positive");
  return LearnerTables{Matrix<double>::Zero(n_states, n_actions), Matrix<double>::Zero(n_states, n_actions),
                       Matrix<double>::Constant(n_states, n_actions, cfg.ell_init)};
}

namespace {

void check_transition(const Transition& tr, const LearnerTables& tables) {
  require(tr.s >= 0 && tr.s < tables.n_states() && tr.s_next >= 0 && tr.s_next < tables.n_states(),
          "transition state id out of range");
  require(tr.a >= 0 && tr.a < tables.n_actions(), "transition action id out of range");
}

}  // namespace

double td_error(const Transition& tr, const LearnerTables& tables, const LearnerConfig& cfg) {
  check_transition(tr, tables);
  double continuation = 0.0;
  if (!tr.terminal) {
    continuation = state_value(tables.q.row(tr.s_next), tables.ell.row(tr.s_next), Temperature{cfg.kappa});
  }
  return tr.r + cfg.gamma * continuation - tables.q(tr.s, tr.a);
}

StepReport update(const Transition& tr, LearnerTables& tables, const LearnerConfig& cfg) {
  const double delta = td_error(tr, tables, cfg);
  const double rho_before = tables.rho(tr.s, tr.a);
  const double ell_next = tr.terminal ? 0.0 : tables.ell.row(tr.s_next).maxCoeff();

  double& q = tables.q(tr.s, tr.a);
  double& rho = tables.rho(tr.s, tr.a);
  double& ell = tables.ell(tr.s, tr.a);
  q += cfg.mu_q * delta;
  rho += cfg.mu_rho * (delta - rho_before);
  const double target = (1.0 - cfg.eta1) * std::abs(delta) + cfg.eta1 * std::abs(rho_before) + cfg.gamma * ell_next;
  ell += cfg.mu_ell * (target - ell);
  ell = std::clamp(ell, cfg.ell_floor, cfg.ell_init);
  return StepReport{delta, q, rho, ell};
}

Eigen::VectorXd acting_policy(int s, const LearnerTables& tables, const LearnerConfig& cfg) {
  require(s >= 0 && s < tables.n_states(), "acting_policy: state id out of range");
  const auto q = tables.q.row(s);
  const auto ell = tables.ell.row(s);
  const bool all_tied = q.maxCoeff() == q.minCoeff() && ell.maxCoeff() - ell.minCoeff() < kEllTieGap;
  if (all_tied) return Eigen::VectorXd::Constant(tables.n_actions(), 1.0 / tables.n_actions());
  return optimal_policy(q, ell, Temperature{cfg.kappa});
}

int sample_action(const Eigen::VectorXd& probs, Rng& rng) {
  const double u = uniform01(rng);
  double cumulative = 0.0;
  int last_positive = 0;
  for (Index a = 0; a < probs.size(); ++a) {
    if (probs(a) <= 0.0) continue;
    last_positive = static_cast<int>(a);
    cumulative += probs(a);
    if (u < cumulative) return static_cast<int>(a);
  }
  return last_positive;
}

int act(int s, const LearnerTables& tables, const LearnerConfig& cfg, Rng& rng) {
  return sample_action(acting_policy(s, tables, cfg), rng);
}

EpisodeRecord run_episode(Environment& env, LearnerTables& tables, const LearnerConfig& cfg, Rng& rng,
                          int horizon, bool learn) {
  require(env.num_states() == tables.n_states() && env.num_actions() == tables.n_actions(),
          "run_episode: table shape does not match the environment");
  if (horizon <= 0) horizon = env.horizon();
  EpisodeRecord record;
  env.reset(rng);
  int s = env.state_index();
  for (int t = 0; t < horizon; ++t) {
    const int a = act(s, tables, cfg, rng);
    const EnvStep step = env.step(a, rng);
    const Transition tr{s, a, step.reward, env.state_index(), step.terminal};
    if (learn) update(tr, tables, cfg);
    record.transitions.push_back(tr);
    record.episode_return += step.reward;
    record.goal = record.goal || step.goal;
    ++record.length;
    s = tr.s_next;
    if (step.terminal) break;
  }
  return record;
}

}  // namespace isl
