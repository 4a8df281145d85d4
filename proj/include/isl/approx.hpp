#ifndef ISL_APPROX_HPP_
#define ISL_APPROX_HPP_

// Neural learner: a small hand-written MLP with exact backprop, Adam, a replay
// buffer, target copies and the three regression losses for q, rho and ell.
//
// Batches are row-major in samples: an input batch is B x d, outputs B x k.

#include <cstdint>
#include <string>
#include <vector>

#include "isl/common.hpp"
#include "isl/envs.hpp"

namespace isl {

enum class Head { kLinear, kBoundedSigmoid };

/// Output range of a bounded-sigmoid head.
inline constexpr double kEllHeadLow = kDefaultEllFloor;
inline constexpr double kEllHeadHigh = kDefaultEllCap;

/// Activations recorded by a forward pass, consumed by `Mlp::backward`.
struct MlpCache {
  std::vector<Eigen::MatrixXd> inputs;  // input to each layer
  std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
  std::uint64_t generation = 0;
};

/// Fully connected net: rectifier hidden layers, linear or bounded-sigmoid output.
///
/// Flat parameter layout (also the checkpoint layout): for each layer in
/// order, the fan_in x fan_out weight matrix row-major, then the fan_out bias.
class Mlp {
 public:
  /// Uniform fan-in/fan-out init in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  Mlp(std::vector<int> sizes, Head head, Rng& rng);
  /// All parameters zero.
  static Mlp zeros(std::vector<int> sizes, Head head);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, MlpCache& cache) const;

  /// Gradient of sum_ij dout_ij * out_ij w.r.t. the flat parameters. Throws
  /// InvalidArgument if `cache` came from other parameters or another shape.
  Eigen::VectorXd backward(const MlpCache& cache, const Eigen::MatrixXd& dout) const;

  Index num_params() const noexcept { return num_params_; }
  Eigen::VectorXd flat() const;
  void set_flat(const Eigen::VectorXd& params);
  void set_layer(int layer, const Matrix<double>& weight, const Eigen::RowVectorXd& bias);

  const std::vector<int>& sizes() const noexcept { return sizes_; }
  Head head() const noexcept { return head_; }
  int input_size() const noexcept { return sizes_.front(); }
  int output_size() const noexcept { return sizes_.back(); }
  /// Changes whenever the parameters change; shared by exact copies.
  std::uint64_t generation() const noexcept { return generation_; }

 private:
  Mlp(std::vector<int> sizes, Head head);
  void touch() noexcept;
  Eigen::MatrixXd run(const Eigen::MatrixXd& x, MlpCache* cache) const;

  std::vector<int> sizes_;
  Head head_;
  std::vector<Matrix<double>> weights_;  // fan_in x fan_out
  std::vector<Eigen::RowVectorXd> biases_;
  Index num_params_ = 0;
  std::uint64_t generation_ = 0;
};

/// Adam on a flat parameter vector (beta1 0.9, beta2 0.999, eps 1e-8, bias-corrected).
class Adam {
 public:
  Adam(Index n, double learning_rate);

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);
  /// Convenience: one step on the flat parameters of `net`.
  void step(Mlp& net, const Eigen::VectorXd& grad);

  double learning_rate() const noexcept { return lr_; }
  std::uint64_t steps() const noexcept { return t_; }
  const Eigen::VectorXd& first_moment() const noexcept { return m_; }
  const Eigen::VectorXd& second_moment() const noexcept { return v_; }
  void restore(std::uint64_t steps, Eigen::VectorXd m, Eigen::VectorXd v);

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

 private:
  double lr_;
  std::uint64_t t_ = 0;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
};

/// One stored environment step with feature vectors.
struct Experience {
  Eigen::VectorXd obs;
  int action = 0;
  double reward = 0.0;
  Eigen::VectorXd next_obs;
  bool terminal = false;
};

struct Batch {
  Eigen::MatrixXd obs;       // B x d
  std::vector<int> actions;  // B
  Eigen::VectorXd rewards;   // B
  Eigen::MatrixXd next_obs;  // B x d
  Eigen::VectorXd terminal;  // B, 1.0 for terminal samples

  Index size() const noexcept { return rewards.size(); }
  static Batch from(const std::vector<Experience>& samples);
};

/// Fixed-capacity ring buffer; the oldest entry is overwritten once full.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100000);

  void push(Experience e);
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  const Experience& operator[](std::size_t i) const { return data_.at(i); }
  /// `n` uniform draws with replacement.
  Batch sample(std::size_t n, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;
  std::vector<Experience> data_;
};

struct DeepIslConfig {
  double kappa = 1.0;
  double eta1 = 0.9;
  double eta2 = 0.1;
  double gamma = 0.99;
  double lr_q = 2e-4;
  double lr_rho = 1e-4;
  double lr_ell = 5e-5;
  int batch_size = 256;
  int target_update_period = 2;
  int env_steps = 2;   // T
  int grad_steps = 1;  // I
  int hidden = 50;
  std::size_t replay_capacity = 100000;

  static DeepIslConfig cartpole();
  static DeepIslConfig deep_sea();
  static DeepIslConfig deep_sea_stochastic();
  void validate() const;
};

/// Online q and rho nets (one output per action), one single-output ell net per
/// action, and target copies of the q and ell nets.
struct IslNetworks {
  Mlp q;
  Mlp rho;
  std::vector<Mlp> ell;
  Mlp q_target;
  std::vector<Mlp> ell_target;

  static IslNetworks create(int obs_size, int n_actions, int hidden, Rng& rng);
  int n_actions() const noexcept { return q.output_size(); }
  void sync_targets();
};

/// Column a of the result is ell net a applied to `x`.
Eigen::MatrixXd ell_forward(const std::vector<Mlp>& nets, const Eigen::MatrixXd& x);

/// Per-sample quantities shared by the losses. Everything here is a constant
/// from the point of view of the net being trained.
struct BatchTargets {
  Eigen::VectorXd q_target;  // r + gamma v(s') (1 - terminal), target nets
  Eigen::VectorXd q_hat;     // online q(s, a)
  Eigen::VectorXd delta;     // q_target - q_hat
  Eigen::VectorXd rho;       // rho(s, a)
  Eigen::VectorXd ell_target;
};

Eigen::VectorXd q_target(const Batch& batch, const IslNetworks& nets, const DeepIslConfig& cfg);
BatchTargets batch_targets(const Batch& batch, const IslNetworks& nets, const DeepIslConfig& cfg);

struct LossResult {
  double value = 0.0;
  std::vector<Eigen::VectorXd> grads;  // one per trained net (ell: one per action)
};

/// 1/2 mean (delta - rho)^2, gradient w.r.t. the rho net.
LossResult loss_rho(const Batch& batch, const IslNetworks& nets, const BatchTargets& t);
/// 1/2 mean (q_T - q)((1 - eta2)(q_T - q) + eta2 rho), gradient w.r.t. the q net.
LossResult loss_q(const Batch& batch, const IslNetworks& nets, const BatchTargets& t, const DeepIslConfig& cfg);
/// 1/2 mean (ell - ell_T)^2, gradients w.r.t. each ell net.
LossResult loss_ell(const Batch& batch, const IslNetworks& nets, const BatchTargets& t);

LossResult loss_rho(const Batch& batch, const IslNetworks& nets, const DeepIslConfig& cfg);
LossResult loss_q(const Batch& batch, const IslNetworks& nets, const DeepIslConfig& cfg);
LossResult loss_ell(const Batch& batch, const IslNetworks& nets, const DeepIslConfig& cfg);

/// optimal_policy applied to the online q and ell outputs at `obs`.
Eigen::VectorXd acting_policy(const Eigen::VectorXd& obs, const IslNetworks& nets, const DeepIslConfig& cfg);

struct LossValues {
  double q = 0.0;
  double rho = 0.0;
  double ell = 0.0;
};

/// Networks, optimizers, replay and the target-copy counter of one run.
class DeepIslAgent {
 public:
  DeepIslAgent(int obs_size, int n_actions, const DeepIslConfig& cfg, Rng& rng);

  int act(const Eigen::VectorXd& obs, Rng& rng) const;
  void observe(Experience e) { replay_.push(std::move(e)); }
  bool ready() const noexcept { return replay_.size() >= static_cast<std::size_t>(cfg_.batch_size); }
  /// One minibatch step on all three losses, gradients taken at the same parameters.
  LossValues gradient_step(Rng& rng);

  const IslNetworks& nets() const noexcept { return nets_; }
  const DeepIslConfig& config() const noexcept { return cfg_; }
  const ReplayBuffer& replay() const noexcept { return replay_; }
  long counter() const noexcept { return counter_; }

  /// Binary layout, little-endian host order:
  ///   "ISLNET01", uint32 net count, uint64 counter,
  ///   per net: uint32 head, uint32 layer count L, int32 sizes[L + 1], double params[n],
  ///   per optimizer (q, rho, ell_0..): uint64 steps, double m[n], double v[n].
  /// Nets are stored q, rho, ell_0.., q_target, ell_target_0... Replay is not saved.
  void save(const std::string& path) const;
  void load(const std::string& path);

 private:
  DeepIslConfig cfg_;
  IslNetworks nets_;
  Adam adam_q_;
  Adam adam_rho_;
  std::vector<Adam> adam_ell_;
  ReplayBuffer replay_;
  long counter_ = 0;
};

struct TrainOptions {
  int episodes = 1000;
  int stop_at_goal_visits = 0;  // 0: run the full budget
};

struct EpisodeLog {
  double episode_return = 0.0;
  int length = 0;
  bool goal = false;
  long goal_visits = 0;  // cumulative
};

struct TrainingLog {
  std::vector<EpisodeLog> episodes;
  std::vector<LossValues> losses;  // one per gradient step
  bool diverged = false;

  long goal_visits() const noexcept { return episodes.empty() ? 0 : episodes.back().goal_visits; }
};

/// Alternates T environment steps with I gradient steps. Gradient steps start once
/// the replay holds a full batch. Stops early on a non-finite loss (diverged).
TrainingLog isl_train(Environment& env, const DeepIslConfig& cfg, Rng& rng, const TrainOptions& options);
/// Same, continuing with an existing agent.
TrainingLog isl_train(Environment& env, DeepIslAgent& agent, Rng& rng, const TrainOptions& options);

}  // namespace isl

#endif  // ISL_APPROX_HPP_
