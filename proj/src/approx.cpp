#include "isl/approx.hpp"

#include <algorithm>
#include <atomic>
#include <cstring>
#include <fstream>
#include <limits>
#include <tuple>

#include "isl/policy.hpp"

namespace isl {

namespace {

std::atomic<std::uint64_t> g_generation{0};

constexpr double kSigmoidClamp = 30.0;

double bounded_sigmoid(double z) {
  const double zc = std::clamp(z, -kSigmoidClamp, kSigmoidClamp);
  return kEllHeadLow + (kEllHeadHigh - kEllHeadLow) / (1.0 + std::exp(-zc));
}

double bounded_sigmoid_slope(double z) {
  if (std::abs(z) >= kSigmoidClamp) return 0.0;
  const double s = 1.0 / (1.0 + std::exp(-z));
  return (kEllHeadHigh - kEllHeadLow) * s * (1.0 - s);
}

}  // namespace

// ---------------------------------------------------------------------------
// Mlp

Mlp::Mlp(std::vector<int> sizes, Head head) : sizes_(std::move(sizes)), head_(head) {
  require(sizes_.size() >= 2, "Mlp: need at least an input and an output size");
  for (int s : sizes_) require(s >= 1, "Mlp: layer sizes must be positive");
  for (std::size_t k = 0; k + 1 < sizes_.size(); ++k) {
    weights_.push_back(Matrix<double>::Zero(sizes_[k], sizes_[k + 1]));
    biases_.push_back(Eigen::RowVectorXd::Zero(sizes_[k + 1]));
    num_params_ += static_cast<Index>(sizes_[k]) * sizes_[k + 1] + sizes_[k + 1];
  }
  touch();
}

Mlp::Mlp(std::vector<int> sizes, Head head, Rng& rng) : Mlp(std::move(sizes), head) {
  for (auto& w : weights_) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -bound, bound);
  }
}

Mlp Mlp::zeros(std::vector<int> sizes, Head head) { return Mlp(std::move(sizes), head); }

void Mlp::touch() noexcept { generation_ = ++g_generation; }

Eigen::MatrixXd Mlp::run(const Eigen::MatrixXd& x, MlpCache* cache) const {
  require(x.cols() == input_size(), "Mlp::forward: input width does not match the first layer");
  if (cache != nullptr) {
    cache->inputs.clear();
    cache->pre.clear();
    cache->generation = generation_;
  }
  Eigen::MatrixXd a = x;
  const std::size_t layers = weights_.size();
  for (std::size_t k = 0; k < layers; ++k) {
    Eigen::MatrixXd z = a * weights_[k];
    z.rowwise() += biases_[k];
    if (cache != nullptr) {
      cache->inputs.push_back(a);
      cache->pre.push_back(z);
    }
    if (k + 1 < layers) {
      a = z.cwiseMax(0.0);
    } else if (head_ == Head::kBoundedSigmoid) {
      a = z.unaryExpr(&bounded_sigmoid);
    } else {
      a = std::move(z);
    }
  }
  return a;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const { return run(x, nullptr); }

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, MlpCache& cache) const { return run(x, &cache); }

Eigen::VectorXd Mlp::backward(const MlpCache& cache, const Eigen::MatrixXd& dout) const {
  const std::size_t layers = weights_.size();
  require(cache.generation == generation_ && cache.pre.size() == layers,
          "Mlp::backward: cache is stale or belongs to another net");
  const Index batch = cache.pre.back().rows();
  require(dout.rows() == batch && dout.cols() == output_size(), "Mlp::backward: output gradient has the wrong shape");

  Eigen::VectorXd grad(num_params_);
  std::vector<Index> offsets(layers);
  Index offset = 0;
  for (std::size_t k = 0; k < layers; ++k) {
    offsets[k] = offset;
    offset += weights_[k].size() + biases_[k].size();
  }

  Eigen::MatrixXd dz = dout;
  if (head_ == Head::kBoundedSigmoid) dz.array() *= cache.pre.back().unaryExpr(&bounded_sigmoid_slope).array();
  for (std::size_t k = layers; k-- > 0;) {
    const Matrix<double> dw = cache.inputs[k].transpose() * dz;
    const Eigen::RowVectorXd db = dz.colwise().sum();
    std::memcpy(grad.data() + offsets[k], dw.data(), sizeof(double) * static_cast<std::size_t>(dw.size()));
    grad.segment(offsets[k] + dw.size(), db.size()) = db.transpose();
    if (k > 0) {
      Eigen::MatrixXd da = dz * weights_[k].transpose();
      dz = (cache.pre[k - 1].array() > 0.0).select(da, 0.0);
    }
  }
  return grad;
}

Eigen::VectorXd Mlp::flat() const {
  Eigen::VectorXd out(num_params_);
  Index offset = 0;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    std::memcpy(out.data() + offset, weights_[k].data(), sizeof(double) * static_cast<std::size_t>(weights_[k].size()));
    offset += weights_[k].size();
    out.segment(offset, biases_[k].size()) = biases_[k].transpose();
    offset += biases_[k].size();
  }
  return out;
}

void Mlp::set_flat(const Eigen::VectorXd& params) {
  require(params.size() == num_params_, "Mlp::set_flat: wrong parameter count");
  require(params.allFinite(), "Mlp::set_flat: parameters must be finite");
  Index offset = 0;
  for (std::size_t k = 0; k < weights_.size(); ++k) {
    std::memcpy(weights_[k].data(), params.data() + offset, sizeof(double) * static_cast<std::size_t>(weights_[k].size()));
    offset += weights_[k].size();
    biases_[k] = params.segment(offset, biases_[k].size()).transpose();
    offset += biases_[k].size();
  }
  touch();
}

void Mlp::set_layer(int layer, const Matrix<double>& weight, const Eigen::RowVectorXd& bias) {
  require(layer >= 0 && layer < static_cast<int>(weights_.size()), "Mlp::set_layer: no such layer");
  const auto k = static_cast<std::size_t>(layer);
  require(weight.rows() == weights_[k].rows() && weight.cols() == weights_[k].cols() &&
              bias.size() == biases_[k].size(),
          "Mlp::set_layer: shape mismatch");
  weights_[k] = weight;
  biases_[k] = bias;
  touch();
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(Index n, double learning_rate)
    : lr_(learning_rate), m_(Eigen::VectorXd::Zero(n)), v_(Eigen::VectorXd::Zero(n)) {
  require(learning_rate > 0.0, "Adam: learning rate must be positive");
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  require(params.size() == m_.size() && grad.size() == m_.size(), "Adam::step: size mismatch");
  ++t_;
  m_ = kBeta1 * m_ + (1.0 - kBeta1) * grad;
  v_ = kBeta2 * v_ + (1.0 - kBeta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + kEpsilon);
}

void Adam::step(Mlp& net, const Eigen::VectorXd& grad) {
  Eigen::VectorXd p = net.flat();
  step(p, grad);
  net.set_flat(p);
}

void Adam::restore(std::uint64_t steps, Eigen::VectorXd m, Eigen::VectorXd v) {
  require(m.size() == m_.size() && v.size() == v_.size(), "Adam::restore: size mismatch");
  t_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

// ---------------------------------------------------------------------------
// Replay

Batch Batch::from(const std::vector<Experience>& samples) {
  require(!samples.empty(), "Batch: empty sample list");
  const auto n = static_cast<Index>(samples.size());
  const Index d = samples.front().obs.size();
  Batch b;
  b.obs.resize(n, d);
  b.next_obs.resize(n, d);
  b.rewards.resize(n);
  b.terminal.resize(n);
  b.actions.resize(samples.size());
  for (Index i = 0; i < n; ++i) {
    const Experience& e = samples[static_cast<std::size_t>(i)];
    require(e.obs.size() == d && e.next_obs.size() == d, "Batch: inconsistent observation sizes");
    b.obs.row(i) = e.obs.transpose();
    b.next_obs.row(i) = e.next_obs.transpose();
    b.rewards(i) = e.reward;
    b.terminal(i) = e.terminal ? 1.0 : 0.0;
    b.actions[static_cast<std::size_t>(i)] = e.action;
  }
  return b;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  require(capacity >= 1, "ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Experience e) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(e));
  } else {
    data_[next_] = std::move(e);
  }
  next_ = (next_ + 1) % capacity_;
}

Batch ReplayBuffer::sample(std::size_t n, Rng& rng) const {
  require(!data_.empty(), "ReplayBuffer::sample: buffer is empty");
  require(n >= 1, "ReplayBuffer::sample: need at least one sample");
  const Index d = data_.front().obs.size();
  Batch b;
  b.obs.resize(static_cast<Index>(n), d);
  b.next_obs.resize(static_cast<Index>(n), d);
  b.rewards.resize(static_cast<Index>(n));
  b.terminal.resize(static_cast<Index>(n));
  b.actions.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Experience& e = data_[uniform_index(rng, data_.size())];
    const auto r = static_cast<Index>(i);
    b.obs.row(r) = e.obs.transpose();
    b.next_obs.row(r) = e.next_obs.transpose();
    b.rewards(r) = e.reward;
    b.terminal(r) = e.terminal ? 1.0 : 0.0;
    b.actions[i] = e.action;
  }
  return b;
}

// ---------------------------------------------------------------------------
// Config

DeepIslConfig DeepIslConfig::cartpole() {
  DeepIslConfig c;
  c.kappa = 13.0;
  c.eta1 = 0.8;
  c.eta2 = 0.7;
  c.lr_q = 2e-4;
  c.lr_rho = 5e-6;
  c.lr_ell = 2e-5;
  c.batch_size = 64;
  c.target_update_period = 4;
  c.env_steps = 1;
  c.grad_steps = 3;
  return c;
}

DeepIslConfig DeepIslConfig::deep_sea() { return DeepIslConfig{}; }

DeepIslConfig DeepIslConfig::deep_sea_stochastic() {
  DeepIslConfig c;
  c.eta1 = 1.0;
  c.eta2 = 0.5;
  c.lr_q = 1e-4;
  c.env_steps = 10;
  return c;
}

void DeepIslConfig::validate() const {
  require(kappa > 0.0 && std::isfinite(kappa), "DeepIslConfig: kappa must be positive");
  require(eta1 >= 0.0 && eta1 <= 1.0, "DeepIslConfig: eta1 must lie in [0, 1]");
  require(eta2 >= 0.0 && eta2 <= 1.0, "DeepIslConfig: eta2 must lie in [0, 1]");
  require(gamma >= 0.0 && gamma < 1.0, "DeepIslConfig: gamma must lie in [0, 1)");
  require(lr_q > 0.0 && lr_rho > 0.0 && lr_ell > 0.0, "DeepIslConfig: learning rates must be positive");
  require(batch_size >= 1, "DeepIslConfig: batch size must be positive");
  require(target_update_period >= 1, "DeepIslConfig: target update period must be positive");
  require(env_steps >= 1 && grad_steps >= 1, "DeepIslConfig: T and I must be positive");
  require(hidden >= 1, "DeepIslConfig: hidden width must be positive");
  require(replay_capacity >= static_cast<std::size_t>(batch_size), "DeepIslConfig: replay smaller than a batch");
}

// ---------------------------------------------------------------------------
// Networks and losses

IslNetworks IslNetworks::create(int obs_size, int n_actions, int hidden, Rng& rng) {
  require(obs_size >= 1 && n_actions >= 1, "IslNetworks: bad sizes");
  Mlp q({obs_size, hidden, hidden, n_actions}, Head::kLinear, rng);
  Mlp rho({obs_size, hidden, hidden, n_actions}, Head::kLinear, rng);
  std::vector<Mlp> ell;
  for (int a = 0; a < n_actions; ++a) ell.emplace_back(std::vector<int>{obs_size, hidden, hidden, 1}, Head::kBoundedSigmoid, rng);
  IslNetworks nets{q, std::move(rho), ell, q, ell};
  return nets;
}

void IslNetworks::sync_targets() {
  q_target = q;
  ell_target = ell;
}

Eigen::MatrixXd ell_forward(const std::vector<Mlp>& nets, const Eigen::MatrixXd& x) {
  Eigen::MatrixXd out(x.rows(), static_cast<Index>(nets.size()));
  for (std::size_t a = 0; a < nets.size(); ++a) out.col(static_cast<Index>(a)) = nets[a].forward(x).col(0);
  return out;
}

namespace {

void check_batch(const Batch& batch, const IslNetworks& nets) {
  require(batch.size() >= 1, "loss: empty batch");
  require(batch.obs.cols() == nets.q.input_size(), "loss: observation width does not match the nets");
  for (int a : batch.actions) require(a >= 0 && a < nets.n_actions(), "loss: action out of range");
}

Eigen::VectorXd pick(const Eigen::MatrixXd& values, const std::vector<int>& actions) {
  Eigen::VectorXd out(values.rows());
  for (Index i = 0; i < values.rows(); ++i) out(i) = values(i, actions[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

Eigen::VectorXd q_target(const Batch& batch, const IslNetworks& nets, const DeepIslConfig& cfg) {
  check_batch(batch, nets);
  const Eigen::MatrixXd q_next = nets.q_target.forward(batch.next_obs);
  const Eigen::MatrixXd ell_next = ell_forward(nets.ell_target, batch.next_obs);
  const Temperature<double> kappa(cfg.kappa);
  Eigen::VectorXd out = batch.rewards;
  for (Index i = 0; i < batch.size(); ++i) {
    if (batch.terminal(i) != 0.0) continue;
    const Eigen::VectorXd qi = q_next.row(i).transpose();
    const Eigen::VectorXd li = ell_next.row(i).transpose();
    out(i) += cfg.gamma * state_value(qi, li, kappa);
  }
  return out;
}

BatchTargets batch_targets(const Batch& batch, const IslNetworks& nets, const DeepIslConfig& cfg) {
  BatchTargets t;
  t.q_target = q_target(batch, nets, cfg);
  t.q_hat = pick(nets.q.forward(batch.obs), batch.actions);
  t.delta = t.q_target - t.q_hat;
  t.rho = pick(nets.rho.forward(batch.obs), batch.actions);
  const Eigen::VectorXd ell_max_next = ell_forward(nets.ell_target, batch.next_obs).rowwise().maxCoeff();
  t.ell_target = ((1.0 - cfg.eta1) * t.delta.cwiseAbs() + cfg.eta1 * t.rho.cwiseAbs() +
                  cfg.gamma * ell_max_next.cwiseProduct((1.0 - batch.terminal.array()).matrix()));
  return t;
}

LossResult loss_rho(const Batch& batch, const IslNetworks& nets, const BatchTargets& t) {
  check_batch(batch, nets);
  const double n = static_cast<double>(batch.size());
  MlpCache cache;
  const Eigen::MatrixXd out = nets.rho.forward(batch.obs, cache);
  const Eigen::VectorXd gap = t.delta - pick(out, batch.actions);
  Eigen::MatrixXd dout = Eigen::MatrixXd::Zero(out.rows(), out.cols());
  for (Index i = 0; i < batch.size(); ++i) dout(i, batch.actions[static_cast<std::size_t>(i)]) = -gap(i) / n;
  return LossResult{0.5 * gap.squaredNorm() / n, {nets.rho.backward(cache, dout)}};
}

LossResult loss_q(const Batch& batch, const IslNetworks& nets, const BatchTargets& t, const DeepIslConfig& cfg) {
  check_batch(batch, nets);
  const double n = static_cast<double>(batch.size());
  MlpCache cache;
  const Eigen::MatrixXd out = nets.q.forward(batch.obs, cache);
  const Eigen::VectorXd d = t.q_target - pick(out, batch.actions);
  const Eigen::VectorXd inner = (1.0 - cfg.eta2) * d + cfg.eta2 * t.rho;
  Eigen::MatrixXd dout = Eigen::MatrixXd::Zero(out.rows(), out.cols());
  for (Index i = 0; i < batch.size(); ++i) {
    dout(i, batch.actions[static_cast<std::size_t>(i)]) = -((1.0 - cfg.eta2) * d(i) + 0.5 * cfg.eta2 * t.rho(i)) / n;
  }
  return LossResult{0.5 * d.dot(inner) / n, {nets.q.backward(cache, dout)}};
}

LossResult loss_ell(const Batch& batch, const IslNetworks& nets, const BatchTargets& t) {
  check_batch(batch, nets);
  const double n = static_cast<double>(batch.size());
  LossResult result;
  for (std::size_t a = 0; a < nets.ell.size(); ++a) {
    MlpCache cache;
    const Eigen::MatrixXd out = nets.ell[a].forward(batch.obs, cache);
    Eigen::MatrixXd dout = Eigen::MatrixXd::Zero(out.rows(), 1);
    for (Index i = 0; i < batch.size(); ++i) {
      if (batch.actions[static_cast<std::size_t>(i)] != static_cast<int>(a)) continue;
      const double gap = out(i, 0) - t.ell_target(i);
      result.value += 0.5 * gap * gap / n;
      dout(i, 0) = gap / n;
    }
    result.grads.push_back(nets.ell[a].backward(cache, dout));
  }
  return result;
}

LossResult loss_rho(const Batch& batch, const IslNetworks& nets, const DeepIslConfig& cfg) {
  return loss_rho(batch, nets, batch_targets(batch, nets, cfg));
}

LossResult loss_q(const Batch& batch, const IslNetworks& nets, const DeepIslConfig& cfg) {
  return loss_q(batch, nets, batch_targets(batch, nets, cfg), cfg);
}

LossResult loss_ell(const Batch& batch, const IslNetworks& nets, const DeepIslConfig& cfg) {
  return loss_ell(batch, nets, batch_targets(batch, nets, cfg));
}

Eigen::VectorXd acting_policy(const Eigen::VectorXd& obs, const IslNetworks& nets, const DeepIslConfig& cfg) {
  const Eigen::MatrixXd x = obs.transpose();
  const Eigen::VectorXd q = nets.q.forward(x).row(0).transpose();
  const Eigen::VectorXd l = ell_forward(nets.ell, x).row(0).transpose();
  return optimal_policy(q, l, Temperature<double>(cfg.kappa));
}

// ---------------------------------------------------------------------------
// Agent

DeepIslAgent::DeepIslAgent(int obs_size, int n_actions, const DeepIslConfig& cfg, Rng& rng)
    : cfg_((cfg.validate(), cfg)),
      nets_(IslNetworks::create(obs_size, n_actions, cfg.hidden, rng)),
      adam_q_(nets_.q.num_params(), cfg.lr_q),
      adam_rho_(nets_.rho.num_params(), cfg.lr_rho),
      replay_(cfg.replay_capacity) {
  for (const Mlp& net : nets_.ell) adam_ell_.emplace_back(net.num_params(), cfg.lr_ell);
}

int DeepIslAgent::act(const Eigen::VectorXd& obs, Rng& rng) const {
  const Eigen::VectorXd pi = acting_policy(obs, nets_, cfg_);
  const double u = uniform01(rng);
  double cumulative = 0.0;
  for (Index a = 0; a < pi.size(); ++a) {
    cumulative += pi(a);
    if (u < cumulative) return static_cast<int>(a);
  }
  // Rounding left u above the last partial sum: take the last action with mass.
  for (Index a = pi.size(); a-- > 0;) {
    if (pi(a) > 0.0) return static_cast<int>(a);
  }
  throw InternalError("DeepIslAgent::act: policy has no mass");
}

LossValues DeepIslAgent::gradient_step(Rng& rng) {
  const Batch batch = replay_.sample(static_cast<std::size_t>(cfg_.batch_size), rng);
  const BatchTargets t = batch_targets(batch, nets_, cfg_);
  const LossResult lq = loss_q(batch, nets_, t, cfg_);
  const LossResult lr = loss_rho(batch, nets_, t);
  const LossResult ll = loss_ell(batch, nets_, t);
  const LossValues values{lq.value, lr.value, ll.value};
  if (!std::isfinite(lq.value) || !std::isfinite(lr.value) || !std::isfinite(ll.value)) return values;
  bool finite = lq.grads[0].allFinite() && lr.grads[0].allFinite();
  for (const auto& g : ll.grads) finite = finite && g.allFinite();
  if (!finite) return LossValues{std::numeric_limits<double>::quiet_NaN(), values.rho, values.ell};

  adam_q_.step(nets_.q, lq.grads[0]);
  adam_rho_.step(nets_.rho, lr.grads[0]);
  for (std::size_t a = 0; a < nets_.ell.size(); ++a) adam_ell_[a].step(nets_.ell[a], ll.grads[a]);
  ++counter_;
  if (counter_ % cfg_.target_update_period == 0) {
    nets_.sync_targets();
    counter_ = 0;
  }
  return values;
}

namespace {

constexpr char kMagic[8] = {'I', 'S', 'L', 'N', 'E', 'T', '0', '1'};

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw InvalidArgument("checkpoint: truncated file");
  return v;
}

void put_vector(std::ostream& out, const Eigen::VectorXd& v) {
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(v.size())));
}

Eigen::VectorXd get_vector(std::istream& in, Index n) {
  Eigen::VectorXd v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(n)));
  if (!in) throw InvalidArgument("checkpoint: truncated file");
  return v;
}

std::vector<Mlp*> all_nets(IslNetworks& nets) {
  std::vector<Mlp*> out{&nets.q, &nets.rho};
  for (auto& n : nets.ell) out.push_back(&n);
  out.push_back(&nets.q_target);
  for (auto& n : nets.ell_target) out.push_back(&n);
  return out;
}

}  // namespace

void DeepIslAgent::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("checkpoint: cannot open " + path);
  IslNetworks copy = nets_;
  const std::vector<Mlp*> nets = all_nets(copy);
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(nets.size()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(counter_));
  for (const Mlp* net : nets) {
    put<std::uint32_t>(out, net->head() == Head::kLinear ? 0U : 1U);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(net->sizes().size() - 1));
    for (int s : net->sizes()) put<std::int32_t>(out, s);
    put_vector(out, net->flat());
  }
  std::vector<const Adam*> opts{&adam_q_, &adam_rho_};
  for (const Adam& a : adam_ell_) opts.push_back(&a);
  for (const Adam* a : opts) {
    put<std::uint64_t>(out, a->steps());
    put_vector(out, a->first_moment());
    put_vector(out, a->second_moment());
  }
  if (!out) throw InvalidArgument("checkpoint: write failed for " + path);
}

void DeepIslAgent::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("checkpoint: cannot open " + path);
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw InvalidArgument("checkpoint: bad magic in " + path);
  IslNetworks loaded = nets_;
  const std::vector<Mlp*> nets = all_nets(loaded);
  if (get<std::uint32_t>(in) != nets.size()) throw InvalidArgument("checkpoint: network count differs");
  const auto counter = static_cast<long>(get<std::uint64_t>(in));
  for (Mlp* net : nets) {
    const auto head = get<std::uint32_t>(in);
    const auto layers = get<std::uint32_t>(in);
    std::vector<int> sizes(layers + 1);
    for (auto& s : sizes) s = get<std::int32_t>(in);
    if (sizes != net->sizes() || head != (net->head() == Head::kLinear ? 0U : 1U)) {
      throw InvalidArgument("checkpoint: architecture differs from this agent");
    }
    net->set_flat(get_vector(in, net->num_params()));
  }
  std::vector<Adam*> opts{&adam_q_, &adam_rho_};
  for (Adam& a : adam_ell_) opts.push_back(&a);
  std::vector<std::tuple<std::uint64_t, Eigen::VectorXd, Eigen::VectorXd>> moments;
  for (Adam* a : opts) {
    const auto steps = get<std::uint64_t>(in);
    Eigen::VectorXd m = get_vector(in, a->first_moment().size());
    Eigen::VectorXd v = get_vector(in, a->second_moment().size());
    moments.emplace_back(steps, std::move(m), std::move(v));
  }
  for (std::size_t i = 0; i < opts.size(); ++i) {
    auto& [steps, m, v] = moments[i];
    opts[i]->restore(steps, std::move(m), std::move(v));
  }
  nets_ = std::move(loaded);
  counter_ = counter;
}

// ---------------------------------------------------------------------------
// Training loop

TrainingLog isl_train(Environment& env, DeepIslAgent& agent, Rng& rng, const TrainOptions& options) {
  require(options.episodes >= 1, "isl_train: episode budget must be positive");
  require(agent.nets().q.input_size() == env.observation_size() && agent.nets().n_actions() == env.num_actions(),
          "isl_train: agent does not match the environment");
  const DeepIslConfig& cfg = agent.config();
  TrainingLog log;
  long visits = 0;
  EpisodeLog current;
  Eigen::VectorXd obs = env.reset(rng).observation;

  while (static_cast<int>(log.episodes.size()) < options.episodes) {
    for (int t = 0; t < cfg.env_steps; ++t) {
      const int a = agent.act(obs, rng);
      EnvStep step = env.step(a, rng);
      current.episode_return += step.reward;
      ++current.length;
      current.goal = current.goal || step.goal;
      agent.observe(Experience{obs, a, step.reward, step.observation, step.terminal});
      obs = std::move(step.observation);
      if (step.terminal) {
        visits += current.goal ? 1 : 0;
        current.goal_visits = visits;
        log.episodes.push_back(current);
        current = EpisodeLog{};
        if (static_cast<int>(log.episodes.size()) >= options.episodes ||
            (options.stop_at_goal_visits > 0 && visits >= options.stop_at_goal_visits)) {
          return log;
        }
        obs = env.reset(rng).observation;
      }
    }
    if (!agent.ready()) continue;
    for (int i = 0; i < cfg.grad_steps; ++i) {
      const LossValues losses = agent.gradient_step(rng);
      log.losses.push_back(losses);
      if (!std::isfinite(losses.q) || !std::isfinite(losses.rho) || !std::isfinite(losses.ell)) {
        log.diverged = true;
        return log;
      }
    }
  }
  return log;
}

TrainingLog isl_train(Environment& env, const DeepIslConfig& cfg, Rng& rng, const TrainOptions& options) {
  DeepIslAgent agent(env.observation_size(), env.num_actions(), cfg, rng);
  return isl_train(env, agent, rng, options);
}

}  // namespace isl
