#include "gensafe/tinynet.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>

namespace gensafe {

Mlp::Mlp(std::vector<int> sizes, std::vector<Activation> activations)
    : sizes_(std::move(sizes)), activations_(std::move(activations)) {
  if (sizes_.size() < 2 || activations_.size() + 1 != sizes_.size()) {
    throw InvalidArgument("Mlp needs one activation per layer and at least one layer");
  }
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] <= 0 || sizes_[l + 1] <= 0) throw InvalidArgument("Mlp layer sizes must be positive");
    offsets_.push_back(offset);
    offset += static_cast<std::size_t>(sizes_[l + 1]) * (sizes_[l] + 1);
  }
  params_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(offset));
}

Mlp Mlp::create(std::vector<int> sizes, Activation hidden, Activation output,
                std::mt19937_64& rng, double output_scale) {
  std::vector<Activation> acts(sizes.size() - 1, hidden);
  acts.back() = output;
  Mlp net(std::move(sizes), std::move(acts));
  for (int l = 0; l < net.num_layers(); ++l) {
    const int in = net.sizes_[l], out = net.sizes_[l + 1];
    const double limit = std::sqrt(6.0 / (in + out)) * (l + 1 == net.num_layers() ? output_scale : 1.0);
    std::uniform_real_distribution<double> u(-limit, limit);
    double* w = net.params_.data() + net.layer_offset(l);
    for (int i = 0; i < in * out; ++i) w[i] = u(rng);
  }
  return net;
}

Eigen::Map<const Eigen::MatrixXd> Mlp::weight(int layer) const {
  return {params_.data() + layer_offset(layer), sizes_[layer + 1], sizes_[layer]};
}

Eigen::Map<const Eigen::VectorXd> Mlp::bias(int layer) const {
  return {params_.data() + layer_offset(layer) +
              static_cast<std::size_t>(sizes_[layer + 1]) * sizes_[layer],
          sizes_[layer + 1]};
}

Eigen::VectorXd& Mlp::mutable_parameters() {
  ++version_;
  return params_;
}

void Mlp::set_parameters(const Eigen::VectorXd& p) {
  if (p.size() != params_.size()) throw InvalidArgument("parameter vector has wrong size");
  ++version_;
  params_ = p;
}

namespace {
void apply(Activation act, Eigen::MatrixXd& z) {
  if (act == Activation::Tanh) z = z.array().tanh().matrix();
}
}  // namespace

Vector Mlp::forward(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != input_dim()) throw InvalidArgument("input has wrong dimension");
  Eigen::MatrixXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), input_dim());
  a = forward(a);
  return Vector(a.data(), a.data() + a.size());
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x) const {
  if (x.rows() != input_dim()) throw InvalidArgument("input has wrong dimension");
  Eigen::MatrixXd a = x;
  for (int l = 0; l < num_layers(); ++l) {
    Eigen::MatrixXd z = weight(l) * a;
    z.colwise() += bias(l);
    apply(activations_[l], z);
    a = std::move(z);
  }
  return a;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, ForwardCache& cache) const {
  if (x.rows() != input_dim()) throw InvalidArgument("input has wrong dimension");
  cache.activations.resize(num_layers() + 1);
  cache.activations[0] = x;
  for (int l = 0; l < num_layers(); ++l) {
    Eigen::MatrixXd z = weight(l) * cache.activations[l];
    z.colwise() += bias(l);
    apply(activations_[l], z);
    cache.activations[l + 1] = std::move(z);
  }
  cache.owner = this;
  cache.version = version_;
  return cache.activations.back();
}

Eigen::VectorXd Mlp::backward(const ForwardCache& cache, const Eigen::MatrixXd& dy) const {
  if (cache.owner != this || cache.version != version_ ||
      cache.activations.size() != static_cast<std::size_t>(num_layers() + 1)) {
    throw InvalidArgument("stale forward cache");
  }
  const Eigen::MatrixXd& out = cache.activations.back();
  if (dy.rows() != out.rows() || dy.cols() != out.cols()) {
    throw InvalidArgument("output gradient has wrong shape");
  }
  Eigen::VectorXd grads = Eigen::VectorXd::Zero(params_.size());
  Eigen::MatrixXd delta = dy;
  for (int l = num_layers() - 1; l >= 0; --l) {
    const Eigen::MatrixXd& a_out = cache.activations[l + 1];
    if (activations_[l] == Activation::Tanh) {
      delta.array() *= (1.0 - a_out.array().square());
    }
    const Eigen::MatrixXd& a_in = cache.activations[l];
    const int in = sizes_[l], outn = sizes_[l + 1];
    Eigen::Map<Eigen::MatrixXd> gw(grads.data() + layer_offset(l), outn, in);
    Eigen::Map<Eigen::VectorXd> gb(grads.data() + layer_offset(l) + static_cast<std::size_t>(outn) * in, outn);
    gw.noalias() = delta * a_in.transpose();
    gb = delta.rowwise().sum();
    if (l > 0) delta = weight(l).transpose() * delta;
  }
  return grads;
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& s,
               double lr) {
  if (grads.size() != params.size()) throw InvalidArgument("gradient has wrong size");
  if (s.m.size() != params.size()) {
    s.m = Eigen::VectorXd::Zero(params.size());
    s.v = Eigen::VectorXd::Zero(params.size());
  }
  ++s.step;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grads;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  params.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + s.eps);
}

void adam_step(Mlp& net, const Eigen::VectorXd& grads, AdamState& state, double lr) {
  adam_step(net.mutable_parameters(), grads, state, lr);
}

// -------------------------------------------------------------- Gaussian policy

GaussianPolicy::GaussianPolicy(Mlp mean_net, Eigen::VectorXd log_std)
    : mean_net_(std::move(mean_net)) {
  if (log_std.size() != mean_net_.output_dim()) throw InvalidArgument("log-std has wrong size");
  set_log_std(log_std);
}

GaussianPolicy GaussianPolicy::create(int state_dim, int action_dim,
                                      const std::vector<int>& hidden,
                                      double init_log_std, std::mt19937_64& rng) {
  std::vector<int> sizes{state_dim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(action_dim);
  Mlp net = Mlp::create(std::move(sizes), Activation::Tanh, Activation::Identity, rng, 0.01);
  return GaussianPolicy(std::move(net), Eigen::VectorXd::Constant(action_dim, init_log_std));
}

void GaussianPolicy::set_log_std(const Eigen::VectorXd& log_std) {
  log_std_ = log_std.cwiseMax(kMinLogStd).cwiseMin(kMaxLogStd);
}

double GaussianPolicy::log_density(std::span<const double> state,
                                   std::span<const double> action) const {
  const Vector mu = mean(state);
  return diag_gaussian_log_density(mu, log_std_, action);
}

double diag_gaussian_log_density(std::span<const double> mean,
                                 const Eigen::VectorXd& log_std,
                                 std::span<const double> action) {
  double lp = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i];
  }
  return lp - 0.5 * static_cast<double>(mean.size()) * std::log(2.0 * std::numbers::pi);
}

PolicySample policy_sample(const GaussianPolicy& policy, std::span<const double> state,
                           std::mt19937_64& rng) {
  PolicySample out;
  out.mean = policy.mean(state);
  std::normal_distribution<double> normal(0.0, 1.0);
  out.action.resize(out.mean.size());
  for (std::size_t i = 0; i < out.mean.size(); ++i) {
    out.action[i] = out.mean[i] + std::exp(policy.log_std()[i]) * normal(rng);
  }
  out.log_density = diag_gaussian_log_density(out.mean, policy.log_std(), out.action);
  return out;
}

PolicySample policy_sample(const GaussianPolicy& policy, std::span<const double> state,
                           std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return policy_sample(policy, state, rng);
}

// ------------------------------------------------------------------ checkpoints

namespace {
constexpr std::uint32_t kMlpMagic = 0x4e4e5347;     // "GSNN"
constexpr std::uint32_t kPolicyMagic = 0x4c505347;  // "GSPL"
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw Error("truncated checkpoint");
  return v;
}

void expect_header(std::istream& is, std::uint32_t magic) {
  if (get<std::uint32_t>(is) != magic) throw Error("not a gensafe checkpoint");
  const auto version = get<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw VersionMismatch("checkpoint version " + std::to_string(version) + " unsupported");
  }
}

void put_mlp_body(std::ostream& os, const Mlp& net) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(net.num_layers()));
  for (int s : net.sizes()) put<std::uint32_t>(os, static_cast<std::uint32_t>(s));
  for (Activation a : net.activations()) put<std::uint8_t>(os, static_cast<std::uint8_t>(a));
  put<std::uint64_t>(os, net.num_parameters());
  os.write(reinterpret_cast<const char*>(net.parameters().data()),
           static_cast<std::streamsize>(net.num_parameters() * sizeof(double)));
}

Mlp get_mlp_body(std::istream& is) {
  const auto layers = get<std::uint32_t>(is);
  if (layers == 0 || layers > 64) throw Error("corrupt checkpoint layer count");
  std::vector<int> sizes(layers + 1);
  for (auto& s : sizes) s = static_cast<int>(get<std::uint32_t>(is));
  std::vector<Activation> acts(layers);
  for (auto& a : acts) {
    const auto tag = get<std::uint8_t>(is);
    if (tag > 1) throw Error("corrupt checkpoint activation tag");
    a = static_cast<Activation>(tag);
  }
  Mlp net(sizes, acts);
  const auto n = get<std::uint64_t>(is);
  if (n != net.num_parameters()) throw Error("checkpoint parameter count mismatch");
  Eigen::VectorXd p(static_cast<Eigen::Index>(n));
  if (!is.read(reinterpret_cast<char*>(p.data()), static_cast<std::streamsize>(n * sizeof(double)))) {
    throw Error("truncated checkpoint");
  }
  net.set_parameters(p);
  return net;
}
}  // namespace

void write_checkpoint(std::ostream& os, const Mlp& net) {
  put(os, kMlpMagic);
  put(os, kCheckpointVersion);
  put_mlp_body(os, net);
}

Mlp read_mlp_checkpoint(std::istream& is) {
  expect_header(is, kMlpMagic);
  return get_mlp_body(is);
}

void write_checkpoint(std::ostream& os, const GaussianPolicy& policy) {
  put(os, kPolicyMagic);
  put(os, kCheckpointVersion);
  put_mlp_body(os, policy.mean_net());
  put<std::uint64_t>(os, static_cast<std::uint64_t>(policy.log_std().size()));
  os.write(reinterpret_cast<const char*>(policy.log_std().data()),
           static_cast<std::streamsize>(policy.log_std().size() * sizeof(double)));
}

GaussianPolicy read_policy_checkpoint(std::istream& is) {
  expect_header(is, kPolicyMagic);
  Mlp net = get_mlp_body(is);
  const auto n = get<std::uint64_t>(is);
  Eigen::VectorXd log_std(static_cast<Eigen::Index>(n));
  if (!is.read(reinterpret_cast<char*>(log_std.data()), static_cast<std::streamsize>(n * sizeof(double)))) {
    throw Error("truncated checkpoint");
  }
  return GaussianPolicy(std::move(net), log_std);
}

}  // namespace gensafe
