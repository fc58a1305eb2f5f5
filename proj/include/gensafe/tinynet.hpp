#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "gensafe/common.hpp"

namespace gensafe {

enum class Activation : std::uint8_t { Tanh = 0, Identity = 1 };

class Mlp;

/// Post-activation values of one batched forward pass, tagged with the
/// parameter version they were computed from.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // [0] is the input
  const Mlp* owner = nullptr;
  std::uint64_t version = 0;
};

/// Feed-forward network. All weights and biases live in one flat parameter
/// vector (per layer: W column-major (out x in), then b) so optimizers and
/// gradient checks can treat the network as a single vector.
class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<int> sizes, std::vector<Activation> activations);

  /// Glorot-uniform weights, zero biases; the last layer is scaled by
  /// `output_scale`.
  static Mlp create(std::vector<int> sizes, Activation hidden, Activation output,
                    std::mt19937_64& rng, double output_scale = 1.0);

  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  int num_layers() const { return static_cast<int>(activations_.size()); }
  const std::vector<int>& sizes() const { return sizes_; }
  const std::vector<Activation>& activations() const { return activations_; }
  std::size_t num_parameters() const { return static_cast<std::size_t>(params_.size()); }

  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;

  const Eigen::VectorXd& parameters() const { return params_; }
  /// Mutable access; invalidates outstanding forward caches.
  Eigen::VectorXd& mutable_parameters();
  void set_parameters(const Eigen::VectorXd& p);
  std::uint64_t version() const { return version_; }

  Vector forward(std::span<const double> x) const;
  /// Batched forward; columns are samples.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, ForwardCache& cache) const;

  /// Gradient of sum_columns <dy, f(x)> with respect to the flat parameters.
  /// Throws InvalidArgument if `cache` is stale or from another network.
  Eigen::VectorXd backward(const ForwardCache& cache, const Eigen::MatrixXd& dy) const;

 private:
  std::size_t layer_offset(int layer) const { return offsets_[layer]; }

  std::vector<int> sizes_;
  std::vector<Activation> activations_;
  std::vector<std::size_t> offsets_;
  Eigen::VectorXd params_;
  std::uint64_t version_ = 0;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  explicit AdamState(Eigen::Index n) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}
};

/// Bias-corrected Adam descent step: params -= lr * m_hat / (sqrt(v_hat) + eps).
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads,
               AdamState& state, double lr);
void adam_step(Mlp& net, const Eigen::VectorXd& grads, AdamState& state, double lr);

/// Diagonal Gaussian policy with a state-independent log standard deviation.
class GaussianPolicy {
 public:
  static constexpr double kMinLogStd = -5.0;
  static constexpr double kMaxLogStd = 2.0;

  GaussianPolicy() = default;
  GaussianPolicy(Mlp mean_net, Eigen::VectorXd log_std);

  static GaussianPolicy create(int state_dim, int action_dim,
                               const std::vector<int>& hidden, double init_log_std,
                               std::mt19937_64& rng);

  const Mlp& mean_net() const { return mean_net_; }
  Mlp& mean_net() { return mean_net_; }
  const Eigen::VectorXd& log_std() const { return log_std_; }
  /// Sets log-std, clamped to [kMinLogStd, kMaxLogStd].
  void set_log_std(const Eigen::VectorXd& log_std);
  int action_dim() const { return mean_net_.output_dim(); }

  Vector mean(std::span<const double> state) const { return mean_net_.forward(state); }
  double log_density(std::span<const double> state, std::span<const double> action) const;

 private:
  Mlp mean_net_;
  Eigen::VectorXd log_std_;
};

double diag_gaussian_log_density(std::span<const double> mean,
                                 const Eigen::VectorXd& log_std,
                                 std::span<const double> action);

struct PolicySample {
  Vector action;
  Vector mean;
  double log_density = 0.0;
};

/// action = mean + sigma * z with z ~ N(0, I) drawn from `rng`.
PolicySample policy_sample(const GaussianPolicy& policy, std::span<const double> state,
                           std::mt19937_64& rng);
PolicySample policy_sample(const GaussianPolicy& policy, std::span<const double> state,
                           std::uint64_t seed);

// Checkpoints: versioned flat binary of shapes + parameters (little endian).
void write_checkpoint(std::ostream& os, const Mlp& net);
Mlp read_mlp_checkpoint(std::istream& is);
void write_checkpoint(std::ostream& os, const GaussianPolicy& policy);
GaussianPolicy read_policy_checkpoint(std::istream& is);

}  // namespace gensafe
