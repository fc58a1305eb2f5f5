#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "gensafe/common.hpp"
#include "gensafe/tinynet.hpp"

namespace gensafe {

using Point2 = std::array<double, 2>;

/// Per-feature min-max scaling to [-1, 1]; constant features map to 0.
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(Vector min, Vector max);

  Vector transform(std::span<const double> x) const;
  /// Writes the transform of `x` into column `col` of `out`.
  void transform_into(std::span<const double> x, Eigen::MatrixXd& out, Eigen::Index col) const;

  std::size_t dim() const { return min_.size(); }
  const Vector& min() const { return min_; }
  const Vector& max() const { return max_; }

 private:
  Vector min_;
  Vector max_;
};

/// Requires at least two states of equal, non-zero dimension.
Normalizer fit_normalizer(std::span<const Vector> states);

// ------------------------------------------------------------------- t-SNE

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 500;
  double learning_rate = 200.0;
  double exaggeration = 12.0;
  int exaggeration_iterations = 100;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch_iteration = 250;
  double init_sigma = 1e-4;
  int kl_interval = 50;  // KL recorded every this many iterations
};

/// Joint input-space affinities of exact t-SNE.
struct Affinities {
  std::size_t n = 0;
  std::vector<double> joint;      // n*n row-major, symmetric, zero diagonal, sums to 1
  std::vector<double> entropy;    // achieved conditional entropy per point, bits
  std::vector<double> precision;  // Gaussian precision (beta) per point
  double target_entropy = 0.0;    // log2(perplexity)
};

/// Per-point bandwidth search followed by symmetrization
/// p_ij = (p_{j|i} + p_{i|j}) / (2n). Feasible perplexities lie in [1, n-1].
Affinities compute_affinities(std::span<const Vector> points, double perplexity);

struct Embedding {
  std::vector<Point2> points;
  double final_kl = 0.0;
  std::vector<std::pair<int, double>> kl_history;  // (iteration, KL)
};

/// Exact O(n^2) t-SNE to two dimensions. Requires n >= 4 * perplexity.
Embedding tsne(std::span<const Vector> points, const TsneOptions& options,
               std::uint64_t seed);

// ------------------------------------------------------------------ mapper

struct MapperOptions {
  std::vector<int> hidden{64, 64};
  double learning_rate = 1e-3;
  int epochs = 200;
  int batch_size = 256;
  double holdout_fraction = 0.1;
};

/// Learned approximation of the embedding for unseen (normalized) states.
/// Internally trained on standardized targets; outputs are in embedding units.
class MapperNet {
 public:
  MapperNet() = default;
  MapperNet(Mlp net, Point2 offset, double scale);

  Point2 map(std::span<const double> normalized_state) const;
  /// Columns are samples; returns a 2 x B matrix.
  Eigen::MatrixXd map_batch(const Eigen::MatrixXd& normalized_states) const;

  const Mlp& net() const { return net_; }
  const Point2& offset() const { return offset_; }
  double scale() const { return scale_; }

  /// [0] is the training-set MSE before any update, then one mean minibatch
  /// loss per epoch.
  std::vector<double> loss_history;
  double final_train_mse = 0.0;
  std::optional<double> heldout_mse;

 private:
  Mlp net_;
  Point2 offset_{0.0, 0.0};
  double scale_ = 1.0;
};

MapperNet train_mapper(std::span<const Vector> normalized_states,
                       std::span<const Point2> targets, const MapperOptions& options,
                       std::uint64_t seed);

}  // namespace gensafe
