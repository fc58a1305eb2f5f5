#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "gensafe/dimred.hpp"

namespace gensafe {

struct GmmOptions {
  int max_iterations = 200;
  double tolerance = 1e-4;   // on mean log-likelihood
  double ridge = 1e-6;       // added to every covariance diagonal
  double weight_floor = 1e-8;
};

/// One bivariate Gaussian with full covariance [xx, xy; xy, yy].
struct GaussianComponent {
  double weight = 1.0;
  Point2 mean{0.0, 0.0};
  std::array<double, 3> cov{1.0, 0.0, 1.0};  // xx, xy, yy
};

/// Mixture used as a MAP classifier over the 2-D embedding plane.
class GmmClassifier {
 public:
  GmmClassifier() = default;
  explicit GmmClassifier(std::vector<GaussianComponent> components);

  int size() const { return static_cast<int>(components_.size()); }
  const std::vector<GaussianComponent>& components() const { return components_; }

  /// Index (0-based) of the component with the largest posterior
  /// responsibility; ties go to the lower index.
  int classify(const Point2& x) const;
  /// log(w_k) + log N(x | mu_k, Sigma_k)
  double weighted_log_density(int k, const Point2& x) const;
  double log_density(const Point2& x) const;

  std::vector<double> log_likelihood_history;  // mean log-likelihood per EM iteration
  int iterations = 0;
  bool reseeded = false;

 private:
  struct Cached {
    double log_weight;
    double log_norm;           // -log(2 pi) - 0.5 log det
    std::array<double, 3> inv; // inverse covariance xx, xy, yy
  };
  std::vector<GaussianComponent> components_;
  std::vector<Cached> cached_;
};

/// EM with k-means++ seeding. Components left without any MAP-assigned point
/// are re-seeded once at the worst-explained points and EM is re-run.
GmmClassifier fit_gmm(std::span<const Point2> points, int k, std::uint64_t seed,
                      const GmmOptions& options = {});

}  // namespace gensafe
