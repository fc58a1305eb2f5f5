#pragma once

// Independent reference computations used by unit and acceptance tests.
// Nothing here calls the library routine it is meant to check.

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "gensafe/action_grid.hpp"
#include "gensafe/dimred.hpp"
#include "gensafe/romdp.hpp"
#include "gensafe/safety.hpp"
#include "gensafe/tinynet.hpp"

namespace oracle {

using gensafe::Vector;

// ---- worked 5-sample fixture (reduced indices 0-based)
struct WorkedExample {
  std::array<double, 5> c{};  // observed costs c1..c5
  double delta = 0.0;         // default cost
  std::vector<gensafe::ReducedSample> samples;
};
WorkedExample worked_example(double delta = 0.5);

// ---- tables by grouping
struct GroupedTables {
  std::vector<double> cost;       // [s*A+a]
  std::vector<std::int64_t> n;    // [s*A+a]
  std::vector<double> transition; // [(s*A+a)*S+s2]
  std::vector<double> policy;     // [s*A+a]
};
GroupedTables group_by_tables(std::span<const gensafe::ReducedSample> data,
                              std::span<const gensafe::ReducedSample> epoch, int S, int A,
                              double delta);

std::vector<gensafe::ReducedSample> random_reduced_samples(std::mt19937_64& rng, int count, int S,
                                                           int A, double cost_max = 1.0);

// ---- value function by direct linear solve of (I - gamma M) V = b
Vector linear_solve_values(const gensafe::RomdpTables& t);

/// Jacobi sweep (all states updated from the previous vector).
Vector jacobi_sweep(const gensafe::RomdpTables& t, const Vector& v);

// ---- dense grid search for the correction problem
struct GridSearchResult {
  bool feasible = false;
  double objective = 0.0;  // best squared distance, or penalized objective when infeasible
  Vector best;
};
GridSearchResult dense_grid_search(const gensafe::CorrectionProblem& p, int points_per_dim,
                                   double rho);

/// Lower bound of the true optimum given a grid-search value: the lattice
/// can overestimate the squared distance by at most 2 r h + h^2 where h is
/// the diagonal of one lattice step and r the grid-search distance.
double grid_slack(const gensafe::CorrectionProblem& p, int points_per_dim, double objective);

// ---- advantages as explicit truncated sums
std::vector<double> gae_by_sum(std::span<const double> rewards, std::span<const double> values,
                               std::span<const double> next_values,
                               std::span<const std::uint8_t> segment_end, double gamma,
                               double lambda);

// ---- networks
/// Forward pass with plain loops over the flat parameter layout.
Vector mlp_forward(const gensafe::Mlp& net, std::span<const double> x);

/// Central finite differences of f at p with step h.
template <typename F>
Eigen::VectorXd finite_difference(F&& f, Eigen::VectorXd p, double h = 1e-5) {
  Eigen::VectorXd g(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const double x = p[i];
    p[i] = x + h;
    const double fp = f(p);
    p[i] = x - h;
    const double fm = f(p);
    p[i] = x;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Largest elementwise relative error, with `floor` guarding tiny entries.
double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-3);

// ---- embeddings
struct Blobs {
  std::vector<Vector> points;
  std::vector<int> labels;
};
/// `per_blob` points around each of `blobs` well-separated centers.
Blobs gaussian_blobs(int blobs, int per_blob, int dim, double separation, std::uint64_t seed);

/// Trustworthiness of an embedding by explicit rank comparison.
double trustworthiness(std::span<const Vector> high, std::span<const gensafe::Point2> low, int k);

/// Entropy (bits) of the conditional distribution of point i with precision beta.
double conditional_entropy_bits(std::span<const Vector> points, std::size_t i, double beta);

// ---- harness
/// Population mean and std of equal-length series, per index.
void mean_std(const std::vector<std::vector<double>>& series, std::vector<double>& mean,
              std::vector<double>& sd);

}  // namespace oracle
