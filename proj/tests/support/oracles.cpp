#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <tuple>

namespace oracle {

WorkedExample worked_example(double delta) {
  WorkedExample ex;
  ex.c = {0.25, 0.75, 1.0, 0.0, 0.375};
  ex.delta = delta;
  // reduced states {1,1,2,2,3}, actions {1,1,1,2,2}, successors {1,2,2,3,1}
  const int s[5] = {1, 1, 2, 2, 3}, a[5] = {1, 1, 1, 2, 2}, s2[5] = {1, 2, 2, 3, 1};
  for (int i = 0; i < 5; ++i) ex.samples.push_back({s[i] - 1, a[i] - 1, s2[i] - 1, ex.c[static_cast<std::size_t>(i)]});
  return ex;
}

GroupedTables group_by_tables(std::span<const gensafe::ReducedSample> data,
                              std::span<const gensafe::ReducedSample> epoch, int S, int A, double delta) {
  std::map<std::pair<int, int>, std::vector<double>> costs;
  std::map<std::tuple<int, int, int>, std::int64_t> paths;
  for (const auto& d : data) {
    costs[{d.state, d.action}].push_back(d.cost);
    ++paths[{d.state, d.action, d.next_state}];
  }
  std::map<std::pair<int, int>, std::int64_t> epoch_pairs;
  std::map<int, std::int64_t> epoch_states;
  for (const auto& d : epoch) {
    ++epoch_pairs[{d.state, d.action}];
    ++epoch_states[d.state];
  }
  GroupedTables g;
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const auto it = costs.find({s, a});
      const std::int64_t n = it == costs.end() ? 0 : static_cast<std::int64_t>(it->second.size());
      g.n.push_back(n);
      if (n == 0) {
        g.cost.push_back(delta);
      } else {
        double sum = 0.0;
        for (double c : it->second) sum += c;
        g.cost.push_back(sum / static_cast<double>(n));
      }
      for (int s2 = 0; s2 < S; ++s2) {
        if (n == 0) {
          g.transition.push_back(1.0 / S);
        } else {
          const auto p = paths.find({s, a, s2});
          const double k = p == paths.end() ? 0.0 : static_cast<double>(p->second);
          g.transition.push_back(k / static_cast<double>(n));
        }
      }
      const auto ns = epoch_states.find(s);
      if (ns == epoch_states.end()) {
        g.policy.push_back(1.0 / A);
      } else {
        const auto np = epoch_pairs.find({s, a});
        const double k = np == epoch_pairs.end() ? 0.0 : static_cast<double>(np->second);
        g.policy.push_back(k / static_cast<double>(ns->second));
      }
    }
  }
  return g;
}

std::vector<gensafe::ReducedSample> random_reduced_samples(std::mt19937_64& rng, int count, int S, int A,
                                                           double cost_max) {
  std::uniform_int_distribution<int> ds(0, S - 1), da(0, A - 1);
  std::uniform_real_distribution<double> dc(0.0, cost_max);
  std::bernoulli_distribution binary(0.3);
  std::vector<gensafe::ReducedSample> out;
  for (int i = 0; i < count; ++i) {
    // Mix binary and continuous costs; skew states so some pairs stay empty.
    const int s = std::min(ds(rng), ds(rng));
    const double c = (i % 2 == 0) ? (binary(rng) ? 1.0 : 0.0) : dc(rng);
    out.push_back({s, da(rng), ds(rng), c});
  }
  return out;
}

Vector linear_solve_values(const gensafe::RomdpTables& t) {
  const int S = t.num_states, A = t.num_actions;
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(S, S);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(S);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const double p = t.policy.prob[static_cast<std::size_t>(s * A + a)];
      b[s] += p * t.cost.cost[static_cast<std::size_t>(s * A + a)];
      for (int s2 = 0; s2 < S; ++s2) {
        M(s, s2) += p * t.transition.prob[static_cast<std::size_t>((s * A + a) * S + s2)];
      }
    }
  }
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(S, S);
  const Eigen::VectorXd v = (I - t.discount * M).fullPivLu().solve(b);
  return Vector(v.data(), v.data() + v.size());
}

Vector jacobi_sweep(const gensafe::RomdpTables& t, const Vector& v) {
  const int S = t.num_states, A = t.num_actions;
  Vector out(v.size(), 0.0);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      double tail = 0.0;
      for (int s2 = 0; s2 < S; ++s2) tail += t.transition.prob[static_cast<std::size_t>((s * A + a) * S + s2)] * v[static_cast<std::size_t>(s2)];
      out[static_cast<std::size_t>(s)] += t.policy.prob[static_cast<std::size_t>(s * A + a)] *
                                          (t.cost.cost[static_cast<std::size_t>(s * A + a)] + t.discount * tail);
    }
  }
  return out;
}

namespace {
int lattice_cell(const gensafe::ActionGrid& g, std::span<const double> x) {
  int idx = 0, stride = 1;
  const int k = g.cells_per_dim();
  for (std::size_t d = 0; d < x.size(); ++d) {
    const auto& b = g.bounds()[d];
    int i = static_cast<int>(std::floor((x[d] - b.lo) * k / (b.hi - b.lo)));
    i = std::max(0, std::min(k - 1, i));
    idx += i * stride;
    stride *= k;
  }
  return idx;
}
}  // namespace

GridSearchResult dense_grid_search(const gensafe::CorrectionProblem& p, int n, double rho) {
  const auto& bounds = p.grid->bounds();
  if (bounds.size() != 2) throw std::invalid_argument("grid search oracle is 2-D");
  const auto& ct = *p.constraints;
  GridSearchResult best_feasible{true, INFINITY, {}}, best_penalty{false, INFINITY, {}};
  Vector x(2);
  for (int i = 0; i < n; ++i) {
    x[0] = bounds[0].lo + (bounds[0].hi - bounds[0].lo) * i / (n - 1);
    for (int j = 0; j < n; ++j) {
      x[1] = bounds[1].lo + (bounds[1].hi - bounds[1].lo) * j / (n - 1);
      const int cell = lattice_cell(*p.grid, x);
      const auto k = static_cast<std::size_t>(p.reduced_state * ct.num_actions + cell);
      const double imm = ct.immediate[k], fut = ct.future[k];
      const double d2 = (x[0] - p.proposed[0]) * (x[0] - p.proposed[0]) + (x[1] - p.proposed[1]) * (x[1] - p.proposed[1]);
      if (imm <= p.d_s && fut <= p.d) {
        if (d2 < best_feasible.objective) best_feasible = {true, d2, x};
      } else {
        const double pen = d2 + rho * (std::max(0.0, imm - p.d_s) + std::max(0.0, fut - p.d));
        if (pen < best_penalty.objective) best_penalty = {false, pen, x};
      }
    }
  }
  return std::isfinite(best_feasible.objective) ? best_feasible : best_penalty;
}

double grid_slack(const gensafe::CorrectionProblem& p, int n, double objective) {
  double h2 = 0.0;
  for (const auto& b : p.grid->bounds()) {
    const double h = (b.hi - b.lo) / (n - 1);
    h2 += h * h;
  }
  const double h = std::sqrt(h2);
  const double r = std::sqrt(std::max(objective, 0.0));
  return 2.0 * r * h + h * h;
}

std::vector<double> gae_by_sum(std::span<const double> r, std::span<const double> v, std::span<const double> nv,
                               std::span<const std::uint8_t> seg, double gamma, double lambda) {
  const std::size_t n = r.size();
  std::vector<double> delta(n), out(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) delta[t] = r[t] + gamma * nv[t] - v[t];
  for (std::size_t t = 0; t < n; ++t) {
    double w = 1.0;
    for (std::size_t l = t; l < n; ++l) {
      out[t] += w * delta[l];
      if (seg[l]) break;
      w *= gamma * lambda;
    }
  }
  return out;
}

Vector mlp_forward(const gensafe::Mlp& net, std::span<const double> x) {
  const auto& sizes = net.sizes();
  const double* p = net.parameters().data();
  Vector a(x.begin(), x.end());
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    const double* w = p;
    const double* b = p + static_cast<std::ptrdiff_t>(in) * out;
    Vector z(static_cast<std::size_t>(out));
    for (int o = 0; o < out; ++o) {
      double s = b[o];
      for (int i = 0; i < in; ++i) s += w[static_cast<std::ptrdiff_t>(i) * out + o] * a[static_cast<std::size_t>(i)];
      z[static_cast<std::size_t>(o)] = net.activations()[l] == gensafe::Activation::Tanh ? std::tanh(s) : s;
    }
    a = std::move(z);
    p = b + out;
  }
  return a;
}

double max_relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

Blobs gaussian_blobs(int blobs, int per_blob, int dim, double separation, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Blobs out;
  for (int b = 0; b < blobs; ++b) {
    Vector center(static_cast<std::size_t>(dim), 0.0);
    center[static_cast<std::size_t>(b % dim)] = separation;
    for (int i = 0; i < per_blob; ++i) {
      Vector p(center);
      for (double& v : p) v += z(rng);
      out.points.push_back(std::move(p));
      out.labels.push_back(b);
    }
  }
  return out;
}

double trustworthiness(std::span<const Vector> high, std::span<const gensafe::Point2> low, int k) {
  const std::size_t n = high.size();
  double penalty = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> dh, dl;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0.0;
      for (std::size_t f = 0; f < high[i].size(); ++f) s += (high[i][f] - high[j][f]) * (high[i][f] - high[j][f]);
      dh.emplace_back(s, j);
      const double dx = low[i][0] - low[j][0], dy = low[i][1] - low[j][1];
      dl.emplace_back(dx * dx + dy * dy, j);
    }
    std::sort(dh.begin(), dh.end());
    std::sort(dl.begin(), dl.end());
    std::vector<std::size_t> rank(n, 0);
    for (std::size_t r = 0; r < dh.size(); ++r) rank[dh[r].second] = r + 1;
    for (int m = 0; m < k; ++m) {
      const std::size_t j = dl[static_cast<std::size_t>(m)].second;
      if (rank[j] > static_cast<std::size_t>(k)) penalty += static_cast<double>(rank[j]) - k;
    }
  }
  const double nn = static_cast<double>(n);
  return 1.0 - 2.0 / (nn * k * (2.0 * nn - 3.0 * k - 1.0)) * penalty;
}

double conditional_entropy_bits(std::span<const Vector> points, std::size_t i, double beta) {
  std::vector<double> d;
  for (std::size_t j = 0; j < points.size(); ++j) {
    if (j == i) continue;
    double s = 0.0;
    for (std::size_t f = 0; f < points[i].size(); ++f) s += (points[i][f] - points[j][f]) * (points[i][f] - points[j][f]);
    d.push_back(s);
  }
  const double dmin = *std::min_element(d.begin(), d.end());
  double z = 0.0;
  for (double x : d) z += std::exp(-beta * (x - dmin));
  double h = 0.0;
  for (double x : d) {
    const double p = std::exp(-beta * (x - dmin)) / z;
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

void mean_std(const std::vector<std::vector<double>>& series, std::vector<double>& mean, std::vector<double>& sd) {
  const std::size_t n = series.front().size();
  mean.assign(n, 0.0);
  sd.assign(n, 0.0);
  for (std::size_t e = 0; e < n; ++e) {
    long double s = 0.0L;
    for (const auto& x : series) s += x[e];
    const long double m = s / series.size();
    long double v = 0.0L;
    for (const auto& x : series) v += (x[e] - m) * (x[e] - m);
    mean[e] = static_cast<double>(m);
    sd[e] = static_cast<double>(std::sqrt(v / series.size()));
  }
}

}  // namespace oracle
