#include "gensafe/dimred.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace gensafe {

// ------------------------------------------------------------------ normalizer

Normalizer::Normalizer(Vector min, Vector max) : min_(std::move(min)), max_(std::move(max)) {
  if (min_.size() != max_.size()) throw InvalidArgument("normalizer bounds differ in size");
}

Vector Normalizer::transform(std::span<const double> x) const {
  if (x.size() != min_.size()) throw InvalidArgument("state has wrong dimension");
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double range = max_[i] - min_[i];
    out[i] = range > 0.0 ? 2.0 * (x[i] - min_[i]) / range - 1.0 : 0.0;
  }
  return out;
}

void Normalizer::transform_into(std::span<const double> x, Eigen::MatrixXd& out,
                                Eigen::Index col) const {
  if (x.size() != min_.size()) throw InvalidArgument("state has wrong dimension");
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double range = max_[i] - min_[i];
    out(static_cast<Eigen::Index>(i), col) =
        range > 0.0 ? 2.0 * (x[i] - min_[i]) / range - 1.0 : 0.0;
  }
}

Normalizer fit_normalizer(std::span<const Vector> states) {
  if (states.size() < 2) throw InvalidArgument("normalizer needs at least two states");
  const std::size_t dim = states.front().size();
  if (dim == 0) throw InvalidArgument("states are empty vectors");
  Vector lo(states.front()), hi(states.front());
  for (const Vector& s : states) {
    if (s.size() != dim) throw InvalidArgument("states differ in dimension");
    require_finite(s, "state");
    for (std::size_t i = 0; i < dim; ++i) {
      lo[i] = std::min(lo[i], s[i]);
      hi[i] = std::max(hi[i], s[i]);
    }
  }
  return Normalizer(std::move(lo), std::move(hi));
}

// ----------------------------------------------------------------------- t-SNE

namespace {

std::vector<double> squared_distances(std::span<const Vector> points) {
  const std::size_t n = points.size();
  const std::size_t dim = points.front().size();
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = points[i][k] - points[j][k];
        s += diff * diff;
      }
      d[i * n + j] = s;
      d[j * n + i] = s;
    }
  }
  return d;
}

// Finds beta so that the conditional distribution of row i has the target
// entropy (bits). Writes the normalized row into `row` and returns
// (beta, achieved entropy).
std::pair<double, double> search_bandwidth(const double* dist, std::size_t n,
                                           std::size_t i, double target_bits,
                                           double* row) {
  double dmin = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    if (j != i) dmin = std::min(dmin, dist[j]);
  }
  double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
  double entropy = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    double sum = 0.0, weighted = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) {
        row[j] = 0.0;
        continue;
      }
      const double shifted = dist[j] - dmin;
      const double w = std::exp(-beta * shifted);
      row[j] = w;
      sum += w;
      weighted += w * shifted;
    }
    entropy = (std::log(sum) + beta * weighted / sum) / std::log(2.0);
    for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
    const double gap = entropy - target_bits;
    if (std::abs(gap) < 1e-10) break;
    if (gap > 0.0) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
    } else {
      hi = beta;
      beta = 0.5 * (beta + lo);
    }
  }
  return {beta, entropy};
}

double kl_divergence(const std::vector<double>& p, const std::vector<Point2>& y) {
  const std::size_t n = y.size();
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = y[i][0] - y[j][0], dy = y[i][1] - y[j][1];
      z += 2.0 / (1.0 + dx * dx + dy * dy);
    }
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double pij = p[i * n + j];
      if (pij <= 0.0) continue;
      const double dx = y[i][0] - y[j][0], dy = y[i][1] - y[j][1];
      const double q = 1.0 / (1.0 + dx * dx + dy * dy) / z;
      kl += 2.0 * pij * std::log(pij / q);
    }
  }
  return kl;
}

void check_points(std::span<const Vector> points) {
  if (points.empty()) throw InvalidArgument("no points to embed");
  const std::size_t dim = points.front().size();
  for (const Vector& p : points) {
    if (p.size() != dim) throw InvalidArgument("points differ in dimension");
    require_finite(p, "t-SNE input");
  }
}

}  // namespace

Affinities compute_affinities(std::span<const Vector> points, double perplexity) {
  check_points(points);
  const std::size_t n = points.size();
  if (n < 2) throw InvalidArgument("affinities need at least two points");
  if (!(perplexity >= 1.0) || perplexity > static_cast<double>(n - 1)) {
    throw InvalidArgument("perplexity out of feasible range [1, n-1]");
  }
  const std::vector<double> dist = squared_distances(points);
  if (std::all_of(dist.begin(), dist.end(), [](double d) { return d == 0.0; })) {
    throw DegenerateInputError("all pairwise distances are zero");
  }

  Affinities out;
  out.n = n;
  out.target_entropy = std::log2(perplexity);
  out.entropy.resize(n);
  out.precision.resize(n);
  std::vector<double> cond(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto [beta, h] = search_bandwidth(&dist[i * n], n, i, out.target_entropy, &cond[i * n]);
    out.precision[i] = beta;
    out.entropy[i] = h;
  }
  out.joint.assign(n * n, 0.0);
  const double denom = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = (cond[i * n + j] + cond[j * n + i]) / denom;
      out.joint[i * n + j] = v;
      out.joint[j * n + i] = v;
    }
  }
  return out;
}

Embedding tsne(std::span<const Vector> points, const TsneOptions& opt, std::uint64_t seed) {
  check_points(points);
  const std::size_t n = points.size();
  if (static_cast<double>(n) < 4.0 * opt.perplexity) {
    throw InvalidArgument("t-SNE needs at least 4 * perplexity points");
  }
  Affinities aff = compute_affinities(points, opt.perplexity);
  std::vector<double>& p = aff.joint;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, opt.init_sigma);
  std::vector<Point2> y(n);
  for (auto& pt : y) pt = {normal(rng), normal(rng)};
  std::vector<Point2> update(n, {0.0, 0.0}), gains(n, {1.0, 1.0}), grad(n);
  std::vector<double> num(n * (n - 1) / 2);

  Embedding out;
  for (int iter = 0; iter < opt.iterations; ++iter) {
    const double exaggeration = iter < opt.exaggeration_iterations ? opt.exaggeration : 1.0;
    const double momentum =
        iter < opt.momentum_switch_iteration ? opt.initial_momentum : opt.final_momentum;

    double z = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j, ++k) {
        const double dx = y[i][0] - y[j][0], dy = y[i][1] - y[j][1];
        num[k] = 1.0 / (1.0 + dx * dx + dy * dy);
        z += num[k];
      }
    }
    z *= 2.0;

    std::fill(grad.begin(), grad.end(), Point2{0.0, 0.0});
    k = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* prow = &p[i * n];
      double gx = 0.0, gy = 0.0;
      for (std::size_t j = i + 1; j < n; ++j, ++k) {
        const double coef = (exaggeration * prow[j] - num[k] / z) * num[k];
        const double fx = coef * (y[i][0] - y[j][0]);
        const double fy = coef * (y[i][1] - y[j][1]);
        gx += fx;
        gy += fy;
        grad[j][0] -= fx;
        grad[j][1] -= fy;
      }
      grad[i][0] += gx;
      grad[i][1] += gy;
    }

    Point2 mean{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      for (int d = 0; d < 2; ++d) {
        const double g = 4.0 * grad[i][d];
        double& gain = gains[i][d];
        gain = (std::signbit(g) != std::signbit(update[i][d])) ? gain + 0.2 : gain * 0.8;
        gain = std::max(gain, 0.01);
        update[i][d] = momentum * update[i][d] - opt.learning_rate * gain * g;
        y[i][d] += update[i][d];
        mean[d] += y[i][d];
      }
    }
    for (auto& pt : y) {
      pt[0] -= mean[0] / static_cast<double>(n);
      pt[1] -= mean[1] / static_cast<double>(n);
    }

    if (opt.kl_interval > 0 && (iter + 1) % opt.kl_interval == 0) {
      out.kl_history.emplace_back(iter + 1, kl_divergence(p, y));
    }
  }

  for (const auto& pt : y) {
    if (!std::isfinite(pt[0]) || !std::isfinite(pt[1])) {
      throw NumericDomainError("t-SNE produced a non-finite embedding");
    }
  }
  out.final_kl = (!out.kl_history.empty() && out.kl_history.back().first == opt.iterations)
                     ? out.kl_history.back().second
                     : kl_divergence(p, y);
  out.points = std::move(y);
  return out;
}

// ---------------------------------------------------------------------- mapper

MapperNet::MapperNet(Mlp net, Point2 offset, double scale)
    : net_(std::move(net)), offset_(offset), scale_(scale) {
  if (net_.output_dim() != 2) throw InvalidArgument("mapper output must be 2-D");
}

Point2 MapperNet::map(std::span<const double> normalized_state) const {
  const Vector out = net_.forward(normalized_state);
  return {out[0] * scale_ + offset_[0], out[1] * scale_ + offset_[1]};
}

Eigen::MatrixXd MapperNet::map_batch(const Eigen::MatrixXd& normalized_states) const {
  Eigen::MatrixXd out = net_.forward(normalized_states) * scale_;
  out.row(0).array() += offset_[0];
  out.row(1).array() += offset_[1];
  return out;
}

MapperNet train_mapper(std::span<const Vector> states, std::span<const Point2> targets,
                       const MapperOptions& opt, std::uint64_t seed) {
  if (states.size() != targets.size()) {
    throw InvalidArgument("mapper states and targets differ in length");
  }
  if (states.empty()) throw InvalidArgument("mapper needs at least one sample");
  const std::size_t n = states.size();
  const int dim = static_cast<int>(states.front().size());

  Point2 offset{0.0, 0.0};
  for (const auto& t : targets) {
    offset[0] += t[0];
    offset[1] += t[1];
  }
  offset[0] /= static_cast<double>(n);
  offset[1] /= static_cast<double>(n);
  double var = 0.0;
  for (const auto& t : targets) {
    var += (t[0] - offset[0]) * (t[0] - offset[0]) + (t[1] - offset[1]) * (t[1] - offset[1]);
  }
  double scale = std::sqrt(var / (2.0 * static_cast<double>(n)));
  if (!(scale > 1e-12)) scale = 1.0;

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto holdout = static_cast<std::size_t>(std::floor(opt.holdout_fraction * static_cast<double>(n)));
  const std::size_t train_n = n - holdout;

  Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(n));
  Eigen::MatrixXd t(2, static_cast<Eigen::Index>(n));
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t src = order[c];
    if (static_cast<int>(states[src].size()) != dim) throw InvalidArgument("states differ in dimension");
    require_finite(states[src], "mapper input");
    for (int r = 0; r < dim; ++r) x(r, static_cast<Eigen::Index>(c)) = states[src][r];
    t(0, static_cast<Eigen::Index>(c)) = (targets[src][0] - offset[0]) / scale;
    t(1, static_cast<Eigen::Index>(c)) = (targets[src][1] - offset[1]) / scale;
  }
  const auto tn = static_cast<Eigen::Index>(train_n);

  std::vector<int> sizes{dim};
  sizes.insert(sizes.end(), opt.hidden.begin(), opt.hidden.end());
  sizes.push_back(2);
  Mlp net = Mlp::create(sizes, Activation::Tanh, Activation::Identity, rng);

  auto mse = [&](const Mlp& m, Eigen::Index begin, Eigen::Index count) {
    if (count == 0) return 0.0;
    const Eigen::MatrixXd pred = m.forward(x.middleCols(begin, count));
    // Reported in embedding units.
    return (pred - t.middleCols(begin, count)).squaredNorm() * scale * scale /
           static_cast<double>(2 * count);
  };

  std::vector<double> history{mse(net, 0, tn)};
  AdamState adam(static_cast<Eigen::Index>(net.num_parameters()));
  std::vector<Eigen::Index> idx(train_n);
  std::iota(idx.begin(), idx.end(), 0);
  const Eigen::Index batch = std::max(1, opt.batch_size);
  ForwardCache cache;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(idx.begin(), idx.end(), rng);
    double loss_sum = 0.0;
    Eigen::Index seen = 0;
    for (Eigen::Index start = 0; start < tn; start += batch) {
      const Eigen::Index b = std::min(batch, tn - start);
      Eigen::MatrixXd xb(dim, b), tb(2, b);
      for (Eigen::Index c = 0; c < b; ++c) {
        xb.col(c) = x.col(idx[static_cast<std::size_t>(start + c)]);
        tb.col(c) = t.col(idx[static_cast<std::size_t>(start + c)]);
      }
      const Eigen::MatrixXd pred = net.forward(xb, cache);
      const Eigen::MatrixXd diff = pred - tb;
      loss_sum += diff.squaredNorm();
      seen += b;
      const Eigen::VectorXd g = net.backward(cache, diff / static_cast<double>(b));
      adam_step(net, g, adam, opt.learning_rate);
    }
    history.push_back(loss_sum * scale * scale / static_cast<double>(2 * std::max<Eigen::Index>(seen, 1)));
  }

  MapperNet out(std::move(net), offset, scale);
  out.final_train_mse = mse(out.net(), 0, tn);
  if (holdout > 0) out.heldout_mse = mse(out.net(), tn, static_cast<Eigen::Index>(holdout));
  out.loss_history = std::move(history);
  return out;
}

}  // namespace gensafe
