#include "gensafe/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

namespace gensafe {

GmmClassifier::GmmClassifier(std::vector<GaussianComponent> components)
    : components_(std::move(components)) {
  if (components_.empty()) throw InvalidArgument("mixture needs at least one component");
  cached_.reserve(components_.size());
  for (const auto& c : components_) {
    const double det = c.cov[0] * c.cov[2] - c.cov[1] * c.cov[1];
    if (!(c.weight > 0.0) || !(det > 0.0) || !(c.cov[0] > 0.0)) {
      throw NumericDomainError("mixture component is not a valid Gaussian");
    }
    cached_.push_back({std::log(c.weight), -std::log(2.0 * std::numbers::pi) - 0.5 * std::log(det),
                       {c.cov[2] / det, -c.cov[1] / det, c.cov[0] / det}});
  }
}

double GmmClassifier::weighted_log_density(int k, const Point2& x) const {
  const auto& c = components_[static_cast<std::size_t>(k)];
  const auto& q = cached_[static_cast<std::size_t>(k)];
  const double dx = x[0] - c.mean[0], dy = x[1] - c.mean[1];
  const double m = q.inv[0] * dx * dx + 2.0 * q.inv[1] * dx * dy + q.inv[2] * dy * dy;
  return q.log_weight + q.log_norm - 0.5 * m;
}

int GmmClassifier::classify(const Point2& x) const {
  if (!std::isfinite(x[0]) || !std::isfinite(x[1])) {
    throw NumericDomainError("cannot classify a non-finite point");
  }
  int best = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (int k = 0; k < size(); ++k) {
    const double v = weighted_log_density(k, x);
    if (v > best_v) {
      best_v = v;
      best = k;
    }
  }
  return best;
}

double GmmClassifier::log_density(const Point2& x) const {
  double mx = -std::numeric_limits<double>::infinity();
  std::vector<double> v(components_.size());
  for (int k = 0; k < size(); ++k) {
    v[static_cast<std::size_t>(k)] = weighted_log_density(k, x);
    mx = std::max(mx, v[static_cast<std::size_t>(k)]);
  }
  double s = 0.0;
  for (double e : v) s += std::exp(e - mx);
  return mx + std::log(s);
}

namespace {

std::array<double, 3> covariance(std::span<const Point2> pts, const Point2& mean) {
  std::array<double, 3> c{0.0, 0.0, 0.0};
  for (const auto& p : pts) {
    const double dx = p[0] - mean[0], dy = p[1] - mean[1];
    c[0] += dx * dx;
    c[1] += dx * dy;
    c[2] += dy * dy;
  }
  for (double& v : c) v /= static_cast<double>(pts.size());
  return c;
}

Point2 centroid(std::span<const Point2> pts) {
  Point2 m{0.0, 0.0};
  for (const auto& p : pts) {
    m[0] += p[0];
    m[1] += p[1];
  }
  m[0] /= static_cast<double>(pts.size());
  m[1] /= static_cast<double>(pts.size());
  return m;
}

std::vector<GaussianComponent> kmeanspp_init(std::span<const Point2> pts, int k,
                                             const std::array<double, 3>& global_cov,
                                             double ridge, std::mt19937_64& rng) {
  const std::size_t n = pts.size();
  std::vector<Point2> centers;
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  centers.push_back(pts[pick(rng)]);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& c = centers.back();
      const double dx = pts[i][0] - c[0], dy = pts[i][1] - c[1];
      d2[i] = std::min(d2[i], dx * dx + dy * dy);
      total += d2[i];
    }
    if (total <= 0.0) {
      centers.push_back(pts[pick(rng)]);
      continue;
    }
    std::discrete_distribution<std::size_t> dist(d2.begin(), d2.end());
    centers.push_back(pts[dist(rng)]);
  }

  std::vector<std::vector<Point2>> members(static_cast<std::size_t>(k));
  for (const auto& p : pts) {
    int best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
      const double dx = p[0] - centers[j][0], dy = p[1] - centers[j][1];
      const double d = dx * dx + dy * dy;
      if (d < bd) {
        bd = d;
        best = j;
      }
    }
    members[static_cast<std::size_t>(best)].push_back(p);
  }
  std::vector<GaussianComponent> comps(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    auto& c = comps[static_cast<std::size_t>(j)];
    const auto& m = members[static_cast<std::size_t>(j)];
    c.weight = std::max<double>(static_cast<double>(m.size()), 1.0);
    if (m.size() >= 3) {
      c.mean = centroid(m);
      c.cov = covariance(m, c.mean);
    } else {
      c.mean = centers[static_cast<std::size_t>(j)];
      c.cov = {global_cov[0] / k, global_cov[1] / k, global_cov[2] / k};
    }
    c.cov[0] += ridge;
    c.cov[2] += ridge;
  }
  double wsum = 0.0;
  for (const auto& c : comps) wsum += c.weight;
  for (auto& c : comps) c.weight /= wsum;
  return comps;
}

struct EmResult {
  std::vector<GaussianComponent> comps;
  std::vector<double> history;
  int iterations = 0;
};

EmResult run_em(std::span<const Point2> pts, std::vector<GaussianComponent> comps,
                const GmmOptions& opt) {
  const std::size_t n = pts.size();
  const std::size_t k = comps.size();
  std::vector<double> resp(n * k);
  EmResult out;
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    GmmClassifier model(comps);
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double* r = &resp[i * k];
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < k; ++j) {
        r[j] = model.weighted_log_density(static_cast<int>(j), pts[i]);
        mx = std::max(mx, r[j]);
      }
      double s = 0.0;
      for (std::size_t j = 0; j < k; ++j) {
        r[j] = std::exp(r[j] - mx);
        s += r[j];
      }
      for (std::size_t j = 0; j < k; ++j) r[j] /= s;
      ll += mx + std::log(s);
    }
    const double mean_ll = ll / static_cast<double>(n);
    out.history.push_back(mean_ll);
    out.iterations = iter + 1;
    if (out.history.size() >= 2 &&
        std::abs(mean_ll - out.history[out.history.size() - 2]) < opt.tolerance) {
      break;
    }
    if (iter + 1 == opt.max_iterations) break;

    // M-step
    for (std::size_t j = 0; j < k; ++j) {
      double nk = 0.0, mx = 0.0, my = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i * k + j];
        nk += r;
        mx += r * pts[i][0];
        my += r * pts[i][1];
      }
      auto& c = comps[j];
      c.weight = nk / static_cast<double>(n);
      if (nk < 1e-12) continue;  // keep the previous shape of a dead component
      c.mean = {mx / nk, my / nk};
      std::array<double, 3> cov{0.0, 0.0, 0.0};
      for (std::size_t i = 0; i < n; ++i) {
        const double r = resp[i * k + j];
        const double dx = pts[i][0] - c.mean[0], dy = pts[i][1] - c.mean[1];
        cov[0] += r * dx * dx;
        cov[1] += r * dx * dy;
        cov[2] += r * dy * dy;
      }
      c.cov = {cov[0] / nk + opt.ridge, cov[1] / nk, cov[2] / nk + opt.ridge};
    }
    double wsum = 0.0;
    for (auto& c : comps) {
      c.weight = std::max(c.weight, opt.weight_floor);
      wsum += c.weight;
    }
    for (auto& c : comps) c.weight /= wsum;
  }
  out.comps = std::move(comps);
  return out;
}

std::vector<int> map_counts(const GmmClassifier& model, std::span<const Point2> pts) {
  std::vector<int> counts(static_cast<std::size_t>(model.size()), 0);
  for (const auto& p : pts) ++counts[static_cast<std::size_t>(model.classify(p))];
  return counts;
}

}  // namespace

GmmClassifier fit_gmm(std::span<const Point2> points, int k, std::uint64_t seed,
                      const GmmOptions& opt) {
  if (k <= 0) throw InvalidArgument("number of mixture components must be positive");
  if (static_cast<std::size_t>(k) > points.size()) {
    throw InvalidArgument("more mixture components than points");
  }
  for (const auto& p : points) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1])) {
      throw NumericDomainError("mixture input contains non-finite points");
    }
  }
  std::mt19937_64 rng(seed);
  const Point2 gmean = centroid(points);
  auto gcov = covariance(points, gmean);
  gcov[0] += opt.ridge;
  gcov[2] += opt.ridge;

  EmResult em = run_em(points, kmeanspp_init(points, k, gcov, opt.ridge, rng), opt);
  GmmClassifier model(em.comps);
  bool reseeded = false;

  std::vector<int> counts = map_counts(model, points);
  if (std::find(counts.begin(), counts.end(), 0) != counts.end()) {
    // Rank points by how badly the current mixture explains them.
    std::vector<std::pair<double, std::size_t>> fit(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) fit[i] = {model.log_density(points[i]), i};
    std::sort(fit.begin(), fit.end());
    std::size_t next = 0;
    auto comps = em.comps;
    for (int j = 0; j < k; ++j) {
      if (counts[static_cast<std::size_t>(j)] != 0) continue;
      auto& c = comps[static_cast<std::size_t>(j)];
      c.mean = points[fit[next++ % fit.size()].second];
      c.cov = {gcov[0] / k, gcov[1] / k, gcov[2] / k};
      c.weight = 1.0 / k;
    }
    double wsum = 0.0;
    for (const auto& c : comps) wsum += c.weight;
    for (auto& c : comps) c.weight /= wsum;
    em = run_em(points, std::move(comps), opt);
    model = GmmClassifier(em.comps);
    reseeded = true;
  }

  model.log_likelihood_history = std::move(em.history);
  model.iterations = em.iterations;
  model.reseeded = reseeded;
  return model;
}

}  // namespace gensafe
