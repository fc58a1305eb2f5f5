#include "gensafe/safety.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace gensafe {

ConstraintTable build_constraint_table(const RomdpTables& t, std::span<const double> values,
                                       double discount) {
  if (values.size() != static_cast<std::size_t>(t.num_states)) {
    throw InvalidArgument("value function does not match the reduced state count");
  }
  ConstraintTable out{t.num_states, t.num_actions, {}, {}};
  const auto cells = static_cast<std::size_t>(t.num_states) * t.num_actions;
  out.immediate.resize(cells);
  out.future.resize(cells);
  for (int s = 0; s < t.num_states; ++s) {
    for (int a = 0; a < t.num_actions; ++a) {
      double tail = 0.0;
      for (int s2 = 0; s2 < t.num_states; ++s2) tail += t.t(s, a, s2) * values[static_cast<std::size_t>(s2)];
      const auto i = static_cast<std::size_t>(s) * t.num_actions + a;
      out.immediate[i] = t.c(s, a);
      out.future[i] = t.c(s, a) + discount * tail;
    }
  }
  return out;
}

CorrectionProblem make_correction_problem(const RomdpModel& model, const ConstraintTable& constraints,
                                          std::span<const double> state,
                                          std::span<const double> proposed, double d_s, double d) {
  CorrectionProblem p;
  p.grid = &model.action_grid;
  p.constraints = &constraints;
  p.reduced_state = model.abstract_state(state);
  p.proposed.assign(proposed.begin(), proposed.end());
  p.d_s = d_s;
  p.d = d;
  return p;
}

namespace {

ConstraintValues cell_values(const CorrectionProblem& p, int cell) {
  const auto i = static_cast<std::size_t>(p.reduced_state) * p.constraints->num_actions + cell;
  ConstraintValues v;
  v.immediate = p.constraints->immediate[i];
  v.future = p.constraints->future[i];
  v.feasible = v.immediate <= p.d_s && v.future <= p.d;
  return v;
}

double violation(const CorrectionProblem& p, const ConstraintValues& v) {
  return std::max(0.0, v.immediate - p.d_s) + std::max(0.0, v.future - p.d);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

ConstraintValues constraint_eval(const CorrectionProblem& p, std::span<const double> action) {
  require_finite(action, "candidate action");
  if (p.reduced_state < 0 || p.reduced_state >= p.constraints->num_states) {
    throw InvalidArgument("reduced state out of range");
  }
  return cell_values(p, p.grid->index(action));
}

double penalized_objective(const CorrectionProblem& p, std::span<const double> action, double rho) {
  const auto v = constraint_eval(p, action);
  return squared_distance(action, p.proposed) + rho * violation(p, v);
}

CorrectionResult correct_action(const CorrectionProblem& p, const PsoConfig& cfg,
                                std::uint64_t seed) {
  const ActionGrid& grid = *p.grid;
  const auto& bounds = grid.bounds();
  const std::size_t n = bounds.size();
  if (p.proposed.size() != n) throw InvalidArgument("proposed action has wrong dimension");
  require_finite(p.proposed, "proposed action");

  CorrectionResult r;
  const Vector start = grid.clamp(p.proposed);
  const auto v0 = constraint_eval(p, start);
  if (v0.feasible) {
    r.action = start;
    r.feasible = true;
    r.short_circuit = true;
    r.immediate = v0.immediate;
    r.future = v0.future;
    r.distance = std::sqrt(squared_distance(start, p.proposed));
    r.objective = r.distance * r.distance;
    return r;
  }

  // Feasibility-rule fitness: every feasible point ranks ahead of every
  // infeasible one, infeasible points are ranked by the penalized objective.
  double diam2 = 0.0;
  for (const auto& b : bounds) diam2 += b.width() * b.width();
  auto fitness = [&](const Vector& x) {
    const auto v = constraint_eval(p, x);
    const double d2 = squared_distance(x, p.proposed);
    return v.feasible ? d2 : diam2 + d2 + cfg.penalty * violation(p, v);
  };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int m = std::max(cfg.particles, 1);
  std::vector<Vector> x(static_cast<std::size_t>(m)), vel(static_cast<std::size_t>(m)), pbest;
  std::vector<double> pfit(static_cast<std::size_t>(m));
  Vector vmax(n);
  for (std::size_t d = 0; d < n; ++d) vmax[d] = cfg.velocity_clamp * bounds[d].width();

  // Particle 0 starts at the proposal, the next ones at a uniform point of
  // each cell while particles last, the rest at the proposal plus uniform
  // jitter over the bounds.
  std::vector<char> visited(static_cast<std::size_t>(grid.num_cells()), 0);
  for (int i = 0; i < m; ++i) {
    auto& xi = x[static_cast<std::size_t>(i)];
    xi = start;
    if (i > 0 && i <= grid.num_cells()) {
      const auto box = grid.cell_box(i - 1);
      for (std::size_t d = 0; d < n; ++d) xi[d] = box[d].lo + unit(rng) * box[d].width();
    } else if (i > 0) {
      for (std::size_t d = 0; d < n; ++d) {
        xi[d] = std::clamp(start[d] + (2.0 * unit(rng) - 1.0) * bounds[d].width(), bounds[d].lo, bounds[d].hi);
      }
    }
    visited[static_cast<std::size_t>(grid.index(xi))] = 1;
    vel[static_cast<std::size_t>(i)].assign(n, 0.0);
    pfit[static_cast<std::size_t>(i)] = fitness(xi);
  }
  pbest = x;
  std::size_t g = static_cast<std::size_t>(std::min_element(pfit.begin(), pfit.end()) - pfit.begin());
  Vector gbest = pbest[g];
  double gfit = pfit[g];
  r.best_history.push_back(gfit);

  for (int it = 0; it < cfg.iterations; ++it) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(m); ++i) {
      for (std::size_t d = 0; d < n; ++d) {
        double v = cfg.inertia * vel[i][d] + cfg.cognitive * unit(rng) * (pbest[i][d] - x[i][d]) +
                   cfg.social * unit(rng) * (gbest[d] - x[i][d]);
        v = std::clamp(v, -vmax[d], vmax[d]);
        vel[i][d] = v;
        x[i][d] = std::clamp(x[i][d] + v, bounds[d].lo, bounds[d].hi);
      }
      visited[static_cast<std::size_t>(grid.index(x[i]))] = 1;
      const double f = fitness(x[i]);
      if (f < pfit[i]) {
        pfit[i] = f;
        pbest[i] = x[i];
        if (f < gfit) {
          gfit = f;
          gbest = x[i];
        }
      }
    }
    r.best_history.push_back(gfit);
  }

  // Constraints are constant on a cell, so the best point of any cell is the
  // projection of the proposal onto it. Every cell the swarm reached is
  // refined this way and the fittest projection wins.
  Vector refined = gbest;
  double refined_fit = gfit;
  for (int cell = 0; cell < grid.num_cells(); ++cell) {
    if (!visited[static_cast<std::size_t>(cell)]) continue;
    Vector candidate = grid.project_into_cell(p.proposed, cell);
    const double f = fitness(candidate);
    if (f < refined_fit) {
      refined_fit = f;
      refined = std::move(candidate);
    }
  }

  const auto v = constraint_eval(p, refined);
  r.action = refined;
  r.feasible = v.feasible;
  r.immediate = v.immediate;
  r.future = v.future;
  const double d2 = squared_distance(refined, p.proposed);
  r.distance = std::sqrt(d2);
  r.objective = v.feasible ? d2 : d2 + cfg.penalty * violation(p, v);
  return r;
}

void manage_dataset(Dataset& all, Dataset& epoch, DataSample sample) {
  epoch.push(sample);
  all.push(std::move(sample));
}

void end_epoch(Dataset& epoch) { epoch.clear(); }

ActivationState update_activation(const ActivationState& s, double loss) {
  if (!std::isfinite(loss)) throw NumericDomainError("activation loss must be finite");
  if (!(s.reactivate_threshold > s.deactivate_threshold)) {
    throw InvalidArgument("reactivate threshold must exceed deactivate threshold");
  }
  ActivationState out = s;
  out.last_loss = loss;
  if (s.active && loss < s.deactivate_threshold) out.active = false;
  else if (!s.active && loss > s.reactivate_threshold) out.active = true;
  return out;
}

}  // namespace gensafe
