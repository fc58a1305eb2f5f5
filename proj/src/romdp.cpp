#include "gensafe/romdp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace gensafe {

namespace {
void check_index(int v, int bound, const char* what) {
  if (v < 0 || v >= bound) throw InvalidArgument(std::string(what) + " index out of range");
}
}  // namespace

CostTable build_cost_table(std::span<const ReducedSample> data, int num_states,
                           int num_actions, double default_cost) {
  CostTable t{num_states, num_actions, {}, {}};
  const auto cells = static_cast<std::size_t>(num_states) * num_actions;
  std::vector<double> sums(cells, 0.0);
  t.pair_counts.assign(cells, 0);
  for (const auto& d : data) {
    check_index(d.state, num_states, "state");
    check_index(d.action, num_actions, "action");
    const auto i = static_cast<std::size_t>(d.state) * num_actions + d.action;
    sums[i] += d.cost;
    ++t.pair_counts[i];
  }
  t.cost.resize(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    t.cost[i] = t.pair_counts[i] > 0 ? sums[i] / static_cast<double>(t.pair_counts[i]) : default_cost;
  }
  return t;
}

TransitionTable build_transition_table(std::span<const ReducedSample> data,
                                       int num_states, int num_actions) {
  TransitionTable t{num_states, num_actions, {}, {}};
  const auto S = static_cast<std::size_t>(num_states);
  const auto rows = S * num_actions;
  t.path_counts.assign(rows * S, 0);
  std::vector<std::int64_t> row_counts(rows, 0);
  for (const auto& d : data) {
    check_index(d.state, num_states, "state");
    check_index(d.action, num_actions, "action");
    check_index(d.next_state, num_states, "next state");
    const auto r = static_cast<std::size_t>(d.state) * num_actions + d.action;
    ++t.path_counts[r * S + d.next_state];
    ++row_counts[r];
  }
  t.prob.resize(rows * S);
  const double uniform = 1.0 / static_cast<double>(num_states);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t s2 = 0; s2 < S; ++s2) {
      t.prob[r * S + s2] = row_counts[r] > 0
                               ? static_cast<double>(t.path_counts[r * S + s2]) / static_cast<double>(row_counts[r])
                               : uniform;
    }
  }
  return t;
}

PolicyTable build_policy_table(std::span<const ReducedSample> epoch_data, int num_states,
                               int num_actions) {
  PolicyTable t{num_states, num_actions, {}, {}};
  const auto A = static_cast<std::size_t>(num_actions);
  t.pair_counts.assign(static_cast<std::size_t>(num_states) * A, 0);
  std::vector<std::int64_t> state_counts(static_cast<std::size_t>(num_states), 0);
  for (const auto& d : epoch_data) {
    check_index(d.state, num_states, "state");
    check_index(d.action, num_actions, "action");
    ++t.pair_counts[static_cast<std::size_t>(d.state) * A + d.action];
    ++state_counts[static_cast<std::size_t>(d.state)];
  }
  t.prob.resize(t.pair_counts.size());
  const double uniform = 1.0 / static_cast<double>(num_actions);
  for (std::size_t s = 0; s < state_counts.size(); ++s) {
    for (std::size_t a = 0; a < A; ++a) {
      t.prob[s * A + a] = state_counts[s] > 0
                              ? static_cast<double>(t.pair_counts[s * A + a]) / static_cast<double>(state_counts[s])
                              : uniform;
    }
  }
  return t;
}

RomdpTables assemble_tables(std::span<const ReducedSample> data,
                            std::span<const ReducedSample> epoch_data, int num_states,
                            int num_actions, double default_cost, double discount) {
  if (num_states <= 0 || num_actions <= 0) throw InvalidArgument("empty reduced spaces");
  RomdpTables t;
  t.num_states = num_states;
  t.num_actions = num_actions;
  t.default_cost = default_cost;
  t.discount = discount;
  t.dataset_size = static_cast<std::int64_t>(data.size());
  t.cost = build_cost_table(data, num_states, num_actions, default_cost);
  t.transition = build_transition_table(data, num_states, num_actions);
  t.policy = build_policy_table(epoch_data, num_states, num_actions);
  return t;
}

std::vector<std::string> check_invariants(const RomdpTables& t) {
  std::vector<std::string> issues;
  const int S = t.num_states, A = t.num_actions;
  const auto cells = static_cast<std::size_t>(S) * A;
  if (t.cost.cost.size() != cells || t.cost.pair_counts.size() != cells ||
      t.transition.prob.size() != cells * S || t.transition.path_counts.size() != cells * S ||
      t.policy.prob.size() != cells || t.policy.pair_counts.size() != cells) {
    issues.emplace_back("table shapes inconsistent with " + std::to_string(S) + "x" + std::to_string(A));
    return issues;
  }
  std::int64_t total = 0;
  for (int s = 0; s < S; ++s) {
    double prow = 0.0;
    for (int a = 0; a < A; ++a) {
      double row = 0.0;
      std::int64_t paths = 0;
      for (int s2 = 0; s2 < S; ++s2) {
        row += t.t(s, a, s2);
        paths += t.transition.path_counts[(static_cast<std::size_t>(s) * A + a) * S + s2];
      }
      if (std::abs(row - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "transition row (" << s + 1 << ", " << a + 1 << ") sums to " << row;
        issues.push_back(os.str());
      }
      const auto n = t.n(s, a);
      total += n;
      if (paths != n) {
        issues.push_back("path counts of (" + std::to_string(s + 1) + ", " + std::to_string(a + 1) +
                         ") do not add up to the pair count");
      }
      if (t.c(s, a) < 0.0) {
        issues.push_back("negative reduced cost at (" + std::to_string(s + 1) + ", " + std::to_string(a + 1) + ")");
      }
      if (n == 0 && t.c(s, a) != t.default_cost) {
        issues.push_back("unobserved pair (" + std::to_string(s + 1) + ", " + std::to_string(a + 1) +
                         ") does not carry the default cost");
      }
      prow += t.pi(s, a);
    }
    if (std::abs(prow - 1.0) > 1e-12) {
      std::ostringstream os;
      os << "policy row " << s + 1 << " sums to " << prow;
      issues.push_back(os.str());
    }
  }
  if (total != t.dataset_size) {
    issues.push_back("pair counts total " + std::to_string(total) + " but dataset holds " +
                     std::to_string(t.dataset_size));
  }
  return issues;
}

// --------------------------------------------------------- state abstraction

StateAbstraction::StateAbstraction(Normalizer normalizer, MapperNet mapper, GmmClassifier gmm)
    : normalizer_(std::move(normalizer)), mapper_(std::move(mapper)), gmm_(std::move(gmm)) {}

Point2 StateAbstraction::embed(std::span<const double> state) const {
  require_finite(state, "state");
  return mapper_.map(normalizer_.transform(state));
}

int StateAbstraction::reduce(std::span<const double> state) const {
  return gmm_.classify(embed(state));
}

std::vector<int> StateAbstraction::reduce_all(std::span<const Vector* const> states) const {
  std::vector<int> out(states.size());
  constexpr std::size_t kChunk = 4096;
  const auto dim = static_cast<Eigen::Index>(normalizer_.dim());
  for (std::size_t start = 0; start < states.size(); start += kChunk) {
    const std::size_t b = std::min(kChunk, states.size() - start);
    Eigen::MatrixXd x(dim, static_cast<Eigen::Index>(b));
    for (std::size_t c = 0; c < b; ++c) {
      require_finite(*states[start + c], "state");
      normalizer_.transform_into(*states[start + c], x, static_cast<Eigen::Index>(c));
    }
    const Eigen::MatrixXd l = mapper_.map_batch(x);
    for (std::size_t c = 0; c < b; ++c) {
      const auto col = static_cast<Eigen::Index>(c);
      out[start + c] = gmm_.classify({l(0, col), l(1, col)});
    }
  }
  return out;
}

int RomdpModel::abstract_state(std::span<const double> state) const {
  if (!state_abstraction) throw Error("ROMDP has no fitted state abstraction");
  return state_abstraction->reduce(state);
}

// ------------------------------------------------------------------- building

namespace {
template <typename F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}
}  // namespace

RomdpModel build_romdp(const Dataset& all, const Dataset& epoch,
                       const std::vector<Interval>& action_bounds,
                       const RomdpBuildOptions& opt, std::uint64_t seed) {
  if (all.size() < opt.min_build_size) {
    throw StageError("validate", "dataset holds " + std::to_string(all.size()) +
                                     " samples, minimum for a build is " +
                                     std::to_string(opt.min_build_size));
  }
  std::mt19937_64 rng(seed);

  std::vector<std::size_t> subset = stage("subsample", [&] {
    std::vector<std::size_t> idx(all.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    if (idx.size() <= opt.tsne_cap) return idx;
    std::vector<std::size_t> picked;
    picked.reserve(opt.tsne_cap);
    std::sample(idx.begin(), idx.end(), std::back_inserter(picked), opt.tsne_cap, rng);
    return picked;
  });
  if (subset.size() > opt.tsne_cap) throw StageError("subsample", "t-SNE cap exceeded");

  Normalizer normalizer = stage("normalize", [&] {
    std::vector<Vector> states;
    states.reserve(all.size());
    for (const auto& d : all) states.push_back(d.state);
    return fit_normalizer(states);
  });
  std::vector<Vector> normalized;
  normalized.reserve(subset.size());
  for (std::size_t i : subset) normalized.push_back(normalizer.transform(all[i].state));

  Embedding emb = stage("tsne", [&] { return tsne(normalized, opt.tsne, rng()); });
  MapperNet mapper = stage("mapper", [&] {
    return train_mapper(normalized, emb.points, opt.mapper, rng());
  });
  GmmClassifier gmm = stage("gmm", [&] {
    return fit_gmm(emb.points, opt.num_state_clusters, rng(), opt.gmm);
  });
  ActionGrid grid = stage("action-grid", [&] {
    return ActionGrid(action_bounds, opt.cells_per_action_dim);
  });

  RomdpModel model;
  model.state_abstraction.emplace(std::move(normalizer), std::move(mapper), std::move(gmm));
  model.action_grid = std::move(grid);

  model.tables = stage("tables", [&] {
    auto reduce = [&](const Dataset& ds) {
      std::vector<const Vector*> states, nexts;
      states.reserve(ds.size());
      nexts.reserve(ds.size());
      for (const auto& d : ds) {
        states.push_back(&d.state);
        nexts.push_back(&d.next_state);
      }
      const auto s = model.state_abstraction->reduce_all(states);
      const auto s2 = model.state_abstraction->reduce_all(nexts);
      std::vector<ReducedSample> out(ds.size());
      for (std::size_t i = 0; i < ds.size(); ++i) {
        out[i] = {s[i], model.action_grid.index(ds[i].action), s2[i], ds[i].cost};
      }
      return out;
    };
    const auto reduced_all = reduce(all);
    const auto reduced_epoch = reduce(epoch);
    return assemble_tables(reduced_all, reduced_epoch, opt.num_state_clusters,
                           model.action_grid.num_cells(), opt.default_cost, opt.discount);
  });

  auto& diag = model.diagnostics;
  diag.tsne_points = subset.size();
  diag.final_kl = emb.final_kl;
  diag.mapper_train_mse = model.state_abstraction->mapper().final_train_mse;
  diag.mapper_heldout_mse = model.state_abstraction->mapper().heldout_mse;
  diag.gmm_iterations = model.state_abstraction->gmm().iterations;
  diag.embedding = std::move(emb.points);
  diag.embedding_costs.reserve(subset.size());
  for (std::size_t i : subset) diag.embedding_costs.push_back(all[i].cost);
  return model;
}

// ---------------------------------------------------------------- persistence

namespace {
using nlohmann::json;

json mlp_to_json(const Mlp& net) {
  json j;
  j["sizes"] = net.sizes();
  std::vector<int> acts;
  for (auto a : net.activations()) acts.push_back(static_cast<int>(a));
  j["activations"] = acts;
  j["parameters"] = std::vector<double>(net.parameters().data(),
                                        net.parameters().data() + net.parameters().size());
  return j;
}

Mlp mlp_from_json(const json& j) {
  std::vector<Activation> acts;
  for (int a : j.at("activations").get<std::vector<int>>()) acts.push_back(static_cast<Activation>(a));
  Mlp net(j.at("sizes").get<std::vector<int>>(), acts);
  const auto p = j.at("parameters").get<std::vector<double>>();
  net.set_parameters(Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<Eigen::Index>(p.size())));
  return net;
}
}  // namespace

void save_romdp(const std::string& path, const RomdpModel& model,
                std::span<const double> values) {
  const auto& t = model.tables;
  json j;
  j["format"] = "gensafe-romdp";
  j["version"] = kRomdpFormatVersion;
  j["num_states"] = t.num_states;
  j["num_actions"] = t.num_actions;
  j["default_cost"] = t.default_cost;
  j["discount"] = t.discount;
  j["dataset_size"] = t.dataset_size;
  j["cost"] = t.cost.cost;
  j["pair_counts"] = t.cost.pair_counts;
  j["transition"] = t.transition.prob;
  j["path_counts"] = t.transition.path_counts;
  j["policy"] = t.policy.prob;
  j["epoch_pair_counts"] = t.policy.pair_counts;
  if (!values.empty()) j["values"] = std::vector<double>(values.begin(), values.end());
  if (model.action_grid.num_cells() > 0) {
    json g;
    g["cells_per_dim"] = model.action_grid.cells_per_dim();
    for (const auto& b : model.action_grid.bounds()) g["bounds"].push_back({b.lo, b.hi});
    j["action_grid"] = g;
  }
  if (model.state_abstraction) {
    const auto& sa = *model.state_abstraction;
    json a;
    a["normalizer"] = {{"min", sa.normalizer().min()}, {"max", sa.normalizer().max()}};
    a["mapper"] = {{"net", mlp_to_json(sa.mapper().net())},
                   {"offset", sa.mapper().offset()},
                   {"scale", sa.mapper().scale()}};
    for (const auto& c : sa.gmm().components()) {
      a["gmm"].push_back({{"weight", c.weight}, {"mean", c.mean}, {"cov", c.cov}});
    }
    j["state_abstraction"] = a;
  }
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  os << j.dump();
}

LoadedRomdp load_romdp(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw Error(std::string("malformed ROMDP file: ") + e.what());
  }
  if (j.value("format", std::string()) != "gensafe-romdp") throw Error("not a ROMDP file");
  const int version = j.value("version", -1);
  if (version != kRomdpFormatVersion) {
    throw VersionMismatch("ROMDP file version " + std::to_string(version) + ", expected " +
                          std::to_string(kRomdpFormatVersion));
  }
  try {
    LoadedRomdp out;
    auto& t = out.model.tables;
    t.num_states = j.at("num_states").get<int>();
    t.num_actions = j.at("num_actions").get<int>();
    t.default_cost = j.at("default_cost").get<double>();
    t.discount = j.at("discount").get<double>();
    t.dataset_size = j.at("dataset_size").get<std::int64_t>();
    t.cost = {t.num_states, t.num_actions, j.at("cost").get<std::vector<double>>(),
              j.at("pair_counts").get<std::vector<std::int64_t>>()};
    t.transition = {t.num_states, t.num_actions, j.at("transition").get<std::vector<double>>(),
                    j.at("path_counts").get<std::vector<std::int64_t>>()};
    t.policy = {t.num_states, t.num_actions, j.at("policy").get<std::vector<double>>(),
                j.at("epoch_pair_counts").get<std::vector<std::int64_t>>()};
    if (j.contains("values")) out.values = j["values"].get<std::vector<double>>();
    if (j.contains("action_grid")) {
      std::vector<Interval> bounds;
      for (const auto& b : j["action_grid"].at("bounds")) bounds.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
      out.model.action_grid = ActionGrid(bounds, j["action_grid"].at("cells_per_dim").get<int>());
    }
    if (j.contains("state_abstraction")) {
      const auto& a = j["state_abstraction"];
      Normalizer norm(a.at("normalizer").at("min").get<Vector>(), a.at("normalizer").at("max").get<Vector>());
      MapperNet mapper(mlp_from_json(a.at("mapper").at("net")),
                       a.at("mapper").at("offset").get<Point2>(), a.at("mapper").at("scale").get<double>());
      std::vector<GaussianComponent> comps;
      for (const auto& c : a.at("gmm")) {
        comps.push_back({c.at("weight").get<double>(), c.at("mean").get<Point2>(),
                         c.at("cov").get<std::array<double, 3>>()});
      }
      out.model.state_abstraction.emplace(std::move(norm), std::move(mapper), GmmClassifier(std::move(comps)));
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(std::string("malformed ROMDP file: ") + e.what());
  }
}

}  // namespace gensafe
