#include "gensafe/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace gensafe {

namespace {

std::string num(double v, const char* f = "%.6g") {
  char buf[40];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(item);
  return out;
}

}  // namespace

std::string romdp_report(const LoadedRomdp& loaded, int top_states) {
  const RomdpTables& t = loaded.model.tables;
  const int S = t.num_states, A = t.num_actions;
  std::ostringstream os;
  os << "reduced states: " << S << "\nreduced actions: " << A << "\ndefault cost: " << num(t.default_cost)
     << "\ndiscount: " << num(t.discount) << "\ndataset samples: " << t.dataset_size << '\n';

  const auto cells = static_cast<std::size_t>(S) * A;
  const bool shapes_ok = t.cost.cost.size() == cells && t.cost.pair_counts.size() == cells &&
                         t.transition.prob.size() == cells * S && t.transition.path_counts.size() == cells * S &&
                         t.policy.prob.size() == cells && t.policy.pair_counts.size() == cells;
  os << "check shapes: " << (shapes_ok ? "PASS" : "FAIL") << '\n';
  if (!shapes_ok) return os.str();

  std::vector<std::string> bad_t, bad_pi;
  for (int s = 0; s < S; ++s) {
    double prow = 0.0;
    for (int a = 0; a < A; ++a) {
      double row = 0.0;
      for (int s2 = 0; s2 < S; ++s2) row += t.t(s, a, s2);
      if (std::abs(row - 1.0) > 1e-12) {
        bad_t.push_back("(" + std::to_string(s + 1) + ", " + std::to_string(a + 1) + ") sums to " + num(row, "%.12g"));
      }
      prow += t.pi(s, a);
    }
    if (std::abs(prow - 1.0) > 1e-12) bad_pi.push_back(std::to_string(s + 1) + " sums to " + num(prow, "%.12g"));
  }
  os << "check transition rows sum to 1: " << (bad_t.empty() ? "PASS" : "FAIL") << '\n';
  for (const auto& b : bad_t) os << "  transition row " << b << '\n';
  os << "check policy rows sum to 1: " << (bad_pi.empty() ? "PASS" : "FAIL") << '\n';
  for (const auto& b : bad_pi) os << "  policy row " << b << '\n';

  std::int64_t total = 0, uncovered = 0;
  for (auto n : t.cost.pair_counts) {
    total += n;
    if (n == 0) ++uncovered;
  }
  std::int64_t epoch_total = 0;
  for (auto n : t.policy.pair_counts) epoch_total += n;
  os << "check pair counts total dataset size: " << (total == t.dataset_size ? "PASS" : "FAIL") << " (" << total
     << ")\n";
  const auto others = check_invariants(t);
  std::vector<std::string> rest;
  for (const auto& o : others) {
    if (o.find("row") == std::string::npos && o.find("pair counts total") == std::string::npos) rest.push_back(o);
  }
  os << "check counts, costs and default rule: " << (rest.empty() ? "PASS" : "FAIL") << '\n';
  for (const auto& r : rest) os << "  " << r << '\n';
  os << "epoch samples: " << epoch_total << '\n';
  os << "pairs at default cost: " << uncovered << " of " << cells << " ("
     << num(100.0 * static_cast<double>(uncovered) / static_cast<double>(cells), "%.1f") << "%)\n";

  os << "\ncost table C(s, a):\n  s \\ a";
  for (int a = 0; a < A; ++a) os << ' ' << std::setw(12) << (a + 1);
  os << '\n';
  for (int s = 0; s < S; ++s) {
    os << std::setw(7) << (s + 1);
    for (int a = 0; a < A; ++a) {
      os << ' ' << std::setw(12) << (t.n(s, a) == 0 ? std::string("default") : num(t.c(s, a)));
    }
    os << '\n';
  }

  std::vector<std::pair<double, int>> by_cost;
  for (int s = 0; s < S; ++s) {
    double c = 0.0;
    for (int a = 0; a < A; ++a) c += t.pi(s, a) * t.c(s, a);
    by_cost.emplace_back(c, s);
  }
  std::stable_sort(by_cost.begin(), by_cost.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
  os << "\nhighest expected immediate cost under the reduced policy:\n";
  for (int i = 0; i < std::min(top_states, S); ++i) {
    os << "  state " << by_cost[static_cast<std::size_t>(i)].second + 1 << ": "
       << num(by_cost[static_cast<std::size_t>(i)].first) << '\n';
  }
  if (!loaded.values.empty()) {
    os << "\nvalue function:\n";
    for (std::size_t s = 0; s < loaded.values.size(); ++s) os << "  V(" << s + 1 << ") = " << num(loaded.values[s]) << '\n';
  }
  return os.str();
}

std::vector<EpochMetrics> read_metrics(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line != std::string("# schema: ") + kMetricsSchema) {
    throw SchemaMismatch(path + ": expected schema " + kMetricsSchema);
  }
  if (!std::getline(is, line) || line != metrics_header()) throw SchemaMismatch(path + ": unexpected header");
  std::vector<EpochMetrics> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 9) throw SchemaMismatch(path + ": row with " + std::to_string(f.size()) + " fields");
    try {
      EpochMetrics m;
      m.epoch = std::stoi(f[0]);
      m.mean_episode_reward = std::stod(f[1]);
      m.mean_episode_cost = std::stod(f[2]);
      m.violations = std::stol(f[3]);
      m.lambda = std::stod(f[4]);
      m.vc_loss = std::stod(f[5]);
      m.gensafe_active = f[6] == "1";
      m.corrections = std::stol(f[7]);
      m.mean_correction_distance = std::stod(f[8]);
      out.push_back(m);
    } catch (const std::logic_error&) {
      throw SchemaMismatch(path + ": malformed row '" + line + "'");
    }
  }
  return out;
}

std::vector<CurvePoint> aggregate_curves(const std::vector<std::vector<EpochMetrics>>& runs) {
  if (runs.empty()) throw InvalidArgument("no metrics to aggregate");
  std::size_t n = runs.front().size();
  for (const auto& r : runs) n = std::min(n, r.size());
  std::vector<CurvePoint> out(n);
  const double k = static_cast<double>(runs.size());
  auto stats = [&](std::size_t e, auto get, double& mean, double& sd) {
    double s = 0.0;
    for (const auto& r : runs) s += get(r[e]);
    mean = s / k;
    double v = 0.0;
    for (const auto& r : runs) v += (get(r[e]) - mean) * (get(r[e]) - mean);
    sd = std::sqrt(v / k);
  };
  for (std::size_t e = 0; e < n; ++e) {
    auto& p = out[e];
    p.epoch = runs.front()[e].epoch;
    p.runs = static_cast<int>(runs.size());
    stats(e, [](const EpochMetrics& m) { return m.mean_episode_reward; }, p.reward_mean, p.reward_std);
    stats(e, [](const EpochMetrics& m) { return m.mean_episode_cost; }, p.cost_mean, p.cost_std);
    stats(e, [](const EpochMetrics& m) { return static_cast<double>(m.violations); }, p.violations_mean,
          p.violations_std);
    stats(e, [](const EpochMetrics& m) { return m.lambda; }, p.lambda_mean, p.lambda_std);
  }
  return out;
}

std::string format_curves(const std::vector<CurvePoint>& curves) {
  std::ostringstream os;
  os << "epoch,runs,reward_mean,reward_std,cost_mean,cost_std,violations_mean,violations_std,lambda_mean,"
        "lambda_std\n";
  for (const auto& p : curves) {
    os << p.epoch << ',' << p.runs << ',' << num(p.reward_mean, "%.10g") << ',' << num(p.reward_std, "%.10g") << ','
       << num(p.cost_mean, "%.10g") << ',' << num(p.cost_std, "%.10g") << ',' << num(p.violations_mean, "%.10g")
       << ',' << num(p.violations_std, "%.10g") << ',' << num(p.lambda_mean, "%.10g") << ','
       << num(p.lambda_std, "%.10g") << '\n';
  }
  return os.str();
}

}  // namespace gensafe
