#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "binomial.hpp"
#include "clt.hpp"
#include "errors.hpp"
#include "limits.hpp"
#include "model.hpp"
#include "netgen.hpp"
#include "rng.hpp"

namespace contagion {

struct InterventionPlan {
  std::map<std::string, double> alpha; // saved fraction of incoming links per class
  std::map<std::string, double> costs; // cost per saved link per class
  double budget = 0.0;
};

inline std::vector<double> per_class(const std::map<std::string, double>& m, const std::vector<std::string>& ids,
                                     const char* what, double lo, double hi) {
  std::vector<double> out;
  for (const auto& id : ids) {
    auto it = m.find(id);
    if (it == m.end()) throw ModelError(std::string(what) + " does not cover class '" + id + "'");
    if (!(it->second >= lo && it->second <= hi))
      throw ModelError(std::string(what) + " of class '" + id + "' out of range");
    out.push_back(it->second);
  }
  return out;
}

inline std::vector<std::string> class_ids(const NetworkSpec& spec) {
  std::vector<std::string> ids;
  for (const auto& c : spec.classes) ids.push_back(c.id);
  return ids;
}

// Removes each edge into a class-x node independently with probability alpha_x.
inline RealizedNetwork percolate_graph(const RealizedNetwork& net, const InterventionPlan& plan, std::uint64_t seed) {
  const auto alpha = per_class(plan.alpha, net.pop.class_ids, "intervention plan", 0.0, 1.0);
  RealizedNetwork out{net.pop, {}};
  Rng rng(derive_seed(seed, "percolation"));
  for (const auto& e : net.edges)
    if (!(rng.uniform() < alpha[net.pop.cls[e.dst]])) out.edges.push_back(e);
  return out;
}

inline double f_W_intervened(const NetworkSpec& spec, const std::vector<double>& alpha, double z) {
  detail::check_unit(z);
  double s = 0.0;
  for (std::size_t x = 0; x < spec.classes.size(); ++x) {
    const auto& c = spec.classes[x];
    const double u = alpha[x] + (1.0 - alpha[x]) * z;
    for (int th = 1; th <= c.d_in + 1; ++th)
      if (c.q(th) != 0.0) s += c.weight * c.d_out * c.q(th) * binom_tail(c.d_in, u, c.pi(th));
  }
  return spec.lambda() * z - s;
}

inline double f_W_intervened_deriv(const NetworkSpec& spec, const std::vector<double>& alpha, double z) {
  detail::check_unit(z);
  double s = 0.0;
  for (std::size_t x = 0; x < spec.classes.size(); ++x) {
    const auto& c = spec.classes[x];
    const double u = alpha[x] + (1.0 - alpha[x]) * z;
    for (int th = 1; th <= c.d_in + 1; ++th)
      if (c.q(th) != 0.0) s += c.weight * c.d_out * c.q(th) * (1.0 - alpha[x]) * binom_tail_deriv(c.d_in, u, c.pi(th));
  }
  return spec.lambda() - s;
}

// Aggregate under intervention; only infected links that survive count.
inline ValueAndDerivative f_diamond_intervened(const NetworkSpec& spec, const Observable& diamond,
                                               const std::vector<double>& alpha, double z) {
  ValueAndDerivative r{diamond.gamma_bar, 0.0};
  for (std::size_t x = 0; x < spec.classes.size(); ++x) {
    const ClassLimits cl = class_limits(spec.classes[x], z, alpha[x]);
    r.value -= diamond.default_loss[x] * cl.f_D + diamond.link_loss[x] * cl.f_I;
    r.derivative -= diamond.default_loss[x] * cl.df_D + diamond.link_loss[x] * cl.df_I;
  }
  return r;
}

struct InterventionLimits {
  std::vector<double> alpha;
  FixedPoint fixed_point;
  double f_D = 0.0;
  double f_diamond = 0.0;
  double cost = 0.0;
  std::vector<CellLimit> cells;
  std::string warning;
};

inline InterventionLimits eval_intervened_limits(const NetworkSpec& spec, const std::vector<double>& alpha,
                                                 const Observable& diamond, const std::vector<double>& costs,
                                                 RootOptions opt = {}) {
  if (alpha.size() != spec.classes.size() || costs.size() != spec.classes.size())
    throw ModelError("intervention vectors do not match the class count");
  InterventionLimits r;
  r.alpha = alpha;
  r.fixed_point = solve_largest_root([&](double z) { return f_W_intervened(spec, alpha, z); },
                                     [&](double z) { return f_W_intervened_deriv(spec, alpha, z); }, spec.lambda(), opt);
  const double z = r.fixed_point.z_star;
  if (!r.fixed_point.stable) r.warning = "unstable fixed point: limit theorems do not apply";
  // Summed as default mass so that fundamental-only outcomes come out exact.
  double defaulted = 0.0;
  for (std::size_t x = 0; x < spec.classes.size(); ++x) {
    const auto& c = spec.classes[x];
    const double u = alpha[x] + (1.0 - alpha[x]) * z;
    const double dead = (1.0 - alpha[x]) * (1.0 - z);
    double mass = c.q(0);
    for (int th = 1; th <= c.d_in + 1; ++th) {
      const double mq = c.weight * c.q(th);
      if (mq == 0.0) continue;
      mass += c.q(th) * (1.0 - binom_tail(c.d_in, u, c.pi(th)));
      for (int l = 0; l < th; ++l) r.cells.push_back({static_cast<int>(x), th, l, mq * binom_pmf(c.d_in, dead, l)});
    }
    defaulted += c.weight * mass;
    double links = 0.0;
    for (int l = 1; l <= c.d_in; ++l) links += l * binom_pmf(c.d_in, 1.0 - z, l);
    r.cost += c.weight * alpha[x] * costs[x] * links;
  }
  r.f_D = defaulted;
  r.f_diamond = f_diamond_intervened(spec, diamond, alpha, z).value;
  return r;
}

struct OptimizerOptions {
  int K = 20;
  double min_step = 1e-4;
  RootOptions root{};
  std::size_t max_grid = 1000000;
};

struct GridPoint {
  std::vector<double> alpha;
  double value = 0.0;
  double cost = 0.0;
  bool stable = false;
  bool feasible = false;
};

struct OptimizationResult {
  std::vector<double> alpha;
  double value = 0.0;
  double cost = 0.0;
  std::size_t unstable_count = 0;
  std::vector<GridPoint> grid;
  std::size_t refinement_evaluations = 0;
};

// Grid search over {0, 1/K, ..., 1}^|X| followed by coordinate refinement with
// step halving. Unstable points are excluded; ties go to the lexicographically
// smallest alpha.
inline OptimizationResult optimize_plan(const NetworkSpec& spec, const Observable& diamond,
                                        const std::vector<double>& costs, double budget, OptimizerOptions opt = {}) {
  if (!(budget >= 0.0)) throw ModelError("budget must be nonnegative");
  for (double c : costs)
    if (!(c >= 0.0)) throw ModelError("costs must be nonnegative");
  if (opt.K < 1) throw ConfigError("grid resolution K must be at least 1");
  const std::size_t nx = spec.classes.size();
  std::size_t total = 1;
  for (std::size_t i = 0; i < nx; ++i) {
    total *= static_cast<std::size_t>(opt.K + 1);
    if (total > opt.max_grid) throw ConfigError("intervention grid too large; lower K");
  }
  auto evaluate = [&](const std::vector<double>& a) {
    const InterventionLimits lim = eval_intervened_limits(spec, a, diamond, costs, opt.root);
    GridPoint g;
    g.alpha = a;
    g.value = lim.f_diamond;
    g.cost = lim.cost;
    g.stable = lim.fixed_point.stable;
    g.feasible = g.stable && lim.cost <= budget;
    return g;
  };
  auto better = [](const GridPoint& a, const GridPoint& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.alpha < b.alpha;
  };
  OptimizationResult res;
  const GridPoint* best = nullptr;
  std::vector<int> idx(nx, 0);
  for (std::size_t k = 0; k < total; ++k) {
    std::vector<double> a(nx);
    for (std::size_t i = 0; i < nx; ++i) a[i] = static_cast<double>(idx[i]) / opt.K;
    res.grid.push_back(evaluate(a));
    for (std::size_t i = nx; i-- > 0;) {
      if (++idx[i] <= opt.K) break;
      idx[i] = 0;
    }
  }
  for (const auto& g : res.grid) {
    if (!g.stable) ++res.unstable_count;
    if (g.feasible && (!best || better(g, *best))) best = &g;
  }
  if (!best) {
    // alpha = 0 costs nothing; only an unstable baseline lands here.
    GridPoint zero = evaluate(std::vector<double>(nx, 0.0));
    res.alpha = zero.alpha;
    res.value = zero.value;
    res.cost = zero.cost;
    return res;
  }
  GridPoint cur = *best;
  for (double step = 1.0 / opt.K; step >= opt.min_step; step *= 0.5) {
    bool improved = true;
    while (improved) {
      improved = false;
      for (std::size_t i = 0; i < nx; ++i)
        for (double dir : {1.0, -1.0}) {
          std::vector<double> a = cur.alpha;
          a[i] = std::clamp(a[i] + dir * step, 0.0, 1.0);
          if (a[i] == cur.alpha[i]) continue;
          GridPoint g = evaluate(a);
          ++res.refinement_evaluations;
          if (!g.stable) ++res.unstable_count;
          if (g.feasible && better(g, cur)) {
            cur = g;
            improved = true;
          }
        }
    }
  }
  res.alpha = cur.alpha;
  res.value = cur.value;
  res.cost = cur.cost;
  return res;
}

} // namespace contagion
