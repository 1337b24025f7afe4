#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "cascade.hpp"
#include "clt.hpp"
#include "errors.hpp"
#include "intervene.hpp"
#include "limits.hpp"
#include "netgen.hpp"
#include "risk.hpp"
#include "rng.hpp"

namespace contagion {

struct EnsembleConfig {
  NetworkSpec spec;
  std::size_t n = 1000;
  std::size_t m = 100;
  std::uint64_t master_seed = 1;
  std::vector<Observable> observables{Observable::of(ObservableKind::D)};
  std::optional<RiskSpec> risk;
  LossMode loss_mode = LossMode::deterministic;
  std::optional<InterventionPlan> plan;
  std::vector<double> time_grid; // non-empty: also run the timed death process
  unsigned threads = 0;          // 0: hardware concurrency
  RootOptions root{};
};

// Trajectory fractions at one grid time: S, D, W, H+, I+ over n.
using TrajectoryPoint = std::array<double, 5>;

struct ReplicationResult {
  std::size_t index = 0;
  std::vector<double> values;  // raw observable values
  std::vector<double> centers; // per-node centering f^{(n)}(zhat_n)
  std::vector<TrajectoryPoint> trajectory;
};

struct ObservableStats {
  std::string name;
  double mean_fraction = 0.0; // mean of value / n
  double mean_center = 0.0;
  double variance = 0.0; // sample variance of standardized values
  std::vector<double> raw;
  std::vector<double> standardized; // n^{-1/2} (value - n center)
};

struct EnsembleStats {
  std::size_t n = 0, m = 0;
  std::vector<ObservableStats> observables;
  std::vector<double> time_grid;
  std::vector<TrajectoryPoint> trajectory_means;
};

namespace detail {

inline std::vector<double> empirical_weights(const NodePopulation& pop) {
  std::vector<double> w;
  for (auto c : pop.class_counts()) w.push_back(static_cast<double>(c) / static_cast<double>(pop.size()));
  return w;
}

// Observable value at the end of the cascade.
inline double final_value(const Observable& obs, const RealizedNetwork& net, const CascadeResult& res,
                          const EnsembleConfig& cfg, std::uint64_t seed) {
  const auto& pop = net.pop;
  switch (obs.kind) {
  case ObservableKind::S: return static_cast<double>(pop.size() - res.default_count());
  case ObservableKind::D: return static_cast<double>(res.default_count());
  case ObservableKind::Hplus:
  case ObservableKind::Iplus: {
    std::int64_t h = 0, i = 0;
    for (const auto& e : net.edges)
      if (!res.defaulted[e.src]) (res.defaulted[e.dst] ? i : h) += 1;
    return static_cast<double>(obs.kind == ObservableKind::Hplus ? h : i);
  }
  case ObservableKind::W: return -1.0; // every defaulted out-ball has been paired
  case ObservableKind::Cell: {
    auto it = res.cells.find({obs.cls, obs.theta, obs.ell});
    return it == res.cells.end() ? 0.0 : static_cast<double>(it->second);
  }
  case ObservableKind::Diamond:
    if (!cfg.risk) throw ConfigError("the diamond observable needs a risk spec");
    return evaluate_aggregates(net, res, *cfg.risk, cfg.loss_mode, seed).gamma_systemwide;
  }
  return 0.0;
}

} // namespace detail

inline ReplicationResult run_replication(const EnsembleConfig& cfg, std::size_t index) {
  const std::uint64_t seed = mix_seed(cfg.master_seed, index);
  ReplicationResult out;
  out.index = index;
  const NodePopulation pop = sample_nodes(cfg.spec, cfg.n, derive_seed(seed, "population"));
  RealizedNetwork net = wire_configuration(pop, derive_seed(seed, "graph"));
  if (cfg.plan) net = percolate_graph(net, *cfg.plan, derive_seed(seed, "plan"));
  const CascadeResult res = run_discrete(net);
  for (const auto& obs : cfg.observables) out.values.push_back(detail::final_value(obs, net, res, cfg, seed));

  const NetworkSpec emp = with_weights(cfg.spec, detail::empirical_weights(pop));
  if (cfg.plan) {
    const auto alpha = per_class(cfg.plan->alpha, class_ids(cfg.spec), "intervention plan", 0.0, 1.0);
    const std::vector<double> zeros(alpha.size(), 0.0);
    const Observable dia = cfg.risk ? diamond_observable(emp, *cfg.risk) : Observable::diamond(0.0, zeros, zeros);
    const auto lim = eval_intervened_limits(emp, alpha, dia, zeros, cfg.root);
    for (const auto& obs : cfg.observables) {
      double c = std::numeric_limits<double>::quiet_NaN();
      if (obs.kind == ObservableKind::D) c = lim.f_D;
      if (obs.kind == ObservableKind::S) c = 1.0 - lim.f_D;
      if (obs.kind == ObservableKind::Diamond && cfg.risk) c = lim.f_diamond;
      out.centers.push_back(c);
    }
  } else {
    const FixedPoint fp = solve_zstar(emp, cfg.root);
    for (const auto& obs : cfg.observables) {
      Observable o = obs;
      if (o.kind == ObservableKind::Diamond) o = diamond_observable(emp, *cfg.risk);
      out.centers.push_back(observable_limit(emp, o, fp.z_star).value);
    }
  }

  if (!cfg.time_grid.empty()) {
    const CascadeTrajectory tr = run_death_process(net, derive_seed(seed, "clock"), {TimeMode::exponential, false});
    const double n = static_cast<double>(cfg.n);
    for (double t : cfg.time_grid) {
      const auto& r = tr.at_time(t);
      out.trajectory.push_back({r.S / n, r.D / n, r.W / n, r.Hplus / n, r.Iplus / n});
    }
  }
  return out;
}

namespace detail {
// Sum in sorted order so the result does not depend on input order.
inline double stable_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}
inline double mean_of(const std::vector<double>& v) { return stable_sum(v) / static_cast<double>(v.size()); }
inline double variance_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  std::vector<double> sq;
  for (double x : v) sq.push_back((x - m) * (x - m));
  return stable_sum(sq) / static_cast<double>(v.size() - 1);
}
} // namespace detail

inline EnsembleStats merge_replications(const EnsembleConfig& cfg, std::vector<ReplicationResult> reps) {
  std::sort(reps.begin(), reps.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  EnsembleStats st;
  st.n = cfg.n;
  st.m = reps.size();
  const double n = static_cast<double>(cfg.n), rn = std::sqrt(n);
  for (std::size_t k = 0; k < cfg.observables.size(); ++k) {
    ObservableStats o;
    o.name = cfg.observables[k].name();
    std::vector<double> frac, centers;
    for (const auto& r : reps) {
      o.raw.push_back(r.values[k]);
      frac.push_back(r.values[k] / n);
      centers.push_back(r.centers[k]);
      o.standardized.push_back((r.values[k] - n * r.centers[k]) / rn);
    }
    o.mean_fraction = detail::mean_of(frac);
    o.mean_center = detail::mean_of(centers);
    o.variance = detail::variance_of(o.standardized);
    st.observables.push_back(std::move(o));
  }
  st.time_grid = cfg.time_grid;
  for (std::size_t g = 0; g < cfg.time_grid.size(); ++g) {
    TrajectoryPoint p{};
    for (std::size_t c = 0; c < p.size(); ++c) {
      std::vector<double> v;
      for (const auto& r : reps) v.push_back(r.trajectory[g][c]);
      p[c] = detail::mean_of(v);
    }
    st.trajectory_means.push_back(p);
  }
  return st;
}

inline EnsembleStats run_ensemble(const EnsembleConfig& cfg) {
  if (cfg.m < 1) throw ConfigError("replication count must be at least 1");
  if (cfg.n < 1) throw ConfigError("population size must be at least 1");
  validate_spec(cfg.spec);
  if (cfg.risk) validate_risk(*cfg.risk, cfg.spec);
  unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.m));
  std::vector<ReplicationResult> results(cfg.m);
  std::vector<std::exception_ptr> errors(cfg.m);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cfg.m;) {
      try {
        results[i] = run_replication(cfg, i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return merge_replications(cfg, std::move(results));
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Q(x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2), first 100 terms; 1 when the
// series has not converged.
inline double kolmogorov_q(double x) {
  if (x <= 0.0) return 1.0;
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 ? 2.0 : -2.0) * term;
    if (term <= 1e-12 * std::abs(s) || term < 1e-300) return std::clamp(s, 0.0, 1.0);
  }
  return 1.0;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// One-sample Kolmogorov-Smirnov test against Normal(0, scale^2).
inline KsResult ks_normal(std::vector<double> samples, double scale) {
  if (samples.empty()) throw NumericError("KS test needs samples");
  if (samples.size() < 20) throw NumericError("KS test needs at least 20 samples");
  if (!(scale > 0.0)) throw NumericError("KS scale must be positive");
  std::sort(samples.begin(), samples.end());
  const double m = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = normal_cdf(samples[i] / scale);
    d = std::max({d, f - i / m, (i + 1) / m - f});
  }
  return {d, kolmogorov_q(std::sqrt(m) * d)};
}

struct AnalyticTarget {
  std::string name;
  double mean = 0.0;     // limit per node
  double variance = 0.0; // Gaussian-law variance
};

struct CompareOptions {
  double mean_sigmas = 4.0;
  double mean_abs_tol = 1e-12;
  double ratio_low = 0.85;
  double ratio_high = 1.15;
  double ks_max = 0.05;
};

struct CompareRow {
  std::string name;
  double empirical_mean = 0, limit = 0, gap = 0, standard_error = 0;
  double empirical_variance = 0, analytic_variance = 0, ratio = 1;
  double ks_statistic = 0, ks_p = 1;
  bool mean_pass = false, variance_pass = false, ks_pass = false;
  bool pass() const { return mean_pass && variance_pass && ks_pass; }
};

inline std::vector<CompareRow> compare_report(const EnsembleStats& stats, const std::vector<AnalyticTarget>& targets,
                                              CompareOptions opt = {}) {
  std::vector<CompareRow> rows;
  for (const auto& t : targets) {
    auto it = std::find_if(stats.observables.begin(), stats.observables.end(),
                           [&](const ObservableStats& o) { return o.name == t.name; });
    if (it == stats.observables.end()) throw ConfigError("no ensemble statistics for observable '" + t.name + "'");
    CompareRow r;
    r.name = t.name;
    r.empirical_mean = it->mean_fraction;
    r.limit = t.mean;
    r.gap = r.empirical_mean - r.limit;
    r.standard_error = std::sqrt(it->variance / (static_cast<double>(stats.n) * static_cast<double>(stats.m)));
    r.mean_pass = std::abs(r.gap) <= opt.mean_sigmas * r.standard_error + opt.mean_abs_tol;
    r.empirical_variance = it->variance;
    r.analytic_variance = t.variance;
    const bool degenerate = t.variance <= 1e-12;
    if (degenerate) {
      r.ratio = it->variance <= 1e-12 ? 1.0 : std::numeric_limits<double>::infinity();
      r.variance_pass = it->variance <= 1e-12;
      r.ks_pass = r.variance_pass;
    } else {
      r.ratio = it->variance / t.variance;
      r.variance_pass = r.ratio >= opt.ratio_low && r.ratio <= opt.ratio_high;
      if (it->standardized.size() >= 20) {
        const KsResult ks = ks_normal(it->standardized, std::sqrt(t.variance));
        r.ks_statistic = ks.statistic;
        r.ks_p = ks.p_value;
        r.ks_pass = ks.statistic < opt.ks_max;
      } else {
        r.ks_pass = true;
      }
    }
    rows.push_back(r);
  }
  return rows;
}

} // namespace contagion
