#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cascade.hpp"
#include "clt.hpp"
#include "errors.hpp"
#include "model.hpp"
#include "netgen.hpp"
#include "rng.hpp"

namespace contagion {

enum class LossMode { deterministic, random };

struct AggregateValues {
  std::int64_t gamma_count = 0;  // solvent nodes
  double gamma_external = 0.0;   // default losses only
  double gamma_systemwide = 0.0; // default and link losses
  std::vector<std::int64_t> D_x; // defaults per class
  std::vector<std::int64_t> I_x; // infected in-links of solvent nodes per class
};

// Baseline wealth is n gamma_bar. Random mode draws one loss per defaulted
// node and one per infected link, in node order.
inline AggregateValues evaluate_aggregates(const RealizedNetwork& net, const CascadeResult& res, const RiskSpec& risk,
                                           LossMode mode = LossMode::deterministic, std::uint64_t seed = 0) {
  const auto& pop = net.pop;
  const std::size_t n = pop.size();
  if (res.defaulted.size() != n || res.dead.size() != n) throw ModelError("cascade result does not match the network");
  std::vector<const ClassLoss*> loss;
  for (const auto& id : pop.class_ids) loss.push_back(&risk.loss(id));
  AggregateValues out;
  out.D_x.assign(pop.class_ids.size(), 0);
  out.I_x.assign(pop.class_ids.size(), 0);
  Rng rng(derive_seed(seed, "losses"));
  double default_total = 0.0, link_total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const ClassLoss& l = *loss[pop.cls[i]];
    if (res.defaulted[i]) {
      ++out.D_x[pop.cls[i]];
      default_total += (mode == LossMode::random && l.default_dist) ? l.default_dist->sample(rng) : l.default_loss;
    } else {
      out.I_x[pop.cls[i]] += res.dead[i];
      for (int k = 0; k < res.dead[i]; ++k)
        link_total += (mode == LossMode::random && l.link_dist) ? l.link_dist->sample(rng) : l.link_loss;
    }
  }
  std::int64_t defaults = 0;
  for (auto d : out.D_x) defaults += d;
  const double base = static_cast<double>(n) * risk.gamma_bar;
  out.gamma_count = static_cast<std::int64_t>(n) - defaults;
  out.gamma_external = base - default_total;
  out.gamma_systemwide = base - default_total - link_total;
  return out;
}

inline Observable diamond_observable(const NetworkSpec& spec, const RiskSpec& risk) {
  std::vector<double> ld, li;
  for (const auto& c : spec.classes) {
    ld.push_back(risk.loss(c.id).default_loss);
    li.push_back(risk.loss(c.id).link_loss);
  }
  return Observable::diamond(risk.gamma_bar, ld, li);
}

inline ValueAndDerivative f_diamond(const NetworkSpec& spec, const RiskSpec& risk, double z) {
  detail::check_unit(z);
  return observable_limit(spec, diamond_observable(spec, risk), z);
}

struct DiamondLaw {
  GaussianLaw law;
  double sigma_11 = 0.0; // default-loss part
  double sigma_22 = 0.0; // link-loss part
  double sigma_12 = 0.0;
  double sigma_diamond_W = 0.0;
  double sigma_WW = 0.0;
};

namespace detail {
inline Functional default_part(const NetworkSpec& spec, const RiskSpec& risk) {
  Functional f;
  for (int x = 0; x < static_cast<int>(spec.classes.size()); ++x)
    f.axpy(risk.loss(spec.classes[x].id).default_loss, solvent_of_class(spec, x));
  return f;
}
inline Functional link_part(const NetworkSpec& spec, const RiskSpec& risk) {
  Functional f;
  for (int x = 0; x < static_cast<int>(spec.classes.size()); ++x)
    f.axpy(-risk.loss(spec.classes[x].id).link_loss, infected_links_of_class(spec, x));
  return f;
}
} // namespace detail

inline DiamondLaw diamond_limit_and_variance(const KernelContext& ctx, const RiskSpec& risk, RootOptions opt = {}) {
  DiamondLaw out;
  const Observable obs = diamond_observable(ctx.spec, risk);
  out.law = final_state_law(ctx, obs, opt);
  if (!out.law.available) return out;
  CovarianceEvaluator cov(ctx, out.law.z_star);
  const Functional f1 = detail::default_part(ctx.spec, risk), f2 = detail::link_part(ctx.spec, risk);
  const Functional w = observable_functional(ctx.spec, Observable::of(ObservableKind::W));
  Functional f = f1;
  f.axpy(1.0, f2);
  out.sigma_11 = cov(f1, f1);
  out.sigma_22 = cov(f2, f2);
  out.sigma_12 = cov(f1, f2);
  out.sigma_diamond_W = cov(f, w);
  out.sigma_WW = cov(w, w);
  return out;
}

namespace detail {
// Loss-noise variance: sum_x f_{x,D} Sigma^2_{x,D} + f_{x,I} Sigma^2_{x,I}.
inline double loss_noise(const NetworkSpec& spec, const RiskSpec& risk, double y) {
  double s = 0.0;
  for (const auto& c : spec.classes) {
    const ClassLoss& l = risk.loss(c.id);
    const ClassLimits cl = class_limits(c, y);
    if (l.default_dist) s += cl.f_D * l.default_dist->variance();
    if (l.link_dist) s += cl.f_I * l.link_dist->variance();
  }
  return s;
}
} // namespace detail

// Psi(t) for i.i.d. random losses at time t (y = e^{-t}).
inline double random_loss_variance(const KernelContext& ctx, const RiskSpec& risk, double t) {
  if (!risk.has_random()) throw ModelError("random-loss variance needs declared loss distributions");
  if (!(t >= 0.0)) throw NumericError("time must be nonnegative");
  const double y = std::exp(-t);
  CovarianceEvaluator cov(ctx, y);
  const Functional f = observable_functional(ctx.spec, diamond_observable(ctx.spec, risk));
  return detail::loss_noise(ctx.spec, risk, y) + cov(f, f);
}

// Final-state law of the random-loss aggregate: Psi at z_star plus the
// stopping-time correction, which involves only the loss means.
inline GaussianLaw random_loss_final_law(const KernelContext& ctx, const RiskSpec& risk, RootOptions opt = {}) {
  if (!risk.has_random()) throw ModelError("random-loss variance needs declared loss distributions");
  const Observable obs = diamond_observable(ctx.spec, risk);
  const FixedPoint fp = solve_zstar(ctx.spec, opt);
  const double extra = fp.z_star > 0.0 ? detail::loss_noise(ctx.spec, risk, fp.z_star) : 0.0;
  GaussianLaw law = final_state_law_for(ctx, obs, observable_functional(ctx.spec, obs), opt, extra);
  law.observable = "diamond_random";
  return law;
}

} // namespace contagion
