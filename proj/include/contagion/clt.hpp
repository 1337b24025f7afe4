#pragma once

#include <cmath>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "binomial.hpp"
#include "errors.hpp"
#include "limits.hpp"
#include "model.hpp"
#include "quadrature.hpp"

namespace contagion {

// phi_{x,theta,j}(v) = mu_x q_x(theta) beta(d_in, v, j), with theta up to d_in + 1.
struct KernelContext {
  NetworkSpec spec;
  QuadratureOptions quad;

  explicit KernelContext(NetworkSpec s, QuadratureOptions q = {}) : spec(std::move(s)), quad(q) {}

  const Characteristic& cls(int x) const {
    if (x < 0 || x >= static_cast<int>(spec.classes.size())) throw NumericError("class index out of range");
    return spec.classes[x];
  }
  double mass(int x, int theta) const { return cls(x).weight * cls(x).q(theta); }
  double phi(int x, int theta, int j, double v) const { return mass(x, theta) * binom_tail(cls(x).d_in, v, j); }
  double dphi(int x, int theta, int j, double v) const {
    return mass(x, theta) * binom_tail_deriv(cls(x).d_in, v, j);
  }
};

namespace detail {
inline void check_theta(const KernelContext& ctx, int x, int theta) {
  if (theta < 0 || theta > ctx.cls(x).d_in + 1) throw NumericError("threshold index out of range");
}
inline void check_y(double y) {
  if (!(y >= 0.0 && y <= 1.0)) throw NumericError("kernel argument y outside [0,1]");
}
} // namespace detail

// Fluctuation covariance of the counts of (x,theta)-bins holding at least s and
// at least s+k alive balls, from ball deaths alone. Zero at s = 0.
// y = 0 answers with the long-time limit 0.
inline double sigma_pair(const KernelContext& ctx, int x, int theta, int s, int k, double y) {
  detail::check_theta(ctx, x, theta);
  detail::check_y(y);
  const int d = ctx.cls(x).d_in;
  if (s < 0 || k < 0 || s > d) throw NumericError("sigma_pair index out of range");
  const int r = s + k;
  if (s == 0 || r > d || y >= 1.0 || y <= 0.0 || ctx.mass(x, theta) == 0.0) return 0.0;
  double total = 0.0;
  for (int j = r; j <= d; ++j) {
    const double c = choose(j - 1, s - 1) * choose(j - 1, r - 1);
    const int p = 2 * j - 2 * s - k;
    auto g = [&](double v) { return std::pow(v - y, p) * std::pow(v, -2 * j) * ctx.dphi(x, theta, j, v); };
    total += c * integrate(g, y, 1.0, ctx.quad);
  }
  return std::pow(y, 2 * s + k) * total;
}

// Multinomial part: beta(d,y,s1) beta(d,y,s2) psi_{theta1,theta2}.
inline double sigma_star(const KernelContext& ctx, int x, int theta1, int theta2, int s1, int s2, double y) {
  detail::check_theta(ctx, x, theta1);
  detail::check_theta(ctx, x, theta2);
  detail::check_y(y);
  const auto& c = ctx.cls(x);
  const double q1 = c.q(theta1), q2 = c.q(theta2);
  const double psi = theta1 == theta2 ? c.weight * q1 * (1.0 - q1) : -c.weight * q1 * q2;
  return binom_tail(c.d_in, y, s1) * binom_tail(c.d_in, y, s2) * psi;
}

// Variance of the alive in-ball count fluctuation.
inline double sigma_hat_global(const NetworkSpec& spec, double y) {
  detail::check_y(y);
  return spec.lambda() * (y - y * y);
}

// Covariance between the alive in-ball count and the count of (x,theta)-bins
// holding at least s alive balls. Zero at s = 0.
inline double sigma_hat_pair(const KernelContext& ctx, int x, int theta, int s, double y) {
  detail::check_theta(ctx, x, theta);
  detail::check_y(y);
  const int d = ctx.cls(x).d_in;
  if (s < 0 || s > d) throw NumericError("sigma_hat_pair index out of range");
  if (s == 0 || y >= 1.0 || y <= 0.0 || ctx.mass(x, theta) == 0.0) return 0.0;
  double total = 0.0;
  for (int j = s; j <= d; ++j) {
    const double c = choose(j - 1, s - 1);
    auto g = [&](double v) { return std::pow(v - y, j - s) * std::pow(v, -(j + 1)) * ctx.dphi(x, theta, j, v); };
    total += c * integrate(g, y, 1.0, ctx.quad);
  }
  return std::pow(y, s + 1) * total;
}

// Observable as a linear combination of the bin-count fluctuations Z_{x,theta,s}
// and the alive in-ball fluctuation.
struct Functional {
  double L = 0.0;
  std::map<std::tuple<int, int, int>, double> terms;

  Functional& add(int x, int theta, int s, double c) {
    if (c != 0.0) terms[{x, theta, s}] += c;
    return *this;
  }
  Functional& axpy(double a, const Functional& o) {
    L += a * o.L;
    for (const auto& [k, v] : o.terms) terms[k] += a * v;
    return *this;
  }
};

enum class ObservableKind { S, D, Hplus, Iplus, W, Cell, Diamond };

struct Observable {
  ObservableKind kind = ObservableKind::D;
  int cls = 0, theta = 0, ell = 0;  // Cell
  double gamma_bar = 0.0;           // Diamond
  std::vector<double> default_loss; // Diamond, per class
  std::vector<double> link_loss;    // Diamond, per class

  static Observable of(ObservableKind k) {
    Observable o;
    o.kind = k;
    return o;
  }
  static Observable cell(int x, int theta, int ell) {
    Observable o = of(ObservableKind::Cell);
    o.cls = x;
    o.theta = theta;
    o.ell = ell;
    return o;
  }
  static Observable diamond(double gamma_bar, std::vector<double> ld, std::vector<double> li) {
    Observable o = of(ObservableKind::Diamond);
    o.gamma_bar = gamma_bar;
    o.default_loss = std::move(ld);
    o.link_loss = std::move(li);
    return o;
  }
  std::string name() const {
    switch (kind) {
    case ObservableKind::S: return "S";
    case ObservableKind::D: return "D";
    case ObservableKind::Hplus: return "Hplus";
    case ObservableKind::Iplus: return "Iplus";
    case ObservableKind::W: return "W";
    case ObservableKind::Cell:
      return "cell(" + std::to_string(cls) + "," + std::to_string(theta) + "," + std::to_string(ell) + ")";
    case ObservableKind::Diamond: return "diamond";
    }
    return "?";
  }
};

namespace detail {

inline Functional solvent_of_class(const NetworkSpec& spec, int x) {
  Functional f;
  const auto& c = spec.classes[x];
  for (int th = 1; th <= c.d_in + 1; ++th)
    if (c.q(th) != 0.0) f.add(x, th, c.pi(th), 1.0);
  return f;
}

inline Functional alive_solvent_of_class(const NetworkSpec& spec, int x) {
  Functional f;
  const auto& c = spec.classes[x];
  for (int th = 1; th <= c.d_in + 1; ++th) {
    if (c.q(th) == 0.0) continue;
    const int pi = c.pi(th);
    f.add(x, th, pi, pi);
    for (int s = pi + 1; s <= c.d_in; ++s) f.add(x, th, s, 1.0);
  }
  return f;
}

// Dead in-balls of solvent class-x nodes: d S_x - H_x.
inline Functional infected_links_of_class(const NetworkSpec& spec, int x) {
  Functional f = solvent_of_class(spec, x);
  for (auto& [k, v] : f.terms) v *= spec.classes[x].d_in;
  return f.axpy(-1.0, alive_solvent_of_class(spec, x));
}

} // namespace detail

inline Functional observable_functional(const NetworkSpec& spec, const Observable& obs) {
  Functional f;
  const int nx = static_cast<int>(spec.classes.size());
  switch (obs.kind) {
  case ObservableKind::S:
    for (int x = 0; x < nx; ++x) f.axpy(1.0, detail::solvent_of_class(spec, x));
    break;
  case ObservableKind::D:
    for (int x = 0; x < nx; ++x) f.axpy(-1.0, detail::solvent_of_class(spec, x));
    break;
  case ObservableKind::Hplus:
    for (int x = 0; x < nx; ++x) f.axpy(1.0, detail::alive_solvent_of_class(spec, x));
    break;
  case ObservableKind::Iplus:
    f.L = 1.0;
    for (int x = 0; x < nx; ++x) f.axpy(-1.0, detail::alive_solvent_of_class(spec, x));
    break;
  case ObservableKind::W:
    f.L = 1.0;
    for (int x = 0; x < nx; ++x) f.axpy(-spec.classes[x].d_out, detail::solvent_of_class(spec, x));
    break;
  case ObservableKind::Cell: {
    if (obs.cls < 0 || obs.cls >= nx) throw NumericError("cell class out of range");
    const auto& c = spec.classes[obs.cls];
    if (obs.ell < 0 || obs.ell >= obs.theta || obs.theta > c.d_in + 1) throw NumericError("cell index out of range");
    // Bins with exactly d - ell alive balls.
    const int s = c.d_in - obs.ell;
    f.add(obs.cls, obs.theta, s, 1.0);
    if (s + 1 <= c.d_in) f.add(obs.cls, obs.theta, s + 1, -1.0);
    break;
  }
  case ObservableKind::Diamond:
    if (static_cast<int>(obs.default_loss.size()) != nx || static_cast<int>(obs.link_loss.size()) != nx)
      throw NumericError("loss vectors do not match the class count");
    for (int x = 0; x < nx; ++x) {
      f.axpy(obs.default_loss[x], detail::solvent_of_class(spec, x));
      f.axpy(-obs.link_loss[x], detail::infected_links_of_class(spec, x));
    }
    break;
  }
  return f;
}

// Per-class limits: default fraction f_{x,D} = mu_x (1 - sum q beta) and
// infected-link density f_{x,I} = sum_theta sum_ell ell s_{x,theta,ell}, with
// their z-derivatives.
struct ClassLimits {
  double f_D = 0, f_I = 0, df_D = 0, df_I = 0;
};

// `alpha` is the fraction of in-links saved by an intervention, 0 at baseline.
inline ClassLimits class_limits(const Characteristic& c, double z, double alpha = 0.0) {
  ClassLimits r;
  const int d = c.d_in;
  const double u = alpha + (1.0 - alpha) * z;
  const double dead = (1.0 - alpha) * (1.0 - z);
  double solv = 0.0, dsolv = 0.0;
  for (int th = 1; th <= d + 1; ++th) {
    const double q = c.q(th);
    if (q == 0.0) continue;
    solv += q * binom_tail(d, u, c.pi(th));
    dsolv += q * (1.0 - alpha) * binom_tail_deriv(d, u, c.pi(th));
    for (int l = 1; l < th && l <= d; ++l) {
      r.f_I += c.weight * q * l * binom_pmf(d, dead, l);
      r.df_I += -c.weight * q * l * (1.0 - alpha) * binom_pmf_deriv(d, dead, l);
    }
  }
  r.f_D = c.weight * (1.0 - solv);
  r.df_D = -c.weight * dsolv;
  return r;
}

struct ValueAndDerivative {
  double value = 0.0, derivative = 0.0;
};

inline ValueAndDerivative observable_limit(const NetworkSpec& spec, const Observable& obs, double z) {
  if (obs.kind == ObservableKind::Diamond) {
    ValueAndDerivative r{obs.gamma_bar, 0.0};
    for (std::size_t x = 0; x < spec.classes.size(); ++x) {
      const ClassLimits cl = class_limits(spec.classes[x], z);
      r.value -= obs.default_loss[x] * cl.f_D + obs.link_loss[x] * cl.f_I;
      r.derivative -= obs.default_loss[x] * cl.df_D + obs.link_loss[x] * cl.df_I;
    }
    return r;
  }
  if (obs.kind == ObservableKind::Cell) {
    const auto& c = spec.classes.at(obs.cls);
    const double mq = c.weight * c.q(obs.theta);
    return {mq * binom_pmf(c.d_in, 1.0 - z, obs.ell), -mq * binom_pmf_deriv(c.d_in, 1.0 - z, obs.ell)};
  }
  const LimitReport v = eval_limit_functions(spec, z);
  const LimitDerivatives g = eval_limit_derivatives(spec, z);
  switch (obs.kind) {
  case ObservableKind::S: return {v.f_S, g.f_S};
  case ObservableKind::D: return {v.f_D, g.f_D};
  case ObservableKind::Hplus: return {v.f_Hplus, g.f_Hplus};
  case ObservableKind::Iplus: return {v.f_Iplus, g.f_Iplus};
  default: return {v.f_W, g.f_W};
  }
}

// Bilinear form of the fixed-time Gaussian fluctuations, with kernel caching.
class CovarianceEvaluator {
public:
  CovarianceEvaluator(const KernelContext& ctx, double y) : ctx_(ctx), y_(y) { detail::check_y(y); }

  double operator()(const Functional& a, const Functional& b) {
    double s = a.L * b.L * sigma_hat_global(ctx_.spec, y_);
    for (const auto& [k, v] : b.terms) s += a.L * v * hat(k);
    for (const auto& [k, v] : a.terms) s += b.L * v * hat(k);
    for (const auto& [ka, va] : a.terms)
      for (const auto& [kb, vb] : b.terms) {
        const auto [x1, t1, s1] = ka;
        const auto [x2, t2, s2] = kb;
        if (x1 != x2) continue;
        double c = sigma_star(ctx_, x1, t1, t2, s1, s2, y_);
        if (t1 == t2) c += pair(x1, t1, std::min(s1, s2), std::abs(s1 - s2));
        s += va * vb * c;
      }
    return s;
  }

private:
  double hat(const std::tuple<int, int, int>& k) {
    auto it = hat_.find(k);
    if (it != hat_.end()) return it->second;
    const auto [x, t, s] = k;
    return hat_[k] = sigma_hat_pair(ctx_, x, t, s, y_);
  }
  double pair(int x, int t, int s, int k) {
    auto key = std::make_tuple(x, t, s, k);
    auto it = pair_.find(key);
    if (it != pair_.end()) return it->second;
    return pair_[key] = sigma_pair(ctx_, x, t, s, k, y_);
  }

  const KernelContext& ctx_;
  double y_;
  std::map<std::tuple<int, int, int>, double> hat_;
  std::map<std::tuple<int, int, int, int>, double> pair_;
};

inline double process_covariance(const KernelContext& ctx, ObservableKind a, ObservableKind b, double y) {
  CovarianceEvaluator cov(ctx, y);
  return cov(observable_functional(ctx.spec, Observable::of(a)), observable_functional(ctx.spec, Observable::of(b)));
}

struct CellIndex {
  int cls, theta, ell;
};

inline double cell_covariance(const KernelContext& ctx, CellIndex a, CellIndex b, double t) {
  if (!(t >= 0.0)) throw NumericError("time must be nonnegative");
  const auto fa = observable_functional(ctx.spec, Observable::cell(a.cls, a.theta, a.ell));
  const auto fb = observable_functional(ctx.spec, Observable::cell(b.cls, b.theta, b.ell));
  if (a.cls != b.cls) return 0.0;
  CovarianceEvaluator cov(ctx, std::exp(-t));
  return cov(fa, fb);
}

struct GaussianLaw {
  std::string observable;
  bool available = false;
  double z_star = 0.0;
  double zhat_n = 0.0;
  double alpha = 0.0;
  double limit = 0.0;     // f(z_star)
  double centering = 0.0; // f^{(n)}(zhat_n), per node
  double delta = 0.0;     // f'(z_star) / alpha
  double variance = 0.0;
  std::vector<std::string> diagnostics;
};

namespace detail {
inline double clip_variance(double v, std::vector<std::string>& diag) {
  if (v >= 0.0) return v;
  if (v >= -1e-9) {
    diag.push_back("negative variance " + std::to_string(v) + " from rounding clipped to 0");
    return 0.0;
  }
  throw NumericError("assembled variance is negative: " + std::to_string(v));
}
} // namespace detail

// Variance of Z_obs - Delta Z_W at z_star, Delta = f'_obs / f'_W, for an
// already-assembled functional. `extra` adds independent noise variance.
inline GaussianLaw final_state_law_for(const KernelContext& ctx, const Observable& obs, const Functional& f,
                                       RootOptions opt = {}, double extra = 0.0) {
  GaussianLaw law;
  law.observable = obs.name();
  const FixedPoint fp = solve_zstar(ctx.spec, opt);
  law.z_star = fp.z_star;
  law.alpha = fp.alpha;
  if (!fp.stable || fp.z_star <= 0.0) {
    law.diagnostics.push_back(std::string("regime ") + regime_name(fp.regime) + (fp.stable ? "" : ", unstable") +
                              ": no Gaussian law");
    if (!fp.diagnostic.empty()) law.diagnostics.push_back(fp.diagnostic);
    return law;
  }
  const NetworkSpec fin = ctx.spec.has_finite_overrides() ? finite_n_view(ctx.spec) : ctx.spec;
  const FixedPoint hat = ctx.spec.has_finite_overrides() ? solve_zstar(fin, opt) : fp;
  law.zhat_n = hat.z_star;
  if (!(hat.z_star > fp.z_star - 0.1)) {
    law.diagnostics.push_back("no finite-n root in (z_star - 0.1, 1]");
    return law;
  }
  const ValueAndDerivative lim = observable_limit(ctx.spec, obs, fp.z_star);
  law.limit = lim.value;
  law.centering = observable_limit(fin, obs, hat.z_star).value;
  law.delta = lim.derivative / fp.alpha;
  CovarianceEvaluator cov(ctx, fp.z_star);
  const Functional w = observable_functional(ctx.spec, Observable::of(ObservableKind::W));
  const double v = cov(f, f) + law.delta * law.delta * cov(w, w) - 2.0 * law.delta * cov(f, w) + extra;
  law.variance = detail::clip_variance(v, law.diagnostics);
  law.available = true;
  return law;
}

inline GaussianLaw final_state_law(const KernelContext& ctx, const Observable& obs, RootOptions opt = {}) {
  return final_state_law_for(ctx, obs, observable_functional(ctx.spec, obs), opt);
}

} // namespace contagion
