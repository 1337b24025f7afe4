#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "binomial.hpp"
#include "model.hpp"

namespace contagion {

struct CellLimit {
  int cls, theta, ell;
  double value;
};

struct LimitReport {
  double z = 1.0;
  double lambda = 0.0;
  double f_S = 0, f_D = 0, f_Hplus = 0, f_Iplus = 0, f_W = 0;
  std::vector<CellLimit> cells; // s_{x,theta,ell}(z), ell < theta, theta up to d_in + 1
};

struct LimitDerivatives {
  double z = 1.0;
  double f_S = 0, f_D = 0, f_Hplus = 0, f_Iplus = 0, f_W = 0;
  std::vector<CellLimit> cells;
};

inline LimitReport eval_limit_functions(const NetworkSpec& spec, double z) {
  detail::check_unit(z);
  LimitReport r;
  r.z = z;
  r.lambda = spec.lambda();
  double solvent_out = 0.0;
  for (std::size_t x = 0; x < spec.classes.size(); ++x) {
    const auto& c = spec.classes[x];
    const int d = c.d_in;
    for (int th = 1; th <= d + 1; ++th) {
      const double mq = c.weight * c.q(th);
      if (mq == 0.0) continue;
      const int pi = c.pi(th);
      const double solv = mq * binom_tail(d, z, pi);
      r.f_S += solv;
      solvent_out += c.d_out * solv;
      for (int a = std::max(pi, 1); a <= d; ++a) r.f_Hplus += mq * a * binom_pmf(d, z, a);
      for (int l = 0; l < th; ++l) r.cells.push_back({static_cast<int>(x), th, l, mq * binom_pmf(d, 1.0 - z, l)});
    }
  }
  r.f_D = 1.0 - r.f_S;
  r.f_Iplus = r.lambda * z - r.f_Hplus;
  r.f_W = r.lambda * z - solvent_out;
  return r;
}

inline LimitDerivatives eval_limit_derivatives(const NetworkSpec& spec, double z) {
  detail::check_unit(z);
  LimitDerivatives r;
  r.z = z;
  const double lambda = spec.lambda();
  double solvent_out = 0.0;
  for (std::size_t x = 0; x < spec.classes.size(); ++x) {
    const auto& c = spec.classes[x];
    const int d = c.d_in;
    for (int th = 1; th <= d + 1; ++th) {
      const double mq = c.weight * c.q(th);
      if (mq == 0.0) continue;
      const int pi = c.pi(th);
      const double solv = mq * binom_tail_deriv(d, z, pi);
      r.f_S += solv;
      solvent_out += c.d_out * solv;
      for (int a = std::max(pi, 1); a <= d; ++a) r.f_Hplus += mq * a * binom_pmf_deriv(d, z, a);
      for (int l = 0; l < th; ++l) r.cells.push_back({static_cast<int>(x), th, l, -mq * binom_pmf_deriv(d, 1.0 - z, l)});
    }
  }
  r.f_D = -r.f_S;
  r.f_Iplus = lambda - r.f_Hplus;
  r.f_W = lambda - solvent_out;
  return r;
}

inline double f_W(const NetworkSpec& spec, double z) {
  detail::check_unit(z);
  double solvent_out = 0.0;
  for (const auto& c : spec.classes)
    for (int th = 1; th <= c.d_in + 1; ++th) {
      const double q = c.q(th);
      if (q != 0.0) solvent_out += c.weight * c.d_out * q * binom_tail(c.d_in, z, c.pi(th));
    }
  return spec.lambda() * z - solvent_out;
}

inline double f_W_deriv(const NetworkSpec& spec, double z) {
  detail::check_unit(z);
  double solvent_out = 0.0;
  for (const auto& c : spec.classes)
    for (int th = 1; th <= c.d_in + 1; ++th) {
      const double q = c.q(th);
      if (q != 0.0) solvent_out += c.weight * c.d_out * q * binom_tail_deriv(c.d_in, z, c.pi(th));
    }
  return spec.lambda() - solvent_out;
}

enum class Regime { total_collapse, interior, no_contagion };

inline const char* regime_name(Regime r) {
  switch (r) {
  case Regime::total_collapse: return "total-collapse";
  case Regime::interior: return "interior";
  case Regime::no_contagion: return "no-contagion";
  }
  return "?";
}

struct FixedPoint {
  double z_star = 1.0;
  bool stable = false;
  double alpha = 0.0; // f_W'(z_star)
  Regime regime = Regime::interior;
  std::string diagnostic;
};

struct RootOptions {
  double tol = 1e-12;
  int grid = 10000;
};

// Largest root in [0,1] of a function with F(1) >= 0 and F(0) <= 0: downward
// grid scan for the first sign change or near-zero local minimum, then
// bisection (or golden-section for the touching case). `scale` sets the
// residual tolerance 10 tol scale used for tangential roots.
inline FixedPoint solve_largest_root(const std::function<double(double)>& F, const std::function<double(double)>& dF,
                                     double scale, RootOptions opt = {}) {
  if (!(opt.tol > 0.0)) throw NumericError("root tolerance must be positive");
  if (opt.grid < 2) throw NumericError("root grid needs at least 2 points");
  FixedPoint fp;
  const double resid = 10.0 * opt.tol * std::max(scale, 1.0);
  auto finish = [&](double z, Regime reg) {
    fp.z_star = z;
    fp.regime = reg;
    fp.alpha = dF(z);
    fp.stable = fp.alpha > 0.0;
    return fp;
  };
  const double f1 = F(1.0);
  if (std::abs(f1) <= 1e-14 * std::max(scale, 1.0)) return finish(1.0, Regime::no_contagion);
  const bool pos = f1 > 0.0;
  const int N = opt.grid;
  double prev2 = f1, prev = f1;
  double z_prev = 1.0;
  for (int k = 1; k <= N; ++k) {
    const double z = 1.0 - static_cast<double>(k) / N;
    const double f = F(z);
    const bool crossed = f == 0.0 || (f > 0.0) != pos;
    if (crossed) {
      if (f == 0.0) {
        if (z == 0.0) return finish(z, Regime::total_collapse);
        finish(z, Regime::interior);
        const double below = F(z - 1.0 / N);
        if (below != 0.0 && (below > 0.0) == pos) {
          fp.stable = false;
          fp.diagnostic = "tangential root: f_W touches zero without crossing";
        }
        return fp;
      }
      double lo = z, hi = z_prev; // sign(F(hi)) == sign(f1)
      while (hi - lo > opt.tol) {
        const double mid = 0.5 * (lo + hi);
        const double fm = F(mid);
        if (fm == 0.0) {
          lo = hi = mid;
          break;
        }
        if ((fm > 0.0) == pos)
          hi = mid;
        else
          lo = mid;
      }
      return finish(0.5 * (lo + hi), Regime::interior);
    }
    // A local minimum of |F| that nearly touches zero is a tangential root.
    if (k >= 2 && std::abs(prev) <= std::abs(prev2) && std::abs(prev) <= std::abs(f)) {
      double a = z, b = std::min(1.0, z_prev + 1.0 / N);
      const double g = 0.5 * (std::sqrt(5.0) - 1.0);
      double c1 = b - g * (b - a), c2 = a + g * (b - a);
      double f1c = std::abs(F(c1)), f2c = std::abs(F(c2));
      while (b - a > opt.tol) {
        if (f1c < f2c) {
          b = c2;
          c2 = c1;
          f2c = f1c;
          c1 = b - g * (b - a);
          f1c = std::abs(F(c1));
        } else {
          a = c1;
          c1 = c2;
          f1c = f2c;
          c2 = a + g * (b - a);
          f2c = std::abs(F(c2));
        }
      }
      const double zt = 0.5 * (a + b);
      if (std::abs(F(zt)) <= resid) {
        finish(zt, Regime::interior);
        fp.stable = false;
        fp.diagnostic = "tangential root: f_W touches zero without crossing";
        return fp;
      }
    }
    prev2 = prev;
    prev = f;
    z_prev = z;
  }
  fp.diagnostic = "f_W keeps its sign on the grid over (0,1]";
  return finish(0.0, Regime::total_collapse);
}

inline FixedPoint solve_zstar(const NetworkSpec& spec, RootOptions opt = {}) {
  return solve_largest_root([&](double z) { return f_W(spec, z); }, [&](double z) { return f_W_deriv(spec, z); },
                            spec.lambda(), opt);
}

inline FixedPoint solve_zstar(const NetworkSpec& spec, double tol) { return solve_zstar(spec, RootOptions{tol, 10000}); }

inline LimitReport trajectory_limits(const NetworkSpec& spec, double t) {
  if (!(t >= 0.0)) throw NumericError("time must be nonnegative");
  return eval_limit_functions(spec, std::exp(-t));
}

struct SweepPoint {
  double eps;
  double z_star;
  Regime regime;
  bool stable;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  bool monotone = true; // z_star nonincreasing in eps
  double max_jump = 0.0;
};

inline SweepResult zstar_sweep(const std::function<NetworkSpec(double)>& family, const std::vector<double>& eps_grid,
                               RootOptions opt = {}) {
  SweepResult out;
  for (double e : eps_grid) {
    const NetworkSpec s = validate_spec(family(e));
    const FixedPoint fp = solve_zstar(s, opt);
    out.points.push_back({e, fp.z_star, fp.regime, fp.stable});
  }
  for (std::size_t i = 1; i < out.points.size(); ++i) {
    const double jump = out.points[i].z_star - out.points[i - 1].z_star;
    if (jump > 10.0 * opt.tol) out.monotone = false;
    out.max_jump = std::max(out.max_jump, std::abs(jump));
  }
  return out;
}

} // namespace contagion
