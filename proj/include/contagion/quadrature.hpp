#pragma once

#include <array>
#include <cmath>
#include <queue>
#include <vector>

#include "errors.hpp"

namespace contagion {

struct QuadratureOptions {
  double rel_tol = 1e-10;
  double abs_tol = 1e-15;
  int max_panels = 1 << 14;
};

namespace detail {

struct GaussLegendre15 {
  std::array<double, 15> x{}, w{};
  GaussLegendre15() {
    const int n = 15;
    for (int i = 0; i < n; ++i) {
      double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = t;
        for (int k = 2; k <= n; ++k) {
          double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
          p0 = p1;
          p1 = p2;
        }
        dp = n * (t * p1 - p0) / (t * t - 1.0);
        double dt = p1 / dp;
        t -= dt;
        if (std::abs(dt) < 1e-16) break;
      }
      x[i] = t;
      w[i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
  }
};

inline const GaussLegendre15& gl15() {
  static const GaussLegendre15 rule;
  return rule;
}

template <class F>
double gl_panel(const F& f, double a, double b) {
  const auto& r = gl15();
  const double h = 0.5 * (b - a), m = 0.5 * (a + b);
  double s = 0.0;
  for (int i = 0; i < 15; ++i) s += r.w[i] * f(m + h * r.x[i]);
  return s * h;
}

} // namespace detail

// Globally adaptive 15-point Gauss-Legendre: the panel with the largest
// two-halves discrepancy is split until the summed discrepancy meets the
// tolerance or the panel budget runs out.
template <class F>
double integrate(const F& f, double a, double b, QuadratureOptions opt = {}) {
  if (!(b > a)) return 0.0;
  struct Panel {
    double a, b, value, err;
    bool operator<(const Panel& o) const { return err < o.err; }
  };
  auto make = [&](double lo, double hi) {
    const double mid = 0.5 * (lo + hi);
    const double whole = detail::gl_panel(f, lo, hi);
    const double halves = detail::gl_panel(f, lo, mid) + detail::gl_panel(f, mid, hi);
    return Panel{lo, hi, halves, std::abs(halves - whole)};
  };
  std::priority_queue<Panel> heap;
  Panel p0 = make(a, b);
  double total = p0.value, err = p0.err;
  heap.push(p0);
  int panels = 1;
  while (err > std::max(opt.abs_tol, opt.rel_tol * std::abs(total))) {
    if (panels >= opt.max_panels) break;
    Panel p = heap.top();
    heap.pop();
    const double mid = 0.5 * (p.a + p.b);
    Panel l = make(p.a, mid), r = make(mid, p.b);
    total += l.value + r.value - p.value;
    err += l.err + r.err - p.err;
    heap.push(l);
    heap.push(r);
    ++panels;
  }
  // Recompute the sum from the leaves to shed accumulated rounding.
  double s = 0.0;
  while (!heap.empty()) {
    s += heap.top().value;
    heap.pop();
  }
  return s;
}

} // namespace contagion
