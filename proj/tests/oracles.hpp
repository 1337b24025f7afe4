#pragma once

// Independent reference computations used only by the test suites.

#include <cmath>
#include <functional>
#include <vector>

#include "contagion/model.hpp"

namespace oracle {

// Composite Simpson rule on `panels` (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, long panels = 1000000) {
  if (panels % 2) ++panels;
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (long i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

inline double choose(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

inline double pmf(int d, double y, int a) { return choose(d, a) * std::pow(y, a) * std::pow(1.0 - y, d - a); }

// Density of phi_{x,theta,j} from d/dv P(Bin(d,v) >= j) = d P(Bin(d-1,v) = j-1).
inline double dphi(const contagion::Characteristic& c, int theta, int j, double v) {
  return c.weight * c.q(theta) * c.d_in * pmf(c.d_in - 1, v, j - 1);
}

inline double sigma_pair(const contagion::Characteristic& c, int theta, int s, int k, double y) {
  const int r = s + k;
  double total = 0;
  for (int j = r; j <= c.d_in; ++j) {
    const int p = 2 * j - 2 * s - k;
    total += choose(j - 1, s - 1) * choose(j - 1, r - 1) *
             simpson([&](double v) { return std::pow(v - y, p) * std::pow(v, -2 * j) * dphi(c, theta, j, v); }, y, 1.0);
  }
  return std::pow(y, 2 * s + k) * total;
}

inline double sigma_hat_pair(const contagion::Characteristic& c, int theta, int s, double y) {
  double total = 0;
  for (int j = s; j <= c.d_in; ++j)
    total += choose(j - 1, s - 1) *
             simpson([&](double v) { return std::pow(v - y, j - s) * std::pow(v, -(j + 1)) * dphi(c, theta, j, v); }, y,
                     1.0);
  return std::pow(y, s + 1) * total;
}

// Per-node state at a fixed time: class x, threshold theta (d_in + 1 immune),
// alive in-balls A ~ Bin(d_in, y) independent of theta.
struct NodeState {
  int x, theta, alive;
  const contagion::Characteristic* c;
  bool solvent() const { return theta >= 1 && alive >= c->d_in - theta + 1; }
};

using NodeFn = std::function<double(const NodeState&)>;

// Sum over classes of mu_x Cov_x(g, h) under the product law.
inline double node_covariance(const contagion::NetworkSpec& spec, double y, const NodeFn& g, const NodeFn& h) {
  double total = 0.0;
  for (int x = 0; x < static_cast<int>(spec.classes.size()); ++x) {
    const auto& c = spec.classes[x];
    double eg = 0, eh = 0, egh = 0;
    for (int th = 0; th <= c.d_in + 1; ++th)
      for (int a = 0; a <= c.d_in; ++a) {
        const double p = c.q(th) * pmf(c.d_in, y, a);
        if (p == 0.0) continue;
        NodeState st{x, th, a, &c};
        const double gv = g(st), hv = h(st);
        eg += p * gv;
        eh += p * hv;
        egh += p * gv * hv;
      }
    total += c.weight * (egh - eg * eh);
  }
  return total;
}

inline NodeFn solvent() {
  return [](const NodeState& s) { return s.solvent() ? 1.0 : 0.0; };
}
inline NodeFn alive_solvent() {
  return [](const NodeState& s) { return s.solvent() ? double(s.alive) : 0.0; };
}
inline NodeFn alive() {
  return [](const NodeState& s) { return double(s.alive); };
}
inline NodeFn white() {
  return [](const NodeState& s) { return s.alive - (s.solvent() ? double(s.c->d_out) : 0.0); };
}
inline NodeFn infected() {
  return [](const NodeState& s) { return s.alive - (s.solvent() ? double(s.alive) : 0.0); };
}
inline NodeFn cell(int x, int theta, int ell) {
  return [=](const NodeState& s) {
    return (s.solvent() && s.x == x && s.theta == theta && s.alive == s.c->d_in - ell) ? 1.0 : 0.0;
  };
}
inline NodeFn bins_at_least(int x, int theta, int sidx) {
  return [=](const NodeState& s) { return (s.x == x && s.theta == theta && s.alive >= sidx) ? 1.0 : 0.0; };
}
inline NodeFn wealth(std::vector<double> ld, std::vector<double> li) {
  return [=](const NodeState& s) {
    return s.solvent() ? -li[s.x] * (s.c->d_in - s.alive) : -ld[s.x];
  };
}

} // namespace oracle
