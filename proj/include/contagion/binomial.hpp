#pragma once

#include <cmath>
#include <string>

#include "errors.hpp"

namespace contagion {

inline double choose(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0.0;
  k = k < n - k ? k : n - k;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

namespace detail {
inline void check_unit(double z) {
  if (!(z >= 0.0 && z <= 1.0)) throw NumericError("probability argument outside [0,1]: " + std::to_string(z));
}

// z^a (1-z)^b C(d,l) without range checks.
inline double binom_term(int d, double z, int l) {
  if (d <= 64) return choose(d, l) * std::pow(z, l) * std::pow(1.0 - z, d - l);
  if (z == 0.0) return l == 0 ? 1.0 : 0.0;
  if (z == 1.0) return l == d ? 1.0 : 0.0;
  double lg = std::lgamma(d + 1.0) - std::lgamma(l + 1.0) - std::lgamma(d - l + 1.0);
  return std::exp(lg + l * std::log(z) + (d - l) * std::log1p(-z));
}
} // namespace detail

// P(Bin(d,z) = l).
inline double binom_pmf(int d, double z, int l) {
  detail::check_unit(z);
  if (l < 0 || l > d) return 0.0;
  return detail::binom_term(d, z, l);
}

// P(Bin(d,z) >= k); 1 for k <= 0, 0 for k > d.
inline double binom_tail(int d, double z, int k) {
  detail::check_unit(z);
  if (k <= 0) return 1.0;
  if (k > d) return 0.0;
  double s = 0.0;
  for (int l = k; l <= d; ++l) s += detail::binom_term(d, z, l);
  return s < 1.0 ? s : 1.0;
}

// d/dz P(Bin(d,z) >= j) = j C(d,j) z^{j-1} (1-z)^{d-j}.
inline double binom_tail_deriv(int d, double z, int j) {
  detail::check_unit(z);
  if (j <= 0 || j > d) return 0.0;
  return d * detail::binom_term(d - 1, z, j - 1);
}

// d/dz P(Bin(d,z) = l) = d [b(d-1,z,l-1) - b(d-1,z,l)].
inline double binom_pmf_deriv(int d, double z, int l) {
  detail::check_unit(z);
  if (d <= 0 || l < 0 || l > d) return 0.0;
  double a = l >= 1 ? detail::binom_term(d - 1, z, l - 1) : 0.0;
  double b = l <= d - 1 ? detail::binom_term(d - 1, z, l) : 0.0;
  return d * (a - b);
}

} // namespace contagion
