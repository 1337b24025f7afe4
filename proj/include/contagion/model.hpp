#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "binomial.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace contagion {

// A class of institutions sharing degrees and a threshold law. Threshold
// index d_in + 1 stands for the immune atom throughout the library.
struct Characteristic {
  std::string id;
  int d_in = 0;
  int d_out = 0;
  double weight = 0.0;
  std::vector<double> threshold_pmf; // theta = 0..d_in
  double immune_mass = 0.0;

  // Finite-n overrides; absent means "same as the limit".
  std::optional<double> weight_n;
  std::optional<std::vector<double>> threshold_pmf_n;
  std::optional<double> immune_mass_n;

  int immune_theta() const { return d_in + 1; }

  // Mass on theta in 0..d_in+1.
  double q(int theta) const {
    if (theta < 0 || theta > d_in + 1) return 0.0;
    if (theta == d_in + 1) return immune_mass;
    return theta < static_cast<int>(threshold_pmf.size()) ? threshold_pmf[theta] : 0.0;
  }

  // Surviving in-balls needed to stay solvent: d_in - theta + 1, 0 for immune.
  int pi(int theta) const { return d_in - theta + 1; }
};

struct NetworkSpec {
  std::vector<Characteristic> classes;

  double lambda() const {
    double s = 0.0;
    for (const auto& c : classes) s += c.d_in * c.weight;
    return s;
  }
  double lambda_out() const {
    double s = 0.0;
    for (const auto& c : classes) s += c.d_out * c.weight;
    return s;
  }
  bool has_finite_overrides() const {
    return std::any_of(classes.begin(), classes.end(), [](const Characteristic& c) {
      return c.weight_n || c.threshold_pmf_n || c.immune_mass_n;
    });
  }
  int index_of(const std::string& id) const {
    for (std::size_t i = 0; i < classes.size(); ++i)
      if (classes[i].id == id) return static_cast<int>(i);
    return -1;
  }
};

namespace detail {
inline void validate_pmf(const std::string& id, int d_in, const std::vector<double>& pmf, double immune,
                         const char* what) {
  if (static_cast<int>(pmf.size()) != d_in + 1)
    throw ModelError(std::string(what) + " of class '" + id + "' must have d_in + 1 = " + std::to_string(d_in + 1) +
                     " entries");
  double s = immune;
  if (!(immune >= 0.0 && immune <= 1.0)) throw ModelError("immune mass of class '" + id + "' outside [0,1]");
  for (double p : pmf) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ModelError(std::string(what) + " of class '" + id + "' has a negative entry");
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-12) throw ModelError(std::string(what) + " of class '" + id + "' does not sum to 1");
}
} // namespace detail

// Throws ModelError naming the first violated invariant.
inline NetworkSpec validate_spec(const NetworkSpec& spec) {
  if (spec.classes.empty()) throw ModelError("spec has no classes");
  std::map<std::string, int> seen;
  double wsum = 0.0, wsum_n = 0.0;
  bool any_n = false;
  for (const auto& c : spec.classes) {
    if (c.id.empty()) throw ModelError("class with empty id");
    if (seen[c.id]++) throw ModelError("duplicate class id '" + c.id + "'");
    if (c.d_in < 0 || c.d_out < 0) throw ModelError("negative degree in class '" + c.id + "'");
    if (!(c.weight >= 0.0 && c.weight <= 1.0)) throw ModelError("weight of class '" + c.id + "' outside [0,1]");
    detail::validate_pmf(c.id, c.d_in, c.threshold_pmf, c.immune_mass, "threshold pmf");
    wsum += c.weight;
    if (c.threshold_pmf_n || c.immune_mass_n)
      detail::validate_pmf(c.id, c.d_in, c.threshold_pmf_n.value_or(c.threshold_pmf),
                           c.immune_mass_n.value_or(c.immune_mass), "finite-n threshold pmf");
    double wn = c.weight_n.value_or(c.weight);
    if (!(wn >= 0.0 && wn <= 1.0)) throw ModelError("finite-n weight of class '" + c.id + "' outside [0,1]");
    wsum_n += wn;
    any_n = any_n || c.weight_n.has_value();
  }
  if (std::abs(wsum - 1.0) > 1e-12) throw ModelError("weights sum != 1 (sum = " + std::to_string(wsum) + ")");
  if (any_n && std::abs(wsum_n - 1.0) > 1e-12) throw ModelError("finite-n weights sum != 1");
  if (std::abs(spec.lambda() - spec.lambda_out()) > 1e-9)
    throw ModelError("in/out mean mismatch: sum d_in mu = " + std::to_string(spec.lambda()) +
                     ", sum d_out mu = " + std::to_string(spec.lambda_out()));
  return spec;
}

// The finite-n functions reuse the limit evaluators on this view.
inline NetworkSpec finite_n_view(const NetworkSpec& spec) {
  NetworkSpec out = spec;
  for (auto& c : out.classes) {
    if (c.weight_n) c.weight = *c.weight_n;
    if (c.threshold_pmf_n) c.threshold_pmf = *c.threshold_pmf_n;
    if (c.immune_mass_n) c.immune_mass = *c.immune_mass_n;
    c.weight_n.reset();
    c.threshold_pmf_n.reset();
    c.immune_mass_n.reset();
  }
  return out;
}

inline NetworkSpec with_weights(const NetworkSpec& spec, const std::vector<double>& weights) {
  if (weights.size() != spec.classes.size()) throw ModelError("weight vector size does not match class count");
  NetworkSpec out = spec;
  for (std::size_t i = 0; i < weights.size(); ++i) out.classes[i].weight = weights[i];
  return out;
}

// Bounded loss law with finite support.
struct LossDistribution {
  std::vector<double> values;
  std::vector<double> probs;

  double mean() const {
    double m = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) m += values[i] * probs[i];
    return m;
  }
  double variance() const {
    double m = mean(), v = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) v += probs[i] * (values[i] - m) * (values[i] - m);
    return v;
  }
  double sample(Rng& rng) const {
    double u = rng.uniform(), acc = 0.0;
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      acc += probs[i];
      if (u < acc) return values[i];
    }
    return values.back();
  }

  // Two atoms with the given mean and variance and nonnegative support:
  // mean +- sd with equal weights when sd <= mean, else {0, (v + m^2)/m}.
  static LossDistribution two_point(double mean, double var) {
    if (!(mean >= 0.0) || !(var >= 0.0) || !std::isfinite(mean) || !std::isfinite(var))
      throw ModelError("loss mean and variance must be finite and nonnegative");
    if (var == 0.0) return {{mean}, {1.0}};
    if (mean == 0.0) throw ModelError("a nonnegative loss with mean 0 cannot have positive variance");
    double sd = std::sqrt(var);
    if (sd <= mean) return {{mean - sd, mean + sd}, {0.5, 0.5}};
    double a = (var + mean * mean) / mean;
    return {{0.0, a}, {1.0 - mean / a, mean / a}};
  }
};

struct ClassLoss {
  double default_loss = 0.0; // per defaulted node
  double link_loss = 0.0;    // per infected in-link of a solvent node
  std::optional<LossDistribution> default_dist; // mean must equal default_loss
  std::optional<LossDistribution> link_dist;    // mean must equal link_loss
};

struct RiskSpec {
  double gamma_bar = 0.0;
  std::map<std::string, ClassLoss> losses;

  const ClassLoss& loss(const std::string& id) const {
    auto it = losses.find(id);
    if (it == losses.end()) throw ModelError("risk spec has no loss entry for class '" + id + "'");
    return it->second;
  }
  bool has_random() const {
    return std::any_of(losses.begin(), losses.end(),
                       [](const auto& kv) { return kv.second.default_dist || kv.second.link_dist; });
  }
};

namespace detail {
inline void validate_dist(const std::string& id, const LossDistribution& d, double mean, const char* what) {
  if (d.values.empty() || d.values.size() != d.probs.size())
    throw ModelError(std::string(what) + " distribution of class '" + id + "' is malformed");
  double s = 0.0;
  for (std::size_t i = 0; i < d.values.size(); ++i) {
    if (!std::isfinite(d.values[i]) || d.values[i] < 0.0 || !(d.probs[i] >= 0.0))
      throw ModelError(std::string(what) + " distribution of class '" + id + "' has a negative or infinite atom");
    s += d.probs[i];
  }
  if (std::abs(s - 1.0) > 1e-12) throw ModelError(std::string(what) + " distribution of class '" + id + "' does not sum to 1");
  if (std::abs(d.mean() - mean) > 1e-12 * std::max(1.0, mean))
    throw ModelError(std::string(what) + " distribution of class '" + id + "' does not match the declared mean");
}
} // namespace detail

inline RiskSpec validate_risk(const RiskSpec& risk, const NetworkSpec& spec) {
  if (!std::isfinite(risk.gamma_bar)) throw ModelError("gamma_bar must be finite");
  for (const auto& c : spec.classes) {
    const ClassLoss& l = risk.loss(c.id);
    if (!std::isfinite(l.default_loss) || !std::isfinite(l.link_loss) || l.default_loss < 0.0 || l.link_loss < 0.0)
      throw ModelError("losses of class '" + c.id + "' must be finite and nonnegative");
    if (l.default_dist) detail::validate_dist(c.id, *l.default_dist, l.default_loss, "default-loss");
    if (l.link_dist) detail::validate_dist(c.id, *l.link_dist, l.link_loss, "link-loss");
  }
  for (const auto& kv : risk.losses)
    if (spec.index_of(kv.first) < 0) throw ModelError("risk spec names unknown class '" + kv.first + "'");
  return risk;
}

struct BalanceSheet {
  double external_assets = 0.0;
  double interbank_assets = 0.0;
  double interbank_liabilities = 0.0;
  double deposits = 0.0;
  std::vector<double> incoming_loss_exposures;
};

inline double capital_after_shock(const BalanceSheet& bs, double epsilon) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ModelError("shock epsilon outside [0,1]");
  return (1.0 - epsilon) * bs.external_assets + bs.interbank_assets - bs.interbank_liabilities - bs.deposits;
}

struct ThresholdPmf {
  std::vector<double> pmf; // theta = 0..deg
  double immune = 0.0;
};

struct CalibrationMode {
  bool exact = true;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;

  static CalibrationMode exact_mode() { return {}; }
  static CalibrationMode montecarlo(std::uint64_t samples, std::uint64_t seed) { return {false, samples, seed}; }
};

// Law of the number of defaulted debtors, in uniform random order, that wipes
// out the post-shock capital. A prefix sum equal to capital leaves the bank
// solvent.
inline ThresholdPmf threshold_pmf_from_balance_sheet(const BalanceSheet& bs, double epsilon, CalibrationMode mode) {
  const auto& x = bs.incoming_loss_exposures;
  const int m = static_cast<int>(x.size());
  for (double v : x)
    if (!std::isfinite(v) || v < 0.0) throw ModelError("exposures must be finite and nonnegative");
  const double cap = capital_after_shock(bs, epsilon);
  ThresholdPmf out;
  out.pmf.assign(m + 1, 0.0);
  if (cap < 0.0) {
    out.pmf[0] = 1.0;
    return out;
  }
  if (mode.exact) {
    if (m > 12) throw ModelError("exact calibration supports at most 12 exposures");
    // First k of a uniform permutation form a uniform k-subset.
    std::vector<double> solvent_subsets(m + 1, 0.0);
    for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
      double s = 0.0;
      int k = 0;
      for (int i = 0; i < m; ++i)
        if (mask >> i & 1u) {
          s += x[i];
          ++k;
        }
      if (s <= cap) solvent_subsets[k] += 1.0;
    }
    std::vector<double> survive(m + 1); // P(Theta > k)
    for (int k = 0; k <= m; ++k) survive[k] = solvent_subsets[k] / choose(m, k);
    for (int k = 1; k <= m; ++k) out.pmf[k] = survive[k - 1] - survive[k];
    out.immune = survive[m];
    return out;
  }
  if (mode.samples == 0) throw ModelError("montecarlo calibration needs at least one sample");
  Rng rng(mode.seed);
  std::vector<double> perm = x;
  std::vector<std::uint64_t> counts(m + 2, 0);
  for (std::uint64_t r = 0; r < mode.samples; ++r) {
    rng.shuffle(perm.begin(), perm.end());
    double s = 0.0;
    int theta = m + 1;
    for (int k = 0; k < m; ++k) {
      s += perm[k];
      if (s > cap) {
        theta = k + 1;
        break;
      }
    }
    ++counts[theta];
  }
  for (int k = 0; k <= m; ++k) out.pmf[k] = static_cast<double>(counts[k]) / static_cast<double>(mode.samples);
  out.immune = static_cast<double>(counts[m + 1]) / static_cast<double>(mode.samples);
  return out;
}

} // namespace contagion
