#include <cmath>

#include <gtest/gtest.h>

#include "contagion/risk.hpp"
#include "oracles.hpp"

using namespace contagion;

namespace {

NetworkSpec single(int d, std::vector<double> pmf, double immune = 0.0) {
  NetworkSpec s;
  s.classes.push_back({"bank", d, d, 1.0, std::move(pmf), immune});
  return s;
}

NetworkSpec spec_c() { return single(3, {0.1, 0.0, 0.0, 0.9}); }

NetworkSpec two_class() {
  NetworkSpec s;
  s.classes.push_back({"core", 6, 2, 0.2, {0.02, 0, 0.1, 0.3, 0.3, 0.1, 0.08}, 0.1});
  s.classes.push_back({"periphery", 2, 3, 0.8, {0.08, 0.5, 0.3}, 0.12});
  return s;
}

RiskSpec uniform_risk(const NetworkSpec& spec, double gamma_bar, double ld, double li) {
  RiskSpec r;
  r.gamma_bar = gamma_bar;
  for (const auto& c : spec.classes) r.losses[c.id] = ClassLoss{ld, li, std::nullopt, std::nullopt};
  return r;
}

RiskSpec two_class_risk(bool random) {
  RiskSpec r;
  r.gamma_bar = 8.0;
  r.losses["core"] = {2.0, 0.7, std::nullopt, std::nullopt};
  r.losses["periphery"] = {1.0, 0.4, std::nullopt, std::nullopt};
  if (random) {
    r.losses["core"].default_dist = LossDistribution::two_point(2.0, 0.5);
    r.losses["core"].link_dist = LossDistribution::two_point(0.7, 0.9);
    r.losses["periphery"].default_dist = LossDistribution::two_point(1.0, 0.25);
    r.losses["periphery"].link_dist = LossDistribution::two_point(0.4, 0.01);
  }
  return r;
}

RiskSpec random_unit_risk(const NetworkSpec& spec, double ld, double li, double var) {
  RiskSpec r = uniform_risk(spec, 10.0, ld, li);
  for (auto& [id, l] : r.losses) {
    l.default_dist = LossDistribution::two_point(ld, var);
    l.link_dist = LossDistribution::two_point(li, var);
  }
  return r;
}

RealizedNetwork two_cycle() {
  RealizedNetwork net;
  net.pop.class_ids = {"bank"};
  net.pop.cls = {0, 0};
  net.pop.d_in = {1, 1};
  net.pop.d_out = {1, 1};
  net.pop.theta = {0, 1};
  net.edges = {{0, 1}, {1, 0}};
  return net;
}

// Expected loss-noise variance per node under the product law.
double noise_oracle(const NetworkSpec& spec, const RiskSpec& risk, double y) {
  double total = 0;
  for (const auto& c : spec.classes) {
    const auto& l = risk.loss(c.id);
    const double vd = l.default_dist ? l.default_dist->variance() : 0.0;
    const double vi = l.link_dist ? l.link_dist->variance() : 0.0;
    for (int th = 0; th <= c.d_in + 1; ++th)
      for (int a = 0; a <= c.d_in; ++a) {
        const double p = c.weight * c.q(th) * oracle::pmf(c.d_in, y, a);
        const bool solvent = th >= 1 && a >= c.d_in - th + 1;
        total += p * (solvent ? (c.d_in - a) * vi : vd);
      }
  }
  return total;
}

oracle::NodeFn wealth_of(const NetworkSpec& spec, const RiskSpec& risk) {
  std::vector<double> ld, li;
  for (const auto& c : spec.classes) {
    ld.push_back(risk.loss(c.id).default_loss);
    li.push_back(risk.loss(c.id).link_loss);
  }
  return oracle::wealth(ld, li);
}

} // namespace

TEST(Aggregates, TwoCycle) {
  const auto net = two_cycle();
  const auto res = run_discrete(net);
  const auto risk = uniform_risk(single(1, {0.5, 0.5}), 3.0, 1.0, 5.0);
  const auto a = evaluate_aggregates(net, res, risk);
  EXPECT_EQ(a.gamma_count, 0);
  EXPECT_DOUBLE_EQ(a.gamma_systemwide, 6.0 - 2.0);
  EXPECT_DOUBLE_EQ(a.gamma_external, 6.0 - 2.0);
  EXPECT_EQ(a.D_x, (std::vector<std::int64_t>{2}));
  EXPECT_EQ(a.I_x, (std::vector<std::int64_t>{0}));
}

TEST(Aggregates, SurvivorCarriesInfectedLink) {
  auto net = two_cycle();
  net.pop.theta[1] = 2; // immune
  const auto res = run_discrete(net);
  const auto a = evaluate_aggregates(net, res, uniform_risk(single(1, {0.5, 0.5}), 3.0, 1.0, 5.0));
  EXPECT_EQ(a.gamma_count, 1);
  EXPECT_EQ(a.I_x[0], 1);
  EXPECT_DOUBLE_EQ(a.gamma_external, 5.0);
  EXPECT_DOUBLE_EQ(a.gamma_systemwide, 0.0);
}

TEST(Aggregates, ZeroLossesAndTotalDefault) {
  const auto spec = single(3, {1.0, 0, 0, 0});
  const auto net = wire_configuration(sample_nodes(spec, 100, 1), 2);
  const auto res = run_discrete(net);
  EXPECT_DOUBLE_EQ(evaluate_aggregates(net, res, uniform_risk(spec, 4.0, 0.0, 0.0)).gamma_systemwide, 400.0);
  EXPECT_DOUBLE_EQ(evaluate_aggregates(net, res, uniform_risk(spec, 4.0, 1.0, 0.0)).gamma_systemwide, 300.0);
}

TEST(Aggregates, CountMatchesCascade) {
  const auto spec = two_class();
  const auto net = wire_configuration(sample_nodes(spec, 3000, 4), 5);
  const auto res = run_discrete(net);
  const auto a = evaluate_aggregates(net, res, two_class_risk(false));
  EXPECT_EQ(a.gamma_count, static_cast<std::int64_t>(net.pop.size()) - res.default_count());
  RiskSpec missing;
  missing.losses["core"] = {};
  EXPECT_THROW(evaluate_aggregates(net, res, missing), ModelError);
}

TEST(Aggregates, RandomModeMeanMatchesDeterministic) {
  const auto spec = two_class();
  const auto net = wire_configuration(sample_nodes(spec, 2000, 8), 9);
  const auto res = run_discrete(net);
  const auto risk = two_class_risk(true);
  const double det = evaluate_aggregates(net, res, risk).gamma_systemwide;
  const auto a0 = evaluate_aggregates(net, res, risk);
  double var = 0;
  for (std::size_t x = 0; x < 2; ++x) {
    const auto& l = risk.loss(net.pop.class_ids[x]);
    var += a0.D_x[x] * l.default_dist->variance() + a0.I_x[x] * l.link_dist->variance();
  }
  const int draws = 2000;
  double sum = 0;
  for (int k = 0; k < draws; ++k) sum += evaluate_aggregates(net, res, risk, LossMode::random, k).gamma_systemwide;
  EXPECT_NEAR(sum / draws, det, 3 * std::sqrt(var / draws));
  EXPECT_EQ(evaluate_aggregates(net, res, risk, LossMode::random, 5).gamma_systemwide,
            evaluate_aggregates(net, res, risk, LossMode::random, 5).gamma_systemwide);
}

TEST(FDiamond, Examples) {
  const auto specb = single(3, {0.0, 0.2, 0.3, 0.5});
  EXPECT_NEAR(f_diamond(specb, uniform_risk(specb, 7.0, 1.0, 0.5), 1.0).value, 7.0, 1e-15);
  const auto zero = f_diamond(spec_c(), uniform_risk(spec_c(), 7.0, 0.0, 0.0), 0.6);
  EXPECT_EQ(zero.value, 7.0);
  EXPECT_EQ(zero.derivative, 0.0);
  const double z = solve_zstar(spec_c()).z_star;
  EXPECT_NEAR(f_diamond(spec_c(), uniform_risk(spec_c(), 10.0, 1.0, 0.0), z).value, 10.0 - 0.100925, 1e-6);
}

TEST(FDiamond, MatchesCellSums) {
  const auto spec = two_class();
  const auto risk = two_class_risk(false);
  for (double z : {0.2, 0.55, 0.9}) {
    const auto rep = eval_limit_functions(spec, z);
    double expected = risk.gamma_bar;
    for (int x = 0; x < 2; ++x) {
      const auto& c = spec.classes[x];
      double solv = 0;
      for (const auto& cell : rep.cells)
        if (cell.cls == x) {
          solv += cell.value;
          expected -= risk.loss(c.id).link_loss * cell.ell * cell.value;
        }
      expected -= risk.loss(c.id).default_loss * (c.weight - solv);
    }
    EXPECT_NEAR(f_diamond(spec, risk, z).value, expected, 1e-13);
  }
}

TEST(FDiamond, NonincreasingInLosses) {
  const auto spec = two_class();
  for (int k = 0; k <= 10; ++k) {
    const double z = k / 10.0;
    double prev = INFINITY;
    for (double l : {0.0, 0.5, 1.0, 2.0}) {
      const double v = f_diamond(spec, uniform_risk(spec, 5.0, l, 0.3), z).value;
      EXPECT_LE(v, prev + 1e-15);
      prev = v;
    }
    prev = INFINITY;
    for (double l : {0.0, 0.5, 1.0, 2.0}) {
      const double v = f_diamond(spec, uniform_risk(spec, 5.0, 0.3, l), z).value;
      EXPECT_LE(v, prev + 1e-15);
      prev = v;
    }
  }
}

TEST(FDiamond, DerivativeMatchesFiniteDifferences) {
  const auto spec = two_class();
  const auto risk = two_class_risk(false);
  const double h = 1e-5;
  for (int k = 1; k <= 9; ++k) {
    const double z = k / 10.0;
    const double fd = (f_diamond(spec, risk, z + h).value - f_diamond(spec, risk, z - h).value) / (2 * h);
    const double d = f_diamond(spec, risk, z).derivative;
    EXPECT_LT(std::abs(d - fd) / std::max(std::abs(fd), 1e-3), 1e-6);
  }
}

TEST(DiamondLaw, ZeroLossesGiveZeroVariance) {
  const auto out = diamond_limit_and_variance(KernelContext(spec_c()), uniform_risk(spec_c(), 5.0, 0.0, 0.0));
  ASSERT_TRUE(out.law.available);
  EXPECT_NEAR(out.law.variance, 0.0, 1e-15);
}

TEST(DiamondLaw, DefaultOnlyEqualsDefaultLaw) {
  const KernelContext ctx(spec_c());
  const auto out = diamond_limit_and_variance(ctx, uniform_risk(spec_c(), 10.0, 1.0, 0.0));
  const auto d = final_state_law(ctx, Observable::of(ObservableKind::D));
  EXPECT_NEAR(out.law.variance, d.variance, 1e-12);
  EXPECT_NEAR(out.sigma_22, 0.0, 1e-15);
}

TEST(DiamondLaw, ComponentsAssemble) {
  const KernelContext ctx(two_class());
  const auto out = diamond_limit_and_variance(ctx, two_class_risk(false));
  ASSERT_TRUE(out.law.available);
  const double dl = out.law.delta;
  const double s2 = out.sigma_11 + 2 * out.sigma_12 + out.sigma_22;
  EXPECT_NEAR(out.law.variance, s2 + dl * dl * out.sigma_WW - 2 * dl * out.sigma_diamond_W, 1e-12);
}

TEST(DiamondLaw, MatchesEnumerationOracle) {
  for (const auto& [spec, risk] : {std::pair{spec_c(), uniform_risk(spec_c(), 10.0, 1.0, 0.5)},
                                   std::pair{two_class(), two_class_risk(false)}}) {
    const auto out = diamond_limit_and_variance(KernelContext(spec), risk);
    ASSERT_TRUE(out.law.available);
    const auto g = wealth_of(spec, risk), w = oracle::white();
    const double dl = out.law.delta;
    auto proj = [&](const oracle::NodeState& s) { return g(s) - dl * w(s); };
    EXPECT_NEAR(out.law.variance, oracle::node_covariance(spec, out.law.z_star, proj, proj), 1e-10);
  }
}

TEST(DiamondLaw, SpecCRegressionValue) {
  const auto out = diamond_limit_and_variance(KernelContext(spec_c()), uniform_risk(spec_c(), 10.0, 1.0, 0.5));
  EXPECT_NEAR(out.law.variance, 0.451288, 1e-5);
}

TEST(RandomLoss, DegenerateLossesReduceToDeterministic) {
  auto risk = two_class_risk(false);
  for (auto& [id, l] : risk.losses) {
    l.default_dist = LossDistribution::two_point(l.default_loss, 0.0);
    l.link_dist = LossDistribution::two_point(l.link_loss, 0.0);
  }
  const KernelContext ctx(two_class());
  const auto det = diamond_limit_and_variance(ctx, two_class_risk(false));
  EXPECT_NEAR(random_loss_final_law(ctx, risk).variance, det.law.variance, 1e-13);
  for (double t : {0.1, 0.5, 2.0}) {
    CovarianceEvaluator cov(ctx, std::exp(-t));
    const auto f = observable_functional(ctx.spec, diamond_observable(ctx.spec, risk));
    EXPECT_NEAR(random_loss_variance(ctx, risk, t), cov(f, f), 1e-13);
  }
}

TEST(RandomLoss, InitialTimeWithoutFundamentalDefaults) {
  const auto spec = single(3, {0.0, 0.2, 0.3, 0.5});
  EXPECT_NEAR(random_loss_variance(KernelContext(spec), random_unit_risk(spec, 1.0, 1.0, 0.25), 0.0), 0.0, 1e-15);
}

TEST(RandomLoss, MatchesEnumerationOracle) {
  const auto spec = two_class();
  const auto risk = two_class_risk(true);
  const KernelContext ctx(spec);
  const auto g = wealth_of(spec, risk);
  for (double t : {0.05, 0.4, 1.5}) {
    const double y = std::exp(-t);
    EXPECT_NEAR(random_loss_variance(ctx, risk, t), oracle::node_covariance(spec, y, g, g) + noise_oracle(spec, risk, y),
                1e-10);
  }
  const auto law = random_loss_final_law(ctx, risk);
  ASSERT_TRUE(law.available);
  const auto w = oracle::white();
  auto proj = [&](const oracle::NodeState& s) { return g(s) - law.delta * w(s); };
  EXPECT_NEAR(law.variance,
              oracle::node_covariance(spec, law.z_star, proj, proj) + noise_oracle(spec, risk, law.z_star), 1e-10);
}

TEST(RandomLoss, SpecCRegressionValue) {
  const auto law = random_loss_final_law(KernelContext(spec_c()), random_unit_risk(spec_c(), 1.0, 0.5, 0.25));
  EXPECT_NEAR(law.variance, 0.543950, 1e-5);
}

TEST(RandomLoss, RequiresDistributions) {
  const KernelContext ctx(spec_c());
  EXPECT_THROW(random_loss_variance(ctx, uniform_risk(spec_c(), 1.0, 1.0, 1.0), 0.3), ModelError);
  EXPECT_THROW(random_loss_final_law(ctx, uniform_risk(spec_c(), 1.0, 1.0, 1.0)), ModelError);
}
