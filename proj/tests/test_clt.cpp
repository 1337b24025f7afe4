#include <cmath>

#include <gtest/gtest.h>

#include "contagion/clt.hpp"
#include "oracles.hpp"
#include "psd.hpp"

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

double tail(int d, double y, int s) {
  double t = 0;
  for (int a = std::max(s, 0); a <= d; ++a) t += oracle::pmf(d, y, a);
  return t;
}

oracle::NodeFn node_fn(const Observable& o) {
  switch (o.kind) {
  case ObservableKind::S: return oracle::solvent();
  case ObservableKind::D: return [](const oracle::NodeState& s) { return s.solvent() ? 0.0 : 1.0; };
  case ObservableKind::Hplus: return oracle::alive_solvent();
  case ObservableKind::Iplus: return oracle::infected();
  case ObservableKind::W: return oracle::white();
  case ObservableKind::Cell: return oracle::cell(o.cls, o.theta, o.ell);
  default: return oracle::wealth(o.default_loss, o.link_loss);
  }
}

const std::vector<ObservableKind> kProcessKinds{ObservableKind::S, ObservableKind::D, ObservableKind::Hplus,
                                                ObservableKind::Iplus, ObservableKind::W};

} // namespace

TEST(Kernels, EndpointsAreExactlyZero) {
  const KernelContext ctx(two_class());
  for (int x = 0; x < 2; ++x) {
    const int d = ctx.spec.classes[x].d_in;
    for (int th = 0; th <= d + 1; ++th)
      for (int s = 0; s <= d; ++s) {
        EXPECT_EQ(sigma_hat_pair(ctx, x, th, s, 1.0), 0.0);
        EXPECT_EQ(sigma_hat_pair(ctx, x, th, s, 0.0), 0.0);
        for (int k = 0; s + k <= d; ++k) {
          EXPECT_EQ(sigma_pair(ctx, x, th, s, k, 1.0), 0.0);
          EXPECT_EQ(sigma_pair(ctx, x, th, s, k, 0.0), 0.0);
        }
        EXPECT_EQ(sigma_pair(ctx, x, th, s, d - s + 1, 0.5), 0.0);
        if (s >= 1) { EXPECT_EQ(sigma_star(ctx, x, th, th, s, s, 0.0), 0.0); }
      }
  }
  EXPECT_EQ(sigma_hat_global(ctx.spec, 1.0), 0.0);
  EXPECT_EQ(sigma_hat_global(ctx.spec, 0.0), 0.0);
  EXPECT_THROW(sigma_pair(ctx, 0, 1, 1, 0, 1.5), NumericError);
  EXPECT_THROW(sigma_pair(ctx, 2, 1, 1, 0, 0.5), NumericError);
  EXPECT_THROW(sigma_hat_pair(ctx, 1, 5, 1, 0.5), NumericError);
}

TEST(Kernels, SigmaStarExamples) {
  const KernelContext half(single(1, {0.5, 0.5}));
  EXPECT_NEAR(sigma_star(half, 0, 1, 1, 1, 1, 1.0), 0.25, 1e-15);
  const KernelContext c(spec_c());
  EXPECT_NEAR(sigma_star(c, 0, 0, 3, 1, 1, 1.0), -0.09, 1e-15);
}

TEST(Kernels, SigmaHatGlobalExample) {
  // Variance of the alive count of 3 balls, each alive with probability 1/2.
  EXPECT_NEAR(sigma_hat_global(spec_c(), 0.5), 0.75, 1e-15);
}

TEST(Kernels, SpecCPairAgainstSimpson) {
  const KernelContext ctx(spec_c());
  EXPECT_NEAR(sigma_pair(ctx, 0, 3, 1, 0, 0.9), oracle::sigma_pair(ctx.spec.classes[0], 3, 1, 0, 0.9), 1e-8);
}

TEST(Kernels, RandomPointsAgainstSimpson) {
  const KernelContext ctx(two_class());
  contagion::Rng rng(2024);
  for (int i = 0; i < 20; ++i) {
    const int x = static_cast<int>(rng.below(2));
    const auto& c = ctx.spec.classes[x];
    const int th = static_cast<int>(rng.below(c.d_in + 2));
    const int s = 1 + static_cast<int>(rng.below(c.d_in));
    const int k = static_cast<int>(rng.below(c.d_in - s + 1));
    const double y = 0.05 + 0.94 * rng.uniform();
    EXPECT_NEAR(sigma_pair(ctx, x, th, s, k, y), oracle::sigma_pair(c, th, s, k, y), 1e-8);
    EXPECT_NEAR(sigma_hat_pair(ctx, x, th, s, y), oracle::sigma_hat_pair(c, th, s, y), 1e-8);
  }
}

TEST(Kernels, ClosedFormsUnderProductLaw) {
  // sigma_star + sigma_pair is the covariance of 1{theta, A >= s1} and 1{theta, A >= s2};
  // sigma_hat_pair is the covariance of A with 1{theta, A >= s}.
  const KernelContext ctx(two_class());
  for (int x = 0; x < 2; ++x) {
    const auto& c = ctx.spec.classes[x];
    const int d = c.d_in;
    for (double y : {0.1, 0.45, 0.8, 0.97})
      for (int th = 0; th <= d + 1; ++th) {
        const double mq = c.weight * c.q(th);
        for (int s = 1; s <= d; ++s) {
          for (int k = 0; s + k <= d; ++k)
            EXPECT_NEAR(sigma_pair(ctx, x, th, s, k, y), mq * (tail(d, y, s + k) - tail(d, y, s) * tail(d, y, s + k)),
                        1e-12);
          double ea = 0;
          for (int a = s; a <= d; ++a) ea += a * oracle::pmf(d, y, a);
          EXPECT_NEAR(sigma_hat_pair(ctx, x, th, s, y), mq * (ea - d * y * tail(d, y, s)), 1e-12);
        }
      }
  }
}

TEST(Kernels, QuadratureRefinementStable) {
  const double tol = 1e-8;
  const KernelContext coarse(two_class(), QuadratureOptions{tol, 1e-15, 1 << 14});
  const KernelContext fine(two_class(), QuadratureOptions{tol / 2, 1e-15, 1 << 14});
  for (double y : {0.2, 0.7})
    for (int s = 1; s <= 6; ++s) {
      EXPECT_LT(std::abs(sigma_pair(coarse, 0, 3, s, 0, y) - sigma_pair(fine, 0, 3, s, 0, y)), 10 * tol);
      EXPECT_LT(std::abs(sigma_hat_pair(coarse, 0, 3, s, y) - sigma_hat_pair(fine, 0, 3, s, y)), 10 * tol);
    }
}

TEST(ProcessCovariance, SpecCInitialState) {
  const KernelContext ctx(spec_c());
  EXPECT_NEAR(process_covariance(ctx, ObservableKind::S, ObservableKind::S, 1.0), 0.09, 1e-15);
  EXPECT_NEAR(process_covariance(ctx, ObservableKind::W, ObservableKind::W, 1.0), 0.81, 1e-14);
  EXPECT_NEAR(process_covariance(ctx, ObservableKind::D, ObservableKind::D, 1.0), 0.09, 1e-15);
  EXPECT_NEAR(process_covariance(ctx, ObservableKind::D, ObservableKind::S, 1.0), -0.09, 1e-15);
}

TEST(ProcessCovariance, DefaultsMirrorSolvent) {
  const KernelContext ctx(two_class());
  for (double y : {0.3, 0.75}) {
    const double ss = process_covariance(ctx, ObservableKind::S, ObservableKind::S, y);
    EXPECT_NEAR(process_covariance(ctx, ObservableKind::D, ObservableKind::D, y), ss, 1e-13);
    for (auto k : kProcessKinds)
      EXPECT_NEAR(process_covariance(ctx, ObservableKind::D, k, y), -process_covariance(ctx, ObservableKind::S, k, y),
                  1e-13);
  }
}

TEST(ProcessCovariance, MatchesEnumerationOracle) {
  for (const auto& spec : {spec_c(), two_class()}) {
    const KernelContext ctx(spec);
    for (double y : {0.15, 0.5, 0.899, 1.0})
      for (auto a : kProcessKinds)
        for (auto b : kProcessKinds)
          EXPECT_NEAR(process_covariance(ctx, a, b, y),
                      oracle::node_covariance(spec, y, node_fn(Observable::of(a)), node_fn(Observable::of(b))), 1e-11);
  }
}

TEST(ProcessCovariance, MatricesSymmetricPsd) {
  const KernelContext ctx(two_class());
  const std::vector<ObservableKind> kinds{ObservableKind::S, ObservableKind::Hplus, ObservableKind::Iplus,
                                          ObservableKind::W};
  for (double y : {0.3, 0.6, 0.9}) {
    std::vector<std::vector<double>> m(4, std::vector<double>(4));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) m[i][j] = process_covariance(ctx, kinds[i], kinds[j], y);
    const auto r = oracle::inspect(m);
    EXPECT_LT(r.max_asymmetry, 1e-8);
    EXPECT_GE(r.min_eigenvalue, -1e-8);
  }
}

TEST(CellCovariance, Examples) {
  const KernelContext c(spec_c());
  EXPECT_NEAR(cell_covariance(c, {0, 3, 0}, {0, 3, 0}, 0.0), 0.09, 1e-15);
  const KernelContext two(two_class());
  for (double t : {0.0, 0.4, 2.0}) EXPECT_EQ(cell_covariance(two, {0, 3, 1}, {1, 2, 1}, t), 0.0);
  EXPECT_THROW(cell_covariance(c, {0, 3, 3}, {0, 3, 0}, 0.1), NumericError);
  EXPECT_THROW(cell_covariance(c, {0, 3, 0}, {0, 3, 0}, -0.1), NumericError);
}

TEST(CellCovariance, OracleAgreementAndPsd) {
  const KernelContext ctx(two_class());
  for (int x = 0; x < 2; ++x) {
    const auto& c = ctx.spec.classes[x];
    std::vector<CellIndex> cells;
    for (int th = 1; th <= c.d_in + 1; ++th)
      for (int l = 0; l < th && l <= c.d_in; ++l) cells.push_back({x, th, l});
    for (double t : {0.0, 0.1, 0.7, 3.0}) {
      const double y = std::exp(-t);
      std::vector<std::vector<double>> m(cells.size(), std::vector<double>(cells.size()));
      for (std::size_t i = 0; i < cells.size(); ++i)
        for (std::size_t j = 0; j < cells.size(); ++j) {
          m[i][j] = cell_covariance(ctx, cells[i], cells[j], t);
          EXPECT_NEAR(m[i][j],
                      oracle::node_covariance(ctx.spec, y, oracle::cell(cells[i].cls, cells[i].theta, cells[i].ell),
                                              oracle::cell(cells[j].cls, cells[j].theta, cells[j].ell)),
                      1e-11);
        }
      for (std::size_t i = 0; i < cells.size(); ++i) EXPECT_GE(m[i][i], -1e-12);
      const auto r = oracle::inspect(m);
      EXPECT_LT(r.max_asymmetry, 1e-8);
      EXPECT_GE(r.min_eigenvalue, -1e-8);
    }
  }
}

TEST(FinalLaw, SpecBHasZeroVariance) {
  const KernelContext ctx(single(3, {0.0, 0.2, 0.3, 0.5}));
  const auto law = final_state_law(ctx, Observable::of(ObservableKind::D));
  ASSERT_TRUE(law.available);
  EXPECT_EQ(law.z_star, 1.0);
  EXPECT_NEAR(law.variance, 0.0, 1e-12);
  EXPECT_NEAR(law.centering, 0.0, 1e-15);
}

TEST(FinalLaw, WhiteCountIsDeterministic) {
  for (const auto& spec : {spec_c(), two_class()}) {
    const auto law = final_state_law(KernelContext(spec), Observable::of(ObservableKind::W));
    ASSERT_TRUE(law.available);
    EXPECT_NEAR(law.delta, 1.0, 1e-12);
    EXPECT_NEAR(law.variance, 0.0, 1e-9);
  }
}

TEST(FinalLaw, SpecCDefaultVariance) {
  const auto law = final_state_law(KernelContext(spec_c()), Observable::of(ObservableKind::D));
  ASSERT_TRUE(law.available);
  EXPECT_NEAR(law.limit, 0.100925213, 1e-8);
  EXPECT_NEAR(law.centering, law.limit, 1e-15);
  EXPECT_NEAR(law.variance, 0.095920, 1e-5);
}

TEST(FinalLaw, MatchesProjectedEnumerationOracle) {
  // Z_obs - Delta Z_W evaluated at z_star as a single per-node function.
  for (const auto& spec : {spec_c(), two_class()}) {
    const KernelContext ctx(spec);
    const double z = solve_zstar(spec).z_star;
    std::vector<Observable> obs;
    for (auto k : kProcessKinds) obs.push_back(Observable::of(k));
    obs.push_back(Observable::cell(0, 3, 1));
    obs.push_back(Observable::cell(0, 1, 0));
    for (const auto& o : obs) {
      const auto law = final_state_law(ctx, o);
      ASSERT_TRUE(law.available) << o.name();
      const double h = 1e-6;
      const double fd = (observable_limit(spec, o, z + h).value - observable_limit(spec, o, z - h).value) / (2 * h);
      EXPECT_NEAR(law.delta * law.alpha, fd, 1e-7) << o.name();
      const auto g = node_fn(o), w = oracle::white();
      const double dl = law.delta;
      auto proj = [&](const oracle::NodeState& s) { return g(s) - dl * w(s); };
      EXPECT_NEAR(law.variance, oracle::node_covariance(spec, z, proj, proj), 1e-10) << o.name();
    }
  }
}

TEST(FinalLaw, UnavailableOutsideStableInterior) {
  const auto a = final_state_law(KernelContext(single(3, {1.0, 0, 0, 0})), Observable::of(ObservableKind::D));
  EXPECT_FALSE(a.available);
  EXPECT_FALSE(a.diagnostics.empty());
  const auto d = final_state_law(KernelContext(single(3, {0.1, 0.9, 0, 0})), Observable::of(ObservableKind::D));
  EXPECT_FALSE(d.available);
}

TEST(FinalLaw, FiniteNCentering) {
  auto spec = spec_c();
  spec.classes[0].threshold_pmf_n = std::vector<double>{0.11, 0.0, 0.0, 0.89};
  const auto law = final_state_law(KernelContext(spec), Observable::of(ObservableKind::D));
  ASSERT_TRUE(law.available);
  auto fin = spec_c();
  fin.classes[0].threshold_pmf = {0.11, 0.0, 0.0, 0.89};
  const double zhat = solve_zstar(fin).z_star;
  EXPECT_NEAR(law.zhat_n, zhat, 1e-12);
  EXPECT_NEAR(law.centering, eval_limit_functions(fin, zhat).f_D, 1e-14);
  EXPECT_NEAR(law.limit, 0.100925213, 1e-8);
}

TEST(ClipVariance, Policy) {
  std::vector<std::string> diag;
  EXPECT_EQ(detail::clip_variance(0.5, diag), 0.5);
  EXPECT_TRUE(diag.empty());
  EXPECT_EQ(detail::clip_variance(-5e-10, diag), 0.0);
  EXPECT_EQ(diag.size(), 1u);
  EXPECT_THROW(detail::clip_variance(-1e-6, diag), NumericError);
}
