#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "cnkin/existence.hpp"

namespace cnkin {
namespace {

MomentSeries sampled(double (*f)(double), double t0, double t1, std::size_t steps) {
  MomentSeries s;
  for (std::size_t i = 0; i <= steps; ++i) {
    const double t = t0 + (t1 - t0) * static_cast<double>(i) / static_cast<double>(steps);
    s.times.push_back(t);
    s.values.push_back(f(t));
  }
  return s;
}

double zero_fn(double) { return 0.0; }
double one_fn(double) { return 1.0; }
double riccati2(double t) { return 1.0 / (1.0 - 2.0 * t); }

TEST(Psi, Examples) {
  const auto ones = sampled(one_fn, 0.0, 1.0, 100);
  EXPECT_EQ(compute_psi(ones, 0.2, 0.2), 0.0);
  EXPECT_NEAR(compute_psi(ones, 0.2, 0.7), 0.5, 1e-14);
  EXPECT_NEAR(compute_psi(ones, 0.2, 0.735), 0.535, 1e-14);  // between nodes
  const auto r = sampled(riccati2, 0.0, 0.3, 3000);
  EXPECT_NEAR(compute_psi(r, 0.0, 0.25), 0.5 * std::log(2.0), 1e-6);
  EXPECT_THROW(compute_psi(ones, 0.0, 1.5), ValidationError);
  EXPECT_THROW(compute_psi(ones, -0.5, 0.5), ValidationError);
}

TEST(M, Examples) {
  const auto zeros = sampled(zero_fn, 0.0, 1.0, 100);
  const auto ones = sampled(one_fn, 0.0, 1.0, 1000);
  EXPECT_EQ(compute_m(ones, 0.0, 0.0), 0.0);
  EXPECT_NEAR(compute_m(zeros, 0.25, 0.75), 0.5, 1e-14);
  EXPECT_NEAR(compute_m(ones, 0.0, 0.1), std::exp(0.1) - 1.0, 1e-7);
  EXPECT_NEAR(compute_m(ones, 0.0, 0.1), 0.105171, 1e-6);
}

TEST(M, SupScanAgrees) {
  const auto r = sampled(riccati2, 0.0, 0.45, 900);
  for (double t : {0.0, 0.05, 0.2, 0.3333, 0.45}) {
    const double m = compute_m(r, 0.0, t);
    EXPECT_LE(std::abs(compute_m_sup_scan(r, 0.0, t) - m), 1e-12 * std::max(1.0, m));
  }
}

TEST(POmega, Examples) {
  const auto g = make_grid(20.0, 401);
  const auto init = exponential_spectrum(g, 1.0, 1.0);
  const auto r = sampled(riccati2, 0.0, 0.3, 3000);

  const auto at_a = compute_p_omega(init, SourceTerm::zero(), r, 0.0);
  EXPECT_EQ(at_a, init.values);

  const double psi = compute_psi(r, 0.0, 0.2);
  const auto p = compute_p_omega(init, SourceTerm::zero(), r, 0.2);
  for (std::size_t i = 0; i < g->n; ++i) EXPECT_NEAR(p[i], init.values[i] * std::exp(psi), 1e-14);

  const auto src = SourceTerm::separable(2.0, 0.5, TimeProfile{});
  const auto zeros = sampled(zero_fn, 0.0, 1.0, 50);
  const auto ps = compute_p_omega(zero_spectrum(g), src, zeros, 0.7);
  for (std::size_t i = 0; i < g->n; ++i) EXPECT_NEAR(ps[i], 0.7 * 2.0 * std::exp(-0.5 * g->nodes[i]), 1e-14);
}

TEST(POmega, SupScanAgrees) {
  const auto g = make_grid(20.0, 201);
  const auto init = exponential_spectrum(g, 0.5, 1.0);
  const auto src = SourceTerm::separable(1.0, 1.0, TimeProfile{TimeProfile::Kind::exp_decay, 1.0, 3.0});
  const auto gm = source_mass(src, *g);
  const auto series = riccati_numeric(RiccatiParams{1.5, init.mass(), 0.0, gm}, 0.4, 1e-3);
  const auto a = compute_p_omega(init, src, series, 0.37);
  const auto b = compute_p_omega_sup_scan(init, src, series, 0.37);
  for (std::size_t i = 0; i < g->n; ++i) EXPECT_LE(std::abs(a[i] - b[i]), 1e-12 * std::max(a[i], 1e-300));
}

TEST(PTotal, Examples) {
  const auto g = make_grid(40.0, 2001);
  const auto init = exponential_spectrum(g, 1.0, 1.0);
  const auto r = sampled(riccati2, 0.0, 0.3, 300);
  const auto p0 = compute_p_omega(init, SourceTerm::zero(), r, 0.0);
  const auto P0 = compute_P_total(p0, *g, init.mass(), 0.0, 0.0);
  EXPECT_NEAR(P0.value, 1.0, 1e-4);
  EXPECT_NEAR(P0.value, P0.bound, 1e-15);

  const auto pz = compute_p_omega(zero_spectrum(g), SourceTerm::zero(), r, 0.2);
  EXPECT_EQ(compute_P_total(pz, *g, 0.0, 0.3, 0.0).value, 0.0);
}

TEST(PTotal, BelowAnalyticBound) {
  const auto g = make_grid(30.0, 601);
  const auto init = exponential_spectrum(g, 0.5, 1.0);
  const auto src = SourceTerm::separable(1.0, 1.0, TimeProfile{});
  const auto gm = source_mass(src, *g);
  const auto series = riccati_numeric(RiccatiParams{1.5, init.mass(), 0.0, gm}, 0.5, 1e-3);
  DuhamelSweep sweep(series, 0.0, gm);
  for (double t : {0.05, 0.2, 0.5}) {
    const auto p = compute_p_omega(init, src, series, t);
    const auto pt = sweep.at(t);
    const auto P = compute_P_total(p, *g, init.mass(), pt.psi, pt.plain_source_integral);
    EXPECT_LE(P.value, P.bound * (1.0 + 1e-12));
  }
}

TEST(MassBound, Examples) {
  EXPECT_EQ(mass_bound(3.0, 0.0), 3.0);
  EXPECT_NEAR(mass_bound(1.0, 0.25), 2.0, 1e-15);
  EXPECT_NEAR(mass_bound(1.0, 0.1), (1.0 - std::sqrt(0.6)) / 0.2, 1e-14);
  EXPECT_NEAR(mass_bound(1.0, 0.1), 1.127017, 1e-6);
  EXPECT_THROW(mass_bound(1.0, 0.3), CertificateExpired);
  EXPECT_THROW(mass_bound(-1.0, 0.1), ValidationError);
  EXPECT_THROW(mass_bound(1.0, -0.1), ValidationError);
}

TEST(MassBound, SolvesQuadratic) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double P = 10.0 * u(rng);
    const double m = std::pow(10.0, -12.0 * u(rng)) / (4.0 * P);
    const double E = mass_bound(P, m);
    EXPECT_NEAR(E, P + m * E * E, 1e-10 * E);
    EXPECT_GE(E, P);
  }
}

class ExpHorizon : public ::testing::Test {
 protected:
  GridPtr grid = make_grid(30.0, 601);
  Spectrum init(double alpha) const { return exponential_spectrum(grid, alpha, 1.0); }
  MomentSeries series(double X, double t_max, std::size_t steps) const {
    return riccati_numeric(RiccatiParams{kContinuumKappa, X, 0.0, {}}, t_max, t_max / static_cast<double>(steps),
                           std::numeric_limits<double>::max());
  }
};

TEST_F(ExpHorizon, ZeroScenarioCoversAll) {
  const MomentSeries zs{{0.0, 2.0}, {0.0, 0.0}, std::nullopt};
  EXPECT_EQ(local_horizon(0.0, zero_spectrum(grid), SourceTerm::zero(), zs, 2.0), 2.0);
}

TEST_F(ExpHorizon, MatchesDenseRoot) {
  const auto s = init(1.0);
  const double X = s.mass();
  const double t_max = 1.0 / (4.0 * X);
  const double b = local_horizon(0.0, s, SourceTerm::zero(), series(X, t_max, 400), t_max);
  // Independent root: dense scan at 10x the series resolution.
  const auto dense = series(X, t_max, 4000);
  DuhamelSweep sweep(dense, 0.0);
  double root = t_max;
  for (double t : sweep.nodes())
    if (sweep.product(t, X) > 1.0) {
      root = t;
      break;
    }
  EXPECT_GT(b, 0.0);
  EXPECT_LT(b, t_max);
  EXPECT_NEAR(b, root, t_max / 4000.0 + 1e-5);
  const DuhamelSweep coarse(series(X, t_max, 400), 0.0);
  EXPECT_LE(coarse.product(b, X), 1.0);
  EXPECT_GT(coarse.product(b + 2e-6 * t_max, X), 1.0);
}

TEST_F(ExpHorizon, SmallAmplitudeReachesTMax) {
  // 4 m P is linear in the amplitude at leading order (m ~ t - a).
  const double t = 0.1;
  std::vector<double> product;
  for (double alpha : {1.0, 0.1, 0.01}) {
    const auto s = init(alpha);
    // The unit-amplitude moment series blows up before 1.
    const double t_max = alpha < 0.5 ? 1.0 : 0.3;
    const auto ser = series(s.mass(), t_max, 4000);
    product.push_back(DuhamelSweep(ser, 0.0).product(t, s.mass()));
    const double b = local_horizon(0.0, s, SourceTerm::zero(), ser, t_max);
    if (alpha < 0.5) {
      EXPECT_EQ(b, 1.0);
    } else {
      EXPECT_LT(b, 0.3);
    }
  }
  EXPECT_NEAR(product[2] / product[1], 0.1, 0.01);
  EXPECT_NEAR(product[1] / product[0], 0.1, 0.03);
}

TEST_F(ExpHorizon, RejectsBadInputs) {
  const auto s = init(1.0);
  const auto ser = series(s.mass(), 0.2, 100);
  EXPECT_THROW(local_horizon(0.0, s, SourceTerm::zero(), ser, 0.0), ValidationError);
  EXPECT_THROW(local_horizon(0.0, s, SourceTerm::zero(), ser, 0.5), ValidationError);
  EXPECT_THROW(local_horizon(0.1, s, SourceTerm::zero(), ser, 0.2), ValidationError);
}

TEST(Bands, Counting) {
  const auto g = make_grid(4.0, 41);
  std::vector<double> p(41), n(41);
  for (std::size_t i = 0; i < 41; ++i) p[i] = std::exp(-g->nodes[i]);
  const double P = integrate_full(p, *g);

  auto check = [&](double scale, double E) {
    for (std::size_t i = 0; i < 41; ++i) n[i] = scale * p[i];
    return band_summability(*g, n, p, E);
  };
  auto same = check(1.0, P);
  EXPECT_EQ(same.bands, 5u);  // [0,1) .. [3,4) and the end node
  EXPECT_EQ(same.bound_violations, 0u);
  EXPECT_EQ(same.literal_violations, 0u);

  auto over = check(2.0, P);
  EXPECT_EQ(over.bound_violations, 5u);
  EXPECT_EQ(over.literal_violations, 5u);

  auto quadratic = check(1.5, 2.0 * P);
  EXPECT_EQ(quadratic.bound_violations, 0u);
  EXPECT_EQ(quadratic.literal_violations, 5u);
}

TEST_F(ExpHorizon, CertificateInvariants) {
  const auto s = init(1.0);
  const double X = s.mass();
  const double t_max = 1.0 / (4.0 * X);
  const auto ser = series(X, t_max, 4000);
  const double b = local_horizon(0.0, s, SourceTerm::zero(), ser, t_max);
  std::vector<double> times;
  for (int i = 0; i <= 50; ++i) times.push_back(b * i / 50.0);
  const auto cert = build_certificate(0.0, b, s, SourceTerm::zero(), ser, times);
  ASSERT_EQ(cert.samples.size(), 51u);
  EXPECT_EQ(cert.samples.front().m, 0.0);
  EXPECT_EQ(cert.samples.front().psi, 0.0);
  EXPECT_TRUE(cert.discriminant_nonnegative());
  for (std::size_t i = 0; i < cert.samples.size(); ++i) {
    const auto& c = cert.samples[i];
    EXPECT_GE(c.mass_bound, c.p_total);
    EXPECT_LE(c.p_total, c.p_bound * (1.0 + 1e-12));
    if (i) {
      EXPECT_GE(c.m, cert.samples[i - 1].m);
      EXPECT_GE(c.psi, cert.samples[i - 1].psi);
    }
  }
}

TEST(GlobalHorizon, ZeroScenario) {
  const auto g = make_grid(10.0, 101);
  const auto res = global_horizon(1.0, zero_spectrum(g), SourceTerm::zero());
  EXPECT_EQ(res.outcome, HorizonOutcome::reached_T);
  ASSERT_EQ(res.certificates.size(), 1u);
  EXPECT_EQ(res.covered, 1.0);
  for (const auto& s : res.certificates[0].samples) EXPECT_EQ(s.discriminant, 1.0);
}

TEST(GlobalHorizon, ExponentialBlowsUp) {
  const auto g = make_grid(30.0, 601);
  const auto init = exponential_spectrum(g, 1.0, 1.0);
  HorizonOptions opt;
  opt.clamp_negative = false;
  const auto res = global_horizon(2.0, init, SourceTerm::zero(), opt);
  EXPECT_EQ(res.outcome, HorizonOutcome::blowup_detected);
  EXPECT_LT(res.covered, 2.0);
  const double t_star = 1.0 / (kContinuumKappa * init.mass());
  EXPECT_LE(res.covered, t_star * 1.01);
  EXPECT_GE(res.covered, t_star * 0.98);
  ASSERT_GT(res.certificates.size(), 3u);
  for (std::size_t k = 0; k < res.certificates.size(); ++k) {
    const auto& c = res.certificates[k];
    EXPECT_GT(c.b, c.a);
    EXPECT_TRUE(c.discriminant_nonnegative()) << k;
    if (k + 1 < res.certificates.size()) {
      EXPECT_TRUE(c.mass_dominated()) << k;
      EXPECT_EQ(res.certificates[k + 1].a, c.b);
      if (k) {
        EXPECT_GT(c.b, res.certificates[k - 1].b);
      }
    }
  }
}

TEST(GlobalHorizon, SmallAmplitudeCoversT) {
  const auto g = make_grid(30.0, 601);
  const auto init = exponential_spectrum(g, 0.01, 1.0);
  for (auto adv : {HorizonAdvance::mol, HorizonAdvance::picard}) {
    HorizonOptions opt;
    opt.advance = adv;
    const auto res = global_horizon(1.0, init, SourceTerm::zero(), opt);
    EXPECT_EQ(res.outcome, HorizonOutcome::reached_T);
    EXPECT_EQ(res.covered, 1.0);
    EXPECT_LE(res.certificates.size(), 5u);
    for (const auto& c : res.certificates) {
      EXPECT_TRUE(c.mass_dominated());
      EXPECT_TRUE(c.discriminant_nonnegative());
      for (const auto& s : c.samples) EXPECT_EQ(s.bands.bound_violations, 0u);
    }
  }
}

TEST(GlobalHorizon, WithSourceMassDominated) {
  const auto g = make_grid(20.0, 401);
  const auto src = SourceTerm::separable(1.0, 1.0, TimeProfile{});
  const auto res = global_horizon(1.0, zero_spectrum(g), src);
  EXPECT_EQ(res.outcome, HorizonOutcome::reached_T);
  for (const auto& c : res.certificates) {
    EXPECT_TRUE(c.mass_dominated());
    EXPECT_TRUE(c.discriminant_nonnegative());
  }
}

}  // namespace
}  // namespace cnkin
