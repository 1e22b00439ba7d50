#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace psa;
using psa::testing::Rng;

namespace {

DipoleRates fig_rates(Statistics s = Statistics::Bosonic, double beta = 2.0, double kappa0 = 2.0,
                      double wc = 5.0) {
  DipoleModel m = psa::testing::qubit_model(0.0, s);
  m.beta = beta;
  m.kappa0 = kappa0;
  m.omega_c = wc;
  return dipole_rates(m);
}

/// Smallest eigenvalue of [[a, c], [conj c, b]] by the quadratic formula.
double two_by_two_min(double a, double b, Complex c) {
  return 0.5 * (a + b) - std::sqrt(0.25 * (a - b) * (a - b) + std::norm(c));
}

}  // namespace

TEST(Positivity, SecularDipoleSpectrum) {
  const auto p = build_dipole(psa::testing::qubit_model(0.0));
  const auto r = dipole_rates(p.model);
  EXPECT_NEAR(lambda_min(p.generator.gamma), std::min(r.gamma_mm(), r.gamma_pp()), 1e-13);
}

TEST(Positivity, ThresholdIsRootOfDeterminant) {
  for (auto s : {Statistics::Bosonic, Statistics::Fermionic})
    for (double beta : {0.5, 2.0, 8.0}) {
      const auto r = fig_rates(s, beta);
      const double th = r.exact_threshold();
      ASSERT_GT(th, 0.0);
      ASSERT_LT(th, 1.0);
      const Complex c = r.gamma_mp(th);
      const double scale = r.gamma_pp() + r.gamma_mm();
      EXPECT_LT(std::abs(two_by_two_min(r.gamma_mm(), r.gamma_pp(), c)), 1e-10 * scale);
      EXPECT_LT(std::abs(r.determinant(th)), 1e-10 * scale * scale);
      // just inside: PSD; just outside: not
      EXPECT_GE(two_by_two_min(r.gamma_mm(), r.gamma_pp(), r.gamma_mp(th * (1 - 1e-6))), 0.0);
      EXPECT_LT(two_by_two_min(r.gamma_mm(), r.gamma_pp(), r.gamma_mp(th * (1 + 1e-6))), 0.0);
    }
}

TEST(Positivity, GenericGammaVanishesAtThreshold) {
  const auto r = fig_rates();
  DipoleModel m = psa::testing::qubit_model(r.exact_threshold());
  const auto p = build_dipole(m);
  const double scale = p.generator.gamma.cwiseAbs().maxCoeff();
  EXPECT_NEAR(lambda_min(p.generator.gamma), 0.0, 1e-9 * scale);
}

TEST(Positivity, ThresholdIndependentOfKappa0) {
  for (auto s : {Statistics::Bosonic, Statistics::Fermionic}) {
    const auto a = fig_rates(s, 1.0, 0.1, 10.0);
    const auto b = fig_rates(s, 1.0, 2.0, 10.0);
    EXPECT_NEAR(a.exact_threshold(), b.exact_threshold(), 1e-10);
    EXPECT_NEAR(a.sufficient_bound(), b.sufficient_bound(), 1e-10);
  }
}

TEST(Positivity, BoundOrdering) {
  for (auto s : {Statistics::Bosonic, Statistics::Fermionic})
    for (double T : {0.05, 0.2, 1.0, 5.0}) {
      const auto r = fig_rates(s, 1.0 / T, 2.0, 10.0);
      EXPECT_LE(r.exact_threshold(), r.simple_bound() + 1e-10);
      EXPECT_LE(r.sufficient_bound(), r.exact_threshold() + 1e-10);
    }
}

TEST(Positivity, SimpleBoundClosedForm) {
  const auto r = fig_rates(Statistics::Fermionic, 1.0);
  const double n = 1.0 / (std::exp(1.0) + 1.0);
  EXPECT_NEAR(r.simple_bound(), 2.0 * std::sqrt(n * (1.0 - n)), 1e-14);
}

TEST(Positivity, DipoleCriticalTimeReproducesSufficientBound) {
  for (auto s : {Statistics::Bosonic, Statistics::Fermionic}) {
    DipoleModel m = psa::testing::qubit_model(0.0, s);
    const auto p = build_dipole(m);
    const auto ct = critical_times(p.omega);
    const auto r = dipole_rates(m);
    // |sinc(omega0 dt)| <= 1 / (omega0 dt) at dt = dtc1
    EXPECT_NEAR(1.0 / (m.omega0 * ct.dtc1), r.sufficient_bound(), 1e-12);
    EXPECT_LE(ct.dtc0, ct.dtc1 * (1 + 1e-12));
    EXPECT_LE(ct.dtc1, ct.dtc2 * (1 + 1e-12));
  }
}

TEST(Positivity, CriticalTimesAreSufficientOnSyntheticSets) {
  Rng rng(40);
  for (int trial = 0; trial < 30; ++trial) {
    const auto gaps = psa::testing::random_three_gaps(rng);
    const auto channels = 1 + trial % 3;
    const OmegaProvider om = psa::testing::random_omega_set(rng, gaps, channels);
    const auto ct = critical_times(om);
    ASSERT_FALSE(ct.trivial);
    EXPECT_LE(ct.dtc0, ct.dtc1 * (1 + 1e-12));
    EXPECT_LE(ct.dtc1, ct.dtc2 * (1 + 1e-12));
    for (double dt : {ct.dtc0, ct.dtc1, ct.dtc2, 2.0 * ct.dtc2}) {
      const Matrix g = coarse_grained_gamma(om, CoarseGraining::time(dt));
      const double scale = g.cwiseAbs().maxCoeff();
      EXPECT_GE(lambda_min(g), -1e-10 * scale) << "trial " << trial << " dt " << dt;
    }
    EXPECT_TRUE(verify_dilution(om, gaps, optimal_probabilities(ct), ct.dtc0));
    EXPECT_TRUE(verify_dilution(om, gaps, flat_probabilities(3), ct.dtc1));
    EXPECT_TRUE(verify_dilution(om, gaps, flat_probabilities(3), ct.dtc2));
    EXPECT_FALSE(verify_dilution(om, gaps, optimal_probabilities(ct), 0.5 * ct.dtc0));
  }
}

TEST(Positivity, OptimalProbabilitiesAreNormalised) {
  Rng rng(41);
  const auto gaps = psa::testing::random_three_gaps(rng);
  const auto ct = critical_times(psa::testing::random_omega_set(rng, gaps, 2));
  for (const auto& rec : ct.dilution) {
    double sq = 0.0, sp = 0.0;
    for (double x : rec.q) sq += x;
    for (double x : rec.p_optimal) sp += x;
    EXPECT_NEAR(sq, 1.0, 1e-14);
    EXPECT_NEAR(sp, 1.0, 1e-14);
  }
}

TEST(Positivity, HalvedDtc0CanFailTheBoundWhileStayingPositive) {
  // sufficiency, not necessity: the dilution bound is violated at dtc0 / 2 for
  // the dipole model although gamma^(dt) is still positive there
  const auto p = build_dipole(psa::testing::qubit_model(0.0));
  const auto ct = critical_times(p.omega);
  const double dt = 0.5 * ct.dtc0;
  EXPECT_FALSE(verify_dilution(p.omega, p.omega.gaps(), optimal_probabilities(ct), dt));
  EXPECT_GE(lambda_min(coarse_grained_gamma(p.omega, CoarseGraining::time(dt))), 0.0);
}

TEST(Positivity, SingleGapIsTrivial) {
  OmegaProvider om;
  om.set(1.0, Matrix::Constant(1, 1, Complex(0.5, 0.3)));
  const auto ct = critical_times(om);
  EXPECT_TRUE(ct.trivial);
  EXPECT_EQ(ct.dtc0, 0.0);
  const auto rep = certify(om, CoarseGraining::redfield());
  EXPECT_TRUE(rep.is_cp);
  EXPECT_NEAR(*rep.lambda_min, 1.0, 1e-15);
}

TEST(Positivity, SingularSecularBlockGivesInfiniteTime) {
  OmegaProvider om;
  om.set(-1.0, Matrix::Constant(1, 1, Complex(0.0, 0.3)));  // no dissipation at -1
  om.set(1.0, Matrix::Constant(1, 1, Complex(0.5, 0.0)));
  const auto ct = critical_times(om);
  EXPECT_TRUE(std::isinf(ct.dtc1));
  EXPECT_TRUE(std::isinf(ct.dtc2));
}

TEST(Positivity, DilutionTableValidation) {
  OmegaProvider om;
  om.set(-1.0, Matrix::Identity(1, 1));
  om.set(1.0, Matrix::Identity(1, 1));
  DilutionProbabilities bad = {{0.0, 0.5}, {1.0, 0.0}};
  EXPECT_THROW(verify_dilution(om, om.gaps(), bad, 1.0), ValidationError);
  EXPECT_THROW(verify_dilution(om, om.gaps(), {{0.0}}, 1.0), ValidationError);
}
