#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "metron/algebra.hpp"

using namespace metron;
using namespace metron::algebra;

namespace {

using C4 = std::array<std::array<cplx, 4>, 4>;

C4 to_c4(const Mat4c& m) {
  C4 r;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[i][j] = m(i, j);
  return r;
}

C4 mul(const C4& a, const C4& b) {
  C4 r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

double dist(const C4& a, const Mat4c& b) {
  double d = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) d = std::max(d, std::abs(a[i][j] - b(i, j)));
  return d;
}

Mat4c random_unitary(std::mt19937& rng) {
  std::normal_distribution<double> n;
  Mat4c a;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = cplx(n(rng), n(rng));
  Eigen::HouseholderQR<Mat4c> qr(a);
  return qr.householderQ();
}

// Literal transcriptions of the printed tensors as functions of the spinor vector.
using Tensor = std::vector<std::vector<double>>;

Tensor minimal_non_euclidean_literal(const std::array<double, 4>& s) {
  return {{0, 0, 0, 0}, {0, s[0], s[1], s[2]}, {0, s[1], -s[0], s[3]}, {0, s[2], s[3], 0}};
}

Tensor minimal_euclidean_literal(const std::array<double, 4>& s) {
  const double r1 = s[0], r2 = s[1], l1 = s[2], l2 = s[3];
  return {{0, 0, 0, 0}, {0, 0, r1, r2}, {0, r1, l1, l2}, {0, r2, l2, -l1}};
}

Tensor color_non_euclidean_literal(const std::array<double, 4>& s) {
  return {{s[0], s[1], 0, 0, s[2]}, {s[1], -s[0], 0, 0, s[3]}, {0, 0, 0, 0, 0}, {0, 0, 0, 0, 0}, {s[2], s[3], 0, 0, 0}};
}

// Bilinear oracle: M^{ab} = sum_{AB} eta_A eta_B T(e_a)_AB T(e_b)_AB / (2 norm).
template <class F>
Eigen::Matrix4d metric_oracle(F tensor, const std::vector<int>& eta, double norm) {
  Eigen::Matrix4d M = Eigen::Matrix4d::Zero();
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      std::array<double, 4> ea{}, eb{};
      ea[a] = 1.0;
      eb[b] = 1.0;
      const Tensor Ta = tensor(ea), Tb = tensor(eb);
      for (std::size_t A = 0; A < eta.size(); ++A)
        for (std::size_t B = 0; B < eta.size(); ++B) M(a, b) += eta[A] * eta[B] * Ta[A][B] * Tb[A][B];
    }
  return M / (2.0 * norm);
}

}  // namespace

TEST(Gamma, DiracRepresentationSatisfiesAllRelations) {
  const auto r = verify_gamma(dirac_representation());
  EXPECT_EQ(r.anticommutator, 0.0);
  EXPECT_EQ(r.hermiticity, 0.0);
  EXPECT_EQ(r.gamma5, 0.0);
}

TEST(Gamma, ChiralRepresentationAndGamma5Blocks) {
  const auto gs = chiral_representation();
  const auto r = verify_gamma(gs);
  EXPECT_EQ(r.max_deviation(), 0.0);
  const auto g = to_c4(gs.g[0]);
  C4 prod = mul(mul(mul(g, to_c4(gs.g[1])), to_c4(gs.g[2])), to_c4(gs.g[3]));
  for (auto& row : prod)
    for (auto& x : row) x *= cplx(0.0, 1.0);
  Mat4c expect = Mat4c::Zero();
  expect.diagonal() << -1, -1, 1, 1;
  EXPECT_EQ(dist(prod, expect), 0.0);
}

TEST(Gamma, DiracIGamma4IsSignatureDiagonal) {
  const Mat4c ig4 = cplx(0.0, 1.0) * dirac_representation().g[3];
  Mat4c expect = Mat4c::Zero();
  expect.diagonal() << 1, 1, -1, -1;
  EXPECT_EQ((ig4 - expect).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gamma, AnticommutatorsAgainstNaiveProducts) {
  const auto gs = dirac_representation();
  const std::array<double, 4> eta{1, 1, 1, -1};
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      const C4 ab = mul(to_c4(gs.g[a]), to_c4(gs.g[b])), ba = mul(to_c4(gs.g[b]), to_c4(gs.g[a]));
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          const cplx want = (a == b && i == j) ? 2.0 * eta[a] : 0.0;
          EXPECT_EQ(ab[i][j] + ba[i][j], want) << a << b;
        }
    }
}

TEST(Gamma, PerturbedEntryIsReportedAtItsScale) {
  auto gs = dirac_representation();
  gs.g[0](0, 3) += 1e-3;
  const auto r = verify_gamma(gs);
  EXPECT_GT(r.anticommutator, 5e-4);
  EXPECT_LT(r.anticommutator, 5e-3);
  EXPECT_GT(r.hermiticity, 5e-4);
  EXPECT_FALSE(r.ok());
}

TEST(Gamma, RandomUnitarySimilarityPreservesRelations) {
  std::mt19937 rng(7);
  for (int t = 0; t < 20; ++t) {
    const auto gs = similarity(t % 2 ? chiral_representation() : dirac_representation(), random_unitary(rng));
    EXPECT_LT(verify_gamma(gs).max_deviation(), 1e-12);
  }
}

TEST(KgFactorization, OnShellProductVanishes) {
  const double w = 1.3;
  const std::array<double, 4> k{0.3, -0.4, 1.2, std::sqrt(0.09 + 0.16 + 1.44 + w * w)};
  const auto f = kg_factorization(k, w, dirac_representation());
  EXPECT_NEAR(f.kk, -w * w, 1e-14);
  EXPECT_LT(f.product.cwiseAbs().maxCoeff(), 1e-13);
}

TEST(KgFactorization, OffShellMatchesDirectMultiplication) {
  const auto gs = chiral_representation();
  const std::array<double, 4> k{0.7, 0.2, -1.1, 0.5};
  const double w = 0.9;
  const std::array<double, 4> eta{1, 1, 1, -1};
  C4 gk{};
  for (int l = 0; l < 4; ++l) {
    const C4 g = to_c4(gs.g[l]);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) gk[i][j] += eta[l] * k[l] * g[i][j];
  }
  C4 plus = gk, minus = gk;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      plus[i][j] *= cplx(0, 1);
      minus[i][j] *= cplx(0, 1);
    }
  for (int i = 0; i < 4; ++i) {
    plus[i][i] += w;
    minus[i][i] -= w;
  }
  const auto f = kg_factorization(k, w, gs);
  EXPECT_LT(dist(mul(plus, minus), f.product), 1e-14);
  const double kk = 0.49 + 0.04 + 1.21 - 0.25;
  EXPECT_LT((f.product + (kk + w * w) * Mat4c::Identity()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(KgFactorization, RandomWavevectorsAndRepresentations) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int t = 0; t < 50; ++t) {
    const auto gs = similarity(dirac_representation(), random_unitary(rng));
    ASSERT_LT(verify_gamma(gs).max_deviation(), 1e-12);
    const std::array<double, 4> k{u(rng), u(rng), u(rng), u(rng)};
    EXPECT_LT(kg_factorization(k, std::abs(u(rng)), gs).residual, 1e-12);
  }
}

TEST(SpinorMetric, MinimalNonEuclideanDirectContraction) {
  const double k5 = 2.5;
  const auto m = minimal_non_euclidean(k5);
  const Mat4c M = spinor_metric(m);
  EXPECT_DOUBLE_EQ(M(0, 0).real(), 1.0 / k5);
  EXPECT_DOUBLE_EQ(M(2, 2).real(), -1.0 / k5);
  const auto oracle = metric_oracle(minimal_non_euclidean_literal, {1, 1, 1, -1}, k5);
  EXPECT_EQ((M.real() - oracle).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(M.imag().cwiseAbs().maxCoeff(), 0.0);
}

TEST(SpinorMetric, MinimalEuclideanIsIdentityOverE) {
  const double E = 3.0;
  const Mat4c M = spinor_metric(minimal_euclidean(1.0, E));
  EXPECT_EQ((M - Mat4c::Identity() / E).cwiseAbs().maxCoeff(), 0.0);
  const auto oracle = metric_oracle(minimal_euclidean_literal, {1, 1, 1, 1}, E);
  EXPECT_EQ((M.real() - oracle).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SpinorMetric, ColorNonEuclideanMatchesLiteralTensor) {
  const auto m = color_non_euclidean(0.6, 0.8);
  EXPECT_DOUBLE_EQ(m.norm, 1.0);
  const Mat4c M = spinor_metric(m);
  const auto oracle = metric_oracle(color_non_euclidean_literal, {1, 1, 1, 1, -1}, 1.0);
  EXPECT_EQ((M.real() - oracle).cwiseAbs().maxCoeff(), 0.0);
}

TEST(SpinorMetric, ExtendedFiveDimensionalEqualsMinimalEuclidean) {
  const double E = 1.7;
  const Mat4c M4 = spinor_metric(minimal_euclidean(1.0, E));
  for (bool fifth : {false, true}) {
    const Mat4c M5 = spinor_metric(electroweak_extended(1.0, 0.4, E, fifth));
    EXPECT_EQ((M5 - M4).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(SpinorMetric, PrintedColorEuclideanTensorFailsTarget) {
  const auto bad = color_euclidean_as_printed(0.6, 0.8, 1.0);
  try {
    spinor_metric(bad);
    FAIL() << "expected MetricMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::MetricMismatch);
  }
  EXPECT_NO_THROW(spinor_metric(color_euclidean(0.6, 0.8, 1.0)));
}

TEST(Gauge, AllShippedModelsAreExact) {
  for (double s : {1.0, 0.37, 12.5})
    for (const auto& m : shipped_models(s)) {
      const auto g = check_gauge_conditions(m);
      EXPECT_TRUE(g.ok()) << m.tensor << model_name(m.name);
      EXPECT_NO_THROW(spinor_metric(m)) << m.tensor;
    }
}

TEST(Gauge, InjectedFirstRowBreaksDivergence) {
  auto m = minimal_non_euclidean(1.0);
  m.P[1](0, 2) = m.P[1](2, 0) = 1;
  const auto g = check_gauge_conditions(m);
  EXPECT_GT(g.divergence, 0.5);
  EXPECT_FALSE(g.ok());
}

TEST(Gauge, PrintedColorEuclideanTensorBreaksTrace) {
  const auto g = check_gauge_conditions(color_euclidean_as_printed(0.6, 0.8, 1.0));
  EXPECT_EQ(g.trace[2], 1);
  EXPECT_EQ(g.trace[3], -1);
  EXPECT_EQ(g.divergence, 0.0);
}

TEST(Gauge, ColorTensorWithWavenumberOffThePlaneFailsDivergence) {
  auto m = color_non_euclidean(0.6, 0.8);
  m.k[0] = 0.1;
  EXPECT_GT(check_gauge_conditions(m).divergence, 0.0);
}

TEST(QuarkStar, WorkedConstants) {
  const auto s = quark_star(1.0);
  EXPECT_NEAR(s.omega_b, std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(s.A1, 4.0, 1e-12);
  EXPECT_NEAR(s.A2, -2.0, 1e-12);
  EXPECT_NEAR(s.C3, 0.5, 1e-12);
  EXPECT_NEAR(s.g3, std::sqrt(0.5), 1e-12);
  EXPECT_NEAR(s.g3_diag / s.g3, std::sqrt(6.0), 1e-12);
  EXPECT_NEAR(s.diagonal_sum_coefficient, 0.0, 1e-12);
}

TEST(QuarkStar, ExactSumAndSixtyDegreeGeometry) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi), mass(0.1, 10.0);
  for (int t = 0; t < 100; ++t) {
    const double w = mass(rng);
    const auto s = quark_star(w, ang(rng));
    EXPECT_EQ(s.sum_residual, 0.0);
    for (int p = 0; p < 3; ++p) {
      EXPECT_TRUE(s.k[p].in_color_plane());
      EXPECT_NEAR(s.k[p].mass(), w, 1e-12 * w);
      for (int q = p + 1; q < 3; ++q) {
        const double cos_pq = (s.k[p][2] * s.k[q][2] + s.k[p][3] * s.k[q][3]) / (w * w);
        EXPECT_NEAR(cos_pq, std::cos(2.0 * std::numbers::pi / 3.0), 1e-12);
        EXPECT_NEAR(s.k[p].dot(s.k[q]), -0.5 * w * w, 1e-12 * w * w);
      }
    }
    for (const auto& b : s.bosons) EXPECT_NEAR(b.mass, b.p == b.q ? 0.0 : std::sqrt(3.0) * w, 1e-12 * w);
    EXPECT_NEAR(s.A1, 4.0, 1e-12);
    EXPECT_NEAR(s.A2, -2.0, 1e-12);
  }
}

TEST(QuarkStar, RejectsNonPositiveMass) {
  EXPECT_THROW(quark_star(0.0), Error);
}

TEST(Electroweak, KappaZeroRatioFormula) {
  const auto c = electroweak_config(2.0, -1.5, 0.0);
  EXPECT_EQ(c.kappa_sq, 0.0);
  const double wn = 1.5, we = 2.0;
  EXPECT_NEAR(c.ratio_from_masses, wn / std::sqrt(wn * wn + we * we), 1e-14);
  EXPECT_NEAR(c.ratio_printed, c.ratio_from_masses, 1e-14);
  EXPECT_NEAR(c.higgs.mass_ratio, c.ratio_from_masses, 1e-14);
}

TEST(Electroweak, EqualMassesGiveInverseRootTwo) {
  const auto c = electroweak_config(1.3, 0.0);
  EXPECT_NEAR(c.ratio_from_masses, 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(mass_ratio(1.0, 0.0, RatioForm::AsPrinted), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(Electroweak, DerivedQuantitiesFromComponents) {
  const double k5 = 1.4, k9 = 0.6;
  const auto c = electroweak_config(k5, k9);
  EXPECT_NEAR(c.omega_e_sq, k5 * k5 - k9 * k9, 1e-14);
  EXPECT_NEAR(c.omega_nu_sq, k5 * k5 - k9 * k9, 1e-14);
  EXPECT_NEAR(c.kappa_sq, k9 * k9, 1e-14);
  EXPECT_NEAR(c.C2, 0.5 * (c.omega_e_sq + c.omega_nu_sq + 2.0 * c.kappa_sq), 1e-14);
  EXPECT_NEAR(c.g2 * c.g2, c.C2, 1e-14);
  EXPECT_NEAR(c.Lambda_sq, c.omega_e_sq * c.omega_nu_sq - std::pow(c.kappa_sq, 2), 1e-14);
  EXPECT_NEAR(c.e_M, std::sqrt(c.Lambda_sq) / std::sqrt(c.omega_nu_sq), 1e-14);
  EXPECT_NEAR(c.omega_nue_sq, c.omega_e_sq + c.omega_nu_sq - 2.0 * c.kappa_sq, 1e-14);
  EXPECT_EQ(c.k_e[0], -c.k_nu[1]);
  EXPECT_EQ(c.k_e[4], -c.k_nu[4]);
}

TEST(Electroweak, SignatureInequalityEnforced) {
  try {
    electroweak_config(1.0, 1.0 / std::sqrt(2.0) + 1e-9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidSignature);
  }
  EXPECT_NO_THROW(electroweak_config(1.0, 0.7));
}

TEST(Electroweak, EuclideanModesSuppressK9) {
  for (auto sig : {EwSignature::Euclidean5, EwSignature::Euclidean4}) {
    const auto c = electroweak_config(1.0, 0.3, sig);
    EXPECT_TRUE(c.k9_suppressed);
    EXPECT_EQ(c.kappa_sq, 0.0);
    EXPECT_NEAR(c.ratio_from_masses, 1.0 / std::sqrt(2.0), 1e-15);
  }
}

TEST(Electroweak, AlignedHiggsMasses) {
  const auto c = electroweak_config(1.2, -0.9, 0.4, EwSignature::NonEuclidean41, 2.0);
  const auto& h = c.higgs;
  EXPECT_TRUE(h.aligned);
  EXPECT_NEAR(h.a_coeff, 0.0, 1e-14);
  EXPECT_NEAR(h.kappa_h_nu_sq / h.kappa_h_e_sq, c.omega_nu_sq / c.kappa_sq, 1e-12);
  EXPECT_NEAR(h.m_diag_sq, 4.0 * std::pow(h.kappa_h_nu_sq, 2) / c.omega_nu_sq, 1e-12);
  const double x = std::sqrt(c.omega_e_sq / c.omega_nu_sq), y = std::sqrt(c.kappa_sq / c.omega_nu_sq);
  EXPECT_NEAR(h.mass_ratio, mass_ratio(x, y, RatioForm::FromMasses), 1e-14);
  EXPECT_GT(std::abs(h.mass_ratio - mass_ratio(x, y, RatioForm::AsPrinted)), 1e-3);
}

TEST(Electroweak, MisalignedHiggsMixesPhoton) {
  const auto c = electroweak_config(1.0, 0.4);
  const auto h = higgs_sector(c, 1.0, c.k_e);
  EXPECT_FALSE(h.aligned);
  EXPECT_GT(std::abs(h.a_coeff), 0.1);
  // Massive boson coefficients follow from B_nunu, B_ee written in Z, A.
  const double wn = std::sqrt(c.omega_nu_sq), L = std::sqrt(c.Lambda_sq);
  const double z = h.kappa_h_nu_sq / wn;
  const double a = h.kappa_h_nu_sq * c.kappa_sq / (wn * L) - h.kappa_h_e_sq * wn / L;
  EXPECT_NEAR(h.z_coeff, z, 1e-14);
  EXPECT_NEAR(h.a_coeff, a, 1e-14);
}

TEST(Electroweak, RatioRootFindReachesTarget) {
  const auto s = solve_mass_ratio(0.87);
  EXPECT_NEAR(s.ratio, 0.87, 1e-12);
  EXPECT_NEAR(s.config.higgs.mass_ratio, 0.87, 1e-6);
  EXPECT_NEAR(s.config.omega_nu_sq, 1.0, 1e-12);
  EXPECT_NEAR(s.config.omega_e_sq, 1.0, 1e-12);
  EXPECT_NEAR(s.kappa_over_omega_nu * s.kappa_over_omega_nu, 2.0 * 0.87 * 0.87 - 1.0, 1e-10);
  const auto p = solve_mass_ratio(0.87, 1.0, RatioForm::AsPrinted);
  EXPECT_NEAR(p.ratio, 0.87, 1e-12);
  EXPECT_LT(p.kappa_over_omega_nu, s.kappa_over_omega_nu);
}

TEST(Electroweak, RatioFunctionIsContinuousAndMonotone) {
  double prev = mass_ratio(1.0, 0.0, RatioForm::FromMasses);
  for (int i = 1; i <= 1000; ++i) {
    const double y = 0.999 * i / 1000.0;
    const double r = mass_ratio(1.0, y, RatioForm::FromMasses);
    EXPECT_GT(r, prev);
    EXPECT_LT(r - prev, 1e-3);
    prev = r;
  }
}

TEST(Electroweak, UnreachableRatioReportsNoBracket) {
  try {
    solve_mass_ratio(0.5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoBracket);
  }
}

TEST(QuarkElectroweak, SumIdentityExactForUnitVectors) {
  const HarmonicWavenumber ke({1, 0, 0, 0, 0}), kn({0, 1, 0, 0, 0}), kc({0, 0, 0, 0, 0});
  const auto q = quark_ew_wavenumbers(ke, kn, kc);
  EXPECT_EQ(q.sum_identity_residual, 0.0);
  EXPECT_NEAR(q.k_u[0], -2.0 / 3.0, 1e-16);
  EXPECT_NEAR(q.k_d[1], -2.0 / 3.0, 1e-16);
}

TEST(QuarkElectroweak, ChargePatternAndCouplings) {
  const auto c = electroweak_config(1.3, 0.5);
  const auto q = quark_ew_wavenumbers(c, HarmonicWavenumber({0, 0, 0.4, -0.7, 0}));
  EXPECT_LT(q.sum_identity_residual, 1e-15);
  EXPECT_NEAR(q.charge_ratio_u, -2.0 / 3.0, 1e-15);
  EXPECT_NEAR(q.charge_ratio_d, 1.0 / 3.0, 1e-15);
  const double wn = std::sqrt(c.omega_nu_sq), k2 = c.kappa_sq, eM = c.e_M;
  EXPECT_NEAR(q.nu.z, wn, 1e-14);
  EXPECT_NEAR(q.e.z, k2 / wn, 1e-14);
  EXPECT_NEAR(q.u.z, -2.0 * k2 / (3.0 * wn) + wn / 3.0, 1e-14);
  EXPECT_NEAR(q.d.z, k2 / (3.0 * wn) - 2.0 * wn / 3.0, 1e-14);
  EXPECT_NEAR(q.nu.a, 0.0, 1e-14);
  EXPECT_NEAR(q.e.a, -eM, 1e-14);
  EXPECT_NEAR(q.u.a, 2.0 / 3.0 * eM, 1e-14);
  EXPECT_NEAR(q.d.a, -1.0 / 3.0 * eM, 1e-14);
  EXPECT_NEAR(q.w_factor_quark, -1.0 / 3.0, 1e-14);
  EXPECT_NEAR(q.k_Z.mass_sq(), 1.0, 1e-14);
  EXPECT_NEAR(q.k_A.mass_sq(), 1.0, 1e-14);
  EXPECT_NEAR(q.k_Z.dot(q.k_A), 0.0, 1e-14);
}

TEST(QuarkElectroweak, SameOffDiagonalBosonAsLeptons) {
  const auto c = electroweak_config(1.0, 0.3);
  const auto q = quark_ew_wavenumbers(c, HarmonicWavenumber({0, 0, 0.2, 0.1, 0}));
  const auto dq = q.k_u - q.k_d, dl = c.k_nu - c.k_e;
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(dq[i], dl[i], 1e-15);
}

TEST(QuarkElectroweak, ColorVectorOffPlaneRejected) {
  const auto c = electroweak_config(1.0, 0.3);
  try {
    quark_ew_wavenumbers(c, HarmonicWavenumber({0.1, 0, 0.2, 0.1, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ColorPlaneViolation);
  }
}

TEST(GaugeCorrespondence, IdentityTransformation) {
  const auto g = gauge_correspondence(quark_star(1.0, 0.2), 0.0, 0.0);
  for (double e : g.eps_diag) EXPECT_EQ(e, 0.0);
}

TEST(GaugeCorrespondence, SubstitutionOracleAndDependentEquation) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const auto s = quark_star(0.5 + std::abs(u(rng)), 3.0 * u(rng));
    std::array<HarmonicWavenumber, 3> v;
    for (auto& x : v) x = HarmonicWavenumber({u(rng), u(rng), u(rng), u(rng), u(rng)});
    const double e3 = u(rng), e8 = u(rng);
    const auto g = gauge_correspondence(s, e3, e8, &v);
    EXPECT_LT(g.dependent_residual, 1e-12);
    EXPECT_NEAR(g.rhs_sum, 0.0, 1e-15);
    const double r3 = 1.0 / std::sqrt(3.0);
    const std::array<double, 3> rhs{0.5 * (e3 + r3 * e8), 0.5 * (-e3 + r3 * e8), -r3 * e8};
    double w7 = 0.0, w8 = 0.0;
    for (int p = 0; p < 3; ++p) {
      w7 += v[p][2] * g.eps_diag[p];
      w8 += v[p][3] * g.eps_diag[p];
    }
    for (int p = 0; p < 3; ++p) EXPECT_NEAR(s.k[p][2] * w7 + s.k[p][3] * w8, rhs[p], 1e-12);
  }
}

TEST(GaugeCorrespondence, PerturbedStarBreaksDependence) {
  auto s = quark_star(1.0, 0.4);
  const auto base = gauge_correspondence(s, 0.5, 0.8);
  EXPECT_LT(base.dependent_residual, 1e-12);
  auto k = s.k;
  k[2][2] += 0.05;
  const auto g = gauge_correspondence(quark_star_from(k), 0.5, 0.8);
  EXPECT_GT(g.dependent_residual, 1e-3);
  EXPECT_GT(g.k_sum, 1e-3);
}

TEST(GaugeCorrespondence, ParallelProjectionsRejected) {
  const auto s = quark_star(1.0);
  std::array<HarmonicWavenumber, 3> v;
  for (int p = 0; p < 3; ++p) v[p] = HarmonicWavenumber({0.3 * p, 0, 1.0 * (p + 1), 2.0 * (p + 1), 0});
  try {
    gauge_correspondence(s, 0.1, 0.2, &v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SingularVChoice);
  }
}

TEST(GaugeCorrespondence, OffDiagonalConstantFromStarGeometry) {
  const double w = 1.7;
  const auto g = gauge_correspondence(quark_star(w, 0.9), 0.0, 0.0, nullptr, {1, 2, 3, 4, 5, 6});
  for (double C : g.C) EXPECT_NEAR(C, -3.0 * w * w, 1e-12);
  EXPECT_NEAR(g.C_printed, -w * w, 1e-12);
  EXPECT_NEAR(g.eps_offdiag[1].real(), 3.0 / (-3.0 * w * w), 1e-12);
  EXPECT_NEAR(g.eps_offdiag[2].imag(), 6.0 / (-3.0 * w * w), 1e-12);
}

TEST(Calibration, UnitNormalization) {
  const auto c = calibrate_constants({2.0, 1.0, 0.5, 1.0, 0.3});
  EXPECT_EQ(c.G, 1.0);
  EXPECT_DOUBLE_EQ(c.e_prime, std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(c.q, std::sqrt(2.0) / 2.0);
  EXPECT_DOUBLE_EQ(c.m, 0.25);
  EXPECT_DOUBLE_EQ(c.hbar, 0.3);
}

TEST(Calibration, MasslessAtLowestOrder) {
  const auto c = calibrate_constants({3.0, 2.0, 0.0, -1.0, 0.0});
  EXPECT_EQ(c.m, 0.0);
  EXPECT_EQ(c.epsilon, 0.0);
  EXPECT_EQ(c.epsilon_loop, 0.0);
}

TEST(Calibration, LoopIdentityHoldsOnRandomInputs) {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(0.01, 10.0);
  for (int t = 0; t < 200; ++t) {
    const CalibrationInput in{u(rng), u(rng), u(rng), (t % 2 ? -1 : 1) * u(rng), u(rng)};
    const auto c = calibrate_constants(in);
    EXPECT_NEAR(c.epsilon_loop, c.epsilon, 1e-12 * c.epsilon);
    const double direct = 0.5 * std::pow(in.M / (in.beta * in.k5), 2);
    EXPECT_NEAR(c.epsilon, direct, 1e-14 * direct);
  }
}

TEST(Calibration, DegenerateInputs) {
  for (auto in : {CalibrationInput{0.0, 1.0, 1.0, 1.0, 0.0}, CalibrationInput{1.0, 0.0, 1.0, 1.0, 0.0}}) {
    try {
      calibrate_constants(in);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::DivisionDegenerate);
    }
  }
  EXPECT_THROW(calibrate_constants({-1.0, 1.0, 1.0, 1.0, 0.0}), Error);
}

TEST(ScaleRatio, SixthRoot) {
  EXPECT_DOUBLE_EQ(scale_ratio(1.0), 1.0);
  EXPECT_NEAR(scale_ratio(1e-42), 1e-7, 1e-20);
  const double r = scale_ratio(2.4e-43);
  EXPECT_NEAR(r, std::exp(std::log(2.4e-43) / 6.0), 1e-20);
  EXPECT_GT(r, 6e-8);
  EXPECT_LT(r, 1e-7);
  EXPECT_THROW(scale_ratio(0.0), Error);
}

TEST(Suites, AllShippedChecksPass) {
  for (const auto& name : suite_names())
    for (const auto& r : run_suite(name)) EXPECT_TRUE(r.pass) << r.check_id << " dev=" << r.max_deviation;
  EXPECT_THROW(run_suite("nope"), Error);
}
