#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/tools/toms748_solve.hpp>

#include "errors.hpp"

namespace metron::algebra {

using cplx = std::complex<double>;
using Mat4c = Eigen::Matrix4cd;

// Harmonic components (k5, k6, k7, k8, k9); the colour plane is (k7, k8).
struct HarmonicWavenumber {
  std::array<double, 5> k{};
  std::array<int, 5> signature{1, 1, 1, 1, -1};

  HarmonicWavenumber() = default;
  HarmonicWavenumber(std::array<double, 5> c, std::array<int, 5> sig = {1, 1, 1, 1, -1}) : k(c), signature(sig) {}

  double operator[](std::size_t i) const { return k[i]; }
  double& operator[](std::size_t i) { return k[i]; }

  HarmonicWavenumber operator+(const HarmonicWavenumber& o) const {
    HarmonicWavenumber r = *this;
    for (std::size_t i = 0; i < 5; ++i) r.k[i] += o.k[i];
    return r;
  }
  HarmonicWavenumber operator-(const HarmonicWavenumber& o) const {
    HarmonicWavenumber r = *this;
    for (std::size_t i = 0; i < 5; ++i) r.k[i] -= o.k[i];
    return r;
  }
  HarmonicWavenumber operator*(double a) const {
    HarmonicWavenumber r = *this;
    for (auto& c : r.k) c *= a;
    return r;
  }

  double dot(const HarmonicWavenumber& o) const {
    if (signature != o.signature) throw Error(Errc::PreconditionViolated, "wavenumbers carry different signatures");
    double s = 0.0;
    for (std::size_t i = 0; i < 5; ++i) s += signature[i] * k[i] * o.k[i];
    return s;
  }
  double mass_sq() const { return dot(*this); }
  double mass() const {
    const double m2 = mass_sq();
    if (m2 < 0.0) throw Error(Errc::InvalidSignature, "negative harmonic mass squared");
    return std::sqrt(m2);
  }
  bool in_color_plane() const { return k[0] == 0.0 && k[1] == 0.0 && k[4] == 0.0; }
};

inline constexpr std::array<int, 5> kSignature41{1, 1, 1, 1, -1};
inline constexpr std::array<int, 5> kSignature5{1, 1, 1, 1, 1};

// ---------------------------------------------------------------- gamma matrices

struct GammaSet {
  std::array<Mat4c, 4> g;  // gamma^1 .. gamma^4
  Mat4c g5;
  std::string name;
};

namespace detail {

inline std::array<Eigen::Matrix2cd, 3> pauli() {
  const cplx i(0.0, 1.0);
  Eigen::Matrix2cd s1, s2, s3;
  s1 << 0, 1, 1, 0;
  s2 << 0, -i, i, 0;
  s3 << 1, 0, 0, -1;
  return {s1, s2, s3};
}

inline Mat4c blocks(const Eigen::Matrix2cd& a, const Eigen::Matrix2cd& b, const Eigen::Matrix2cd& c,
                    const Eigen::Matrix2cd& d) {
  Mat4c m;
  m.topLeftCorner<2, 2>() = a;
  m.topRightCorner<2, 2>() = b;
  m.bottomLeftCorner<2, 2>() = c;
  m.bottomRightCorner<2, 2>() = d;
  return m;
}

inline double max_abs(const Mat4c& m) { return m.cwiseAbs().maxCoeff(); }

inline Mat4c gamma5_product(const std::array<Mat4c, 4>& g) { return cplx(0.0, 1.0) * g[0] * g[1] * g[2] * g[3]; }

}  // namespace detail

// gamma^4 = -i beta, gamma^i = -i beta alpha_i.
inline GammaSet dirac_representation() {
  const cplx i(0.0, 1.0);
  const auto s = detail::pauli();
  const Eigen::Matrix2cd I = Eigen::Matrix2cd::Identity(), Z = Eigen::Matrix2cd::Zero();
  GammaSet gs;
  gs.name = "dirac";
  for (int k = 0; k < 3; ++k) gs.g[k] = detail::blocks(Z, -i * s[k], i * s[k], Z);
  gs.g[3] = detail::blocks(-i * I, Z, Z, i * I);
  gs.g5 = detail::gamma5_product(gs.g);
  return gs;
}

// gamma_5 comes out as diag(-1, -1, 1, 1).
inline GammaSet chiral_representation() {
  const cplx i(0.0, 1.0);
  const auto s = detail::pauli();
  const Eigen::Matrix2cd I = Eigen::Matrix2cd::Identity(), Z = Eigen::Matrix2cd::Zero();
  GammaSet gs;
  gs.name = "chiral";
  for (int k = 0; k < 3; ++k) gs.g[k] = detail::blocks(Z, -i * s[k], i * s[k], Z);
  gs.g[3] = detail::blocks(Z, i * I, i * I, Z);
  gs.g5 = detail::blocks(-I, Z, Z, I);
  return gs;
}

// S gamma S^{-1} for unitary S keeps every relation, Hermiticity included.
inline GammaSet similarity(const GammaSet& gs, const Mat4c& S) {
  GammaSet r = gs;
  const Mat4c Si = S.inverse();
  for (auto& m : r.g) m = S * m * Si;
  r.g5 = S * gs.g5 * Si;
  r.name = gs.name + "-similar";
  return r;
}

inline constexpr std::array<double, 4> kMinkowski{1.0, 1.0, 1.0, -1.0};

struct GammaReport {
  double anticommutator = 0.0;  // max over the 10 pairs
  double hermiticity = 0.0;
  double gamma5 = 0.0;  // stored gamma5 against i g1 g2 g3 g4
  std::array<std::array<double, 4>, 4> pair{};
  double max_deviation() const { return std::max({anticommutator, hermiticity, gamma5}); }
  bool ok(double tol = 1e-12) const { return max_deviation() < tol; }
};

inline GammaReport verify_gamma(const GammaSet& gs) {
  GammaReport r;
  const Mat4c I = Mat4c::Identity();
  for (int a = 0; a < 4; ++a) {
    for (int b = a; b < 4; ++b) {
      const Mat4c ac = gs.g[a] * gs.g[b] + gs.g[b] * gs.g[a] - (a == b ? 2.0 * kMinkowski[a] : 0.0) * I;
      r.pair[a][b] = r.pair[b][a] = detail::max_abs(ac);
      r.anticommutator = std::max(r.anticommutator, r.pair[a][b]);
    }
  }
  for (int a = 0; a < 3; ++a) r.hermiticity = std::max(r.hermiticity, detail::max_abs(gs.g[a] - gs.g[a].adjoint()));
  r.hermiticity = std::max(r.hermiticity, detail::max_abs(gs.g[3] + gs.g[3].adjoint()));
  r.gamma5 = detail::max_abs(gs.g5 - detail::gamma5_product(gs.g));
  return r;
}

struct Factorization {
  Mat4c product;
  double kk = 0.0;  // k.k with metric diag(1, 1, 1, -1)
  double residual = 0.0;  // max |product + (k.k + w^2) I|
};

// (i gamma.k + w)(i gamma.k - w) on a plane wave exp(i k.x).
inline Factorization kg_factorization(const std::array<double, 4>& k, double omega_hat, const GammaSet& gs) {
  const cplx i(0.0, 1.0);
  Mat4c gk = Mat4c::Zero();
  double kk = 0.0;
  for (int l = 0; l < 4; ++l) {
    gk += kMinkowski[l] * k[l] * gs.g[l];
    kk += kMinkowski[l] * k[l] * k[l];
  }
  const Mat4c I = Mat4c::Identity();
  Factorization f;
  f.product = (i * gk + omega_hat * I) * (i * gk - omega_hat * I);
  f.kk = kk;
  f.residual = detail::max_abs(f.product + (kk + omega_hat * omega_hat) * I);
  return f;
}

// ---------------------------------------------------------------- polarization tensors

enum class ModelName { NonEuclidean31, Euclidean4, Extended41, Extended5 };

inline const char* model_name(ModelName n) {
  switch (n) {
    case ModelName::NonEuclidean31: return "(+3,-1)";
    case ModelName::Euclidean4: return "(+4)";
    case ModelName::Extended41: return "(+4,-1)";
    case ModelName::Extended5: return "(+5)";
  }
  return "?";
}

enum class MetricTarget { IGamma4OverOmega, IdentityOverE };

// Tensor entries are integers; the overall factor is 1/sqrt(2 norm).
struct PolarizationModel {
  ModelName name = ModelName::NonEuclidean31;
  std::string tensor;  // which shipped tensor this is
  std::vector<int> eta;
  std::array<Eigen::MatrixXi, 4> P;
  std::vector<double> k;
  double norm = 1.0;  // omega_hat or E
  MetricTarget target = MetricTarget::IGamma4OverOmega;

  int dim() const { return static_cast<int>(eta.size()); }
  void validate() const {
    const int n = dim();
    if (static_cast<int>(k.size()) != n) throw Error(Errc::PreconditionViolated, "wavenumber dimension differs from metric");
    for (const auto& p : P)
      if (p.rows() != n || p.cols() != n || p != p.transpose())
        throw Error(Errc::PreconditionViolated, "polarization tensor must be symmetric and match the metric");
    if (!(norm > 0.0)) throw Error(Errc::PreconditionViolated, "normalization must be positive");
  }
};

namespace detail {

// Each entry (r, c, a, s): spinor component a at (r, c) and (c, r) with sign s.
struct Entry {
  int r, c, a, s;
};

inline std::array<Eigen::MatrixXi, 4> build_tensor(int n, std::initializer_list<Entry> entries) {
  std::array<Eigen::MatrixXi, 4> P;
  for (auto& p : P) p = Eigen::MatrixXi::Zero(n, n);
  for (const auto& e : entries) {
    P[e.a](e.r, e.c) = e.s;
    P[e.a](e.c, e.r) = e.s;
  }
  return P;
}

inline double harmonic_norm(const std::vector<int>& eta, const std::vector<double>& k) {
  double s = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) s += eta[i] * k[i] * k[i];
  if (!(s > 0.0)) throw Error(Errc::PreconditionViolated, "harmonic mass must be positive");
  return std::sqrt(s);
}

}  // namespace detail

inline PolarizationModel minimal_non_euclidean(double k5) {
  PolarizationModel m;
  m.name = ModelName::NonEuclidean31;
  m.tensor = "minimal-non-euclidean";
  m.eta = {1, 1, 1, -1};
  m.P = detail::build_tensor(4, {{1, 1, 0, 1}, {2, 2, 0, -1}, {1, 2, 1, 1}, {1, 3, 2, 1}, {2, 3, 3, 1}});
  m.k = {k5, 0.0, 0.0, 0.0};
  m.norm = detail::harmonic_norm(m.eta, m.k);
  m.target = MetricTarget::IGamma4OverOmega;
  return m;
}

// Spinor order (phi1R, phi2R, phi1L, phi2L).
inline PolarizationModel minimal_euclidean(double k5, double E) {
  PolarizationModel m;
  m.name = ModelName::Euclidean4;
  m.tensor = "minimal-euclidean";
  m.eta = {1, 1, 1, 1};
  m.P = detail::build_tensor(4, {{1, 2, 0, 1}, {1, 3, 1, 1}, {2, 2, 2, 1}, {3, 3, 2, -1}, {2, 3, 3, 1}});
  m.k = {k5, 0.0, 0.0, 0.0};
  m.norm = E;
  m.target = MetricTarget::IdentityOverE;
  return m;
}

// Zero rows and columns on the colour plane (k7, k8).
inline PolarizationModel color_non_euclidean(double k7, double k8) {
  PolarizationModel m;
  m.name = ModelName::Extended41;
  m.tensor = "color-non-euclidean";
  m.eta = {1, 1, 1, 1, -1};
  m.P = detail::build_tensor(5, {{0, 0, 0, 1}, {1, 1, 0, -1}, {0, 1, 1, 1}, {0, 4, 2, 1}, {1, 4, 3, 1}});
  m.k = {0.0, 0.0, k7, k8, 0.0};
  m.norm = detail::harmonic_norm(m.eta, m.k);
  m.target = MetricTarget::IGamma4OverOmega;
  return m;
}

// The (5,5) entry is -phi1L; the printed variant below carries -phi2L there.
inline PolarizationModel color_euclidean(double k7, double k8, double E) {
  PolarizationModel m;
  m.name = ModelName::Extended5;
  m.tensor = "color-euclidean";
  m.eta = {1, 1, 1, 1, 1};
  m.P = detail::build_tensor(5, {{0, 1, 0, 1}, {0, 4, 1, 1}, {1, 1, 2, 1}, {4, 4, 2, -1}, {1, 4, 3, 1}});
  m.k = {0.0, 0.0, k7, k8, 0.0};
  m.norm = E;
  m.target = MetricTarget::IdentityOverE;
  return m;
}

inline PolarizationModel color_euclidean_as_printed(double k7, double k8, double E) {
  PolarizationModel m = color_euclidean(k7, k8, E);
  m.tensor = "color-euclidean-as-printed";
  m.P[2](4, 4) = 0;
  m.P[3](4, 4) = -1;
  return m;
}

// Minimal Euclidean tensor padded with a zero fifth row and column; k = (k5, 0, 0, 0, k9).
inline PolarizationModel electroweak_extended(double k5, double k9, double E, bool euclidean_fifth = false) {
  PolarizationModel m;
  m.name = euclidean_fifth ? ModelName::Extended5 : ModelName::Extended41;
  m.tensor = "electroweak-extended";
  m.eta = {1, 1, 1, 1, euclidean_fifth ? 1 : -1};
  m.P = detail::build_tensor(5, {{1, 2, 0, 1}, {1, 3, 1, 1}, {2, 2, 2, 1}, {3, 3, 2, -1}, {2, 3, 3, 1}});
  m.k = {k5, 0.0, 0.0, 0.0, k9};
  m.norm = E;
  m.target = MetricTarget::IdentityOverE;
  return m;
}

// Integer part of M^{ab} = (P^a_AB)* P^{b AB}; M = spinor_metric_integer / (2 norm).
inline Eigen::Matrix4i spinor_metric_integer(const PolarizationModel& m) {
  m.validate();
  Eigen::Matrix4i M = Eigen::Matrix4i::Zero();
  const int n = m.dim();
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int A = 0; A < n; ++A)
        for (int B = 0; B < n; ++B) M(a, b) += m.P[a](A, B) * m.P[b](A, B) * m.eta[A] * m.eta[B];
  return M;
}

inline Mat4c metric_target(const PolarizationModel& m) {
  if (m.target == MetricTarget::IdentityOverE) return Mat4c::Identity() / m.norm;
  return cplx(0.0, 1.0) * dirac_representation().g[3] / m.norm;
}

inline Mat4c spinor_metric_unchecked(const PolarizationModel& m) {
  return spinor_metric_integer(m).cast<cplx>() / (2.0 * m.norm);
}

inline Mat4c spinor_metric(const PolarizationModel& m) {
  const Mat4c M = spinor_metric_unchecked(m);
  const Mat4c D = M - metric_target(m);
  const double tol = 1e-12 / m.norm;
  std::string bad;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      if (std::abs(D(a, b)) > tol) bad += " (" + std::to_string(a + 1) + "," + std::to_string(b + 1) + ")";
  if (!bad.empty()) throw Error(Errc::MetricMismatch, m.tensor + " deviates from its target at" + bad);
  return M;
}

struct GaugeReport {
  std::array<long, 4> trace{};  // eta^{AB} P^a_AB, exact
  double divergence = 0.0;  // max |k_A P^{a,AB}| over a and B
  bool ok() const {
    return divergence == 0.0 && std::all_of(trace.begin(), trace.end(), [](long t) { return t == 0; });
  }
  double max_deviation() const {
    double d = divergence;
    for (long t : trace) d = std::max(d, std::abs(static_cast<double>(t)));
    return d;
  }
};

inline GaugeReport check_gauge_conditions(const PolarizationModel& m) {
  m.validate();
  GaugeReport r;
  const int n = m.dim();
  for (int a = 0; a < 4; ++a) {
    for (int A = 0; A < n; ++A) r.trace[a] += static_cast<long>(m.eta[A]) * m.P[a](A, A);
    for (int B = 0; B < n; ++B) {
      double s = 0.0;
      for (int A = 0; A < n; ++A) s += m.k[A] * m.eta[A] * m.eta[B] * m.P[a](A, B);
      r.divergence = std::max(r.divergence, std::abs(s));
    }
  }
  return r;
}

inline std::vector<PolarizationModel> shipped_models(double scale = 1.0) {
  return {minimal_non_euclidean(scale), minimal_euclidean(scale, scale), color_non_euclidean(0.6 * scale, 0.8 * scale),
          color_euclidean(0.6 * scale, 0.8 * scale, scale), electroweak_extended(scale, 0.5 * scale, scale, false),
          electroweak_extended(scale, 0.5 * scale, scale, true)};
}

// ---------------------------------------------------------------- chromodynamic star

struct BosonEntry {
  int p, q;
  HarmonicWavenumber k;  // k_p - k_q
  double mass;
};

struct QuarkStar {
  double omega_f = 1.0;
  std::array<HarmonicWavenumber, 3> k;
  std::vector<BosonEntry> bosons;  // all nine (p, q)
  double omega_b = 0.0;  // common off-diagonal mass
  double C3 = 0.0, A1 = 0.0, A2 = 0.0;
  double g3 = 0.0, g3_diag = 0.0;
  double diagonal_sum_coefficient = 0.0;  // A1 + 2 A2
  double sum_residual = 0.0;  // max |sum_p k_p|
};

namespace detail {

inline void derive_star(QuarkStar& s) {
  const auto& k = s.k;
  s.bosons.clear();
  double mb = 0.0;
  for (int p = 0; p < 3; ++p)
    for (int q = 0; q < 3; ++q) {
      const HarmonicWavenumber d = k[p] - k[q];
      const double m2 = d.mass_sq();
      s.bosons.push_back({p + 1, q + 1, d, std::sqrt(std::max(0.0, m2))});
      if (p != q) mb = std::max(mb, s.bosons.back().mass);
    }
  s.omega_b = mb;
  const HarmonicWavenumber pq = k[0] + k[1];
  s.C3 = 0.5 * pq.mass_sq();
  s.A1 = 2.0 * k[0].mass_sq() / s.C3;
  s.A2 = 2.0 * k[0].dot(k[1]) / s.C3;
  s.g3 = std::sqrt(s.C3);
  s.g3_diag = std::sqrt(s.A1 - s.A2) * s.g3;
  s.diagonal_sum_coefficient = s.A1 + 2.0 * s.A2;
  s.sum_residual = 0.0;
  const HarmonicWavenumber sum = (k[0] + k[1]) + k[2];
  for (double c : sum.k) s.sum_residual = std::max(s.sum_residual, std::abs(c));
}

}  // namespace detail

// Third vector is -(k1 + k2) so the sum vanishes bit-exactly.
inline QuarkStar quark_star(double omega_hat_f, double orientation = 0.0,
                            std::array<int, 5> signature = kSignature41) {
  if (!(omega_hat_f > 0.0)) throw Error(Errc::PreconditionViolated, "quark harmonic mass must be positive");
  QuarkStar s;
  s.omega_f = omega_hat_f;
  for (int p = 0; p < 2; ++p) {
    const double th = orientation + 2.0 * std::numbers::pi * p / 3.0;
    s.k[p] = HarmonicWavenumber({0.0, 0.0, omega_hat_f * std::cos(th), omega_hat_f * std::sin(th), 0.0}, signature);
  }
  s.k[2] = (s.k[0] + s.k[1]) * -1.0;
  detail::derive_star(s);
  return s;
}

inline QuarkStar quark_star_from(const std::array<HarmonicWavenumber, 3>& k) {
  QuarkStar s;
  s.k = k;
  s.omega_f = k[0].mass();
  detail::derive_star(s);
  return s;
}

// ---------------------------------------------------------------- electroweak sector

enum class EwSignature { NonEuclidean41, Euclidean5, Euclidean4 };

inline const char* ew_signature_name(EwSignature s) {
  switch (s) {
    case EwSignature::NonEuclidean41: return "(+4,-1)";
    case EwSignature::Euclidean5: return "(+5)";
    case EwSignature::Euclidean4: return "(+4)";
  }
  return "?";
}

enum class RatioForm { FromMasses, AsPrinted };

struct Higgs {
  double v = 0.0;
  double kappa_h_nu_sq = 0.0, kappa_h_e_sq = 0.0;
  double mW_sq = 0.0;
  double z_coeff = 0.0, a_coeff = 0.0;  // massive diagonal boson in the (Z, A) basis
  double m_diag_sq = 0.0;
  bool aligned = false;  // massive diagonal boson is Z
  double mass_ratio = 0.0;  // m_W / m_diag
};

struct ElectroweakConfig {
  EwSignature signature = EwSignature::NonEuclidean41;
  double k5_e = 0.0, k6_nu = 0.0, k9 = 0.0;
  bool k9_suppressed = false;
  HarmonicWavenumber k_e, k_nu;
  double omega_e_sq = 0.0, omega_nu_sq = 0.0, kappa_sq = 0.0;
  double omega_nue_sq = 0.0;  // off-diagonal boson mass squared
  double C2 = 0.0, Lambda_sq = 0.0, g2 = 0.0, e_M = 0.0;
  double ratio_from_masses = 0.0, ratio_printed = 0.0;
  Higgs higgs;
};

// Aligned-Higgs W/Z mass ratio in units x = omega_e / omega_nu, y = kappa / omega_nu.
inline double mass_ratio(double x, double y, RatioForm form) {
  const double y2 = y * y;
  const double c = form == RatioForm::FromMasses ? 2.0 : 1.0;
  return (1.0 + y2) / std::sqrt(1.0 + x * x + c * y2);
}

inline Higgs higgs_sector(const ElectroweakConfig& c, double v, const HarmonicWavenumber& k_h) {
  Higgs h;
  h.v = v;
  h.kappa_h_nu_sq = k_h.dot(c.k_nu);
  h.kappa_h_e_sq = k_h.dot(c.k_e);
  const double s = h.kappa_h_nu_sq + h.kappa_h_e_sq;
  h.mW_sq = v * v * s * s / (c.omega_nu_sq + c.omega_e_sq + 2.0 * c.kappa_sq);
  const double wn = std::sqrt(c.omega_nu_sq), L = std::sqrt(c.Lambda_sq);
  h.z_coeff = h.kappa_h_nu_sq / wn;
  h.a_coeff = (h.kappa_h_nu_sq * c.kappa_sq - h.kappa_h_e_sq * c.omega_nu_sq) / (wn * L);
  h.m_diag_sq = v * v * (h.z_coeff * h.z_coeff + h.a_coeff * h.a_coeff);
  const double scale = std::abs(h.kappa_h_nu_sq * c.kappa_sq) + std::abs(h.kappa_h_e_sq * c.omega_nu_sq);
  h.aligned = std::abs(h.kappa_h_nu_sq * c.kappa_sq - h.kappa_h_e_sq * c.omega_nu_sq) <= 1e-12 * std::max(scale, 1e-300);
  h.mass_ratio = h.m_diag_sq > 0.0 ? std::sqrt(h.mW_sq / h.m_diag_sq) : 0.0;
  return h;
}

// Lepton vectors k_e = (k5, 0, 0, 0, k9), k_nu = (0, k6, 0, 0, -k9); the symmetric case has k6 = -k5.
// The Higgs defaults to the neutrino wavenumber.
inline ElectroweakConfig electroweak_config(double k5_e, double k6_nu, double k9,
                                            EwSignature sig = EwSignature::NonEuclidean41, double v = 1.0) {
  ElectroweakConfig c;
  c.signature = sig;
  c.k9_suppressed = sig != EwSignature::NonEuclidean41 && k9 != 0.0;
  if (sig != EwSignature::NonEuclidean41) k9 = 0.0;
  c.k5_e = k5_e;
  c.k6_nu = k6_nu;
  c.k9 = k9;
  const auto eta = sig == EwSignature::NonEuclidean41 ? kSignature41 : kSignature5;
  c.k_e = HarmonicWavenumber({k5_e, 0.0, 0.0, 0.0, k9}, eta);
  c.k_nu = HarmonicWavenumber({0.0, k6_nu, 0.0, 0.0, -k9}, eta);
  c.omega_e_sq = c.k_e.mass_sq();
  c.omega_nu_sq = c.k_nu.mass_sq();
  c.kappa_sq = c.k_nu.dot(c.k_e);
  c.omega_nue_sq = (c.k_nu - c.k_e).mass_sq();
  if (!(c.omega_nue_sq > 0.0))
    throw Error(Errc::InvalidSignature, "off-diagonal boson mass squared is not positive (k5^2 > 2 k9^2 fails)");
  if (!(c.omega_nu_sq > 0.0) || !(c.omega_e_sq > 0.0))
    throw Error(Errc::InvalidSignature, "lepton harmonic masses must be positive");
  c.Lambda_sq = c.omega_e_sq * c.omega_nu_sq - c.kappa_sq * c.kappa_sq;
  if (!(c.Lambda_sq > 0.0)) throw Error(Errc::InvalidSignature, "Lambda^2 must be positive");
  c.C2 = 0.5 * (c.k_nu + c.k_e).mass_sq();
  c.g2 = std::sqrt(c.C2);
  c.e_M = std::sqrt(c.Lambda_sq / c.omega_nu_sq);
  const double wn = std::sqrt(c.omega_nu_sq);
  const double x = std::sqrt(c.omega_e_sq) / wn, y2 = c.kappa_sq / c.omega_nu_sq;
  c.ratio_from_masses = (1.0 + y2) / std::sqrt(1.0 + x * x + 2.0 * y2);
  c.ratio_printed = (1.0 + y2) / std::sqrt(1.0 + x * x + y2);
  c.higgs = higgs_sector(c, v, c.k_nu);
  return c;
}

inline ElectroweakConfig electroweak_config(double k5_e, double k9, EwSignature sig = EwSignature::NonEuclidean41) {
  return electroweak_config(k5_e, -k5_e, k9, sig);
}

struct RatioSolution {
  double kappa_over_omega_nu = 0.0;
  double ratio = 0.0;
  ElectroweakConfig config;  // omega_nu = 1
};

// Solves mass_ratio(e_over_nu, y) = target for y and builds wavenumbers with omega_nu = 1.
inline RatioSolution solve_mass_ratio(double target, double e_over_nu = 1.0, RatioForm form = RatioForm::FromMasses) {
  if (!(e_over_nu > 0.0)) throw Error(Errc::PreconditionViolated, "mass ratio omega_e/omega_nu must be positive");
  const double x = e_over_nu;
  // omega_nue^2 > 0 and Lambda^2 > 0 bound y^2.
  const double y2_max = std::min(0.5 * (1.0 + x * x), x);
  const double hi = std::sqrt(y2_max) * (1.0 - 1e-12);
  auto f = [&](double y) { return mass_ratio(x, y, form) - target; };
  const double f0 = f(0.0), f1 = f(hi);
  if (f0 * f1 > 0.0) throw Error(Errc::NoBracket, "target mass ratio is not reachable for this omega_e/omega_nu");
  double y;
  if (f0 == 0.0) {
    y = 0.0;
  } else {
    std::uintmax_t it = 200;
    auto [a, b] = boost::math::tools::toms748_solve(f, 0.0, hi, f0, f1, boost::math::tools::eps_tolerance<double>(52), it);
    y = 0.5 * (a + b);
  }
  RatioSolution s;
  s.kappa_over_omega_nu = y;
  s.ratio = mass_ratio(x, y, form);
  const double k9 = y;
  s.config = electroweak_config(std::sqrt(x * x + k9 * k9), -std::sqrt(1.0 + k9 * k9), k9);
  return s;
}

// ---------------------------------------------------------------- quark electroweak wavenumbers

struct Coupling {
  double z = 0.0, a = 0.0;
};

struct QuarkElectroweak {
  HarmonicWavenumber k_u, k_d;
  double sum_identity_residual = 0.0;  // k_u + k_d against -(k_nu + k_e)/3 + 2 k_c
  double charge_ratio_u = 0.0, charge_ratio_d = 0.0;  // k5 relative to the electron
  HarmonicWavenumber k_Z, k_A;
  Coupling nu, e, u, d;
  double w_factor_quark = 0.0;  // relative to the lepton factor
};

inline QuarkElectroweak quark_ew_wavenumbers(const HarmonicWavenumber& k_e, const HarmonicWavenumber& k_nu,
                                             const HarmonicWavenumber& k_c) {
  if (!k_c.in_color_plane()) throw Error(Errc::ColorPlaneViolation, "colour wavenumber has components off the (k7, k8) plane");
  QuarkElectroweak q;
  q.k_u = k_e * (-2.0 / 3.0) + k_nu * (1.0 / 3.0) + k_c;
  q.k_d = k_e * (1.0 / 3.0) - k_nu * (2.0 / 3.0) + k_c;
  const HarmonicWavenumber lhs = q.k_u + q.k_d, rhs = (k_nu + k_e) * (-1.0 / 3.0) + k_c * 2.0;
  for (std::size_t i = 0; i < 5; ++i) q.sum_identity_residual = std::max(q.sum_identity_residual, std::abs(lhs[i] - rhs[i]));
  if (k_e[0] == 0.0) throw Error(Errc::DivisionDegenerate, "electron k5 vanishes");
  q.charge_ratio_u = q.k_u[0] / k_e[0];
  q.charge_ratio_d = q.k_d[0] / k_e[0];

  const double wn2 = k_nu.mass_sq(), kap = k_nu.dot(k_e), L2 = wn2 * k_e.mass_sq() - kap * kap;
  if (!(wn2 > 0.0) || !(L2 > 0.0)) throw Error(Errc::InvalidSignature, "lepton wavenumbers do not span a Lorentzian-free plane");
  const double wn = std::sqrt(wn2), L = std::sqrt(L2);
  q.k_Z = k_nu * (1.0 / wn);
  q.k_A = k_nu * (kap / (wn * L)) - k_e * (wn / L);
  auto couple = [&](const HarmonicWavenumber& k) { return Coupling{k.dot(q.k_Z), k.dot(q.k_A)}; };
  q.nu = couple(k_nu);
  q.e = couple(k_e);
  q.u = couple(q.k_u - k_c);
  q.d = couple(q.k_d - k_c);
  const HarmonicWavenumber s_l = k_nu + k_e, s_q = q.k_u + q.k_d - k_c * 2.0;
  q.w_factor_quark = s_q.dot(s_l) / s_l.dot(s_l);
  return q;
}

inline QuarkElectroweak quark_ew_wavenumbers(const ElectroweakConfig& c, const HarmonicWavenumber& k_c) {
  HarmonicWavenumber kc = k_c;
  kc.signature = c.k_e.signature;
  return quark_ew_wavenumbers(c.k_e, c.k_nu, kc);
}

// ---------------------------------------------------------------- gauge correspondence

struct GaugeCorrespondence {
  std::array<double, 3> eps_diag{};  // minimum-norm epsilon_{p pbar}
  std::array<double, 2> w{};  // colour-plane projection of sum_p v_p eps_p
  std::array<double, 3> rhs{};
  double dependent_residual = 0.0;  // third equation after solving the first two
  double rhs_sum = 0.0;
  double k_sum = 0.0;
  std::array<double, 3> C{};  // 2 (k_p.k_q - omega_p^2) for the pairs (12), (13), (23)
  double C_printed = 0.0;  // -omega_p^2
  std::array<cplx, 3> eps_offdiag{};  // from (Re, Im) Lie parameters divided by C
};

// eps_nd = (eps1, eps2, eps4, eps5, eps6, eps7) mapped onto the pairs (12), (13), (23).
inline GaugeCorrespondence gauge_correspondence(const QuarkStar& star, double eps3, double eps8,
                                                const std::array<HarmonicWavenumber, 3>* v_diag = nullptr,
                                                std::array<double, 6> eps_nd = {}) {
  const auto& k = star.k;
  const std::array<HarmonicWavenumber, 3> v = v_diag ? *v_diag : k;
  GaugeCorrespondence g;
  const double r3 = 1.0 / std::sqrt(3.0);
  g.rhs = {0.5 * (eps3 + r3 * eps8), 0.5 * (-eps3 + r3 * eps8), -r3 * eps8};
  g.rhs_sum = g.rhs[0] + g.rhs[1] + g.rhs[2];
  const HarmonicWavenumber ks = (k[0] + k[1]) + k[2];
  g.k_sum = std::max(std::abs(ks[2]), std::abs(ks[3]));

  Eigen::Matrix<double, 2, 3> V;
  for (int p = 0; p < 3; ++p) V.col(p) << v[p][2], v[p][3];
  Eigen::JacobiSVD<Eigen::Matrix<double, 2, 3>> svd(V);
  const auto sv = svd.singularValues();
  if (!(sv(1) > 1e-12 * sv(0))) throw Error(Errc::SingularVChoice, "diagonal v vectors have parallel colour-plane projections");

  Eigen::Matrix2d K;
  K << k[0][2], k[0][3], k[1][2], k[1][3];
  const Eigen::Vector2d w = K.colPivHouseholderQr().solve(Eigen::Vector2d(g.rhs[0], g.rhs[1]));
  g.w = {w(0), w(1)};
  g.dependent_residual = std::abs(k[2][2] * w(0) + k[2][3] * w(1) - g.rhs[2]);
  const Eigen::Vector3d e = V.completeOrthogonalDecomposition().solve(w);
  g.eps_diag = {e(0), e(1), e(2)};

  const std::array<std::pair<int, int>, 3> pairs{{{0, 1}, {0, 2}, {1, 2}}};
  g.C_printed = -k[0].mass_sq();
  for (int i = 0; i < 3; ++i) {
    const auto [p, q] = pairs[i];
    g.C[i] = 2.0 * (k[p].dot(k[q]) - k[p].mass_sq());
    g.eps_offdiag[i] = cplx(eps_nd[2 * i], eps_nd[2 * i + 1]) / g.C[i];
  }
  return g;
}

// ---------------------------------------------------------------- constant calibration

struct CalibrationInput {
  double a_sq = 2.0;
  double beta = 1.0;
  double M = 0.0;
  double k5 = 1.0;
  double G_prime = 0.0;
};

struct Calibration {
  double G = 0.0, e_prime = 0.0, q = 0.0, m = 0.0, hbar = 0.0;
  double epsilon = 0.0;  // 1/2 (M / (beta k5))^2
  double epsilon_loop = 0.0;  // G (m/q)^2 from the derived constants
};

inline Calibration calibrate_constants(const CalibrationInput& in) {
  if (in.a_sq == 0.0 || in.beta == 0.0) throw Error(Errc::DivisionDegenerate, "a^2 and beta must be nonzero");
  if (in.a_sq < 0.0 || in.beta < 0.0 || in.M < 0.0 || in.G_prime < 0.0)
    throw Error(Errc::PreconditionViolated, "a^2, beta, M and G' must be nonnegative");
  if (in.k5 == 0.0) throw Error(Errc::DivisionDegenerate, "k5 = 0 leaves the charge undefined");
  Calibration c;
  c.G = 0.5 * in.a_sq;
  c.e_prime = in.k5 * std::sqrt(in.a_sq);
  c.q = c.e_prime * in.beta / (2.0 * c.G);
  c.m = in.M / (2.0 * c.G);
  c.hbar = in.G_prime / c.G;
  const double r = in.M / (in.beta * in.k5);
  c.epsilon = 0.5 * r * r;
  const double mq = c.m / c.q;
  c.epsilon_loop = c.G * mq * mq;
  return c;
}

// l_m / l_e for an order-one amplitude ratio.
inline double scale_ratio(double epsilon) {
  if (!(epsilon > 0.0)) throw Error(Errc::PreconditionViolated, "force ratio must be positive");
  return std::pow(epsilon, 1.0 / 6.0);
}

// ---------------------------------------------------------------- check suite

struct CheckResult {
  std::string check_id;
  std::string relation;
  bool pass = false;
  double max_deviation = 0.0;
};

namespace detail {

inline CheckResult check(std::string id, std::string rel, double dev, double tol = 1e-12) {
  return {std::move(id), std::move(rel), std::isfinite(dev) && dev < tol, dev};
}

}  // namespace detail

inline std::vector<CheckResult> check_gamma_suite() {
  std::vector<CheckResult> out;
  for (const auto& gs : {dirac_representation(), chiral_representation()}) {
    const auto r = verify_gamma(gs);
    out.push_back(detail::check("gamma." + gs.name + ".anticommutator", "{g^l, g^m} = 2 eta^{lm}", r.anticommutator));
    out.push_back(detail::check("gamma." + gs.name + ".hermiticity", "g^i Hermitian, g^4 anti-Hermitian", r.hermiticity));
    out.push_back(detail::check("gamma." + gs.name + ".gamma5", "g5 = i g1 g2 g3 g4", r.gamma5));
  }
  const auto ch = chiral_representation();
  Mat4c expect = Mat4c::Identity();
  expect(0, 0) = expect(1, 1) = -1.0;
  out.push_back(detail::check("gamma.chiral.gamma5_blocks", "g5 = diag(-I, I)", detail::max_abs(ch.g5 - expect)));
  double fac = 0.0;
  for (const auto& k : std::vector<std::array<double, 4>>{{0.3, -0.2, 0.5, 1.7}, {1.0, 2.0, -0.5, 0.25}})
    for (const auto& gs : {dirac_representation(), chiral_representation()})
      fac = std::max(fac, kg_factorization(k, 1.3, gs).residual);
  out.push_back(detail::check("gamma.kg_factorization", "(i g.k + w)(i g.k - w) = -(k.k + w^2) I", fac));
  return out;
}

inline std::vector<CheckResult> check_polarization_suite() {
  std::vector<CheckResult> out;
  for (const auto& m : shipped_models(1.0)) {
    const std::string id = "polarization." + m.tensor + std::string(model_name(m.name));
    const auto g = check_gauge_conditions(m);
    out.push_back(detail::check(id + ".gauge", "trace and divergence conditions", g.max_deviation()));
    const double dev = detail::max_abs(spinor_metric_unchecked(m) - metric_target(m));
    out.push_back(detail::check(id + ".metric",
                                m.target == MetricTarget::IdentityOverE ? "M = I/E" : "M = i g^4 / omega_hat", dev));
  }
  return out;
}

inline std::vector<CheckResult> check_star_suite() {
  std::vector<CheckResult> out;
  const auto s = quark_star(1.0, 0.3);
  out.push_back(detail::check("star.sum", "sum_p k_p = 0", s.sum_residual));
  double db = 0.0;
  for (const auto& b : s.bosons) db = std::max(db, std::abs(b.mass - (b.p == b.q ? 0.0 : std::sqrt(3.0) * s.omega_f)));
  out.push_back(detail::check("star.boson_mass", "omega_b = sqrt(3) omega_f", db));
  out.push_back(detail::check("star.C3", "C3 = omega_f^2 / 2", std::abs(s.C3 - 0.5)));
  out.push_back(detail::check("star.A1", "A1 = 4", std::abs(s.A1 - 4.0)));
  out.push_back(detail::check("star.A2", "A2 = -2", std::abs(s.A2 + 2.0)));
  out.push_back(detail::check("star.g3_diag", "g3' = sqrt(6) g3", std::abs(s.g3_diag - std::sqrt(6.0) * s.g3)));
  out.push_back(detail::check("star.diagonal_sum", "A1 + 2 A2 = 0", std::abs(s.diagonal_sum_coefficient)));
  const auto g = gauge_correspondence(s, 0.7, -0.4);
  out.push_back(detail::check("star.gauge_rank", "dependent third diagonal equation", g.dependent_residual));
  return out;
}

inline std::vector<CheckResult> check_electroweak_suite() {
  std::vector<CheckResult> out;
  const auto sol = solve_mass_ratio(0.87);
  out.push_back(detail::check("electroweak.mass_ratio", "m_W / m_Z = 0.87", std::abs(sol.config.higgs.mass_ratio - 0.87), 1e-6));
  const auto c = electroweak_config(1.0, 0.0);
  out.push_back(detail::check("electroweak.symmetric", "m_W / m_Z = 1/sqrt(2) at kappa = 0",
                              std::abs(c.ratio_from_masses - std::sqrt(0.5))));
  const auto q = quark_ew_wavenumbers(sol.config, HarmonicWavenumber({0, 0, 0.3, -0.2, 0}));
  out.push_back(detail::check("electroweak.quark_sum", "k_u + k_d = -(k_nu + k_e)/3 + 2 k_c", q.sum_identity_residual));
  out.push_back(detail::check("electroweak.quark_charge", "A couplings +2/3, -1/3 of e_M",
                              std::max(std::abs(q.u.a - 2.0 / 3.0 * sol.config.e_M), std::abs(q.d.a + sol.config.e_M / 3.0))));
  out.push_back(detail::check("electroweak.w_factor", "quark W factor = -1/3", std::abs(q.w_factor_quark + 1.0 / 3.0)));
  return out;
}

inline std::vector<CheckResult> check_calibration_suite() {
  std::vector<CheckResult> out;
  const auto c = calibrate_constants({3.7, 0.8, 2.1e-3, -1.3, 0.5});
  out.push_back(detail::check("calibration.loop", "G (m/q)^2 = 1/2 (M / (beta k5))^2",
                              std::abs(c.epsilon_loop - c.epsilon) / c.epsilon));
  const double r = scale_ratio(2.4e-43);
  out.push_back({"calibration.scale_ratio", "eps^(1/6) in [6e-8, 1e-7]", r >= 6e-8 && r <= 1e-7, r});
  return out;
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"gamma", "polarization", "star", "electroweak", "calibration"};
  return names;
}

inline std::vector<CheckResult> run_suite(const std::string& name) {
  if (name == "gamma") return check_gamma_suite();
  if (name == "polarization") return check_polarization_suite();
  if (name == "star") return check_star_suite();
  if (name == "electroweak") return check_electroweak_suite();
  if (name == "calibration") return check_calibration_suite();
  throw Error(Errc::PreconditionViolated, "unknown suite '" + name + "'");
}

}  // namespace metron::algebra
