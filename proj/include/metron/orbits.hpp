#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "numerics.hpp"

namespace metron::orbits {

using cplx = std::complex<double>;

// ---------------------------------------------------------------------------
// Forcing of an eigenmode by the orbiting de Broglie field

// omega_e T^-1 int_0^T dt / u4(t), trapezoidal on samples t_j = j T / N, j = 0..N.
inline double central_frequency(const std::vector<double>& u4, double T, double omega_e) {
  if (u4.size() < 2) throw Error(Errc::InvalidSamples, "need at least two samples spanning the period");
  if (!(T > 0.0)) throw Error(Errc::InvalidSamples, "period must be positive");
  for (double u : u4)
    if (!(u >= 1.0 - 1e-14) || !std::isfinite(u)) throw Error(Errc::InvalidSamples, "u4 must be a Lorentz factor >= 1");
  const std::size_t n = u4.size() - 1;
  const double h = T / static_cast<double>(n);
  double sum = 0.5 * (1.0 / u4.front() + 1.0 / u4.back());
  for (std::size_t j = 1; j < n; ++j) sum += 1.0 / u4[j];
  return omega_e * sum * h / T;
}

struct Line {
  int n = 0;
  double omega = 0.0;
  cplx gamma;
};

struct ForcingSpectrum {
  double omega_bar = 0.0;
  double Omega = 0.0;
  std::vector<Line> lines;  // n = -N/2 .. (N-1)/2

  const Line& line(int n) const {
    for (const auto& l : lines)
      if (l.n == n) return l;
    throw Error(Errc::PreconditionViolated, "line index outside the resolved band");
  }
};

// gamma_p(t) and S(t) on t_j = j T / N, j = 0..N. The coefficients satisfy
// gamma_p(t) exp(i S(t)) = sum_n gamma_pn exp(i omega_n t) at the sample times.
inline ForcingSpectrum forcing_spectrum(const std::vector<cplx>& modulation, const std::vector<double>& phase, double T) {
  if (modulation.size() != phase.size()) throw Error(Errc::GridMismatch, "modulation and phase samples differ in length");
  if (modulation.size() < 3) throw Error(Errc::InvalidSamples, "need at least three samples");
  if (!(T > 0.0)) throw Error(Errc::InvalidSamples, "period must be positive");
  const std::size_t N = modulation.size() - 1;
  ForcingSpectrum out;
  out.Omega = 2.0 * std::numbers::pi / T;
  out.omega_bar = (phase[N] - phase[0]) / T;
  std::vector<cplx> g(N);
  for (std::size_t j = 0; j < N; ++j) {
    const double t = T * static_cast<double>(j) / static_cast<double>(N);
    const double dS = (phase[j] - phase[0]) - (t / T) * (phase[N] - phase[0]);
    g[j] = modulation[j] * std::exp(cplx(0.0, dS + phase[0]));
  }
  const int lo = -static_cast<int>(N / 2);
  const int hi = static_cast<int>((N - 1) / 2);
  for (int n = lo; n <= hi; ++n) {
    cplx c = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      const double arg = -2.0 * std::numbers::pi * n * static_cast<double>(j) / static_cast<double>(N);
      c += g[j] * std::exp(cplx(0.0, arg));
    }
    out.lines.push_back({n, out.omega_bar + n * out.Omega, c / static_cast<double>(N)});
  }
  return out;
}

enum class Response { Stationary, Nonstationary, Damped };

// Response Delta(omega) to a line detuned by omega = omega_n - omega_p.
inline cplx response(double omega, Response form, double mu, double t) {
  switch (form) {
    case Response::Stationary:
      if (omega == 0.0) throw Error(Errc::ResonanceSingularity, "stationary response is singular at resonance");
      return cplx(0.0, -1.0 / omega);
    case Response::Nonstationary:
      if (omega == 0.0) return t;
    {
      // -i (1 - e^{-i w t}) / w, with 1 - e^{-i x} = 2 sin^2(x/2) + i sin x to keep small w t accurate
      const double x = omega * t;
      const double sh = std::sin(0.5 * x);
      return cplx(0.0, -1.0) * cplx(2.0 * sh * sh, std::sin(x)) / omega;
    }
    case Response::Damped:
      return 1.0 / cplx(mu, omega);
  }
  return 0.0;
}

inline cplx mode_response(const std::vector<Line>& lines, double omega_p, double mu, double t,
                          Response form = Response::Nonstationary) {
  if (!(mu >= 0.0)) throw Error(Errc::PreconditionViolated, "mu must be nonnegative");
  if (form == Response::Damped && mu == 0.0) form = Response::Stationary;
  cplx a = 0.0;
  for (const auto& l : lines) a += response(l.omega - omega_p, form, mu, t) * l.gamma * std::exp(cplx(0.0, l.omega * t));
  return a;
}

// ---------------------------------------------------------------------------
// Circular-orbit drift near a resonance:
//   d(dr)/dt = d { -1 + (2 C1 dr + C2) / (dr^2 + C3) }

struct OrbitDriftModel {
  double d = 1.0;
  cplx alpha = 0.0;
  cplx gamma = 0.0;
  double beta = 1.0;
  double mu = 0.0;
  double C1 = 0.0, C2 = 0.0, C3 = 0.0;

  static OrbitDriftModel from_primitives(double d, cplx alpha, cplx gamma, double beta, double mu) {
    if (d == 0.0 || beta == 0.0) throw Error(Errc::PreconditionViolated, "d and beta must be nonzero");
    if (!(mu >= 0.0)) throw Error(Errc::PreconditionViolated, "mu must be nonnegative");
    OrbitDriftModel m;
    m.d = d;
    m.alpha = alpha;
    m.gamma = gamma;
    m.beta = beta;
    m.mu = mu;
    // componentwise, so constant-folded and runtime evaluations round identically
    const double re = alpha.real() * gamma.real() - alpha.imag() * gamma.imag();
    const double im = alpha.real() * gamma.imag() + alpha.imag() * gamma.real();
    m.C1 = im / (2.0 * beta * d);
    m.C2 = mu * re / (beta * beta * d);
    m.C3 = mu * mu / (beta * beta);
    return m;
  }

  static OrbitDriftModel from_constants(double d, double C1, double C2, double C3) {
    if (d == 0.0) throw Error(Errc::PreconditionViolated, "d must be nonzero");
    if (!(C3 >= 0.0)) throw Error(Errc::PreconditionViolated, "C3 must be nonnegative");
    OrbitDriftModel m;
    m.d = d;
    m.C1 = C1;
    m.C2 = C2;
    m.C3 = C3;
    return m;
  }
};

// Right-hand side before reduction, -d + Re(alpha A_p) with A_p = gamma / (i beta dr + mu).
inline double drift_rhs_primitive(const OrbitDriftModel& m, double dr) {
  return -m.d + (m.alpha * m.gamma / cplx(m.mu, m.beta * dr)).real();
}

inline double drift_rhs(const OrbitDriftModel& m, double dr) {
  return m.d * (-1.0 + (2.0 * m.C1 * dr + m.C2) / (dr * dr + m.C3));
}

inline double drift_slope(const OrbitDriftModel& m, double dr) {
  const double den = dr * dr + m.C3;
  return m.d * (2.0 * m.C1 * den - (2.0 * m.C1 * dr + m.C2) * 2.0 * dr) / (den * den);
}

enum class Stability { Stable, Unstable, Marginal };

inline const char* stability_name(Stability s) {
  return s == Stability::Stable ? "stable" : (s == Stability::Unstable ? "unstable" : "marginal");
}

struct Equilibrium {
  double delta_r;
  Stability stability;
};

// dr_(+/-) = C1 +/- sqrt(C1^2 + C2 - C3), ordered (+, -).
inline std::vector<Equilibrium> drift_equilibria(const OrbitDriftModel& m) {
  const double disc = m.C1 * m.C1 + m.C2 - m.C3;
  if (disc < 0.0) throw Error(Errc::ComplexRoots, "C1^2 + C2 - C3 < 0: no real equilibria");
  const double s = std::sqrt(disc);
  std::vector<Equilibrium> out;
  for (double r : {m.C1 + s, m.C1 - s}) {
    const double g = drift_slope(m, r);
    out.push_back({r, g < 0.0 ? Stability::Stable : (g > 0.0 ? Stability::Unstable : Stability::Marginal)});
  }
  return out;
}

enum class DriftOutcome { Trapped, Escaped, Unresolved };

struct DriftPath {
  std::vector<double> t, delta_r;
  DriftOutcome outcome = DriftOutcome::Unresolved;
  double trapped_at = std::numeric_limits<double>::quiet_NaN();
  int direction = 0;  // sign of the escape
};

inline DriftPath integrate_drift(const OrbitDriftModel& m, double dr0, double t_max, double tol = 1e-10) {
  if (!(t_max > 0.0)) throw Error(Errc::PreconditionViolated, "t_max must be positive");
  std::vector<Equilibrium> eq;
  try {
    eq = drift_equilibria(m);
  } catch (const Error&) {
  }
  // beyond this distance from the roots the drift is within a few percent of its free value -d
  double scale = std::abs(m.C1) + std::sqrt(std::abs(m.C2)) + std::sqrt(m.C3) + 1.0;
  for (const auto& e : eq) scale = std::max(scale, std::abs(e.delta_r));
  const double far = 100.0 * scale;

  auto rhs = [&](double, const std::vector<double>& y, std::vector<double>& dy) { dy[0] = drift_rhs(m, y[0]); };
  IvpOptions opt;
  opt.rtol = tol;
  opt.atol = tol * scale;
  auto tr = integrate_ivp<double>(rhs, {dr0}, 0.0, t_max, opt,
                                  [&](double, const std::vector<double>& y) { return std::abs(y[0]) > far; });
  DriftPath p;
  p.t = std::move(tr.s);
  for (const auto& y : tr.y) p.delta_r.push_back(y[0]);
  const double end = p.delta_r.back();
  if (std::abs(end) > far) {
    p.outcome = DriftOutcome::Escaped;
    p.direction = end > 0.0 ? 1 : -1;
    return p;
  }
  for (const auto& e : eq)
    if (e.stability == Stability::Stable && std::abs(end - e.delta_r) < 1e-6 * scale) {
      p.outcome = DriftOutcome::Trapped;
      p.trapped_at = e.delta_r;
    }
  return p;
}

// Dominant-frequency de Broglie drift of an action variable. The resonance delta function is
// carried by the damped response: pi delta(w) ~ mu / (w^2 + mu^2).
inline double debroglie_drift(double domega_bar_domega_k, const std::vector<cplx>& alpha_bar,
                              const std::vector<cplx>& gamma_p0, double omega_bar,
                              const std::vector<double>& omega_p, double mu) {
  if (alpha_bar.size() != gamma_p0.size() || alpha_bar.size() != omega_p.size())
    throw Error(Errc::GridMismatch, "per-mode inputs differ in length");
  if (!(mu > 0.0)) throw Error(Errc::PreconditionViolated, "mu must be positive");
  double sum = 0.0;
  for (std::size_t p = 0; p < alpha_bar.size(); ++p) {
    const double w = omega_bar - omega_p[p];
    sum += (alpha_bar[p] * gamma_p0[p]).imag() * mu / (w * w + mu * mu);
  }
  // i z + c.c. = -2 Im z
  return -2.0 * domega_bar_domega_k * sum;
}

// ---------------------------------------------------------------------------
// Three-mode radiative transition dynamics

struct ThreeModeState {
  cplx A1, A2, A12;
  cplx K = 1.0;
  double mu1 = 0.0, mu2 = 0.0;
  cplx gamma_f = 0.0;
  double beta_dr = 0.0;
};

enum class ThreeModeKind { Emission, PrescribedField };

struct ThreeModeTrajectory {
  std::vector<double> t;
  std::vector<cplx> A1, A2, A12;
};

inline void validate(const ThreeModeState& s) {
  for (cplx z : {s.A1, s.A2, s.A12, s.K, s.gamma_f})
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw Error(Errc::NonFiniteState, "state must be finite");
  if (!std::isfinite(s.mu1) || !std::isfinite(s.mu2) || !std::isfinite(s.beta_dr))
    throw Error(Errc::NonFiniteState, "rates must be finite");
}

inline ThreeModeTrajectory integrate_three_mode(const ThreeModeState& s, ThreeModeKind kind, double t_max,
                                                double tol = 1e-12, double max_step = 0.0) {
  validate(s);
  if (!(t_max > 0.0)) throw Error(Errc::PreconditionViolated, "t_max must be positive");
  const cplx I(0.0, 1.0);
  const cplx Kc = std::conj(s.K);
  auto rhs = [&](double t, const std::vector<cplx>& y, std::vector<cplx>& dy) {
    dy[0] = -s.mu1 * y[0] + I * s.K * y[2] * y[1] + s.gamma_f * std::exp(I * (s.beta_dr * t));
    dy[1] = -s.mu2 * y[1] + I * Kc * std::conj(y[2]) * y[0];
    dy[2] = kind == ThreeModeKind::Emission ? I * Kc * y[0] * std::conj(y[1]) : cplx(0.0);
  };
  IvpOptions opt;
  opt.rtol = tol;
  opt.atol = tol * std::max({std::abs(s.A1), std::abs(s.A2), std::abs(s.A12), 1e-300});
  if (max_step > 0.0) opt.max_step = max_step;
  auto tr = integrate_ivp<cplx>(rhs, {s.A1, s.A2, s.A12}, 0.0, t_max, opt);
  ThreeModeTrajectory out;
  out.t = std::move(tr.s);
  for (const auto& y : tr.y) {
    out.A1.push_back(y[0]);
    out.A2.push_back(y[1]);
    out.A12.push_back(y[2]);
  }
  return out;
}

// The modes driving the orbit:  dr/dt = -d + Re(alpha1 e^{-i beta dr t} A1) + Re(alpha2 e^{-i beta dr t} A2),
// with the forcing phase of mode 1 following the current detuning beta * dr(t).
struct OrbitCoupling {
  double d = 0.0;
  cplx alpha1 = 0.0, alpha2 = 0.0;
  double beta = 1.0;
  double delta_r0 = 0.0;
};

struct CoupledTrajectory {
  ThreeModeTrajectory modes;
  std::vector<double> delta_r;
};

inline CoupledTrajectory integrate_coupled_orbit(const ThreeModeState& s, const OrbitCoupling& c, ThreeModeKind kind,
                                                 double t_max, double tol = 1e-10) {
  validate(s);
  if (!(t_max > 0.0)) throw Error(Errc::PreconditionViolated, "t_max must be positive");
  if (!std::isfinite(c.d) || !std::isfinite(c.beta) || !std::isfinite(c.delta_r0))
    throw Error(Errc::NonFiniteState, "orbit coupling must be finite");
  const cplx I(0.0, 1.0);
  const cplx Kc = std::conj(s.K);
  auto rhs = [&](double t, const std::vector<cplx>& y, std::vector<cplx>& dy) {
    const double dr = y[3].real();
    const cplx ph = std::exp(I * (c.beta * dr * t));
    dy[0] = -s.mu1 * y[0] + I * s.K * y[2] * y[1] + s.gamma_f * ph;
    dy[1] = -s.mu2 * y[1] + I * Kc * std::conj(y[2]) * y[0];
    dy[2] = kind == ThreeModeKind::Emission ? I * Kc * y[0] * std::conj(y[1]) : cplx(0.0);
    dy[3] = -c.d + (c.alpha1 * std::conj(ph) * y[0]).real() + (c.alpha2 * std::conj(ph) * y[1]).real();
  };
  IvpOptions opt;
  opt.rtol = tol;
  opt.atol = tol * std::max({std::abs(s.A1), std::abs(s.A2), std::abs(s.A12), std::abs(c.delta_r0), 1e-300});
  auto tr = integrate_ivp<cplx>(rhs, {s.A1, s.A2, s.A12, cplx(c.delta_r0)}, 0.0, t_max, opt);
  CoupledTrajectory out;
  out.modes.t = std::move(tr.s);
  for (const auto& y : tr.y) {
    out.modes.A1.push_back(y[0]);
    out.modes.A2.push_back(y[1]);
    out.modes.A12.push_back(y[2]);
    out.delta_r.push_back(y[3].real());
  }
  return out;
}

// Linear growth rate of (A2, A12*) about a finite A1: nu^2 + mu2 nu - |K A1|^2 = 0.
inline double emission_growth_rate(cplx K, cplx A1, double mu2) {
  const double ka = std::abs(K * A1);
  return -0.5 * mu2 + std::sqrt(0.25 * mu2 * mu2 + ka * ka);
}

// With A12 held fixed and no damping, d^2 A1/dt^2 = -|K A12|^2 A1.
inline double prescribed_field_frequency(cplx K, cplx A12) { return std::abs(K * A12); }

// ---------------------------------------------------------------------------
// Variance transport  dN1/dt - 2 mu1 N1 = K'(N2 - N1),  dN2/dt - 2 mu2 N2 = K'(N1 - N2)

struct Variances {
  double N1, N2;
};

inline Variances evolve_variances(double N1_0, double N2_0, double K_prime, double mu1, double mu2, double t) {
  if (!(N1_0 >= 0.0) || !(N2_0 >= 0.0)) throw Error(Errc::PreconditionViolated, "variances must be nonnegative");
  if (!(K_prime >= 0.0)) throw Error(Errc::PreconditionViolated, "K' must be nonnegative");
  // exp(A t) for the symmetric A = [[a, b], [b, c]]
  const double a = 2.0 * mu1 - K_prime, c = 2.0 * mu2 - K_prime, b = K_prime;
  const double m = 0.5 * (a + c);
  const double h = 0.5 * (a - c);
  const double q = std::hypot(h, b);
  const double ch = std::cosh(q * t);
  const double sh = q > 0.0 ? std::sinh(q * t) / q : t;
  const double e = std::exp(m * t);
  return {e * ((ch + h * sh) * N1_0 + b * sh * N2_0), e * (b * sh * N1_0 + (ch - h * sh) * N2_0)};
}

// ---------------------------------------------------------------------------
// Resonance with a circular orbit versus Bohr's condition

// |omega'_p - E_p omega0 / (m c^2)| / |omega'_p|, with rest_energy = m c^2.
inline double bohr_check(double omega_prime_p, double E_p, double omega0, double rest_energy) {
  if (omega_prime_p == 0.0) throw Error(Errc::DivisionDegenerate, "omega'_p must be nonzero");
  if (!(rest_energy > 0.0)) throw Error(Errc::PreconditionViolated, "rest energy must be positive");
  return std::abs(omega_prime_p - E_p * omega0 / rest_energy) / std::abs(omega_prime_p);
}

}  // namespace metron::orbits
