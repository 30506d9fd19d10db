#pragma once

#include <array>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "errors.hpp"

namespace metron::greens {

using cplx = std::complex<double>;
using Vec4 = std::array<double, 4>;  // (x1, x2, x3, t), metric diag(1, 1, 1, -1)
using Vec3 = std::array<double, 3>;

enum class KernelKind { Retarded, Advanced, Symmetric };

inline const char* kind_name(KernelKind k) {
  return k == KernelKind::Retarded ? "retarded" : (k == KernelKind::Advanced ? "advanced" : "symmetric");
}

struct DispersionParams {
  double omega_hat = 1.0;
  double k_max = 0.0;  // quadrature cutoff; 0 picks one from (r, t)

  double omega(double k) const { return std::sqrt(omega_hat * omega_hat + k * k); }
};

namespace detail {

constexpr double pi = std::numbers::pi;

inline double theta(double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? 0.0 : 0.5); }

// sum over [a, b] split into n panels of 16-point Gauss-Legendre
template <class F>
double gauss_panels(F&& f, double a, double b, std::size_t n) {
  using G = boost::math::quadrature::gauss<double, 16>;
  const double h = (b - a) / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double c = a + (p + 0.5) * h;
    double s = 0.0;
    for (std::size_t i = 0; i < G::abscissa().size(); ++i) {
      const double x = 0.5 * h * G::abscissa()[i];
      const double w = G::weights()[i];
      if (x == 0.0) {
        s += w * f(c);
      } else {
        s += w * (f(c + x) + f(c - x));
      }
    }
    sum += 0.5 * h * s;
  }
  return sum;
}

// int_0^inf {cos(kr - w t) - cos(kr + w t)} (k/w_k) exp(-(k/K)^8) dk, t > 0
inline double windowed_integral(double r, double t, double omega_hat, double K) {
  const double k_end = 1.7 * K;  // window below e^-69 beyond
  const double h_max = std::min(std::numbers::pi / (2.0 * (r + t)), K / 8.0);
  const auto n = static_cast<std::size_t>(std::ceil(k_end / h_max));
  auto f = [&](double k) {
    const double w = std::sqrt(omega_hat * omega_hat + k * k);
    const double x = k / K;
    const double x2 = x * x, x4 = x2 * x2;
    return 2.0 * std::sin(k * r) * std::sin(w * t) * (k / w) * std::exp(-x4 * x4);
  };
  return gauss_panels(f, 0.0, k_end, n);
}

// Retarded value for t > 0
inline double retarded_quadrature(double r, double t, const DispersionParams& p) {
  const double gap = std::abs(t - r);
  if (gap < 1e-9 * (r + t)) throw Error(Errc::QuadratureNotConverged, "on the light cone the kernel is a distribution");
  const double K = std::max({p.k_max, 10.0 * p.omega_hat, 120.0 / gap});
  const double a = windowed_integral(r, t, p.omega_hat, K);
  const double b = windowed_integral(r, t, p.omega_hat, 1.5 * K);
  // magnitude of the in-cone tail, a floor for the relative comparison
  const double tau = std::sqrt(std::abs(t * t - r * r));
  const double ref = p.omega_hat * p.omega_hat * std::pow(1.0 + p.omega_hat * tau, -1.5) * r;
  if (std::abs(a - b) > 1e-4 * std::max({std::abs(a), std::abs(b), ref}))
    throw Error(Errc::QuadratureNotConverged, "windowed quadrature differs between cutoffs K and 1.5K");
  return -b / (4.0 * pi * pi * r);
}

}  // namespace detail

struct LightConeTerm {
  double residual;  // r - t (retarded) or r + t (advanced); the term is supported where it vanishes
  double weight;
  bool on_support;
};

// Non-dispersive kernel: -(1/(4 pi r)) Theta(t) delta(r - t) and the advanced mirror. Symmetric carries both
// halves.
inline std::vector<LightConeTerm> greens_nondispersive(double r, double t, KernelKind kind, double tol = 1e-12) {
  if (!(r > 0.0)) throw Error(Errc::OriginSingular, "r = 0 is the source point");
  const double w = -1.0 / (4.0 * detail::pi * r);
  const LightConeTerm ret{r - t, w, t > 0.0 && std::abs(r - t) <= tol * r};
  const LightConeTerm adv{r + t, w, t < 0.0 && std::abs(r + t) <= tol * r};
  switch (kind) {
    case KernelKind::Retarded:
      return {ret};
    case KernelKind::Advanced:
      return {adv};
    case KernelKind::Symmetric:
      return {{ret.residual, 0.5 * w, ret.on_support}, {adv.residual, 0.5 * w, adv.on_support}};
  }
  return {};
}

// Field of a point source with strength f(t) under the non-dispersive kernel.
inline double nondispersive_field(double r, double t, KernelKind kind, const std::function<double(double)>& f) {
  if (!(r > 0.0)) throw Error(Errc::OriginSingular, "r = 0 is the source point");
  const double w = -1.0 / (4.0 * detail::pi * r);
  switch (kind) {
    case KernelKind::Retarded:
      return w * f(t - r);
    case KernelKind::Advanced:
      return w * f(t + r);
    case KernelKind::Symmetric:
      return 0.5 * w * (f(t - r) + f(t + r));
  }
  return 0.0;
}

inline double greens_dispersive(double r, double t, const DispersionParams& p, KernelKind kind) {
  if (!(r > 0.0)) throw Error(Errc::OriginSingular, "r = 0 is the source point");
  if (!(p.omega_hat > 0.0)) throw Error(Errc::PreconditionViolated, "omega_hat must be positive");
  if (t == 0.0) throw Error(Errc::PreconditionViolated, "t must be nonzero");
  switch (kind) {
    case KernelKind::Retarded:
      return t > 0.0 ? detail::retarded_quadrature(r, t, p) : 0.0;
    case KernelKind::Advanced:
      return t < 0.0 ? detail::retarded_quadrature(r, -t, p) : 0.0;
    case KernelKind::Symmetric:
      return 0.5 * detail::retarded_quadrature(r, std::abs(t), p);
  }
  return 0.0;
}

struct StationaryPoint {
  double v, k0, omega0, omega_pp;
};

inline StationaryPoint stationary_point(double r, double t, double omega_hat) {
  if (!(omega_hat > 0.0)) throw Error(Errc::PreconditionViolated, "omega_hat must be positive");
  if (t == 0.0) throw Error(Errc::SuperluminalCone, "t = 0 has no subluminal cone");
  const double v = r / std::abs(t);
  if (!(v < 1.0)) throw Error(Errc::SuperluminalCone, "r/|t| >= 1 lies outside the light cone");
  const double g = 1.0 / std::sqrt(1.0 - v * v);
  const double w0 = omega_hat * g;
  return {v, omega_hat * v * g, w0, omega_hat * omega_hat / (w0 * w0 * w0)};
}

// -(2 pi)^-2 r^-1 v (2 pi/(w'' |t|))^(1/2) cos(k0 r -+ w0 t - pi/4) with the causal factor.
inline double greens_stationary_phase(double r, double t, const DispersionParams& p, KernelKind kind) {
  if (!(r > 0.0)) throw Error(Errc::OriginSingular, "r = 0 is the source point");
  const auto sp = stationary_point(r, t, p.omega_hat);
  const double at = std::abs(t);
  const double amp = -sp.v * std::sqrt(2.0 * detail::pi / (sp.omega_pp * at)) / (4.0 * detail::pi * detail::pi * r);
  const double ret = amp * std::cos(sp.k0 * r - sp.omega0 * at - 0.25 * detail::pi);
  switch (kind) {
    case KernelKind::Retarded:
      return t > 0.0 ? ret : 0.0;
    case KernelKind::Advanced:
      return t < 0.0 ? ret : 0.0;
    case KernelKind::Symmetric:
      return 0.5 * ret;
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Pairwise 4-momentum exchange

struct WorldLine {
  std::vector<Vec4> x;  // positions
  std::vector<Vec4> u;  // 4-velocities
  std::vector<double> ds;  // proper-time quadrature weights

  void validate() const {
    if (x.empty() || x.size() != u.size() || x.size() != ds.size())
      throw Error(Errc::PreconditionViolated, "world line arrays must be nonempty and of equal length");
    for (std::size_t i = 0; i < u.size(); ++i) {
      const auto& v = u[i];
      const double uu = v[0] * v[0] + v[1] * v[1] + v[2] * v[2] - v[3] * v[3];
      if (std::abs(uu + 1.0) > 1e-8) throw Error(Errc::PreconditionViolated, "u.u differs from -1", static_cast<int>(i));
    }
  }
};

// Samples a path given in coordinate time, with trapezoidal proper-time weights.
template <class Pos, class Vel>
WorldLine worldline_from_path(double t0, double t1, std::size_t n, Pos&& position, Vel&& velocity) {
  if (n < 2 || !(t1 > t0)) throw Error(Errc::PreconditionViolated, "need n >= 2 samples over t0 < t1");
  WorldLine w;
  const double h = (t1 - t0) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = t0 + h * static_cast<double>(i);
    const Vec3 p = position(t);
    const Vec3 v = velocity(t);
    const double v2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
    if (!(v2 < 1.0)) throw Error(Errc::PreconditionViolated, "path velocity must be subluminal", static_cast<int>(i));
    const double g = 1.0 / std::sqrt(1.0 - v2);
    w.x.push_back({p[0], p[1], p[2], t});
    w.u.push_back({g * v[0], g * v[1], g * v[2], g});
    w.ds.push_back((i == 0 || i == n - 1 ? 0.5 : 1.0) * h / g);
  }
  return w;
}

struct RegularizedKernel {
  KernelKind kind = KernelKind::Symmetric;
  double sigma = 0.1;  // width of the Gaussian replacing delta(xi^2)
  double omega_hat = 0.0;

  // contravariant gradient d G / d xi_lambda at separation xi
  Vec4 gradient(const Vec4& xi) const {
    const double s2 = xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2] - xi[3] * xi[3];
    const double dG = d_even(s2);  // d/d(xi^2) of the bracket
    double c;
    switch (kind) {
      case KernelKind::Retarded:
        c = 2.0 * detail::theta(xi[3]);
        break;
      case KernelKind::Advanced:
        c = 2.0 * detail::theta(-xi[3]);
        break;
      default:
        c = 1.0;  // half of retarded + advanced
    }
    c *= 2.0 * dG;
    return {c * xi[0], c * xi[1], c * xi[2], c * xi[3]};
  }

  // Bracket B(xi^2) with G^R = 2 Theta(t) B: B = -(1/(4 pi)) N(xi^2) + (1/(8 pi)) h(-xi^2) S(-xi^2),
  // h(s) = omega_hat J1(omega_hat sqrt(s)) / sqrt(s), S a smoothed step.
  double value_even(double s2) const {
    double v = -normal(s2) / (4.0 * detail::pi);
    if (omega_hat > 0.0) {
      const double s = -s2;
      const double S = step(s);
      if (S > 0.0) v += tail(s) * S / (8.0 * detail::pi);
    }
    return v;
  }

  double d_even(double s2) const {
    double d = s2 / (sigma * sigma) * normal(s2) / (4.0 * detail::pi);
    if (omega_hat > 0.0) {
      const double s = -s2;
      const double S = step(s);
      if (S > 0.0) d -= (tail_prime(s) * S + tail(s) * normal(s)) / (8.0 * detail::pi);
    }
    return d;
  }

 private:
  double normal(double x) const {
    return std::exp(-0.5 * x * x / (sigma * sigma)) / (std::sqrt(2.0 * detail::pi) * sigma);
  }
  double step(double s) const { return 0.5 * std::erfc(-s / (std::sqrt(2.0) * sigma)); }
  double tail(double s) const {
    const double w2 = omega_hat * omega_hat;
    if (s == 0.0) return 0.5 * w2;
    if (s > 0.0) {
      const double x = omega_hat * std::sqrt(s);
      return w2 * std::cyl_bessel_j(1.0, x) / x;
    }
    const double y = omega_hat * std::sqrt(-s);
    return w2 * std::cyl_bessel_i(1.0, y) / y;
  }
  double tail_prime(double s) const {
    const double w4 = std::pow(omega_hat, 4);
    if (s == 0.0) return -w4 / 16.0;
    if (s > 0.0) {
      const double x = omega_hat * std::sqrt(s);
      return -0.5 * w4 * std::cyl_bessel_j(2.0, x) / (x * x);
    }
    const double y = omega_hat * std::sqrt(-s);
    return -0.5 * w4 * std::cyl_bessel_i(2.0, y) / (y * y);
  }
};

struct MomentumExchange {
  Vec4 dp_i{}, dp_j{};
  double d_min = 0.0;

  double imbalance() const {
    double s = 0.0, a = 0.0, b = 0.0;
    for (int l = 0; l < 4; ++l) {
      s += (dp_i[l] + dp_j[l]) * (dp_i[l] + dp_j[l]);
      a += dp_i[l] * dp_i[l];
      b += dp_j[l] * dp_j[l];
    }
    return std::sqrt(s) / std::max(std::sqrt(std::max(a, b)), std::numeric_limits<double>::min());
  }
};

// Delta p_i = I sum ds_i ds_j dG(x_i - x_j)/dx_i, and the mirror for j.
inline MomentumExchange momentum_exchange(const WorldLine& li, const WorldLine& lj, const RegularizedKernel& G,
                                          double coupling = 1.0) {
  li.validate();
  lj.validate();
  if (!(G.sigma > 0.0)) throw Error(Errc::PreconditionViolated, "sigma must be positive");
  MomentumExchange out;
  double d2 = std::numeric_limits<double>::infinity();
  for (const auto& a : li.x)
    for (const auto& b : lj.x) {
      double e = 0.0;
      for (int l = 0; l < 4; ++l) e += (a[l] - b[l]) * (a[l] - b[l]);
      d2 = std::min(d2, e);
    }
  out.d_min = std::sqrt(d2);
  if (G.sigma > d2) throw Error(Errc::KernelUnresolved, "regularization width exceeds the squared line separation");

  for (std::size_t a = 0; a < li.x.size(); ++a)
    for (std::size_t b = 0; b < lj.x.size(); ++b) {
      Vec4 xi;
      for (int l = 0; l < 4; ++l) xi[l] = li.x[a][l] - lj.x[b][l];
      const Vec4 g = G.gradient(xi);
      const double w = coupling * li.ds[a] * lj.ds[b];
      for (int l = 0; l < 4; ++l) out.dp_i[l] += w * g[l];
    }
  for (std::size_t b = 0; b < lj.x.size(); ++b)
    for (std::size_t a = 0; a < li.x.size(); ++a) {
      Vec4 xi;
      for (int l = 0; l < 4; ++l) xi[l] = lj.x[b][l] - li.x[a][l];
      const Vec4 g = G.gradient(xi);
      const double w = coupling * li.ds[a] * lj.ds[b];
      for (int l = 0; l < 4; ++l) out.dp_j[l] += w * g[l];
    }
  return out;
}

// ---------------------------------------------------------------------------
// Absorber response

// Coherent response B = 2iA of a perfect absorber and the resulting net wave amplitudes near the emitter.
struct AbsorberClosure {
  cplx B, C, outgoing, ingoing;
};

inline AbsorberClosure absorber_closure(cplx A) {
  const cplx B = cplx(0.0, 2.0) * A;
  const cplx half = B / cplx(0.0, 2.0);
  return {B, A + half, A + half, A - half};
}

// (1 - e^{-i w s}) / (i w), removable value s at w = 0
inline cplx response_delta(double omega, double s) {
  const double x = omega * s;
  if (std::abs(x) < 1e-8) return cplx(s, -0.5 * omega * s * s);
  const double sh = std::sin(0.5 * x);
  return cplx(std::sin(x), -2.0 * sh * sh) / omega;
}

// int Delta(w, s) f(w) dw over [-w_max, w_max], panels resolving the period 2 pi / s.
inline cplx smeared_response(const std::function<double(double)>& f, double s, double omega_max) {
  if (!(omega_max > 0.0)) throw Error(Errc::PreconditionViolated, "omega_max must be positive");
  const double h = std::min(omega_max / 16.0, std::numbers::pi / std::max(std::abs(s), 1e-300));
  const auto n = static_cast<std::size_t>(std::ceil(2.0 * omega_max / h));
  const double re = detail::gauss_panels([&](double w) { return response_delta(w, s).real() * f(w); }, -omega_max,
                                         omega_max, n);
  const double im = detail::gauss_panels([&](double w) { return response_delta(w, s).imag() * f(w); }, -omega_max,
                                         omega_max, n);
  return {re, im};
}

using Spectrum = std::function<double(const Vec3& q, double nu)>;

struct ShellQuadrature {
  std::size_t radial_panels = 32;
  std::size_t polar = 48;
  std::size_t azimuthal = 48;
};

// (pi/4) int d^3k F(k - k0, w_k - w0) / w_k^2, the frequency integral collapsed onto the dispersion surface.
// The q = k - k0 integral runs over the ball |q| <= params.k_max.
inline double damping_coefficient(const Spectrum& FR, const Vec3& k0, double omega0, const DispersionParams& p,
                                  const ShellQuadrature& quad = {}) {
  if (!(p.k_max > 0.0)) throw Error(Errc::PreconditionViolated, "k_max sets the spectral support radius and must be positive");
  if (!(p.omega_hat >= 0.0)) throw Error(Errc::PreconditionViolated, "omega_hat must be nonnegative");
  using G = boost::math::quadrature::gauss<double, 16>;
  std::vector<double> mu, wmu;  // Gauss-Legendre in cos(theta)
  const std::size_t np = std::max<std::size_t>(1, (quad.polar + 15) / 16);
  for (std::size_t pnl = 0; pnl < np; ++pnl) {
    const double h = 2.0 / static_cast<double>(np);
    const double a = -1.0 + h * static_cast<double>(pnl);
    for (std::size_t i = 0; i < G::abscissa().size(); ++i) {
      const double x = 0.5 * h * G::abscissa()[i];
      const double w = 0.5 * h * G::weights()[i];
      mu.push_back(a + 0.5 * h + x);
      wmu.push_back(w);
      if (x != 0.0) {
        mu.push_back(a + 0.5 * h - x);
        wmu.push_back(w);
      }
    }
  }
  const double dphi = 2.0 * std::numbers::pi / static_cast<double>(quad.azimuthal);
  auto shell = [&](double q) {
    if (q == 0.0) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const double st = std::sqrt(std::max(0.0, 1.0 - mu[i] * mu[i]));
      for (std::size_t j = 0; j < quad.azimuthal; ++j) {
        const double ph = dphi * static_cast<double>(j);
        const Vec3 qv{q * st * std::cos(ph), q * st * std::sin(ph), q * mu[i]};
        const Vec3 k{k0[0] + qv[0], k0[1] + qv[1], k0[2] + qv[2]};
        const double wk2 = p.omega_hat * p.omega_hat + k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if (wk2 == 0.0) continue;
        const double F = FR(qv, std::sqrt(wk2) - omega0);
        if (F < 0.0) throw Error(Errc::PreconditionViolated, "F^R must be nonnegative");
        sum += wmu[i] * dphi * F / wk2;
      }
    }
    return q * q * sum;
  };
  return 0.25 * std::numbers::pi * detail::gauss_panels(shell, 0.0, p.k_max, quad.radial_panels);
}

// (pi/(2 w_k^2)) |a|^2 [F(k - k0, w_k - w0) + F(k + k0, w_k + w0)]
inline double freewave_growth(const Spectrum& FR, double a_sq, const Vec3& k, const Vec3& k0, double omega0,
                              const DispersionParams& p) {
  if (!(a_sq >= 0.0)) throw Error(Errc::PreconditionViolated, "|a|^2 must be nonnegative");
  const double wk2 = p.omega_hat * p.omega_hat + k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
  if (!(wk2 > 0.0)) throw Error(Errc::DivisionDegenerate, "omega_k = 0");
  const double wk = std::sqrt(wk2);
  const double Fm = FR({k[0] - k0[0], k[1] - k0[1], k[2] - k0[2]}, wk - omega0);
  const double Fp = FR({k[0] + k0[0], k[1] + k0[1], k[2] + k0[2]}, wk + omega0);
  if (Fm < 0.0 || Fp < 0.0) throw Error(Errc::PreconditionViolated, "F^R must be nonnegative");
  return 0.5 * std::numbers::pi * a_sq * (Fm + Fp) / wk2;
}

}  // namespace metron::greens
