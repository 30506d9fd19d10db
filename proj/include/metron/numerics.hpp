#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace metron {

namespace detail {
inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(const std::complex<double>& z) { return std::max(std::abs(z.real()), std::abs(z.imag())); }
inline bool finite(double x) { return std::isfinite(x); }
inline bool finite(const std::complex<double>& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }
}  // namespace detail

// ---------------------------------------------------------------------------
// Adaptive Dormand-Prince 5(4) integration

template <class T>
struct Trajectory {
  std::vector<double> s;
  std::vector<std::vector<T>> y;
  std::size_t rejected = 0;

  const std::vector<T>& final_state() const { return y.back(); }
  double final_s() const { return s.back(); }
};

struct IvpOptions {
  double rtol = 1e-8;
  double atol = -1.0;  // negative: same as rtol
  double initial_step = 0.0;
  double max_step = std::numeric_limits<double>::infinity();
  bool store_steps = true;  // false keeps only the endpoints
};

struct NoStop {
  template <class T>
  bool operator()(double, const std::vector<T>&) const { return false; }
};

// f(s, y, dyds) fills dyds. stop(s, y) is polled after each accepted step and ends the run early.
template <class T, class F, class Stop = NoStop>
Trajectory<T> integrate_ivp(F&& f, std::vector<T> y0, double s0, double s1, const IvpOptions& opt = {},
                            Stop&& stop = Stop{}) {
  if (!(opt.rtol > 0.0)) throw Error(Errc::PreconditionViolated, "integrate_ivp: tol must be positive");
  const double atol = opt.atol < 0.0 ? opt.rtol : opt.atol;
  const std::size_t n = y0.size();
  for (const auto& v : y0)
    if (!detail::finite(v)) throw Error(Errc::NonFiniteState, "initial state is not finite");

  Trajectory<T> tr;
  tr.s.push_back(s0);
  tr.y.push_back(y0);
  const double span = s1 - s0;
  if (span == 0.0 || n == 0) return tr;
  const double dir = span > 0 ? 1.0 : -1.0;
  const double h_min = 1e-14 * std::abs(span);

  // Butcher tableau
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                   a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                   e6 = 22.0 / 525, e7 = -1.0 / 40;

  std::vector<T> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n), ynew(n);
  std::vector<T> y = std::move(y0);
  double s = s0;
  f(s, y, k1);

  double h = opt.initial_step > 0.0 ? opt.initial_step : std::min(std::abs(span) * 1e-3, opt.max_step);
  {
    // Scale the first step from the derivative size.
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double sc = atol + opt.rtol * detail::magnitude(y[i]);
      d0 = std::max(d0, detail::magnitude(y[i]) / sc);
      d1 = std::max(d1, detail::magnitude(k1[i]) / sc);
    }
    if (opt.initial_step <= 0.0 && d1 > 1e-12) h = std::min(h, 0.01 * std::max(d0, 1e-5) / d1);
    h = std::max(h, 10.0 * h_min);
  }

  bool last_nonfinite = false;
  while (dir * (s1 - s) > 0.0) {
    h = std::min({h, opt.max_step, std::abs(s1 - s)});
    if (h < h_min && std::abs(s1 - s) > h_min) {
      if (last_nonfinite) throw Error(Errc::NonFiniteState, "state became non-finite");
      throw Error(Errc::StepUnderflow, "required step fell below 1e-14 of the span");
    }
    const double hs = dir * h;
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + hs * (a21 * k1[i]);
    f(s + c2 * hs, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
    f(s + c3 * hs, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    f(s + c4 * hs, tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    f(s + c5 * hs, tmp, k5);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    f(s + hs, tmp, k6);
    for (std::size_t i = 0; i < n; ++i)
      ynew[i] = y[i] + hs * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    f(s + hs, ynew, k7);

    double err = 0.0;
    bool ok = true;
    for (std::size_t i = 0; i < n; ++i) {
      const T ei = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      if (!detail::finite(ynew[i]) || !detail::finite(ei) || !detail::finite(k7[i])) {
        ok = false;
        break;
      }
      const double sc = atol + opt.rtol * std::max(detail::magnitude(y[i]), detail::magnitude(ynew[i]));
      err = std::max(err, detail::magnitude(ei) / sc);
    }
    if (!ok) {
      last_nonfinite = true;
      ++tr.rejected;
      h *= 0.2;
      continue;
    }
    last_nonfinite = false;
    if (err <= 1.0) {
      s = (std::abs(s1 - (s + hs)) <= h_min) ? s1 : s + hs;
      y.swap(ynew);
      k1.swap(k7);
      if (opt.store_steps || dir * (s1 - s) <= 0.0) {
        tr.s.push_back(s);
        tr.y.push_back(y);
      }
      if (stop(s, y)) {
        if (!opt.store_steps) {
          tr.s.push_back(s);
          tr.y.push_back(y);
        }
        break;
      }
      const double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
      h *= fac;
    } else {
      ++tr.rejected;
      h *= std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
    }
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Radial grid and fields

struct RadialGrid {
  double r_max = 1.0;
  std::size_t n_points = 16;

  RadialGrid() = default;
  RadialGrid(double rmax, std::size_t n) : r_max(rmax), n_points(n) {
    if (n < 16) throw Error(Errc::PreconditionViolated, "RadialGrid needs at least 16 points");
    if (!(rmax > 0.0) || !std::isfinite(rmax)) throw Error(Errc::PreconditionViolated, "RadialGrid r_max must be positive");
  }

  double spacing() const { return r_max / static_cast<double>(n_points - 1); }
  double r(std::size_t i) const { return static_cast<double>(i) * spacing(); }
  std::vector<double> nodes() const {
    std::vector<double> out(n_points);
    for (std::size_t i = 0; i < n_points; ++i) out[i] = r(i);
    return out;
  }
};

struct RadialField {
  RadialGrid grid;
  std::vector<double> values;

  RadialField() = default;
  explicit RadialField(const RadialGrid& g) : grid(g), values(g.n_points, 0.0) {}
  RadialField(const RadialGrid& g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.n_points) throw Error(Errc::GridMismatch, "field length does not match grid");
    for (double x : values)
      if (!std::isfinite(x)) throw Error(Errc::NonFiniteState, "field value is not finite");
  }

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
  double& operator[](std::size_t i) { return values[i]; }
  double max_abs() const {
    double m = 0.0;
    for (double x : values) m = std::max(m, std::abs(x));
    return m;
  }
};

// Value at the origin from the two nearest nodes, assuming phi = phi(0) + O(r^2).
inline double origin_value(double phi1, double phi2) { return (4.0 * phi1 - phi2) / 3.0; }

// (1/r) d^2(r phi)/dr^2 at interior node i.
inline double radial_laplacian(const RadialField& f, std::size_t i) {
  const double h = f.grid.spacing();
  const double rm = f.grid.r(i - 1), r0 = f.grid.r(i), rp = f.grid.r(i + 1);
  return (rp * f[i + 1] - 2.0 * r0 * f[i] + rm * f[i - 1]) / (h * h * r0);
}

// max over interior nodes of |lap(phi) + k2 phi|.
inline double helmholtz_residual(const RadialField& phi, const std::vector<double>& k2) {
  double m = 0.0;
  for (std::size_t i = 1; i + 1 < phi.size(); ++i) m = std::max(m, std::abs(radial_laplacian(phi, i) + k2[i] * phi[i]));
  return m;
}

// max over interior nodes of |lap(phi) + sign*source|.
inline double poisson_residual(const RadialField& phi, const RadialField& source, double sign) {
  double m = 0.0;
  for (std::size_t i = 1; i + 1 < phi.size(); ++i)
    m = std::max(m, std::abs(radial_laplacian(phi, i) + sign * source[i]));
  return m;
}

// Trapezoid rule of f(r) r^2 over the grid.
inline double radial_moment2(const std::vector<double>& f, const RadialGrid& g) {
  const double h = g.spacing();
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double r = g.r(i);
    const double w = (i == 0 || i + 1 == f.size()) ? 0.5 : 1.0;
    acc += w * f[i] * r * r;
  }
  return acc * h;
}

inline int count_sign_changes(const std::vector<double>& v, std::size_t first, std::size_t last) {
  int n = 0;
  double prev = 0.0;
  for (std::size_t i = first; i <= last && i < v.size(); ++i) {
    if (v[i] == 0.0) continue;
    if (prev != 0.0 && (v[i] > 0.0) != (prev > 0.0)) ++n;
    prev = v[i];
  }
  return n;
}

// ---------------------------------------------------------------------------
// Radial eigenvalue shooting
//
// Works on u = r phi, for which [lap + k2] phi = 0 becomes u'' + k2 u = 0, discretised as
// u[i-1] - (2 - h^2 k2[i]) u[i] + u[i+1] = 0. An outward march from u = 0 at the origin
// and an inward march from the decay condition u' = -|k| u at r_max meet at the outermost
// classical turning point; the frequency is bisected on node count and the derivative jump.

struct EigenResult {
  double omega = 0.0;
  RadialField phi;
  std::vector<double> kappa_sq;  // on the grid at the returned omega
  double residual = 0.0;         // helmholtz_residual / max|phi|
};

namespace detail {

enum class Shot { TooLow, TooHigh, Unbound };

struct ShotData {
  Shot verdict = Shot::TooLow;
  int nodes = 0;
  std::size_t icl = 0;
  std::vector<double> u;
};

inline ShotData shoot(const std::vector<double>& k2, double h, int node_count, bool assemble) {
  const std::size_t n = k2.size();
  ShotData out;
  std::size_t icl = 0;
  for (std::size_t i = n - 1; i >= 1; --i) {
    if (k2[i] > 0.0) {
      icl = i;
      break;
    }
  }
  if (icl == 0) {
    out.verdict = Shot::Unbound;
    return out;
  }
  if (icl + 3 >= n) {
    out.verdict = Shot::TooHigh;  // no decaying region inside the box
    return out;
  }
  if (icl < 2) {
    out.verdict = Shot::TooLow;
    return out;
  }
  out.icl = icl;
  std::vector<double> u(n, 0.0);
  u[0] = 0.0;
  u[1] = h;
  for (std::size_t i = 1; i <= icl; ++i) {
    u[i + 1] = (2.0 - h * h * k2[i]) * u[i] - u[i - 1];
    if (std::abs(u[i + 1]) > 1e150) {
      for (std::size_t j = 0; j <= i + 1; ++j) u[j] *= 1e-150;
    }
  }
  out.nodes = count_sign_changes(u, 1, icl);
  if (out.nodes > node_count) {
    out.verdict = Shot::TooHigh;
    return out;
  }
  if (out.nodes < node_count) {
    out.verdict = Shot::TooLow;
    return out;
  }
  const double u_icl = u[icl], u_prev = u[icl - 1];
  std::vector<double> v(n, 0.0);
  v[n - 1] = 1.0;
  const double kk = std::sqrt(std::max(0.0, -k2[n - 1]));
  v[n - 2] = (1.0 - 0.5 * h * h * k2[n - 1] + h * kk) * v[n - 1];
  for (std::size_t i = n - 2; i >= icl; --i) {
    v[i - 1] = (2.0 - h * h * k2[i]) * v[i] - v[i + 1];
    if (std::abs(v[i - 1]) > 1e150) {
      for (std::size_t j = i - 1; j < n; ++j) v[j] *= 1e-150;
    }
    if (i == icl) break;
  }
  const double scale = u_icl / v[icl];
  const double v_next = v[icl + 1] * scale;
  const double djump = v_next + u_prev - (2.0 - h * h * k2[icl]) * u_icl;
  out.verdict = (djump * u_icl > 0.0) ? Shot::TooHigh : Shot::TooLow;
  if (assemble) {
    for (std::size_t i = icl + 1; i < n; ++i) u[i] = v[i] * scale;
    out.u = std::move(u);
  }
  return out;
}

}  // namespace detail

namespace detail {

// fill(omega, k2) writes kappa^2 at every node for a trial frequency.
template <class Fill>
EigenResult eigen_core(const RadialGrid& grid, Fill&& fill, int node_count, double omega_lo, double omega_hi,
                       double tol) {
  if (node_count < 0) throw Error(Errc::PreconditionViolated, "node_count must be nonnegative");
  if (!(omega_hi > omega_lo)) throw Error(Errc::PreconditionViolated, "bracket must satisfy omega_lo < omega_hi");
  if (!(tol > 0.0)) throw Error(Errc::PreconditionViolated, "tol must be positive");
  const std::size_t n = grid.n_points;
  const double h = grid.spacing();
  std::vector<double> k2(n);
  auto classify = [&](double w) {
    fill(w, k2);
    return shoot(k2, h, node_count, false).verdict;
  };

  const auto v_hi = classify(omega_hi);
  if (v_hi == Shot::Unbound) throw Error(Errc::NotTrapped, "no classically allowed region at omega_hi");
  if (v_hi != Shot::TooHigh) throw Error(Errc::NoBracket, "omega_hi lies below the requested mode");
  if (classify(omega_lo) == Shot::TooHigh) throw Error(Errc::NoBracket, "omega_lo lies above the requested mode");

  double lo = omega_lo, hi = omega_hi;
  while (hi - lo > tol * std::max(1.0, std::abs(hi))) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (classify(mid) == Shot::TooHigh)
      hi = mid;
    else
      lo = mid;
  }

  // Assemble at whichever end carries the requested node count.
  ShotData shot;
  double w = lo;
  for (double cand : {lo, hi}) {
    fill(cand, k2);
    shot = shoot(k2, h, node_count, true);
    if (!shot.u.empty()) {
      w = cand;
      break;
    }
  }
  if (shot.u.empty()) throw Error(Errc::NotTrapped, "bisection did not isolate a mode with the requested node count");

  std::vector<double> phi(n);
  for (std::size_t i = 1; i < n; ++i) phi[i] = shot.u[i] / grid.r(i);
  phi[0] = origin_value(phi[1], phi[2]);
  double m = 0.0;
  for (double x : phi) m = std::max(m, std::abs(x));
  const double sgn = phi[1] >= 0.0 ? 1.0 : -1.0;
  for (double& x : phi) x *= sgn / m;

  EigenResult res;
  res.omega = w;
  res.phi = RadialField(grid, std::move(phi));
  res.kappa_sq = k2;
  res.residual = helmholtz_residual(res.phi, k2);
  if (std::abs(res.phi[n - 1]) > 1e-3) throw Error(Errc::NotTrapped, "solution does not decay at r_max");
  if (count_sign_changes(res.phi.values, 1, n - 1) != node_count)
    throw Error(Errc::NotTrapped, "node count changed in the decaying tail");
  return res;
}

}  // namespace detail

// kappa_sq(r, omega) must be nondecreasing in omega at every r.
template <class KappaSq>
EigenResult solve_radial_eigen(const RadialGrid& grid, KappaSq&& kappa_sq, int node_count, double omega_lo,
                               double omega_hi, double tol = 1e-13) {
  auto fill = [&](double w, std::vector<double>& k2) {
    for (std::size_t i = 0; i < k2.size(); ++i) k2[i] = kappa_sq(grid.r(i), w);
  };
  return detail::eigen_core(grid, fill, node_count, omega_lo, omega_hi, tol);
}

// kappa^2 = omega^2 - omega_hat^2 + well[i], the form used by the trapped-mode equations.
inline EigenResult solve_radial_eigen_well(const RadialGrid& grid, double omega_hat, const std::vector<double>& well,
                                           int node_count, double tol = 1e-13) {
  const double wh2 = omega_hat * omega_hat;
  double wmax = 0.0;
  for (double x : well) wmax = std::max(wmax, x);
  if (!(wmax > 0.0)) throw Error(Errc::NotTrapped, "well is nowhere attractive");
  const double lo = omega_hat * std::sqrt(std::max(0.0, 1.0 - wmax / wh2));
  auto fill = [&](double w, std::vector<double>& k2) {
    const double base = w * w - wh2;
    for (std::size_t i = 0; i < k2.size(); ++i) k2[i] = base + well[i];
  };
  // shallow wells put omega just below omega_hat; keep the bracket tolerance relative to the depth
  const double depth = std::min(1.0, (omega_hat - lo) / omega_hat);
  return detail::eigen_core(grid, fill, node_count, lo, omega_hat, tol * std::max(depth, 1e-6));
}

// ---------------------------------------------------------------------------
// Spherical Poisson solve: lap(phi) = -sign*source, phi ~ Q/r outside the source.
// With u = r phi the discrete recurrence is summed exactly from the outer boundary
// (u' = 0 there) inward, then u is accumulated from u(0) = 0.

inline RadialField solve_radial_poisson(const RadialField& source, double sign, double tail_tol = 1e-6) {
  const RadialGrid& g = source.grid;
  const std::size_t n = g.n_points;
  if (source.size() != n) throw Error(Errc::GridMismatch, "source length does not match grid");
  const double smax = source.max_abs();
  for (double x : source.values)
    if (!std::isfinite(x)) throw Error(Errc::NonFiniteState, "source is not finite");
  if (smax == 0.0) return RadialField(g);
  if (std::abs(source[n - 1]) > tail_tol * smax)
    throw Error(Errc::NonDecayingSource, "source tail exceeds the decay threshold");

  const double h = g.spacing();
  std::vector<double> q(n), d(n, 0.0), u(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) q[i] = h * h * g.r(i) * sign * source[i];
  d[n - 2] = 0.5 * q[n - 1];
  for (std::size_t i = n - 2; i >= 1; --i) d[i - 1] = d[i] + q[i];
  for (std::size_t i = 0; i + 1 < n; ++i) u[i + 1] = u[i] + d[i];

  std::vector<double> phi(n);
  for (std::size_t i = 1; i < n; ++i) phi[i] = u[i] / g.r(i);
  phi[0] = origin_value(phi[1], phi[2]);
  return RadialField(g, std::move(phi));
}

}  // namespace metron
