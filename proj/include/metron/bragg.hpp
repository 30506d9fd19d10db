#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "errors.hpp"
#include "numerics.hpp"

namespace metron::bragg {

// Components (k1, k2, k3, k4) with metric diag(1, 1, 1, -1); k4 is the frequency.
struct FourVector {
  std::array<double, 4> k{};

  FourVector() = default;
  FourVector(double k1, double k2, double k3, double k4) : k{k1, k2, k3, k4} {}

  double operator[](std::size_t i) const { return k[i]; }
  double& operator[](std::size_t i) { return k[i]; }

  FourVector operator+(const FourVector& o) const { return {k[0] + o.k[0], k[1] + o.k[1], k[2] + o.k[2], k[3] + o.k[3]}; }
  FourVector operator-(const FourVector& o) const { return {k[0] - o.k[0], k[1] - o.k[1], k[2] - o.k[2], k[3] - o.k[3]}; }
  FourVector operator*(double a) const { return {a * k[0], a * k[1], a * k[2], a * k[3]}; }
  double spatial_dot(const FourVector& o) const { return k[0] * o.k[0] + k[1] * o.k[1] + k[2] * o.k[2]; }
};

inline double dot(const FourVector& a, const FourVector& b) { return a.spatial_dot(b) - a[3] * b[3]; }

inline bool on_shell(const FourVector& k, double omega0, double rel_tol) {
  return std::abs(dot(k, k) + omega0 * omega0) <= rel_tol * omega0 * omega0;
}

// Unit 4-velocity along a scattered wave on the mass shell k.k = -omega0^2.
inline FourVector resonance_direction(const FourVector& k_s, double omega0) {
  if (!(omega0 > 0.0)) throw Error(Errc::PreconditionViolated, "omega0 must be positive");
  if (!on_shell(k_s, omega0, 1e-10)) throw Error(Errc::OffShell, "scattered wavenumber is off the mass shell");
  FourVector u = k_s * (1.0 / omega0);
  if (std::abs(dot(u, u) + 1.0) > 1e-9) throw Error(Errc::OffShell, "u.u differs from -1");
  return u;
}

struct LatticeSpec {
  std::vector<FourVector> fundamentals;  // static: k4 = 0
  int dimensionality = 3;
  int max_order = 1;
  FourVector normal;  // unit spatial vector of the free direction (2D lattices only)
};

namespace detail {

inline void for_each_harmonic(const LatticeSpec& L, auto&& visit) {
  const std::size_t m = L.fundamentals.size();
  std::vector<int> n(m, -L.max_order);
  if (m == 0) {
    visit(FourVector{});
    return;
  }
  for (;;) {
    FourVector kl;
    for (std::size_t j = 0; j < m; ++j) kl = kl + L.fundamentals[j] * static_cast<double>(n[j]);
    visit(kl);
    std::size_t j = 0;
    while (j < m && n[j] == L.max_order) n[j++] = -L.max_order;
    if (j == m) return;
    ++n[j];
  }
}

}  // namespace detail

// Scattered wavenumbers k_i + k_l on the mass shell. 3D lattices keep only exact matches; 2D lattices
// solve for the free normal component and keep both real roots (a double root appears once).
inline std::vector<FourVector> bragg_scatter_set(const FourVector& k_i, const LatticeSpec& L, double omega0) {
  if (!(omega0 > 0.0)) throw Error(Errc::PreconditionViolated, "omega0 must be positive");
  if (L.dimensionality != 2 && L.dimensionality != 3)
    throw Error(Errc::PreconditionViolated, "lattice dimensionality must be 2 or 3");
  if (L.max_order < 0) throw Error(Errc::PreconditionViolated, "max_order must be nonnegative");
  if (!on_shell(k_i, omega0, 1e-10)) throw Error(Errc::OffShell, "incident wavenumber is off the mass shell");
  for (const auto& g : L.fundamentals)
    if (g[3] != 0.0) throw Error(Errc::PreconditionViolated, "lattice wavenumbers must be static");

  std::vector<FourVector> out;
  if (L.dimensionality == 3) {
    detail::for_each_harmonic(L, [&](const FourVector& kl) {
      const FourVector ks = k_i + kl;
      if (on_shell(ks, omega0, 1e-9)) out.push_back(ks);
    });
    return out;
  }

  const FourVector& n = L.normal;
  const double nn = n.spatial_dot(n);
  if (std::abs(nn - 1.0) > 1e-12) throw Error(Errc::PreconditionViolated, "2D lattice needs a unit normal");
  for (const auto& g : L.fundamentals)
    if (std::abs(g.spatial_dot(n)) > 1e-12 * std::sqrt(g.spatial_dot(g)))
      throw Error(Errc::PreconditionViolated, "2D lattice wavenumbers must be orthogonal to the normal");
  const double k4 = k_i[3];
  detail::for_each_harmonic(L, [&](const FourVector& kl) {
    FourVector par = k_i + kl;
    const double along = par.spatial_dot(n);
    par = par - n * along;
    par[3] = k4;
    const double q2 = k4 * k4 - omega0 * omega0 - par.spatial_dot(par);
    if (q2 < -1e-12 * omega0 * omega0) return;
    const double q = std::sqrt(std::max(q2, 0.0));
    out.push_back(par + n * q);
    if (q > 0.0) out.push_back(par - n * q);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reduced resonance-trapping system
//   dE/ds = -gamma E cos(dS + phi),  d(dS)/ds = -omega0 E

struct BraggTrapState {
  double E = 0.0;
  double deltaS = 0.0;
  double gamma = 1.0;
  double phi = 0.0;
  double omega0 = 1.0;
};

inline void validate(const BraggTrapState& st) {
  if (!(st.E >= 0.0) || !std::isfinite(st.E)) throw Error(Errc::PreconditionViolated, "E must be finite and nonnegative");
  if (!(st.gamma >= 0.0) || !std::isfinite(st.gamma)) throw Error(Errc::PreconditionViolated, "gamma must be nonnegative");
  if (!(st.omega0 > 0.0) || !std::isfinite(st.omega0)) throw Error(Errc::PreconditionViolated, "omega0 must be positive");
  if (!std::isfinite(st.phi) || !std::isfinite(st.deltaS)) throw Error(Errc::PreconditionViolated, "phases must be finite");
}

// E - (gamma/omega0)(sin(dS + phi) - sin(dS0 + phi)), with dS0 the phase of the initial state.
inline double first_integral(double E, double deltaS, const BraggTrapState& st) {
  return E - (st.gamma / st.omega0) * (std::sin(deltaS + st.phi) - std::sin(st.deltaS + st.phi));
}

struct TrapTrajectory {
  std::vector<double> s, E, deltaS, invariant;
};

// phase_floor ends the run once dS falls below it.
inline TrapTrajectory integrate_trap(const BraggTrapState& st, double s_max, double tol = 1e-12,
                                     double phase_floor = -std::numeric_limits<double>::infinity()) {
  validate(st);
  if (!(s_max >= 0.0)) throw Error(Errc::PreconditionViolated, "s_max must be nonnegative");
  auto rhs = [&](double, const std::vector<double>& y, std::vector<double>& d) {
    d[0] = -st.gamma * y[0] * std::cos(y[1] + st.phi);
    d[1] = -st.omega0 * y[0];
  };
  IvpOptions opt;
  opt.rtol = tol;
  opt.atol = tol * 1e-3 * std::max(st.E, st.gamma / st.omega0);
  if (!(opt.atol > 0.0)) opt.atol = tol;
  TrapTrajectory out;
  if (s_max == 0.0 || st.E == 0.0) {
    out.s = {0.0, s_max};
    out.E = {st.E, st.E};
    out.deltaS = {st.deltaS, st.deltaS};
    out.invariant = {st.E, st.E};
    return out;
  }
  auto tr = integrate_ivp<double>(rhs, {st.E, st.deltaS}, 0.0, s_max, opt,
                                  [&](double, const std::vector<double>& y) { return y[1] < phase_floor; });
  out.s = std::move(tr.s);
  for (const auto& y : tr.y) {
    out.E.push_back(y[0]);
    out.deltaS.push_back(y[1]);
    out.invariant.push_back(first_integral(y[0], y[1], st));
  }
  return out;
}

enum class Verdict { Trapped, Oscillatory };

inline const char* verdict_name(Verdict v) { return v == Verdict::Trapped ? "trapped" : "oscillatory"; }

struct Classification {
  Verdict verdict;
  double B;
};

inline double trapping_parameter(const BraggTrapState& st) {
  return st.omega0 * st.E / st.gamma - std::sin(st.phi + st.deltaS);
}

// B = omega0 E0 / gamma - sin(phi); the marginal case B = 1 counts as trapped.
inline Classification classify_trapping(const BraggTrapState& st) {
  validate(st);
  if (st.gamma == 0.0) throw Error(Errc::DegenerateCoupling, "gamma = 0 leaves B undefined (purely oscillatory)");
  const double B = trapping_parameter(st);
  return {B <= 1.0 ? Verdict::Trapped : Verdict::Oscillatory, B};
}

enum class Asymptote { Trapped, Oscillatory, Undecided };

inline const char* asymptote_name(Asymptote a) {
  return a == Asymptote::Trapped ? "trapped" : (a == Asymptote::Oscillatory ? "oscillatory" : "undecided");
}

struct LongTimeResult {
  Asymptote verdict = Asymptote::Undecided;
  double invariant_drift = 0.0;  // max |I - E0| relative to max(E0, gamma/omega0)
  double s_end = 0.0;
};

// Verdict from direct integration, independent of B: the phase falling a full turn below its start means no
// equilibrium was met on the way; E collapsing means the phase locked.
inline LongTimeResult long_time_verdict(const BraggTrapState& st, double s_max, double tol = 1e-12) {
  const double floor = st.deltaS - 2.0 * std::numbers::pi;
  const auto tr = integrate_trap(st, s_max, tol, floor);
  const double scale = std::max(st.E, st.gamma / st.omega0);
  LongTimeResult r;
  for (double v : tr.invariant) r.invariant_drift = std::max(r.invariant_drift, std::abs(v - st.E) / scale);
  r.s_end = tr.s.back();
  if (tr.deltaS.back() < floor) r.verdict = Asymptote::Oscillatory;
  else if (tr.E.back() < 1e-3 * scale) r.verdict = Asymptote::Trapped;
  return r;
}

struct EquilibriumPhases {
  double stable;    // in [0, 2 pi)
  double unstable;
  bool degenerate;  // |B| = 1: the two roots coincide
};

inline double wrap_phase(double x) {
  constexpr double tau = 2.0 * std::numbers::pi;
  double w = std::fmod(x, tau);
  if (w < 0.0) w += tau;
  if (w >= tau) w -= tau;
  return w;
}

// Roots of sin(dS + phi) = -B. The linearization at E = 0 has eigenvalues {-gamma cos(dS + phi), 0},
// so the root with cos(dS + phi) > 0 attracts.
inline EquilibriumPhases equilibrium_phases(double B, double phi) {
  if (!std::isfinite(B) || !std::isfinite(phi)) throw Error(Errc::PreconditionViolated, "B and phi must be finite");
  if (std::abs(B) > 1.0) throw Error(Errc::NoEquilibrium, "|B| > 1 admits no equilibrium phase");
  const double a = std::asin(-B);
  const double x1 = wrap_phase(a - phi);  // cos(x1 + phi) = cos(a) >= 0
  const double x2 = wrap_phase(std::numbers::pi - a - phi);
  return {x1, x2, std::abs(B) == 1.0};
}

}  // namespace metron::bragg
