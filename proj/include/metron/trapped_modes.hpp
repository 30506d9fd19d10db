#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "numerics.hpp"

namespace metron::trapped {

struct SingleModeParams {
  double omega_hat = 1.0;
  double epsilon = 1.0;
  int mode_order = 0;
  double r0 = 5.0;
  int max_iters = 200;
  double tol = 1e-9;
  double theta = 0.5;      // under-relaxation weight
  double r_max = 0.0;      // 0 picks a box from r0 and the mode order
  std::size_t n_points = 2001;
  double seed_width = 0.0;  // 0 uses r0
};

struct TrappedModeSolution {
  SingleModeParams params;
  double omega = 0.0;
  RadialField phi0;
  RadialField phi1;
  RadialField kappa_sq;
  double residual_eigen = 0.0;
  double residual_poisson = 0.0;
  int iterations_used = 0;
  double amplitude_sq = 0.0;  // A^2 with phi1 = A * (unit-max shape)
};

struct ModeSpec {
  double omega_hat = 1.0;
  int sigma = 1;
  int node_order = 0;
  double r0 = 5.0;
};

struct MultiModeSpec {
  std::vector<ModeSpec> modes;
  std::size_t mean_fields = 1;
  Eigen::MatrixXd couplings;  // eps(a, p): mean_fields x modes
  double r_max = 0.0;
  std::size_t n_points = 2001;
  double theta = 0.5;
};

struct MultiModeSolution {
  std::vector<double> omegas;
  std::vector<RadialField> modes;
  std::vector<RadialField> mean_fields;
  std::vector<RadialField> kappa_sq;
  std::vector<double> residual_eigen;
  double residual_poisson = 0.0;
  std::vector<double> amplitude_sq;
  int iterations_used = 0;
};

struct FifthOrderSolution {
  RadialField phi0, phi1, phi2;
  double omega1 = 0.0;
  double omega2 = 0.0;
  double phi2_origin = 0.0;   // shooting parameter phi2(0)
  double tail_variation = 0.0;  // (max-min)/mean of r*phi2 over the outer quarter
  double residual_eigen = 0.0;
  double residual_poisson = 0.0;
  int iterations_used = 0;
};

// ---------------------------------------------------------------------------

inline double interp(const RadialField& f, double r) {
  const double h = f.grid.spacing();
  const double x = r / h;
  const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(std::max(0.0, std::floor(x))), f.size() - 2);
  const double t = x - static_cast<double>(i);
  return (1.0 - t) * f[i] + t * f[i + 1];
}

// Radius of the last sign change of kappa^2 from + to -, linearly interpolated; -1 if none.
inline double kappa_zero_crossing(const RadialField& k2) {
  for (std::size_t i = k2.size() - 1; i >= 1; --i) {
    if (k2[i - 1] > 0.0 && k2[i] <= 0.0) {
      const double t = k2[i - 1] / (k2[i - 1] - k2[i]);
      return k2.grid.r(i - 1) + t * k2.grid.spacing();
    }
  }
  return -1.0;
}

// Scale-free residuals: |lap phi1 + k2 phi1| / (max|k2| max|phi1|) and
// |lap phi0 + source| / max|source| on interior nodes.
inline double relative_eigen_residual(const RadialField& phi, const std::vector<double>& k2) {
  double kmax = 0.0;
  for (std::size_t i = 1; i + 1 < k2.size(); ++i) kmax = std::max(kmax, std::abs(k2[i]));
  const double denom = kmax * phi.max_abs();
  return denom > 0.0 ? helmholtz_residual(phi, k2) / denom : 0.0;
}

inline double relative_poisson_residual(const RadialField& phi0, const RadialField& source) {
  const double denom = source.max_abs();
  return denom > 0.0 ? poisson_residual(phi0, source, 1.0) / denom : 0.0;
}

namespace detail {

inline double rel_change(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return den > 0.0 ? num / den : num;
}

// Outcome of an eigen solve inside the amplitude search.
struct Probe {
  enum Kind { Bound, TooShallow, TooDeep } kind = Bound;
  EigenResult eig;
};

inline Probe probe(const RadialGrid& g, double omega_hat, const std::vector<double>& well, int order) {
  Probe p;
  try {
    p.eig = solve_radial_eigen_well(g, omega_hat, well, order);
  } catch (const Error& e) {
    if (e.code() == Errc::NoBracket) {
      // the bracket fails low only when the well is too deep for a real frequency
      double wmax = 0.0;
      for (double x : well) wmax = std::max(wmax, x);
      p.kind = wmax >= omega_hat * omega_hat ? Probe::TooDeep : Probe::TooShallow;
    } else if (e.code() == Errc::NotTrapped) {
      p.kind = Probe::TooShallow;
    } else {
      throw;
    }
  }
  return p;
}

// Shared engine for single and coupled modes. eps(a,p) couples mean field a to mode p.
class Engine {
 public:
  Engine(RadialGrid grid, std::vector<ModeSpec> modes, Eigen::MatrixXd eps, double theta)
      : g_(grid), modes_(std::move(modes)), eps_(std::move(eps)), theta_(theta) {}

  const RadialGrid& grid() const { return g_; }

  // well_p(r) = sum_a eps(a,p) omega_hat_p^2 phi_a(r)
  std::vector<double> well(std::size_t p, const std::vector<std::vector<double>>& fields) const {
    std::vector<double> w(g_.n_points, 0.0);
    const double wh2 = modes_[p].omega_hat * modes_[p].omega_hat;
    for (std::size_t a = 0; a < fields.size(); ++a) {
      const double c = eps_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(p)) * wh2;
      if (c == 0.0) continue;
      for (std::size_t i = 0; i < w.size(); ++i) w[i] += c * fields[a][i];
    }
    return w;
  }

  // Unit Poisson fields U[p][a] = solution of lap U = -eps(a,p) omega_hat_p^2 psi_p^2.
  std::vector<std::vector<std::vector<double>>> unit_fields(const std::vector<RadialField>& psi,
                                                            double tail_tol) const {
    const std::size_t na = static_cast<std::size_t>(eps_.rows());
    std::vector<std::vector<std::vector<double>>> U(modes_.size(), std::vector<std::vector<double>>(na));
    for (std::size_t p = 0; p < modes_.size(); ++p) {
      RadialField src(g_);
      for (std::size_t i = 0; i < g_.n_points; ++i) src[i] = psi[p][i] * psi[p][i];
      RadialField base = solve_radial_poisson(src, 1.0, tail_tol);
      const double wh2 = modes_[p].omega_hat * modes_[p].omega_hat;
      for (std::size_t a = 0; a < na; ++a) {
        const double c = eps_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(p)) * wh2;
        U[p][a].assign(g_.n_points, 0.0);
        for (std::size_t i = 0; i < g_.n_points; ++i) U[p][a][i] = c * base[i];
      }
    }
    return U;
  }

  std::vector<std::vector<double>> fields_from(const std::vector<double>& x,
                                               const std::vector<std::vector<std::vector<double>>>& U,
                                               const std::vector<std::vector<double>>& fixed) const {
    std::vector<std::vector<double>> f = fixed;
    for (std::size_t p = 0; p < x.size(); ++p)
      for (std::size_t a = 0; a < f.size(); ++a)
        for (std::size_t i = 0; i < g_.n_points; ++i) f[a][i] += x[p] * U[p][a][i];
    return f;
  }

  // Scale-condition mismatch of every mode at amplitudes x; unbound modes score +1, overdeep ones -1.
  struct Eval {
    std::vector<double> F;
    std::vector<Probe> probes;
    int lost = -1;
    bool too_deep = false;
  };

  Eval evaluate(const std::vector<double>& x, const std::vector<std::vector<std::vector<double>>>& U,
                const std::vector<std::vector<double>>& fixed) const {
    Eval ev;
    const auto f = fields_from(x, U, fixed);
    for (std::size_t q = 0; q < modes_.size(); ++q) {
      const auto w = well(q, f);
      Probe pr = probe(g_, modes_[q].omega_hat, w, modes_[q].node_order);
      if (pr.kind != Probe::Bound) {
        if (ev.lost < 0) ev.lost = static_cast<int>(q);
        ev.too_deep = ev.too_deep || pr.kind == Probe::TooDeep;
        ev.F.push_back(pr.kind == Probe::TooDeep ? -1.0 : (g_.r_max - modes_[q].r0) / modes_[q].r0);
      } else {
        // Offset of the outer kappa^2 zero from r0; decreases monotonically as the well deepens.
        const double rc = kappa_zero_crossing(RadialField(g_, pr.eig.kappa_sq));
        ev.F.push_back(((rc < 0.0 ? g_.r_max : rc) - modes_[q].r0) / modes_[q].r0);
      }
      ev.probes.push_back(std::move(pr));
    }
    return ev;
  }

  // Amplitudes x_p >= 0 such that every kappa_q^2 vanishes at its r0_q.
  std::vector<double> solve_amplitudes(std::vector<double> x_ref, const std::vector<std::vector<std::vector<double>>>& U,
                                       const std::vector<std::vector<double>>& fixed, double t0) const {
    const std::size_t np = modes_.size();
    // Scalar search along the ray t * x_ref; unbound counts as positive, too deep as negative.
    auto g = [&](double t) {
      std::vector<double> x(np);
      for (std::size_t p = 0; p < np; ++p) x[p] = t * x_ref[p];
      const Eval ev = evaluate(x, U, fixed);
      double s = 0.0;
      for (double v : ev.F) s += v;
      return s / static_cast<double>(np);
    };
    double a = t0, b = t0;
    double ga = g(a), gb = ga;
    int guard = 0;
    if (ga > 0.0) {
      while (gb > 0.0) {
        a = b;
        ga = gb;
        b *= 2.0;
        gb = g(b);
        if (++guard > 200) throw Error(Errc::NotTrapped, "amplitude search could not deepen the well enough");
      }
    } else {
      while (ga <= 0.0) {
        b = a;
        gb = ga;
        a *= 0.5;
        ga = g(a);
        if (++guard > 200) throw Error(Errc::NotTrapped, "amplitude search could not make the well shallow enough");
      }
    }
    std::uintmax_t it = 200;
    auto tol = [](double lo, double hi) { return std::abs(hi - lo) <= 1e-13 * std::max(std::abs(lo), std::abs(hi)); };
    auto r = boost::math::tools::toms748_solve(g, a, b, ga, gb, tol, it);
    const double t = 0.5 * (r.first + r.second);
    std::vector<double> x(np);
    for (std::size_t p = 0; p < np; ++p) x[p] = t * x_ref[p];
    if (np == 1) return x;

    // Newton with a finite-difference Jacobian; the min-norm step keeps symmetric
    // solutions symmetric when identical modes make the Jacobian singular.
    Eval ev = evaluate(x, U, fixed);
    auto norm = [](const std::vector<double>& v) {
      double m = 0.0;
      for (double e : v) m = std::max(m, std::abs(e));
      return m;
    };
    for (int iter = 0; iter < 60; ++iter) {
      if (ev.lost < 0 && norm(ev.F) < 1e-13) break;
      Eigen::MatrixXd J(np, np);
      Eigen::VectorXd F(np);
      for (std::size_t q = 0; q < np; ++q) F[static_cast<Eigen::Index>(q)] = ev.F[q];
      for (std::size_t p = 0; p < np; ++p) {
        std::vector<double> xp = x;
        const double dx = 1e-6 * std::max(std::abs(x[p]), 1e-12);
        xp[p] += dx;
        const Eval e2 = evaluate(xp, U, fixed);
        for (std::size_t q = 0; q < np; ++q)
          J(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(p)) = (e2.F[q] - ev.F[q]) / dx;
      }
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(J);
      cod.setThreshold(1e-8);
      const Eigen::VectorXd step = cod.solve(-F);

      double lam = 1.0;
      bool accepted = false;
      for (int bt = 0; bt < 30; ++bt, lam *= 0.5) {
        std::vector<double> xn = x;
        bool positive = true;
        for (std::size_t p = 0; p < np; ++p) {
          xn[p] += lam * step[static_cast<Eigen::Index>(p)];
          positive = positive && xn[p] > 0.0;
        }
        if (!positive) continue;
        Eval en = evaluate(xn, U, fixed);
        if (en.lost < 0 && norm(en.F) < norm(ev.F)) {
          x = xn;
          ev = std::move(en);
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }
    if (ev.lost >= 0) throw Error(Errc::NotTrapped, "mode lost its bound state during the amplitude solve", ev.lost);
    return x;
  }

  struct State {
    std::vector<std::vector<double>> fields;
    std::vector<double> omegas;
    std::vector<RadialField> psi;
    std::vector<double> x;
    int iterations = 0;
  };

  // One outer step: shapes from the current fields, amplitudes, relaxed field update.
  // extra(fields) returns additional mean-field contributions held fixed during the amplitude solve.
  template <class Extra>
  double step(State& st, Extra&& extra, double tail_tol = 1e-6) const {
    const std::size_t np = modes_.size();
    std::vector<RadialField> psi(np);
    std::vector<double> om(np);
    for (std::size_t p = 0; p < np; ++p) {
      const auto w = well(p, st.fields);
      Probe pr = probe(g_, modes_[p].omega_hat, w, modes_[p].node_order);
      if (pr.kind != Probe::Bound)
        throw Error(Errc::NotTrapped, "mode " + std::to_string(p) + " lost its bound state", static_cast<int>(p));
      psi[p] = pr.eig.phi;
      om[p] = pr.eig.omega;
    }
    const auto U = unit_fields(psi, tail_tol);
    const std::vector<std::vector<double>> fixed = extra(st.fields);

    std::vector<double> x_ref = st.x;
    double t0 = 1.0;
    if (x_ref.empty()) {
      // first pass: match the depth of the current wells
      x_ref.assign(np, 1.0);
      const auto unit = fields_from(x_ref, U, fixed);
      double cur = 0.0, trial = 0.0;
      for (std::size_t p = 0; p < np; ++p) {
        cur = std::max(cur, well(p, st.fields)[0]);
        trial = std::max(trial, well(p, unit)[0]);
      }
      t0 = trial > 0.0 ? cur / trial : 1.0;
    }
    std::vector<double> x = solve_amplitudes(x_ref, U, fixed, t0);
    auto target = fields_from(x, U, fixed);

    double change = 0.0;
    for (std::size_t a = 0; a < st.fields.size(); ++a) {
      std::vector<double> next(g_.n_points);
      for (std::size_t i = 0; i < g_.n_points; ++i) next[i] = (1.0 - theta_) * st.fields[a][i] + theta_ * target[a][i];
      change = std::max(change, rel_change(next, st.fields[a]));
      st.fields[a] = std::move(next);
    }
    for (std::size_t p = 0; p < np; ++p) {
      if (!st.omegas.empty())
        change = std::max(change, std::abs(om[p] - st.omegas[p]) / modes_[p].omega_hat);
      if (!st.psi.empty() && !st.x.empty()) {
        std::vector<double> a(g_.n_points), b(g_.n_points);
        for (std::size_t i = 0; i < g_.n_points; ++i) {
          a[i] = std::sqrt(x[p]) * psi[p][i];
          b[i] = std::sqrt(st.x[p]) * st.psi[p][i];
        }
        change = std::max(change, rel_change(a, b));
      } else {
        change = std::max(change, 1.0);
      }
    }
    st.omegas = om;
    st.psi = std::move(psi);
    st.x = std::move(x);
    ++st.iterations;
    return change;
  }

 private:
  RadialGrid g_;
  std::vector<ModeSpec> modes_;
  Eigen::MatrixXd eps_;
  double theta_;
};

inline double default_box(double r0, int order) { return r0 * (10.0 + 3.0 * order); }

}  // namespace detail

// ---------------------------------------------------------------------------

inline TrappedModeSolution iterate_single_mode(const SingleModeParams& params) {
  if (!(params.omega_hat > 0.0) || !(params.r0 > 0.0) || !(params.tol > 0.0))
    throw Error(Errc::PreconditionViolated, "omega_hat, r0 and tol must be positive");
  if (params.epsilon == 0.0) throw Error(Errc::PreconditionViolated, "epsilon must be nonzero");
  if (params.mode_order < 0) throw Error(Errc::PreconditionViolated, "mode_order must be nonnegative");
  if (!(params.theta > 0.0 && params.theta <= 1.0)) throw Error(Errc::PreconditionViolated, "theta must lie in (0, 1]");

  const RadialGrid g(params.r_max > 0.0 ? params.r_max : detail::default_box(params.r0, params.mode_order),
                     params.n_points);
  ModeSpec mode{params.omega_hat, 1, params.mode_order, params.r0};
  Eigen::MatrixXd eps(1, 1);
  eps(0, 0) = params.epsilon;
  detail::Engine eng(g, {mode}, eps, params.theta);

  detail::Engine::State st;
  st.fields.assign(1, std::vector<double>(g.n_points));
  // Seed eps*phi0 = exp(-(r/w)^2)/2, widened until the requested mode binds; the
  // first amplitude solve fixes the depth.
  double width = params.seed_width > 0.0 ? params.seed_width : params.r0;
  for (int attempt = 0;; ++attempt) {
    for (std::size_t i = 0; i < g.n_points; ++i) {
      const double r = g.r(i) / width;
      st.fields[0][i] = 0.5 * std::exp(-r * r) / params.epsilon;
    }
    const auto w = eng.well(0, st.fields);
    if (detail::probe(g, params.omega_hat, w, params.mode_order).kind == detail::Probe::Bound) break;
    if (attempt > 20) throw Error(Errc::NotTrapped, "seed mean field does not bind the requested mode");
    width *= 1.25;
  }

  auto none = [&](const std::vector<std::vector<double>>& f) {
    return std::vector<std::vector<double>>(f.size(), std::vector<double>(g.n_points, 0.0));
  };
  // Final pass: eigenmode of the converged mean field, scaled by the last amplitude.
  auto finish = [&]() {
    TrappedModeSolution sol;
    sol.params = params;
    sol.iterations_used = st.iterations;
    sol.phi0 = RadialField(g, st.fields[0]);
    const EigenResult eig = solve_radial_eigen_well(g, params.omega_hat, eng.well(0, st.fields), params.mode_order);
    sol.omega = eig.omega;
    sol.amplitude_sq = st.x[0];
    std::vector<double> p1(g.n_points);
    for (std::size_t i = 0; i < g.n_points; ++i) p1[i] = std::sqrt(st.x[0]) * eig.phi[i];
    sol.phi1 = RadialField(g, std::move(p1));
    sol.kappa_sq = RadialField(g, eig.kappa_sq);
    RadialField src(g);
    const double c = params.epsilon * params.omega_hat * params.omega_hat;
    for (std::size_t i = 0; i < g.n_points; ++i) src[i] = c * sol.phi1[i] * sol.phi1[i];
    sol.residual_eigen = relative_eigen_residual(sol.phi1, eig.kappa_sq);
    sol.residual_poisson = relative_poisson_residual(sol.phi0, src);
    return sol;
  };

  double change = 1.0;
  try {
    while (st.iterations < params.max_iters) {
      change = eng.step(st, none);
      if (change < params.tol) {
        TrappedModeSolution sol = finish();
        if (sol.residual_eigen < params.tol && sol.residual_poisson < params.tol) return sol;
      }
    }
  } catch (const Error& e) {
    // omega sliding to zero means the requested r0 lies below the smallest crossing radius of this mode
    if (e.code() == Errc::NotTrapped && !st.omegas.empty() && st.omegas[0] < 0.05 * params.omega_hat)
      throw Error(Errc::NotTrapped, "r0 is below the smallest zero-crossing radius reachable by mode order " +
                                        std::to_string(params.mode_order) + " (omega fell to zero)", 0);
    throw;
  }
  const TrappedModeSolution last = finish();
  throw Error(Errc::NoConvergence, "no convergence after " + std::to_string(st.iterations) + " iterations (change " +
                                       std::to_string(change) + ", eigen residual " +
                                       std::to_string(last.residual_eigen) + ", poisson residual " +
                                       std::to_string(last.residual_poisson) + ")");
}

inline std::pair<double, double> trapping_window(double omega_hat, double eps_phi0_origin) {
  if (!(eps_phi0_origin > 0.0 && eps_phi0_origin < 1.0))
    throw Error(Errc::WindowEmpty, "eps*phi0(0) must lie in (0, 1)");
  return {omega_hat * std::sqrt(1.0 - eps_phi0_origin), omega_hat};
}

inline std::pair<double, double> trapping_window(const TrappedModeSolution& sol) {
  return trapping_window(sol.params.omega_hat, sol.params.epsilon * sol.phi0[0]);
}

inline double lambda_max(const TrappedModeSolution& sol) {
  const double q = 1.0 - (sol.omega * sol.omega) / (sol.params.omega_hat * sol.params.omega_hat);
  return 1.0 / std::sqrt(q);
}

// r' = r/lambda, phi' = lambda^2 phi, omega'^2 = omega_hat^2 - lambda^2 (omega_hat^2 - omega^2).
// Grid nodes map one to one, so no resampling is needed.
inline TrappedModeSolution rescale(const TrappedModeSolution& sol, double lambda) {
  const double lmax = lambda_max(sol);
  if (!(lambda > 0.0) || lambda > lmax * (1.0 + 1e-12))
    throw Error(Errc::LambdaOutOfRange, "lambda must lie in (0, " + std::to_string(lmax) + "]");
  const double wh2 = sol.params.omega_hat * sol.params.omega_hat;
  TrappedModeSolution out = sol;
  const RadialGrid g(sol.phi0.grid.r_max / lambda, sol.phi0.grid.n_points);
  const double l2 = lambda * lambda;
  std::vector<double> p0(g.n_points), p1(g.n_points), k2(g.n_points);
  const double w2 = std::max(0.0, wh2 - l2 * (wh2 - sol.omega * sol.omega));
  const double c = sol.params.epsilon * wh2;
  for (std::size_t i = 0; i < g.n_points; ++i) {
    p0[i] = l2 * sol.phi0[i];
    p1[i] = l2 * sol.phi1[i];
    k2[i] = w2 - wh2 + c * p0[i];
  }
  out.omega = std::sqrt(w2);
  out.phi0 = RadialField(g, std::move(p0));
  out.phi1 = RadialField(g, std::move(p1));
  out.kappa_sq = RadialField(g, k2);
  out.params.r0 = sol.params.r0 / lambda;
  out.params.r_max = g.r_max;
  out.amplitude_sq = sol.amplitude_sq * l2 * l2;
  RadialField src(g);
  for (std::size_t i = 0; i < g.n_points; ++i) src[i] = c * out.phi1[i] * out.phi1[i];
  out.residual_eigen = relative_eigen_residual(out.phi1, k2);
  out.residual_poisson = relative_poisson_residual(out.phi0, src);
  return out;
}

// ---------------------------------------------------------------------------

inline MultiModeSolution solve_multimode(const MultiModeSpec& spec, int max_iters = 200, double tol = 1e-10) {
  const std::size_t np = spec.modes.size();
  const std::size_t na = spec.mean_fields;
  if (np == 0 || na == 0) throw Error(Errc::PreconditionViolated, "need at least one mode and one mean field");
  if (static_cast<std::size_t>(spec.couplings.rows()) != na || static_cast<std::size_t>(spec.couplings.cols()) != np)
    throw Error(Errc::PreconditionViolated, "coupling matrix must be mean_fields x modes");
  double rmax_default = 0.0;
  for (std::size_t p = 0; p < np; ++p) {
    const auto& m = spec.modes[p];
    if (!(m.omega_hat > 0.0) || !(m.r0 > 0.0)) throw Error(Errc::PreconditionViolated, "omega_hat and r0 must be positive");
    if (m.sigma != 1 && m.sigma != -1) throw Error(Errc::PreconditionViolated, "sigma must be +1 or -1");
    bool any = false;
    for (std::size_t a = 0; a < na; ++a) any = any || spec.couplings(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(p)) != 0.0;
    if (!any) throw Error(Errc::PreconditionViolated, "mode " + std::to_string(p) + " has no coupling to any mean field");
    rmax_default = std::max(rmax_default, detail::default_box(m.r0, m.node_order));
  }
  const RadialGrid g(spec.r_max > 0.0 ? spec.r_max : rmax_default, spec.n_points);
  detail::Engine eng(g, spec.modes, spec.couplings, spec.theta);

  // Seed each mean field with a Gaussian of the widest coupled mode, signed by its first coupling and
  // scaled so the strongest coupling gives a well of half the harmonic mass.
  detail::Engine::State st;
  st.fields.assign(na, std::vector<double>(g.n_points, 0.0));
  for (std::size_t a = 0; a < na; ++a) {
    double sign = 0.0, emax = 0.0, width = 0.0;
    for (std::size_t p = 0; p < np; ++p) {
      const double e = spec.couplings(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(p));
      if (e == 0.0) continue;
      if (sign == 0.0) sign = e > 0.0 ? 1.0 : -1.0;
      emax = std::max(emax, std::abs(e));
      width = std::max(width, spec.modes[p].r0);
    }
    if (emax == 0.0) continue;
    for (std::size_t i = 0; i < g.n_points; ++i) {
      const double r = g.r(i) / width;
      st.fields[a][i] = sign * 0.5 * std::exp(-r * r) / emax;
    }
  }
  for (std::size_t p = 0; p < np; ++p) {
    const auto w = eng.well(p, st.fields);
    if (!(*std::max_element(w.begin(), w.end()) > 0.0))
      throw Error(Errc::NotTrapped, "couplings give mode " + std::to_string(p) + " no attractive well", static_cast<int>(p));
  }
  for (int attempt = 0;; ++attempt) {
    int unbound = -1;
    for (std::size_t p = 0; p < np && unbound < 0; ++p)
      if (detail::probe(g, spec.modes[p].omega_hat, eng.well(p, st.fields), spec.modes[p].node_order).kind !=
          detail::Probe::Bound)
        unbound = static_cast<int>(p);
    if (unbound < 0) break;
    if (attempt > 20)
      throw Error(Errc::NotTrapped, "seed mean fields do not bind mode " + std::to_string(unbound), unbound);
    // widen the seeds
    for (auto& f : st.fields) {
      std::vector<double> w(g.n_points);
      for (std::size_t i = 0; i < g.n_points; ++i) w[i] = interp(RadialField(g, f), g.r(i) / 1.25);
      f = std::move(w);
    }
  }

  auto none = [&](const std::vector<std::vector<double>>& f) {
    return std::vector<std::vector<double>>(f.size(), std::vector<double>(g.n_points, 0.0));
  };
  double change = 1.0;
  while (st.iterations < max_iters) {
    change = eng.step(st, none);
    if (change < tol) break;
  }

  MultiModeSolution sol;
  sol.iterations_used = st.iterations;
  sol.amplitude_sq = st.x;
  for (std::size_t a = 0; a < na; ++a) sol.mean_fields.emplace_back(g, st.fields[a]);
  std::vector<RadialField> src(na, RadialField(g));
  for (std::size_t p = 0; p < np; ++p) {
    const auto w = eng.well(p, st.fields);
    const EigenResult eig = solve_radial_eigen_well(g, spec.modes[p].omega_hat, w, spec.modes[p].node_order);
    std::vector<double> v(g.n_points);
    for (std::size_t i = 0; i < g.n_points; ++i) v[i] = std::sqrt(st.x[p]) * eig.phi[i];
    sol.omegas.push_back(eig.omega);
    sol.modes.emplace_back(g, v);
    sol.kappa_sq.emplace_back(g, eig.kappa_sq);
    sol.residual_eigen.push_back(relative_eigen_residual(sol.modes.back(), eig.kappa_sq));
    const double wh2 = spec.modes[p].omega_hat * spec.modes[p].omega_hat;
    for (std::size_t a = 0; a < na; ++a) {
      const double c = spec.couplings(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(p)) * wh2;
      for (std::size_t i = 0; i < g.n_points; ++i) src[a][i] += c * v[i] * v[i];
    }
  }
  for (std::size_t a = 0; a < na; ++a)
    sol.residual_poisson = std::max(sol.residual_poisson, relative_poisson_residual(sol.mean_fields[a], src[a]));
  for (std::size_t p = 0; p < np; ++p) {
    // Newton stalls at the x_p > 0 boundary when another mode alone overbinds this one.
    const double rc = kappa_zero_crossing(sol.kappa_sq[p]);
    if (std::abs(rc - spec.modes[p].r0) > g.spacing())
      throw Error(Errc::NoConvergence, "scale condition of mode " + std::to_string(p) +
                                           " cannot be met with positive amplitudes (kappa^2 crosses zero at " +
                                           std::to_string(rc) + ")");
  }
  if (change >= tol)
    throw Error(Errc::NoConvergence, "coupled modes did not converge after " + std::to_string(st.iterations) + " iterations");
  return sol;
}

// ---------------------------------------------------------------------------
// Fifth-order variant: phi2 sits at omega2 = omega_hat2 with kappa2^2 = 2 eta2 omega_hat2^2 phi0 phi2^2.

namespace detail {

struct Phi2Shot {
  std::vector<double> u;
  double mismatch = 0.0;  // u(r_max) - u(r_max - h)
};

inline Phi2Shot shoot_phi2(const RadialGrid& g, const std::vector<double>& phi0, double coeff, double s) {
  const std::size_t n = g.n_points;
  const double h = g.spacing();
  Phi2Shot out;
  out.u.assign(n, 0.0);
  auto& u = out.u;
  u[1] = s * h;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    const double r = g.r(i);
    const double q = u[i] / r;
    u[i + 1] = 2.0 * u[i] - u[i - 1] - h * h * coeff * phi0[i] * q * q * u[i];
    if (!std::isfinite(u[i + 1])) {
      out.mismatch = -std::numeric_limits<double>::infinity();
      return out;
    }
  }
  out.mismatch = u[n - 1] - u[n - 2];
  return out;
}

// First (nodeless) phi2(0) for which r*phi2 is flat at r_max.
inline std::pair<double, std::vector<double>> solve_phi2(const RadialGrid& g, const std::vector<double>& phi0, double coeff,
                                                         double s_hint) {
  auto D = [&](double s) { return shoot_phi2(g, phi0, coeff, s).mismatch; };
  double lo = s_hint > 0.0 ? s_hint * 0.5 : 1e-6;
  while (D(lo) <= 0.0) {
    lo *= 0.5;
    if (lo < 1e-12) throw Error(Errc::TailNotFree, "phi2 shooting lost its lower bracket");
  }
  double hi = lo;
  for (int k = 0;; ++k) {
    hi *= 1.2;
    if (D(hi) <= 0.0) break;
    lo = hi;
    if (k > 400) throw Error(Errc::TailNotFree, "phi2 shooting found no flat-tail solution");
  }
  for (int k = 0; k < 200 && hi - lo > 1e-15 * hi; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (D(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  const double s = 0.5 * (lo + hi);
  Phi2Shot sh = shoot_phi2(g, phi0, coeff, s);
  std::vector<double> phi2(g.n_points);
  for (std::size_t i = 1; i < g.n_points; ++i) phi2[i] = sh.u[i] / g.r(i);
  phi2[0] = s;
  return {s, phi2};
}

inline double tail_variation(const RadialField& phi) {
  const std::size_t n = phi.size();
  double mn = std::numeric_limits<double>::infinity(), mx = -mn, sum = 0.0;
  std::size_t cnt = 0;
  for (std::size_t i = (3 * (n - 1)) / 4; i < n; ++i) {
    const double u = phi.grid.r(i) * phi[i];
    mn = std::min(mn, u);
    mx = std::max(mx, u);
    sum += u;
    ++cnt;
  }
  const double mean = sum / static_cast<double>(cnt);
  return (mx - mn) / std::abs(mean);
}

}  // namespace detail

inline FifthOrderSolution solve_fifth_order(double omega_hat_1, double omega_hat_2, double eps1, double eta2, double r0,
                                            int max_iters = 200, double tol = 1e-10, std::size_t n_points = 2001,
                                            double r_max = 0.0, double theta = 0.5) {
  if (eps1 == 0.0) throw Error(Errc::PreconditionViolated, "eps1 must be nonzero");
  if (eta2 != 0.0 && eps1 * eta2 <= 0.0)
    throw Error(Errc::PreconditionViolated, "eps1 and eta2 must have the same sign");
  if (!(omega_hat_1 > 0.0) || !(omega_hat_2 > 0.0) || !(r0 > 0.0))
    throw Error(Errc::PreconditionViolated, "frequencies and r0 must be positive");

  FifthOrderSolution out;
  out.omega2 = omega_hat_2;

  if (eta2 == 0.0) {
    // Decoupled: the (phi0, phi1) pair is the single-mode solution and phi2 is the free wave c/r.
    SingleModeParams p;
    p.omega_hat = omega_hat_1;
    p.epsilon = eps1;
    p.r0 = r0;
    p.max_iters = max_iters;
    p.tol = tol;
    p.n_points = n_points;
    p.r_max = r_max;
    p.theta = theta;
    const TrappedModeSolution s = iterate_single_mode(p);
    const RadialGrid& g = s.phi0.grid;
    std::vector<double> p2(g.n_points);
    for (std::size_t i = 1; i < g.n_points; ++i) p2[i] = 1.0 / g.r(i);
    p2[0] = p2[1];
    out.phi0 = s.phi0;
    out.phi1 = s.phi1;
    out.phi2 = RadialField(g, std::move(p2));
    out.omega1 = s.omega;
    out.phi2_origin = std::numeric_limits<double>::infinity();
    out.tail_variation = detail::tail_variation(out.phi2);
    out.residual_eigen = s.residual_eigen;
    out.residual_poisson = s.residual_poisson;
    out.iterations_used = s.iterations_used;
    return out;
  }

  const RadialGrid g(r_max > 0.0 ? r_max : detail::default_box(r0, 0), n_points);
  ModeSpec mode{omega_hat_1, 1, 0, r0};
  Eigen::MatrixXd eps(1, 1);
  eps(0, 0) = eps1;
  detail::Engine eng(g, {mode}, eps, theta);
  detail::Engine::State st;
  st.fields.assign(1, std::vector<double>(g.n_points));
  for (std::size_t i = 0; i < g.n_points; ++i) {
    const double r = g.r(i) / r0;
    st.fields[0][i] = eps1 * std::exp(-r * r);
  }
  const double coeff = 2.0 * eta2 * omega_hat_2 * omega_hat_2;
  const double w22 = eta2 * omega_hat_2 * omega_hat_2;
  double s_hint = 0.0;
  std::vector<double> phi2;
  // phi2 source phi2^4 falls off only as r^-4; its Coulomb exterior is still the leading term.
  constexpr double phi2_tail_tol = 1e-2;
  auto extra = [&](const std::vector<std::vector<double>>& f) {
    auto sol2 = detail::solve_phi2(g, f[0], coeff, s_hint);
    s_hint = sol2.first;
    phi2 = std::move(sol2.second);
    RadialField src(g);
    for (std::size_t i = 0; i < g.n_points; ++i) src[i] = w22 * std::pow(phi2[i], 4);
    return std::vector<std::vector<double>>{solve_radial_poisson(src, 1.0, phi2_tail_tol).values};
  };

  double change = 1.0;
  std::vector<double> phi2_prev;
  while (st.iterations < max_iters) {
    change = eng.step(st, extra);
    if (!phi2_prev.empty()) change = std::max(change, detail::rel_change(phi2, phi2_prev));
    else change = std::max(change, 1.0);
    phi2_prev = phi2;
    if (change < tol) break;
  }
  if (change >= tol)
    throw Error(Errc::NoConvergence, "fifth-order system did not converge after " + std::to_string(st.iterations) + " iterations");

  // Final consistent fields.
  out.phi0 = RadialField(g, st.fields[0]);
  const auto w = eng.well(0, st.fields);
  const EigenResult eig = solve_radial_eigen_well(g, omega_hat_1, w, 0);
  std::vector<double> p1(g.n_points);
  for (std::size_t i = 0; i < g.n_points; ++i) p1[i] = std::sqrt(st.x[0]) * eig.phi[i];
  out.phi1 = RadialField(g, std::move(p1));
  out.omega1 = eig.omega;
  auto fin = detail::solve_phi2(g, st.fields[0], coeff, s_hint);
  out.phi2_origin = fin.first;
  out.phi2 = RadialField(g, std::move(fin.second));
  out.iterations_used = st.iterations;
  out.residual_eigen = relative_eigen_residual(out.phi1, eig.kappa_sq);
  RadialField src(g);
  const double c1 = eps1 * omega_hat_1 * omega_hat_1;
  for (std::size_t i = 0; i < g.n_points; ++i)
    src[i] = c1 * out.phi1[i] * out.phi1[i] + w22 * std::pow(out.phi2[i], 4);
  out.residual_poisson = relative_poisson_residual(out.phi0, src);
  out.tail_variation = detail::tail_variation(out.phi2);
  if (!(out.tail_variation < 0.05))
    throw Error(Errc::TailNotFree, "r*phi2 varies by " + std::to_string(out.tail_variation) + " over the outer quarter");
  return out;
}

}  // namespace metron::trapped
