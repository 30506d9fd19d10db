// metron_lab: command-line front end for the metron numerical laboratory.

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "metron/algebra.hpp"
#include "metron/bragg.hpp"
#include "metron/greens.hpp"
#include "metron/io.hpp"
#include "metron/orbits.hpp"
#include "metron/trapped_modes.hpp"

namespace fs = std::filesystem;
using metron::Errc;
using metron::Error;
using metron::io::json;
using metron::io::Table;

namespace {

constexpr const char* kVersion = "1.0.0";

struct ParamDef {
  std::string name;
  std::string def;
  std::string help;
  bool numeric = true;
  bool sweepable = true;
};

using Point = std::map<std::string, json>;

struct Context {
  unsigned jobs = 1;
};

struct Outcome {
  json scalars = json::object();
  std::optional<Table> series;
  json report;  // extra structured output (check lists)
  bool checks_failed = false;
};

struct Command {
  std::string name;
  std::string help;
  std::vector<ParamDef> params;
  std::function<Outcome(const Point&, const Context&)> run;
};

double num(const Point& p, const std::string& k) { return p.at(k).get<double>(); }

int integer(const Point& p, const std::string& k) {
  const double x = num(p, k);
  if (x != std::floor(x) || std::abs(x) > 1e9) throw Error(Errc::PreconditionViolated, k + " must be an integer");
  return static_cast<int>(x);
}

std::string str(const Point& p, const std::string& k) { return p.at(k).get<std::string>(); }

template <class F>
void parallel_for(std::size_t n, unsigned jobs, F&& f) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::min<std::size_t>(jobs, n); ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) f(i);
    });
  for (auto& th : pool) th.join();
}

// ---------------------------------------------------------------- trapped modes

std::vector<ParamDef> solve_params() {
  return {{"omega-hat", "1", "harmonic mass"},
          {"eps", "1", "mean-field coupling"},
          {"mode", "0", "radial node count"},
          {"r0", "5", "zero-crossing radius of kappa^2"},
          {"n-points", "2001", "radial grid points"},
          {"max-iters", "200", "iteration cap"},
          {"tol", "1e-9", "convergence tolerance"},
          {"theta", "0.5", "under-relaxation weight"},
          {"r-max", "0", "outer radius (0 = automatic)"}};
}

metron::trapped::SingleModeParams single_mode(const Point& p) {
  metron::trapped::SingleModeParams s;
  s.omega_hat = num(p, "omega-hat");
  s.epsilon = num(p, "eps");
  s.mode_order = integer(p, "mode");
  s.r0 = num(p, "r0");
  const int n = integer(p, "n-points");
  if (n < 16) throw Error(Errc::PreconditionViolated, "n-points must be at least 16");
  s.n_points = static_cast<std::size_t>(n);
  s.max_iters = integer(p, "max-iters");
  s.tol = num(p, "tol");
  s.theta = num(p, "theta");
  s.r_max = num(p, "r-max");
  return s;
}

int interior_zeros(const metron::RadialField& f) {
  double mx = 0.0;
  for (double v : f.values) mx = std::max(mx, std::abs(v));
  int zeros = 0, sign = 0;
  for (double v : f.values) {
    if (std::abs(v) < 1e-8 * mx) continue;
    const int s = v > 0 ? 1 : -1;
    if (sign != 0 && s != sign) ++zeros;
    sign = s;
  }
  return zeros;
}

Table field_table(const metron::trapped::TrappedModeSolution& sol) {
  Table t{{"r", "phi0", "phi1", "kappa_sq"}, {}};
  const auto& g = sol.phi0.grid;
  for (std::size_t i = 0; i < g.n_points; ++i) t.add({g.r(i), sol.phi0[i], sol.phi1[i], sol.kappa_sq[i]});
  return t;
}

Outcome run_solve(const Point& p, const Context&) {
  const auto sol = metron::trapped::iterate_single_mode(single_mode(p));
  Outcome o;
  const auto [lo, hi] = metron::trapped::trapping_window(sol);
  o.scalars["omega"] = sol.omega;
  o.scalars["residual_eigen"] = sol.residual_eigen;
  o.scalars["residual_poisson"] = sol.residual_poisson;
  o.scalars["iterations"] = sol.iterations_used;
  o.scalars["amplitude_sq"] = sol.amplitude_sq;
  o.scalars["window_lo"] = lo;
  o.scalars["window_hi"] = hi;
  o.scalars["lambda_max"] = metron::trapped::lambda_max(sol);
  o.scalars["kappa_zero_crossing"] = metron::trapped::kappa_zero_crossing(sol.kappa_sq);
  o.scalars["interior_zeros"] = interior_zeros(sol.phi1);
  o.series = field_table(sol);
  return o;
}

// Sweeps over lambda share one base solution.
const metron::trapped::TrappedModeSolution& cached_base(const metron::trapped::SingleModeParams& s, const std::string& key) {
  static std::mutex mu;
  static std::map<std::string, std::shared_ptr<metron::trapped::TrappedModeSolution>> cache;
  static std::map<std::string, std::shared_ptr<std::once_flag>> flags;
  std::shared_ptr<std::once_flag> flag;
  {
    std::lock_guard lock(mu);
    auto& f = flags[key];
    if (!f) f = std::make_shared<std::once_flag>();
    flag = f;
  }
  std::call_once(*flag, [&] {
    auto sol = std::make_shared<metron::trapped::TrappedModeSolution>(metron::trapped::iterate_single_mode(s));
    std::lock_guard lock(mu);
    cache[key] = sol;
  });
  std::lock_guard lock(mu);
  return *cache.at(key);
}

Outcome run_rescale(const Point& p, const Context&) {
  json key = json::object();
  for (const auto& d : solve_params()) key[d.name] = p.at(d.name);
  const auto& base = cached_base(single_mode(p), key.dump());
  const double lambda = num(p, "lambda");
  const auto sol = metron::trapped::rescale(base, lambda);
  Outcome o;
  o.scalars["lambda"] = lambda;
  o.scalars["lambda_max"] = metron::trapped::lambda_max(base);
  o.scalars["omega_base"] = base.omega;
  o.scalars["omega_prime"] = sol.omega;
  o.scalars["residual_eigen"] = sol.residual_eigen;
  o.scalars["residual_poisson"] = sol.residual_poisson;
  o.scalars["base_residual_eigen"] = base.residual_eigen;
  o.scalars["base_residual_poisson"] = base.residual_poisson;
  o.series = field_table(sol);
  return o;
}

// ---------------------------------------------------------------- Bragg

metron::bragg::BraggTrapState trap_state(const Point& p) {
  metron::bragg::BraggTrapState st;
  st.E = num(p, "E0");
  st.gamma = num(p, "gamma");
  st.phi = num(p, "phi");
  st.omega0 = num(p, "omega0");
  st.deltaS = num(p, "dS0");
  return st;
}

Outcome run_bragg_classify(const Point& p, const Context&) {
  namespace b = metron::bragg;
  const auto st = trap_state(p);
  const auto c = b::classify_trapping(st);
  Outcome o;
  o.scalars["B"] = c.B;
  o.scalars["verdict"] = b::verdict_name(c.verdict);
  if (std::abs(c.B) <= 1.0) {
    const auto eq = b::equilibrium_phases(c.B, st.phi);
    o.scalars["stable_phase"] = eq.stable;
    o.scalars["unstable_phase"] = eq.unstable;
  }
  const double s_max = num(p, "s-max");
  if (s_max > 0.0) {
    const auto lt = b::long_time_verdict(st, s_max);
    o.scalars["long_time"] = b::asymptote_name(lt.verdict);
    o.scalars["invariant_drift"] = lt.invariant_drift;
    const auto tr = b::integrate_trap(st, s_max);
    Table t{{"s", "E", "deltaS", "invariant"}, {}};
    for (std::size_t i = 0; i < tr.s.size(); ++i) t.add({tr.s[i], tr.E[i], tr.deltaS[i], tr.invariant[i]});
    o.series = std::move(t);
  }
  return o;
}

Outcome run_bragg_sweep(const Point& p, const Context& ctx) {
  namespace b = metron::bragg;
  const int nb = integer(p, "n-b"), nphi = integer(p, "n-phi");
  if (nb < 1 || nphi < 1) throw Error(Errc::PreconditionViolated, "empty (B, phi) grid");
  const double b0 = num(p, "b-min"), b1 = num(p, "b-max"), gamma = num(p, "gamma"), omega0 = num(p, "omega0");
  if (!(gamma > 0.0)) throw Error(Errc::DegenerateCoupling, "gamma must be positive");
  double s_max = num(p, "s-max");
  if (!(s_max > 0.0)) s_max = 4000.0 / gamma;
  const std::size_t n = static_cast<std::size_t>(nb) * static_cast<std::size_t>(nphi);
  std::vector<std::vector<json>> rows(n);
  std::vector<int> agree(n, 0);
  std::vector<double> drift(n, 0.0);
  parallel_for(n, ctx.jobs, [&](std::size_t k) {
    const int i = static_cast<int>(k) / nphi, j = static_cast<int>(k) % nphi;
    const double bv = nb > 1 ? b0 + (b1 - b0) * i / (nb - 1) : b0;
    const double phi = 2.0 * std::numbers::pi * j / nphi;
    b::BraggTrapState st{bv * gamma / omega0, 0.0, gamma, phi, omega0};
    const auto c = b::classify_trapping(st);
    const auto lt = b::long_time_verdict(st, s_max);
    const bool ok = (c.verdict == b::Verdict::Trapped && lt.verdict == b::Asymptote::Trapped) ||
                    (c.verdict == b::Verdict::Oscillatory && lt.verdict == b::Asymptote::Oscillatory);
    agree[k] = ok;
    drift[k] = lt.invariant_drift;
    rows[k] = {bv, phi, st.E, c.B, b::verdict_name(c.verdict), b::asymptote_name(lt.verdict), ok, lt.invariant_drift};
  });
  Outcome o;
  Table t{{"omega0_E0_over_gamma", "phi", "E0", "B", "verdict", "long_time", "agree", "invariant_drift"}, {}};
  for (auto& r : rows) t.add(std::move(r));
  o.series = std::move(t);
  int n_agree = 0;
  for (int a : agree) n_agree += a;
  o.scalars["cells"] = n;
  o.scalars["agreements"] = n_agree;
  o.scalars["agreement_fraction"] = static_cast<double>(n_agree) / static_cast<double>(n);
  o.scalars["max_invariant_drift"] = *std::max_element(drift.begin(), drift.end());
  return o;
}

Outcome run_bragg_lattice(const Point& p, const Context&) {
  namespace b = metron::bragg;
  const double a = num(p, "a"), omega0 = num(p, "omega0");
  if (!(a > 0.0)) throw Error(Errc::PreconditionViolated, "lattice constant must be positive");
  const int dim = integer(p, "dim");
  const double g = 2.0 * std::numbers::pi / a;
  b::LatticeSpec L;
  L.dimensionality = dim;
  L.max_order = integer(p, "max-order");
  const std::string normal = str(p, "normal");
  int axis = normal == "x" ? 0 : (normal == "y" ? 1 : (normal == "z" ? 2 : -1));
  if (axis < 0) throw Error(Errc::PreconditionViolated, "normal must be x, y or z");
  for (int d = 0; d < 3; ++d) {
    if (dim == 2 && d == axis) continue;
    b::FourVector f;
    f[d] = g;
    L.fundamentals.push_back(f);
  }
  L.normal[axis] = 1.0;
  const double k1 = num(p, "k1"), k2 = num(p, "k2"), k3 = num(p, "k3");
  const b::FourVector ki(k1, k2, k3, std::sqrt(k1 * k1 + k2 * k2 + k3 * k3 + omega0 * omega0));
  const auto set = b::bragg_scatter_set(ki, L, omega0);
  Outcome o;
  o.scalars["incident_k4"] = ki[3];
  o.scalars["scattered"] = set.size();
  Table t{{"k1", "k2", "k3", "k4", "shell_residual"}, {}};
  for (const auto& k : set) t.add({k[0], k[1], k[2], k[3], b::dot(k, k) + omega0 * omega0});
  o.series = std::move(t);
  return o;
}

// ---------------------------------------------------------------- orbits

Outcome run_orbit_drift(const Point& p, const Context&) {
  namespace o_ = metron::orbits;
  const auto m = o_::OrbitDriftModel::from_constants(num(p, "d"), num(p, "c1"), num(p, "c2"), num(p, "c3"));
  Outcome o;
  try {
    const auto eq = o_::drift_equilibria(m);
    const char* tag[2] = {"plus", "minus"};
    for (std::size_t i = 0; i < eq.size(); ++i) {
      o.scalars[std::string("root_") + tag[i]] = eq[i].delta_r;
      o.scalars[std::string("stability_") + tag[i]] = o_::stability_name(eq[i].stability);
      o.scalars[std::string("rhs_at_root_") + tag[i]] = o_::drift_rhs(m, eq[i].delta_r);
    }
  } catch (const Error& e) {
    if (e.code() != Errc::ComplexRoots) throw;
    o.scalars["roots"] = "complex";
  }
  const auto path = o_::integrate_drift(m, num(p, "dr0"), num(p, "t-max"), num(p, "tol"));
  o.scalars["outcome"] = path.outcome == o_::DriftOutcome::Trapped
                             ? "trapped"
                             : (path.outcome == o_::DriftOutcome::Escaped ? "escaped" : "unresolved");
  if (path.outcome == o_::DriftOutcome::Trapped) o.scalars["trapped_at"] = path.trapped_at;
  if (path.outcome == o_::DriftOutcome::Escaped) o.scalars["direction"] = path.direction;
  Table t{{"t", "delta_r"}, {}};
  for (std::size_t i = 0; i < path.t.size(); ++i) t.add({path.t[i], path.delta_r[i]});
  o.series = std::move(t);
  return o;
}

Outcome run_orbit_threemode(const Point& p, const Context&) {
  namespace o_ = metron::orbits;
  using cplx = std::complex<double>;
  o_::ThreeModeState s;
  s.A1 = cplx(num(p, "a1"), num(p, "a1-im"));
  s.A2 = cplx(num(p, "a2"), num(p, "a2-im"));
  s.A12 = cplx(num(p, "a12"), num(p, "a12-im"));
  s.K = cplx(num(p, "k"), num(p, "k-im"));
  s.mu1 = num(p, "mu1");
  s.mu2 = num(p, "mu2");
  s.gamma_f = num(p, "gamma-f");
  s.beta_dr = num(p, "beta-dr");
  const std::string kind = str(p, "kind");
  if (kind != "emission" && kind != "prescribed") throw Error(Errc::PreconditionViolated, "kind must be emission or prescribed");
  const auto k = kind == "emission" ? o_::ThreeModeKind::Emission : o_::ThreeModeKind::PrescribedField;
  const auto tr = o_::integrate_three_mode(s, k, num(p, "t-max"), num(p, "tol"));
  Outcome o;
  const double I1 = std::norm(s.A1) + std::norm(s.A2), I2 = std::norm(s.A2) - std::norm(s.A12);
  double d1 = 0.0, d2 = 0.0;
  Table t{{"t", "abs_A1", "abs_A2", "abs_A12", "I1", "I2"}, {}};
  for (std::size_t i = 0; i < tr.t.size(); ++i) {
    const double a = std::norm(tr.A1[i]) + std::norm(tr.A2[i]), b = std::norm(tr.A2[i]) - std::norm(tr.A12[i]);
    d1 = std::max(d1, std::abs(a - I1));
    d2 = std::max(d2, std::abs(b - I2));
    t.add({tr.t[i], std::abs(tr.A1[i]), std::abs(tr.A2[i]), std::abs(tr.A12[i]), a, b});
  }
  const double scale = std::max(I1, 1e-300);
  o.scalars["manley_rowe_drift_1"] = d1 / scale;
  o.scalars["manley_rowe_drift_2"] = d2 / scale;
  if (k == o_::ThreeModeKind::Emission) o.scalars["growth_rate"] = o_::emission_growth_rate(s.K, s.A1, s.mu2);
  else o.scalars["oscillation_frequency"] = o_::prescribed_field_frequency(s.K, s.A12);
  o.scalars["abs_A1_final"] = std::abs(tr.A1.back());
  o.scalars["abs_A2_final"] = std::abs(tr.A2.back());
  o.scalars["abs_A12_final"] = std::abs(tr.A12.back());
  o.series = std::move(t);
  return o;
}

Outcome run_orbit_variance(const Point& p, const Context&) {
  namespace o_ = metron::orbits;
  const int n = integer(p, "n-t");
  if (n < 2) throw Error(Errc::PreconditionViolated, "n-t must be at least 2");
  const double T = num(p, "t-max");
  Table t{{"t", "N1", "N2", "sum"}, {}};
  o_::Variances v{};
  for (int i = 0; i < n; ++i) {
    const double ti = T * i / (n - 1);
    v = o_::evolve_variances(num(p, "n1"), num(p, "n2"), num(p, "kprime"), num(p, "mu1"), num(p, "mu2"), ti);
    t.add({ti, v.N1, v.N2, v.N1 + v.N2});
  }
  Outcome o;
  o.scalars["N1"] = v.N1;
  o.scalars["N2"] = v.N2;
  o.series = std::move(t);
  return o;
}

// ---------------------------------------------------------------- Green functions

metron::greens::KernelKind kernel_kind(const std::string& s) {
  if (s == "retarded") return metron::greens::KernelKind::Retarded;
  if (s == "advanced") return metron::greens::KernelKind::Advanced;
  if (s == "symmetric") return metron::greens::KernelKind::Symmetric;
  throw Error(Errc::PreconditionViolated, "kind must be retarded, advanced or symmetric");
}

Outcome run_greens_eval(const Point& p, const Context&) {
  namespace g = metron::greens;
  const double r = num(p, "r"), t = num(p, "t"), w = num(p, "omega-hat");
  const auto kind = kernel_kind(str(p, "kind"));
  const std::string method = str(p, "method");
  Outcome o;
  if (w == 0.0) {
    const auto terms = g::greens_nondispersive(r, t, kind);
    double weight = 0.0;
    json list = json::array();
    for (const auto& term : terms) {
      if (term.on_support) weight += term.weight;
      list.push_back({{"residual", term.residual}, {"weight", term.weight}, {"on_support", term.on_support}});
    }
    o.scalars["light_cone_weight"] = weight;
    o.scalars["terms"] = terms.size();
    o.report = list;
    return o;
  }
  g::DispersionParams dp{w, num(p, "k-max")};
  if (method == "quadrature" || method == "both") o.scalars["quadrature"] = g::greens_dispersive(r, t, dp, kind);
  if (method == "stationary" || method == "both") o.scalars["stationary_phase"] = g::greens_stationary_phase(r, t, dp, kind);
  if (method != "quadrature" && method != "stationary" && method != "both")
    throw Error(Errc::PreconditionViolated, "method must be quadrature, stationary or both");
  return o;
}

Outcome run_greens_conserve(const Point& p, const Context&) {
  namespace g = metron::greens;
  const double b = num(p, "b"), v0 = num(p, "v0"), t0 = num(p, "t0"), t1 = num(p, "t1");
  const int n = integer(p, "n");
  if (n < 2) throw Error(Errc::PreconditionViolated, "n must be at least 2");
  const auto a = g::worldline_from_path(
      t0, t1, static_cast<std::size_t>(n), [](double) { return g::Vec3{0.0, 0.0, 0.0}; },
      [](double) { return g::Vec3{0.0, 0.0, 0.0}; });
  const auto c = g::worldline_from_path(
      t0, t1, static_cast<std::size_t>(n),
      [=](double t) { return g::Vec3{v0 * (t - std::log(std::cosh(t))) - v0, b, 0.0}; },
      [=](double t) { return g::Vec3{v0 * (1.0 - std::tanh(t)), 0.0, 0.0}; });
  g::RegularizedKernel G;
  G.kind = kernel_kind(str(p, "kind"));
  G.sigma = num(p, "sigma");
  G.omega_hat = num(p, "omega-hat");
  const auto ex = g::momentum_exchange(a, c, G, num(p, "coupling"));
  Outcome o;
  o.scalars["dp_i"] = ex.dp_i;
  o.scalars["dp_j"] = ex.dp_j;
  o.scalars["imbalance"] = ex.imbalance();
  o.scalars["d_min"] = ex.d_min;
  return o;
}

// ---------------------------------------------------------------- algebra

Outcome run_algebra_check(const Point& p, const Context&) {
  namespace a = metron::algebra;
  Outcome o;
  o.report = json::array();
  Table t{{"check_id", "relation", "status", "max_deviation"}, {}};
  int failed = 0;
  for (const auto& name : metron::io::split(str(p, "suite"), ',')) {
    if (name.empty()) continue;
    for (const auto& r : a::run_suite(name)) {
      o.report.push_back({{"check_id", r.check_id},
                          {"relation", r.relation},
                          {"status", r.pass ? "pass" : "fail"},
                          {"max_deviation", r.max_deviation}});
      t.add({r.check_id, r.relation, r.pass ? "pass" : "fail", r.max_deviation});
      failed += !r.pass;
    }
  }
  if (t.rows.empty()) throw Error(Errc::PreconditionViolated, "no suite selected");
  o.scalars["checks"] = t.rows.size();
  o.scalars["failed"] = failed;
  o.checks_failed = failed > 0;
  o.series = std::move(t);
  return o;
}

Outcome run_calibrate(const Point& p, const Context&) {
  namespace a = metron::algebra;
  const auto c = a::calibrate_constants({num(p, "a-sq"), num(p, "beta"), num(p, "M"), num(p, "k5"), num(p, "G-prime")});
  Outcome o;
  o.scalars["G"] = c.G;
  o.scalars["e_prime"] = c.e_prime;
  o.scalars["q"] = c.q;
  o.scalars["m"] = c.m;
  o.scalars["hbar"] = c.hbar;
  o.scalars["epsilon"] = c.epsilon;
  o.scalars["epsilon_loop"] = c.epsilon_loop;
  const double eps = num(p, "epsilon") > 0.0 ? num(p, "epsilon") : c.epsilon;
  if (eps > 0.0) o.scalars["scale_ratio"] = a::scale_ratio(eps);
  return o;
}

// ---------------------------------------------------------------- command table

std::vector<Command> commands() {
  auto with = [](std::vector<ParamDef> base, std::vector<ParamDef> extra) {
    base.insert(base.end(), extra.begin(), extra.end());
    return base;
  };
  const std::vector<ParamDef> trap{{"E0", "0", "initial energy offset"},
                                   {"gamma", "1", "coupling gamma"},
                                   {"phi", "0", "forcing phase"},
                                   {"omega0", "1", "rest frequency"},
                                   {"dS0", "0", "initial phase difference"},
                                   {"s-max", "0", "integration length for the long-time check (0 = skip)"}};
  return {
      {"metron-solve", "self-consistent single trapped mode", solve_params(), run_solve},
      {"metron-rescale", "scale-family member of a solved mode",
       with(solve_params(), {{"lambda", "1", "scale factor"}}), run_rescale},
      {"bragg-classify", "resonance-trapping verdict for one state", trap, run_bragg_classify},
      {"bragg-sweep", "(omega0 E0 / gamma, phi) grid against long-time integration",
       {{"b-min", "0", "lowest omega0 E0 / gamma"},
        {"b-max", "3", "highest omega0 E0 / gamma"},
        {"n-b", "10", "grid points in omega0 E0 / gamma"},
        {"n-phi", "20", "grid points in phi over [0, 2 pi)"},
        {"gamma", "1", "coupling gamma"},
        {"omega0", "1", "rest frequency"},
        {"s-max", "0", "integration length (0 = 4000 / gamma)"}},
       run_bragg_sweep},
      {"bragg-lattice", "on-shell scattered set of a cubic lattice",
       {{"a", "1", "lattice constant"},
        {"dim", "3", "lattice dimensionality (2 or 3)"},
        {"max-order", "1", "largest harmonic index"},
        {"normal", "z", "free axis of a 2D lattice", false},
        {"k1", "0", "incident k1"},
        {"k2", "0", "incident k2"},
        {"k3", "1", "incident k3"},
        {"omega0", "1", "rest frequency"}},
       run_bragg_lattice},
      {"orbit-drift", "orbit drift equilibria and trajectory",
       {{"d", "1", "drift rate"},
        {"c1", "0.5", "C1"},
        {"c2", "1", "C2"},
        {"c3", "0.25", "C3"},
        {"dr0", "0", "initial offset"},
        {"t-max", "200", "integration time"},
        {"tol", "1e-10", "relative tolerance"}},
       run_orbit_drift},
      {"orbit-threemode", "three-mode transition dynamics",
       {{"kind", "emission", "emission or prescribed", false},
        {"a1", "1", "Re A1"},
        {"a1-im", "0", "Im A1"},
        {"a2", "1e-6", "Re A2"},
        {"a2-im", "0", "Im A2"},
        {"a12", "1e-6", "Re A12"},
        {"a12-im", "0", "Im A12"},
        {"k", "1", "Re K"},
        {"k-im", "0", "Im K"},
        {"mu1", "0", "damping of mode 1"},
        {"mu2", "0", "damping of mode 2"},
        {"gamma-f", "0", "external forcing"},
        {"beta-dr", "0", "forcing detuning"},
        {"t-max", "20", "integration time"},
        {"tol", "1e-12", "relative tolerance"}},
       run_orbit_threemode},
      {"orbit-variance", "closed-form variance transport",
       {{"n1", "1", "initial N1"},
        {"n2", "0", "initial N2"},
        {"kprime", "0.5", "exchange rate K'"},
        {"mu1", "0.1", "damping of mode 1"},
        {"mu2", "0.2", "damping of mode 2"},
        {"t-max", "10", "final time"},
        {"n-t", "101", "output samples"}},
       run_orbit_variance},
      {"greens-eval", "Klein-Gordon Green function at (r, t)",
       {{"r", "2", "distance"},
        {"t", "3", "time"},
        {"omega-hat", "1", "mass (0 = light-cone kernel)"},
        {"kind", "retarded", "retarded, advanced or symmetric", false},
        {"method", "quadrature", "quadrature, stationary or both", false},
        {"k-max", "0", "quadrature cutoff (0 = automatic)"}},
       run_greens_eval},
      {"greens-conserve", "two-line momentum exchange",
       {{"b", "1.2", "impact parameter"},
        {"v0", "0.3", "initial speed of the braking line"},
        {"t0", "-12", "start time"},
        {"t1", "12", "end time"},
        {"n", "1601", "samples per line"},
        {"sigma", "0.3", "kernel regularization width"},
        {"omega-hat", "0", "mass"},
        {"kind", "symmetric", "retarded, advanced or symmetric", false},
        {"coupling", "1", "interaction constant"}},
       run_greens_conserve},
      {"algebra-check", "finite algebra check suites",
       {{"suite", "gamma,polarization,star,electroweak,calibration", "comma-separated suite names", false, false}},
       run_algebra_check},
      {"calibrate", "metron to classical constants",
       {{"a-sq", "2", "|a|^2"},
        {"beta", "1", "core integral beta"},
        {"M", "0", "core mass integral"},
        {"k5", "1", "charge wavenumber"},
        {"G-prime", "0", "higher-order coupling G'"},
        {"epsilon", "0", "force ratio for the scale ratio (0 = derived)"}},
       run_calibrate},
  };
}

// ---------------------------------------------------------------- driver

struct Failure {
  int exit_code;
  std::string code;
  std::string message;
};

Failure classify(const std::exception& e) {
  if (const auto* me = dynamic_cast<const Error*>(&e))
    return {metron::is_validation(me->code()) ? 2 : 3, metron::errc_name(me->code()), e.what()};
  return {3, "Exception", e.what()};
}

void diagnose(const Failure& f) {
  json d = {{"exit", f.exit_code}, {"code", f.code}, {"message", f.message}};
  std::cerr << "metron_lab: error " << d.dump() << '\n';
}

void write_text(const fs::path& p, const std::string& text, json& outputs) {
  std::ofstream o(p, std::ios::binary);
  if (!o) throw Error(Errc::PreconditionViolated, "cannot write '" + p.string() + "'");
  o << text;
  outputs.push_back(p.filename().string());
}

void write_table(const fs::path& dir, const std::string& stem, const Table& t, json& outputs) {
  std::ostringstream csv, dat;
  metron::io::write_csv(csv, t);
  metron::io::write_dat(dat, t);
  write_text(dir / (stem + ".csv"), csv.str(), outputs);
  write_text(dir / (stem + ".dat"), dat.str(), outputs);
  write_text(dir / (stem + ".gp"), metron::io::gnuplot_stub(stem + ".dat", t), outputs);
}

json libraries() {
  return {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000) + "." +
                        std::to_string(BOOST_VERSION % 100)},
          {"cli11", CLI11_VERSION},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR) +
                                "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

unsigned default_jobs() {
  if (const char* env = std::getenv("METRON_LAB_JOBS")) {
    double j;
    if (metron::io::parse_double(env, j) && j >= 1 && j == std::floor(j)) return static_cast<unsigned>(j);
    std::cerr << "metron_lab: ignoring METRON_LAB_JOBS='" << env << "'\n";
  }
  return 1;
}

int execute(const Command& cmd, const std::map<std::string, std::string>& given, const std::string& out_dir,
            const std::string& formats, unsigned jobs, long seed) {
  std::map<std::string, std::string> text;
  for (const auto& d : cmd.params) text[d.name] = d.def;
  for (const auto& [k, v] : given) text[k] = v;

  // Expand values; list-valued sweepable parameters form the grid.
  std::vector<std::pair<const ParamDef*, std::vector<json>>> axes;
  Point base;
  json params = json::object();
  for (const auto& d : cmd.params) {
    if (!d.sweepable) {
      base[d.name] = text[d.name];
      params[d.name] = text[d.name];
      continue;
    }
    auto vals = metron::io::expand_values(text[d.name], d.numeric);
    const bool listed = vals.size() != 1 || text[d.name].find_first_of(",:") != std::string::npos;
    if (vals.empty()) throw Error(Errc::PreconditionViolated, "parameter '" + d.name + "' expands to an empty grid");
    if (listed) {
      params[d.name] = vals;
      axes.emplace_back(&d, std::move(vals));
    } else {
      params[d.name] = vals.front();
      base[d.name] = vals.front();
    }
  }

  bool want_csv = false, want_json = false;
  for (const auto& f : metron::io::split(formats, ',')) {
    if (f == "csv") want_csv = true;
    else if (f == "json") want_json = true;
    else throw Error(Errc::PreconditionViolated, "unknown format '" + f + "'");
  }

  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(Errc::PreconditionViolated, "cannot create output directory '" + out_dir + "'");

  json manifest = json::object();
  manifest["tool"] = "metron_lab";
  manifest["version"] = kVersion;
  manifest["libraries"] = libraries();
  manifest["command"] = cmd.name;
  manifest["parameters"] = params;
  manifest["seed"] = seed;
  manifest["jobs"] = jobs;
  manifest["formats"] = metron::io::split(formats, ',');
  json outputs = json::array();
  const Context ctx{jobs};
  int exit_code = 0;

  if (axes.empty()) {
    manifest["mode"] = "single";
    try {
      Outcome o = cmd.run(base, ctx);
      manifest["results"] = o.scalars;
      if (!o.report.is_null()) manifest["report"] = o.report;
      if (o.checks_failed) {
        exit_code = 3;
        diagnose({3, "ChecksFailed", std::to_string(o.scalars.value("failed", 0)) + " check(s) exceeded tolerance"});
      }
      if (want_csv && o.series) write_table(dir, cmd.name, *o.series, outputs);
      if (want_json) {
        json r = {{"command", cmd.name}, {"results", o.scalars}};
        if (!o.report.is_null()) r["report"] = o.report;
        write_text(dir / "result.json", r.dump(2) + "\n", outputs);
      }
    } catch (const std::exception& e) {
      const Failure f = classify(e);
      manifest["error"] = {{"code", f.code}, {"message", f.message}};
      manifest["outputs"] = outputs;
      write_text(dir / "manifest.json", manifest.dump(2) + "\n", outputs);
      diagnose(f);
      return f.exit_code;
    }
  } else {
    manifest["mode"] = "sweep";
    std::size_t n = 1;
    for (const auto& [d, v] : axes) n *= v.size();
    std::vector<Point> points(n, base);
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t rem = k;
      for (std::size_t a = axes.size(); a-- > 0;) {
        const auto& vals = axes[a].second;
        points[k][axes[a].first->name] = vals[rem % vals.size()];
        rem /= vals.size();
      }
    }
    std::vector<json> results(n);
    std::vector<std::string> errors(n);
    parallel_for(n, jobs, [&](std::size_t k) {
      try {
        results[k] = cmd.run(points[k], Context{1}).scalars;
      } catch (const std::exception& e) {
        const Failure f = classify(e);
        errors[k] = f.code + ": " + f.message;
      }
    });
    std::vector<std::string> keys;
    for (const auto& r : results)
      if (r.is_object())
        for (const auto& [k, v] : r.items())
          if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    Table t;
    for (const auto& [d, v] : axes) t.columns.push_back(d->name);
    t.columns.push_back("status");
    t.columns.push_back("error");
    for (const auto& k : keys) t.columns.push_back(k);
    std::size_t failures = 0;
    json rows = json::array();
    for (std::size_t k = 0; k < n; ++k) {
      std::vector<json> row;
      for (const auto& [d, v] : axes) row.push_back(points[k][d->name]);
      const bool ok = errors[k].empty();
      failures += !ok;
      row.emplace_back(ok ? "ok" : "error");
      row.emplace_back(errors[k]);
      for (const auto& key : keys) {
        json v = ok && results[k].contains(key) ? results[k][key] : json();
        if (v.is_array() || v.is_object()) v = v.dump();
        row.push_back(std::move(v));
      }
      json jr = json::object();
      for (std::size_t c = 0; c < t.columns.size(); ++c) jr[t.columns[c]] = row[c];
      rows.push_back(std::move(jr));
      t.add(std::move(row));
    }
    json grid = json::object();
    for (const auto& [d, v] : axes) grid[d->name] = v;
    manifest["grid"] = grid;
    manifest["points"] = n;
    manifest["failures"] = failures;
    if (want_csv) write_table(dir, "sweep", t, outputs);
    if (want_json) write_text(dir / "sweep.json", json({{"command", cmd.name}, {"rows", rows}}).dump(2) + "\n", outputs);
  }
  outputs.push_back("manifest.json");
  manifest["outputs"] = outputs;
  json dummy = json::array();
  write_text(dir / "manifest.json", manifest.dump(2) + "\n", dummy);
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  const auto table = commands();
  CLI::App app{"metron numerical laboratory"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  std::string config_path, out_dir = "metron_out", formats = "csv,json";
  unsigned jobs = default_jobs();
  long seed = 0;
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::vector<std::pair<std::string, CLI::Option*>>> options;

  for (const auto& cmd : table) {
    CLI::App* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", config_path, "key = value parameter file");
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--format", formats, "comma-separated subset of csv,json");
    sub->add_option("--jobs", jobs, "concurrent sweep points")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "recorded in the manifest; all commands are deterministic");
    for (const auto& d : cmd.params) {
      auto* opt = sub->add_option("--" + d.name, values[cmd.name][d.name], d.help + " [" + d.def + "]");
      options[cmd.name].emplace_back(d.name, opt);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    diagnose({2, "UsageError", e.what()});
    return 2;
  }

  for (const auto& cmd : table) {
    if (!app.got_subcommand(cmd.name)) continue;
    try {
      std::map<std::string, std::string> given;
      if (!config_path.empty()) {
        CLI::App* sub = app.get_subcommand(cmd.name);
        auto on_cli = [&](const std::string& flag) { return sub->count("--" + flag) > 0; };
        for (const auto& [k, v] : metron::io::read_config(config_path)) {
          if (k == "out" || k == "format") {
            if (!on_cli(k)) (k == "out" ? out_dir : formats) = v;
          } else if (k == "seed" || k == "jobs") {
            double x;
            if (!metron::io::parse_double(v, x) || x != std::floor(x) || (k == "jobs" && x < 1))
              throw Error(Errc::PreconditionViolated, "config key '" + k + "' needs an integer");
            if (on_cli(k)) continue;
            if (k == "seed") seed = static_cast<long>(x);
            else jobs = static_cast<unsigned>(x);
          } else {
            const bool known = std::any_of(cmd.params.begin(), cmd.params.end(), [&](const ParamDef& d) { return d.name == k; });
            if (!known) throw Error(Errc::PreconditionViolated, "unknown key '" + k + "' for " + cmd.name);
            given[k] = v;
          }
        }
      }
      for (const auto& [name, opt] : options[cmd.name])
        if (opt->count() > 0) given[name] = values[cmd.name][name];
      return execute(cmd, given, out_dir, formats, jobs, seed);
    } catch (const std::exception& e) {
      const Failure f = classify(e);
      diagnose(f);
      return f.exit_code;
    }
  }
  return 2;
}
