#pragma once

// Midpoint (Crank-Nicolson) scheme for the fractional spin system
//
//   d_t u = -u x (-Delta)^s u,
//   u^k = u^{k-1} - tau r x (-Delta)^s r,   r = (u^{k-1} + u^k) / 2,
//
// solved by the fixed point r^l = u^{k-1} + (tau/2) w x r^l with w = (-Delta)^s r^{l-1}, started at
// r^0 = u^{k-1}. Each sweep is a nodewise 3x3 solve of (I - (tau/2)[w]_x) r = u^{k-1}. Because
// u^k = 2r - u^{k-1} is the Cayley transform of a skew matrix applied to u^{k-1}, nodal lengths
// are preserved for any w; the energy is preserved up to the fixed-point residual.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "fraqmap/fem.hpp"
#include "fraqmap/geometry.hpp"
#include "fraqmap/io.hpp"
#include "fraqmap/rng.hpp"
#include "fraqmap/spectral.hpp"

namespace fraqmap {

/// Periodic Fourier backend on the torus.
struct SpectralBackend {
  PeriodicGrid grid;
  double s;
};

/// Finite element backend: interior nodes evolve, all others keep their values.
struct FemBackend {
  const FracStiffness* stiffness;
  LumpedMass beta;
  std::vector<char> evolve;

  FemBackend(const FracStiffness& a, const SimplicialMesh& mesh)
      : stiffness(&a), beta(lumped_weights(mesh, LumpedMass::Region::omega)), evolve(mesh.num_vertices(), 0) {
    for (int z = 0; z < mesh.num_vertices(); ++z) evolve[z] = mesh.node_class(z) == NodeClass::interior;
  }
};

using SpinBackend = std::variant<SpectralBackend, FemBackend>;

struct SpinConfig {
  double tau = 0.0;       ///< nonzero; a negative step runs the scheme backwards in time
  double tolerance = 0.0; ///< fixed-point tolerance on ||r^l - r^{l-1}||_h; 0 selects tau^2
  int max_iters = 100;
  SpinBackend backend;

  double effective_tolerance() const { return tolerance > 0.0 ? tolerance : tau * tau; }
  void validate() const {
    require(tau != 0.0 && std::isfinite(tau), "spin step size must be finite and nonzero, got ", tau);
    require(tolerance >= 0.0, "fixed-point tolerance must be positive");
    require(max_iters >= 1, "max_iters must be >= 1");
  }
};

namespace detail {

inline NodalField spin_operator(const SpinBackend& b, const NodalField& r) {
  if (const auto* sp = std::get_if<SpectralBackend>(&b)) return frac_laplacian_spectral(r, sp->grid, sp->s);
  const auto& fe = std::get<FemBackend>(b);
  return discrete_frac_laplacian(r, *fe.stiffness, fe.beta);
}

inline double spin_norm(const SpinBackend& b, const NodalField& v) {
  if (const auto* sp = std::get_if<SpectralBackend>(&b)) return discrete_lp_norm(v, 2.0, lumped_weights(sp->grid));
  return discrete_lp_norm(v, 2.0, std::get<FemBackend>(b).beta);
}

inline bool spin_evolves(const SpinBackend& b, int z) {
  if (std::holds_alternative<SpectralBackend>(b)) return true;
  return std::get<FemBackend>(b).evolve[z] != 0;
}

/// Solution of (I - a [w]_x) r = b.
inline Eigen::Vector3d skew_solve(const Eigen::Vector3d& w, const Eigen::Vector3d& b, double a) {
  return (b + a * w.cross(b) + a * a * w.dot(b) * w) / (1.0 + a * a * w.squaredNorm());
}

} // namespace detail

inline double spin_energy(const SpinBackend& b, const NodalField& u) {
  if (const auto* sp = std::get_if<SpectralBackend>(&b)) return frac_energy(u, sp->grid, sp->s);
  return fem_energy(u, *std::get<FemBackend>(b).stiffness);
}

struct SpinStepReport {
  int iterations = 0;
  double final_difference = 0.0;
  double max_ratio = 0.0; ///< largest ||delta^{l+1}|| / ||delta^l|| in this step
  double unit_defect = 0.0;
  double energy_before = 0.0;
  double energy_after = 0.0;
};

struct SpinStepResult {
  NodalField u_next;
  SpinStepReport report;
};

inline SpinStepResult spin_step(const NodalField& u_prev, const SpinConfig& cfg) {
  cfg.validate();
  require(u_prev.components() == 3, "spin dynamics needs N = 3, got ", u_prev.components());
  const double a = 0.5 * cfg.tau;
  const double tol = cfg.effective_tolerance();
  SpinStepReport rep;
  NodalField r = u_prev;
  double prev_diff = std::numeric_limits<double>::infinity();
  int not_decreasing = 0;
  bool done = false;
  for (int l = 1; l <= cfg.max_iters; ++l) {
    const NodalField w = detail::spin_operator(cfg.backend, r);
    Eigen::MatrixXd next = u_prev.values();
    for (int z = 0; z < u_prev.size(); ++z) {
      if (!detail::spin_evolves(cfg.backend, z)) continue;
      next.row(z) = detail::skew_solve(w.at(z).transpose(), u_prev.at(z).transpose(), a).transpose();
    }
    NodalField r_next(std::move(next));
    const double diff = detail::spin_norm(cfg.backend, r_next - r);
    if (l > 1 && prev_diff > 0.0) rep.max_ratio = std::max(rep.max_ratio, diff / prev_diff);
    not_decreasing = (l > 1 && diff >= prev_diff) ? not_decreasing + 1 : 0;
    r = std::move(r_next);
    rep.iterations = l;
    rep.final_difference = diff;
    if (diff < tol) {
      done = true;
      break;
    }
    require<SolverError>(not_decreasing < 5, "fixed-point iteration is not contracting (difference ", diff,
                         " after ", l, " iterations); reduce the step size tau = ", cfg.tau);
    prev_diff = diff;
  }
  require<SolverError>(done, "fixed-point iteration did not reach tolerance ", tol, " within ", cfg.max_iters,
                       " iterations (last difference ", rep.final_difference, ")");
  NodalField u_next = 2.0 * r - u_prev;
  for (int z = 0; z < u_next.size(); ++z)
    if (detail::spin_evolves(cfg.backend, z))
      rep.unit_defect = std::max(rep.unit_defect, std::abs(u_next.at(z).norm() - 1.0));
  rep.energy_before = spin_energy(cfg.backend, u_prev);
  rep.energy_after = spin_energy(cfg.backend, u_next);
  return {std::move(u_next), rep};
}

/// Number of steps to reach T: ceil(T / tau), except that quotients within 1e-9 of an integer
/// are rounded so that T = 4 pi with tau = h / 10 yields exactly 640 steps.
inline int spin_step_count(double t_final, double tau) {
  require(t_final > 0.0 && tau > 0.0, "final time and step size must be positive");
  const double q = t_final / tau;
  const double nearest = std::round(q);
  return std::abs(q - nearest) <= 1e-9 * std::max(1.0, q) ? static_cast<int>(nearest)
                                                          : static_cast<int>(std::ceil(q));
}

struct SpinTrace {
  struct Row {
    int k;
    double t;
    double energy;
    double unit_defect;
    int fp_iters;
    double fp_difference;
    double max_ratio;
  };
  std::vector<Row> rows; ///< row 0 is the initial state

  double energy_drift() const {
    double d = 0.0;
    const double e0 = rows.front().energy;
    for (const auto& r : rows) d = std::max(d, std::abs(r.energy - e0));
    return e0 != 0.0 ? d / std::abs(e0) : d;
  }
  double max_unit_defect() const {
    double d = 0.0;
    for (const auto& r : rows) d = std::max(d, r.unit_defect);
    return d;
  }
  int max_fp_iters() const {
    int m = 0;
    for (const auto& r : rows) m = std::max(m, r.fp_iters);
    return m;
  }
  double median_fp_iters() const {
    std::vector<int> it;
    for (std::size_t i = 1; i < rows.size(); ++i) it.push_back(rows[i].fp_iters);
    if (it.empty()) return 0.0;
    std::sort(it.begin(), it.end());
    const std::size_t n = it.size();
    return n % 2 ? it[n / 2] : 0.5 * (it[n / 2 - 1] + it[n / 2]);
  }
  double max_contraction() const {
    double m = 0.0;
    for (const auto& r : rows) m = std::max(m, r.max_ratio);
    return m;
  }

  void write_csv(std::ostream& out) const {
    out << "k,t,energy,unit_defect,fp_iters,fp_difference\n";
    for (const auto& r : rows)
      out << r.k << ',' << io::fmt(r.t) << ',' << io::fmt(r.energy) << ',' << io::fmt(r.unit_defect) << ','
          << r.fp_iters << ',' << io::fmt(r.fp_difference) << '\n';
  }
};

struct SpinRunResult {
  NodalField u;
  SpinTrace trace;
  int steps = 0;
};

template <class Callback>
SpinRunResult run_spin(const NodalField& u0, double t_final, const SpinConfig& cfg, Callback&& on_step) {
  require(cfg.tau > 0.0, "time integration needs a positive step size, got ", cfg.tau);
  const int steps = spin_step_count(t_final, cfg.tau);
  SpinRunResult res{u0, {}, steps};
  double defect0 = 0.0;
  for (int z = 0; z < u0.size(); ++z)
    if (detail::spin_evolves(cfg.backend, z)) defect0 = std::max(defect0, std::abs(u0.at(z).norm() - 1.0));
  res.trace.rows.push_back({0, 0.0, spin_energy(cfg.backend, u0), defect0, 0, 0.0, 0.0});
  for (int k = 1; k <= steps; ++k) {
    SpinStepResult st = spin_step(res.u, cfg);
    res.u = std::move(st.u_next);
    res.trace.rows.push_back({k, k * cfg.tau, st.report.energy_after, st.report.unit_defect, st.report.iterations,
                              st.report.final_difference, st.report.max_ratio});
    on_step(k, res.u);
  }
  return res;
}

inline SpinRunResult run_spin(const NodalField& u0, double t_final, const SpinConfig& cfg) {
  return run_spin(u0, t_final, cfg, [](int, const NodalField&) {});
}

// ---------------------------------------------------------------- initial data

/// (v, c cos x, c sin x) with c = sqrt(1 - v^2); u(t, x) = u0(x - v t) solves the s = 1/2 system.
inline NodalField make_traveling_wave(const PeriodicGrid& grid, double v) {
  require(std::abs(v) < 1.0, "traveling-wave speed must satisfy |v| < 1, got ", v);
  const double c = std::sqrt(1.0 - v * v);
  return nodal_interpolation([&](double x) { return Eigen::Vector3d(v, c * std::cos(x), c * std::sin(x)); }, grid);
}

/// Pi_{S^2}(xi_1, cos x + xi_2, sin x + xi_3) with a seeded trigonometric polynomial xi of degree
/// <= 4 rescaled so that max_x |xi(x)| = amplitude (maximum over 4096 equispaced samples, so the
/// perturbation does not depend on the grid).
inline NodalField make_perturbed_map(const PeriodicGrid& grid, std::uint64_t seed, double amplitude = 0.05) {
  require(amplitude >= 0.0 && amplitude <= 0.5, "perturbation amplitude must lie in [0, 1/2], got ", amplitude);
  constexpr int degree = 4;
  SplitMix64 rng(seed);
  Eigen::Matrix<double, 3, 2 * degree + 1> coef; // constant, then cos/sin pairs
  for (int c = 0; c < 3; ++c)
    for (int j = 0; j < 2 * degree + 1; ++j) coef(c, j) = rng.normal();
  auto xi = [&](double x) {
    Eigen::Vector3d v = coef.col(0);
    for (int k = 1; k <= degree; ++k) v += coef.col(2 * k - 1) * std::cos(k * x) + coef.col(2 * k) * std::sin(k * x);
    return v;
  };
  double peak = 0.0;
  for (int j = 0; j < 4096; ++j) peak = std::max(peak, xi(2.0 * pi * j / 4096).norm());
  const double scale = peak > 0.0 ? amplitude / peak : 0.0;
  return project_sphere(nodal_interpolation(
      [&](double x) {
        const Eigen::Vector3d p = scale * xi(x);
        return Eigen::Vector3d(p[0], std::cos(x) + p[1], std::sin(x) + p[2]);
      },
      grid));
}

} // namespace fraqmap
