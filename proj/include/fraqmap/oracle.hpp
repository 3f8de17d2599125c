#pragma once

// Independent reference values for the fractional stiffness on free nodes.
//
// For hats vanishing outside the meshed domain the full-space form reads
//   a(phi_z, phi_w) = C/2 int_{R^d} |r|^{-d-2s} Psi_zw(r) dr,
//   Psi_zw(r) = int (phi_z(x) - phi_z(x + r)) (phi_w(x) - phi_w(x + r)) dx,
// which never touches the exterior kernel or the element-pair decomposition used by the assembly.
// Psi is evaluated exactly (piecewise polynomial integrands on clipped cell overlaps) and the
// radial and angular integrals are done adaptively. Near r = 0, Psi(r) = r^T K r + O(|r|^3) with
// the P1 Laplacian K, which gives the contribution of a small disc in closed form.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "fraqmap/fem.hpp"
#include "fraqmap/quadrature.hpp"

namespace fraqmap::oracle {

namespace detail {

using VecFn = std::function<Eigen::VectorXd(double)>;

inline Eigen::VectorXd gauss_on(const VecFn& f, double a, double b, const GaussRule& g) {
  Eigen::VectorXd sum;
  for (int i = 0; i < g.size(); ++i) {
    Eigen::VectorXd v = f(a + (b - a) * g.x[i]);
    if (i == 0)
      sum = g.w[i] * v;
    else
      sum += g.w[i] * v;
  }
  return sum * (b - a);
}

/// Adaptive bisection with a 12-point Gauss rule; accepts when the two-halves value agrees with
/// the whole-interval value to `tol` (absolute, max norm).
inline Eigen::VectorXd adaptive(const VecFn& f, double a, double b, double tol, int depth = 40) {
  static const GaussRule g = gauss_legendre(12);
  const Eigen::VectorXd whole = gauss_on(f, a, b, g);
  const double m = 0.5 * (a + b);
  const Eigen::VectorXd halves = gauss_on(f, a, m, g) + gauss_on(f, m, b, g);
  if (depth == 0 || (whole - halves).cwiseAbs().maxCoeff() <= tol) return halves;
  return adaptive(f, a, m, 0.5 * tol, depth - 1) + adaptive(f, m, b, 0.5 * tol, depth - 1);
}

inline std::vector<int> free_nodes(const SimplicialMesh& mesh) {
  std::vector<int> idx;
  for (int z = 0; z < mesh.num_vertices(); ++z)
    if (mesh.is_free(z)) idx.push_back(z);
  return idx;
}

inline Eigen::MatrixXd unflatten(const Eigen::VectorXd& v, int m) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), m, m);
}

// ---------------------------------------------------------------- 1D

/// Psi(r) for all free-node pairs (flattened m x m), exact.
inline Eigen::VectorXd psi_1d(const SimplicialMesh& mesh, const std::vector<int>& idx, double r) {
  const int m = static_cast<int>(idx.size());
  std::vector<double> x(mesh.num_vertices());
  for (int z = 0; z < mesh.num_vertices(); ++z) x[z] = mesh.vertex(z).x();
  std::vector<double> br;
  for (double v : x) {
    br.push_back(v);
    br.push_back(v - r);
  }
  std::sort(br.begin(), br.end());
  auto hat = [&](int z, double t) {
    double val = 0.0;
    for (int c = 0; c < mesh.num_cells(); ++c) {
      auto v = mesh.cell(c);
      const double a = x[v[0]], b = x[v[1]];
      if (t < a || t > b) continue;
      if (v[0] == z) val = std::max(val, (b - t) / (b - a));
      if (v[1] == z) val = std::max(val, (t - a) / (b - a));
    }
    return val;
  };
  Eigen::MatrixXd psi = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd d(m);
  for (std::size_t k = 0; k + 1 < br.size(); ++k) {
    const double a = br[k], b = br[k + 1];
    if (b - a <= 0.0) continue;
    // Simpson is exact for the quadratic integrand on each piece
    const std::array<double, 3> pts{a, 0.5 * (a + b), b};
    const std::array<double, 3> wts{1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0};
    for (int p = 0; p < 3; ++p) {
      for (int i = 0; i < m; ++i) d[i] = hat(idx[i], pts[p]) - hat(idx[i], pts[p] + r);
      psi += (wts[p] * (b - a)) * (d * d.transpose());
    }
  }
  return Eigen::Map<Eigen::VectorXd>(psi.data(), m * m);
}

// ---------------------------------------------------------------- 2D

using Polygon = std::vector<Point>;

/// Sutherland-Hodgman clip of `poly` against the counter-clockwise triangle `tri`.
inline Polygon clip(Polygon poly, const std::array<Point, 3>& tri) {
  for (int e = 0; e < 3 && !poly.empty(); ++e) {
    const Point a = tri[e], b = tri[(e + 1) % 3];
    auto side = [&](const Point& p) { return (b - a).x() * (p - a).y() - (b - a).y() * (p - a).x(); };
    Polygon out;
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Point& p = poly[i];
      const Point& q = poly[(i + 1) % poly.size()];
      const double sp = side(p), sq = side(q);
      if (sp >= 0.0) out.push_back(p);
      if ((sp >= 0.0) != (sq >= 0.0)) out.push_back(p + (q - p) * (sp / (sp - sq)));
    }
    poly = std::move(out);
  }
  return poly;
}

struct Cell2 {
  std::array<Point, 3> v;
  std::array<int, 3> node;
  Eigen::Matrix3d bary; // rows: coefficients (c0, cx, cy) of the barycentric coordinate
  Point lo, hi;
};

inline std::vector<Cell2> cells_2d(const SimplicialMesh& mesh) {
  std::vector<Cell2> out;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    auto v = mesh.cell(c);
    Cell2 t;
    Eigen::Matrix3d a;
    for (int k = 0; k < 3; ++k) {
      t.v[k] = mesh.vertex(v[k]);
      t.node[k] = v[k];
      a.row(k) << 1.0, t.v[k].x(), t.v[k].y();
    }
    // lambda_k(x) = e_k^T a^{-T} (1, x, y)
    t.bary = a.inverse().transpose();
    t.lo = t.v[0].cwiseMin(t.v[1]).cwiseMin(t.v[2]);
    t.hi = t.v[0].cwiseMax(t.v[1]).cwiseMax(t.v[2]);
    out.push_back(t);
  }
  return out;
}

/// G(r)[z, w] = int phi_z(x) phi_w(x + r) dx for all node pairs (full matrix, mesh numbering).
inline void correlation(const std::vector<Cell2>& cells, const Point& r, Eigen::MatrixXd& g) {
  g.setZero();
  for (const auto& t : cells)
    for (const auto& tp : cells) {
      // x in t and x + r in tp
      if (t.lo.x() > tp.hi.x() - r.x() || t.hi.x() < tp.lo.x() - r.x() || t.lo.y() > tp.hi.y() - r.y() ||
          t.hi.y() < tp.lo.y() - r.y())
        continue;
      const std::array<Point, 3> shifted{tp.v[0] - r, tp.v[1] - r, tp.v[2] - r};
      const Polygon poly = clip(Polygon(t.v.begin(), t.v.end()), shifted);
      if (poly.size() < 3) continue;
      Eigen::Matrix3d local = Eigen::Matrix3d::Zero();
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        const Point& p0 = poly[0];
        const Point& p1 = poly[k];
        const Point& p2 = poly[k + 1];
        const double area = 0.5 * std::abs((p1 - p0).x() * (p2 - p0).y() - (p1 - p0).y() * (p2 - p0).x());
        if (area == 0.0) continue;
        // edge midpoints: exact for quadratics
        for (const Point& q : {Point(0.5 * (p0 + p1)), Point(0.5 * (p1 + p2)), Point(0.5 * (p2 + p0))}) {
          const Eigen::Vector3d lx = t.bary * Eigen::Vector3d(1.0, q.x(), q.y());
          const Point y = q + r;
          const Eigen::Vector3d ly = tp.bary * Eigen::Vector3d(1.0, y.x(), y.y());
          local += (area / 3.0) * (lx * ly.transpose());
        }
      }
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) g(t.node[i], tp.node[j]) += local(i, j);
    }
}

/// Mesh edges as vertex pairs.
inline std::vector<std::array<Point, 2>> mesh_edges(const SimplicialMesh& mesh) {
  std::vector<std::array<int, 2>> keys;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    auto v = mesh.cell(c);
    for (int k = 0; k < 3; ++k) keys.push_back({std::min(v[k], v[(k + 1) % 3]), std::max(v[k], v[(k + 1) % 3])});
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::vector<std::array<Point, 2>> out;
  for (const auto& k : keys) out.push_back({mesh.vertex(k[0]), mesh.vertex(k[1])});
  return out;
}

/// Radii rho in (0, width) at which some vertex, shifted by +-rho w, crosses a mesh edge. Between
/// consecutive events the overlap polygons keep their combinatorics and Psi(rho w) is a quartic.
inline std::vector<double> radial_events(const SimplicialMesh& mesh, const std::vector<std::array<Point, 2>>& edges,
                                         const Point& w, double width) {
  std::vector<double> ev{0.0, width};
  for (const auto& e : edges) {
    const Point d = e[1] - e[0];
    const double cross_w = d.x() * w.y() - d.y() * w.x();
    if (std::abs(cross_w) < 1e-14 * d.norm()) continue;
    for (const auto& p : mesh.vertices())
      for (double sign : {1.0, -1.0}) {
        // p + sign rho w = e0 + t d
        const Point q = p - e[0];
        const double rho = sign * (d.x() * q.y() - d.y() * q.x()) / cross_w;
        const double tpar = (q.x() * w.y() - q.y() * w.x()) / cross_w;
        if (rho > 1e-14 * width && rho < width && tpar >= -1e-12 && tpar <= 1.0 + 1e-12) ev.push_back(rho);
      }
  }
  std::sort(ev.begin(), ev.end());
  std::vector<double> out{ev[0]};
  for (double r : ev)
    if (r - out.back() > 1e-13 * width) out.push_back(r);
  if (out.back() < width) out.push_back(width);
  return out;
}

/// int_0^width rho^{-1-2s} psi(rho w) d rho for a psi that is a quartic between the events and
/// vanishes to second order at 0.
template <class Psi>
Eigen::VectorXd radial_exact(const Psi& psi, const Point& w, const std::vector<double>& ev, double width,
                             double s, int len) {
  (void)width;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(len);
  for (std::size_t i = 0; i + 1 < ev.size(); ++i) {
    const double a = ev[i], b = ev[i + 1];
    // fit in u = rho / b; the first piece uses u^2, u^3, u^4 only
    const int lo = a == 0.0 ? 2 : 0;
    const int np = 5 - lo;
    Eigen::MatrixXd vm(np, np);
    Eigen::MatrixXd vals(np, len);
    for (int k = 0; k < np; ++k) {
      const double x = std::cos(pi * (k + 0.5) / np);
      const double rho = 0.5 * (a + b) + 0.5 * (b - a) * x;
      const double u = rho / b;
      for (int j = 0; j < np; ++j) vm(k, j) = std::pow(u, lo + j);
      vals.row(k) = psi(rho * w).transpose();
    }
    const Eigen::MatrixXd coef = vm.partialPivLu().solve(vals);
    for (int j = 0; j < np; ++j) {
      const int kpow = lo + j;
      const double e = kpow - 2.0 * s;
      // int_a^b rho^{-1-2s} (rho/b)^k
      double mom;
      if (std::abs(e) < 1e-14)
        mom = std::log(b / a);
      else
        mom = (std::pow(b, e) - (a == 0.0 ? 0.0 : std::pow(a, e))) / e;
      sum += (mom * std::pow(b, -kpow)) * coef.row(j).transpose();
    }
  }
  return sum;
}

} // namespace detail

/// Reference stiffness restricted to the free nodes (in mesh order). tol is the absolute
/// tolerance requested from the adaptive integrators relative to the largest diagonal entry scale.
inline Eigen::MatrixXd reference_stiffness(const SimplicialMesh& mesh, double s, double tol = 1e-11) {
  const std::vector<int> idx = detail::free_nodes(mesh);
  const int m = static_cast<int>(idx.size());
  require(m > 0, "no free nodes");
  const double c = FracParams(s, mesh.dim()).constant();
  const Eigen::MatrixXd k_full = p1_laplacian(mesh);
  const Eigen::MatrixXd mass_full = consistent_mass(mesh);
  Eigen::MatrixXd k(m, m), mass(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      k(i, j) = k_full(idx[i], idx[j]);
      mass(i, j) = mass_full(idx[i], idx[j]);
    }
  double width = 0.0, h_min = std::numeric_limits<double>::infinity();
  for (const auto& p : mesh.vertices())
    for (const auto& q : mesh.vertices()) width = std::max(width, (p - q).norm());
  for (int cidx = 0; cidx < mesh.num_cells(); ++cidx) h_min = std::min(h_min, mesh.cell_diameter(cidx));
  const double rho_min = 1e-6 * h_min;
  const double scale = k.diagonal().maxCoeff() * std::pow(h_min, 2.0 - 2.0 * s);

  // closed-form small-|r| part and |r| > width tail (Psi = 2 M there)
  const double sphere = mesh.dim() == 1 ? 2.0 : 2.0 * pi;
  const double trace_factor = mesh.dim() == 1 ? 2.0 : pi; // int over directions of w^T K w / tr
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  if (mesh.dim() == 1) a += trace_factor * k * std::pow(rho_min, 2.0 - 2.0 * s) / (2.0 - 2.0 * s);
  a += sphere * 2.0 * mass * std::pow(width, -2.0 * s) / (2.0 * s);

  // radial pieces: dyadic from rho_min up to h_min, then uniform
  std::vector<double> radii{rho_min};
  while (radii.back() < h_min) radii.push_back(std::min(2.0 * radii.back(), h_min));
  const int steps = 16;
  for (int i = 1; i <= steps; ++i) radii.push_back(h_min + (width - h_min) * i / steps);

  if (mesh.dim() == 1) {
    const detail::VecFn f = [&](double r) -> Eigen::VectorXd {
      return std::pow(r, -1.0 - 2.0 * s) * detail::psi_1d(mesh, idx, r);
    };
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(m * m);
    for (std::size_t i = 0; i + 1 < radii.size(); ++i)
      sum += detail::adaptive(f, radii[i], radii[i + 1], tol * scale);
    a += 2.0 * detail::unflatten(sum, m);
  } else {
    const auto cells = detail::cells_2d(mesh);
    Eigen::MatrixXd g(mesh.num_vertices(), mesh.num_vertices());
    auto psi = [&](const Point& r) {
      detail::correlation(cells, r, g);
      Eigen::VectorXd p(m * m);
      for (int j = 0; j < m; ++j)
        for (int i = 0; i < m; ++i)
          p[i + m * j] = 2.0 * mass(i, j) - g(idx[i], idx[j]) - g(idx[j], idx[i]);
      return p;
    };
    const auto edges = detail::mesh_edges(mesh);
    const detail::VecFn angular = [&](double th) -> Eigen::VectorXd {
      const Point w(std::cos(th), std::sin(th));
      return detail::radial_exact(psi, w, detail::radial_events(mesh, edges, w, width), width, s, m * m);
    };
    // angular breakpoints: directions of vertex differences folded into [0, pi)
    std::vector<double> angles{0.0, pi};
    for (const auto& p : mesh.vertices())
      for (const auto& q : mesh.vertices()) {
        if ((p - q).norm() == 0.0) continue;
        double th = std::atan2((p - q).y(), (p - q).x());
        if (th < 0.0) th += pi;
        if (th >= pi) th -= pi;
        angles.push_back(th);
      }
    std::sort(angles.begin(), angles.end());
    angles.erase(std::unique(angles.begin(), angles.end(),
                             [](double x, double y) { return std::abs(x - y) < 1e-12; }),
                 angles.end());
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(m * m);
    for (std::size_t i = 0; i + 1 < angles.size(); ++i)
      if (angles[i + 1] - angles[i] > 1e-12)
        sum += detail::adaptive(angular, angles[i], angles[i + 1], tol * scale, 8);
    a += 2.0 * detail::unflatten(sum, m); // Psi(r) = Psi(-r)
  }
  a *= 0.5 * c;
  return 0.5 * (a + a.transpose());
}

} // namespace fraqmap::oracle
