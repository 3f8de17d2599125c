#pragma once

// Galerkin discretization of the integral fractional Laplacian on an extended domain.
//
// For P1 hats supported in the meshed domain D (the extended domain),
//   a(f, g) = C/2 int_D int_D (f(x)-f(y))(g(x)-g(y)) |x-y|^{-d-2s} dy dx
//           + int_D f g kappa dx,    kappa(x) = C int_{R^d \ D} |x-y|^{-d-2s} dy,
// which is the full-space form for functions vanishing outside D. Nodes on the boundary of D are
// eliminated (zero extension): their rows and columns are zero.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include <boost/math/special_functions/beta.hpp>
#include <Eigen/Dense>

#include "fraqmap/fem_pairs.hpp"
#include "fraqmap/geometry.hpp"
#include "fraqmap/io.hpp"
#include "fraqmap/spectral.hpp"

namespace fraqmap {

/// Quadrature orders for the stiffness assembly (config keys quad_sing_order, quad_far_order).
struct QuadratureSpec {
  int sing_order = 12;       ///< Gauss order of the angular variables for touching pairs
  int far_order = 3;         ///< Gauss order for disjoint pairs at distance >= 16 diameters
  int near_order = 10;       ///< cap on the order for close disjoint pairs
  int complement_order = 10;   ///< Gauss order for the exterior-kernel mass term
  int complement_grading = 2;  ///< grading exponent toward the boundary of the extended domain

  static constexpr int min_sing_order = 3;

  /// Order for a disjoint pair with distance / diameter = q: one extra point per halving of q
  /// below 16, which keeps the per-pair relative error near 1e-7.
  int disjoint_order(double q) const {
    const int extra = q >= 16.0 ? 0 : static_cast<int>(std::ceil(std::log2(16.0 / std::max(q, 1e-3))));
    return std::min(far_order + extra, near_order);
  }

  void validate() const {
    require(sing_order >= min_sing_order, "quad_sing_order ", sing_order,
            " is below the minimum ", min_sing_order, " for touching element pairs");
    require(far_order >= 1 && near_order >= far_order, "quad_far_order must be >= 1 and <= near order");
    require(complement_order >= 1 && complement_grading >= 1, "invalid complement quadrature");
  }
};

// ---------------------------------------------------------------- exterior kernel

/// kappa(x) / C = int_{R^d \ D} |x - y|^{-d-2s} dy for the meshed domain D. In 1D this is
/// ((x - lo)^{-2s} + (hi - x)^{-2s}) / (2s). In 2D D must be convex; then
///   int_{R^2 \ D} |x-y|^{-2-2s} dy = (1/2s) sum_edges d_e^{-2s} int cos^{2s}(alpha) d alpha
/// over the angular sector each boundary edge subtends from x (d_e: distance to the edge line).
class ExteriorKernel {
public:
  ExteriorKernel(const SimplicialMesh& mesh, double s) : dim_(mesh.dim()), s_(s) {
    if (dim_ == 1) {
      lo_ = hi_ = mesh.vertex(0).x();
      for (const auto& v : mesh.vertices()) {
        lo_ = std::min(lo_, v.x());
        hi_ = std::max(hi_, v.x());
      }
      return;
    }
    // outward-oriented boundary edges
    std::vector<std::array<int, 2>> facets = mesh.boundary_facets();
    std::vector<char> on_boundary(mesh.num_vertices(), 0);
    for (const auto& f : facets) on_boundary[f[0]] = on_boundary[f[1]] = 1;
    for (int c = 0; c < mesh.num_cells(); ++c) {
      auto cell = mesh.cell(c);
      for (int k = 0; k < 3; ++k) {
        const int a = cell[k], b = cell[(k + 1) % 3], opp = cell[(k + 2) % 3];
        if (!on_boundary[a] || !on_boundary[b]) continue;
        const std::array<int, 2> key{std::min(a, b), std::max(a, b)};
        if (!std::binary_search(facets.begin(), facets.end(), key)) continue;
        Edge e;
        e.p = mesh.vertex(a);
        e.q = mesh.vertex(b);
        const Point t = (e.q - e.p).normalized();
        e.n = Point(t.y(), -t.x());
        if ((mesh.vertex(opp) - e.p).dot(e.n) > 0.0) e.n = -e.n;
        edges_.push_back(e);
      }
    }
    double scale = 0.0;
    for (const auto& v : mesh.vertices()) scale = std::max(scale, v.norm());
    for (const auto& e : edges_)
      for (const auto& v : mesh.vertices())
        require((v - e.p).dot(e.n) <= 1e-10 * std::max(1.0, scale),
                "exterior kernel needs a convex extended domain");
    tol_ = 1e-12 * std::max(1.0, scale);
  }

  /// Distance from x to the boundary of D.
  double boundary_distance(const Point& x) const {
    if (dim_ == 1) return std::min(x.x() - lo_, hi_ - x.x());
    double d = std::numeric_limits<double>::infinity();
    for (const auto& e : edges_) d = std::min(d, (e.p - x).dot(e.n));
    return d;
  }

  bool on_boundary(const Point& x) const { return boundary_distance(x) <= tol_; }

  double operator()(const Point& x) const {
    const double two_s = 2.0 * s_;
    if (dim_ == 1) return (std::pow(x.x() - lo_, -two_s) + std::pow(hi_ - x.x(), -two_s)) / two_s;
    double sum = 0.0;
    for (const auto& e : edges_) {
      const double d = (e.p - x).dot(e.n);
      const Point t(-e.n.y(), e.n.x());
      const double a1 = std::atan2((e.p - x).dot(t), d);
      const double a2 = std::atan2((e.q - x).dot(t), d);
      sum += std::pow(d, -two_s) * cos_power_integral(std::min(a1, a2), std::max(a1, a2));
    }
    return sum / two_s;
  }

  double lo() const { return lo_; }
  double hi() const { return hi_; }

private:
  struct Edge {
    Point p, q, n;
  };

  /// int_{a1}^{a2} cos^{2s}(alpha) d alpha for -pi/2 < a1 <= a2 < pi/2.
  double cos_power_integral(double a1, double a2) const {
    if (a2 - a1 < 0.3 && std::max(std::abs(a1), std::abs(a2)) < 1.2) {
      static const GaussRule g = gauss_legendre(8);
      double r = 0.0;
      for (int i = 0; i < g.size(); ++i) r += g.w[i] * std::pow(std::cos(a1 + (a2 - a1) * g.x[i]), 2.0 * s_);
      return r * (a2 - a1);
    }
    return primitive(a2) - primitive(a1);
  }

  double primitive(double a) const {
    const double x = std::sin(a) * std::sin(a);
    const double v = 0.5 * boost::math::beta(0.5, s_ + 0.5, x);
    return a < 0.0 ? -v : v;
  }

  int dim_;
  double s_;
  double lo_ = 0.0, hi_ = 0.0;
  double tol_ = 0.0;
  std::vector<Edge> edges_;
};

// ---------------------------------------------------------------- assembly

namespace detail {

inline void scatter(Eigen::MatrixXd& a, std::span<const int> nodes, const auto& local, double scale) {
  for (std::size_t i = 0; i < nodes.size(); ++i)
    for (std::size_t j = 0; j < nodes.size(); ++j) a(nodes[i], nodes[j]) += scale * local(i, j);
}

inline int shared_vertices(std::span<const int> a, std::span<const int> b) {
  int n = 0;
  for (int i : a)
    for (int j : b) n += (i == j);
  return n;
}

inline Eigen::MatrixXd double_integral_1d(const SimplicialMesh& mesh, double s, const QuadratureSpec& q) {
  const int n = mesh.num_vertices();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  const GaussRule sing = gauss_legendre(q.sing_order);
  std::vector<GaussRule> rules;
  for (int k = 0; k <= q.near_order; ++k) rules.push_back(gauss_legendre(std::max(k, 1)));
  const int nc = mesh.num_cells();
  for (int c1 = 0; c1 < nc; ++c1) {
    auto v1 = mesh.cell(c1);
    const double x0 = mesh.vertex(v1[0]).x(), h1 = mesh.cell_measure(c1);
    detail::scatter(a, v1, pairs::interval_identical(h1, s), 1.0);
    for (int c2 = c1 + 1; c2 < nc; ++c2) {
      auto v2 = mesh.cell(c2);
      const double y0 = mesh.vertex(v2[0]).x(), h2 = mesh.cell_measure(c2);
      if (v1[1] == v2[0] || v1[0] == v2[1]) {
        // order as left interval / right interval
        const bool c1_left = v1[1] == v2[0];
        const auto left = c1_left ? v1 : v2;
        const auto right = c1_left ? v2 : v1;
        const std::array<int, 3> nodes{left[0], left[1], right[1]};
        const double hl = c1_left ? h1 : h2, hr = c1_left ? h2 : h1;
        detail::scatter(a, nodes, pairs::interval_touching(hl, hr, s, sing), 2.0);
      } else {
        const double gap = std::max(x0, y0) - std::min(x0 + h1, y0 + h2);
        const GaussRule& g = rules[q.disjoint_order(gap / std::max(h1, h2))];
        const std::array<int, 4> nodes{v1[0], v1[1], v2[0], v2[1]};
        detail::scatter(a, nodes, pairs::interval_disjoint(x0, h1, y0, h2, s, g), 2.0);
      }
    }
  }
  return a;
}

inline Eigen::MatrixXd double_integral_2d(const SimplicialMesh& mesh, double s, const QuadratureSpec& q) {
  const int n = mesh.num_vertices();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  const GaussRule sing = gauss_legendre(q.sing_order + 2);
  const GaussRule ident = gauss_legendre(2 * q.sing_order);
  std::vector<GaussRule> rules_sing;
  for (int k = 0; k <= 10; ++k) rules_sing.push_back(gauss_legendre(q.sing_order + k));
  std::vector<TriangleRule> rules;
  for (int k = 0; k <= q.near_order; ++k) rules.push_back(collapsed_triangle_rule(std::max(k, 1)));
  const int nc = mesh.num_cells();
  std::vector<pairs::Triangle> tris;
  std::vector<std::array<Point, 3>> corners;
  std::vector<double> diam;
  tris.reserve(nc);
  for (int c = 0; c < nc; ++c) {
    auto v = mesh.cell(c);
    tris.emplace_back(mesh.vertex(v[0]), mesh.vertex(v[1]), mesh.vertex(v[2]));
    corners.push_back({mesh.vertex(v[0]), mesh.vertex(v[1]), mesh.vertex(v[2])});
    diam.push_back(mesh.cell_diameter(c));
  }
  for (int c1 = 0; c1 < nc; ++c1) {
    auto v1 = mesh.cell(c1);
    detail::scatter(a, v1, pairs::triangle_identical(tris[c1], s, ident), 1.0);
    for (int c2 = c1 + 1; c2 < nc; ++c2) {
      auto v2 = mesh.cell(c2);
      const int shared = shared_vertices(v1, v2);
      if (shared == 2) {
        int p0 = -1, p1 = -1, qa = -1, qb = -1;
        for (int i : v1) {
          bool in2 = std::find(v2.begin(), v2.end(), i) != v2.end();
          if (!in2) qa = i;
          else if (p0 < 0) p0 = i;
          else p1 = i;
        }
        for (int j : v2)
          if (j != p0 && j != p1) qb = j;
        const std::array<int, 4> nodes{p0, p1, qa, qb};
        detail::scatter(a, nodes,
                        pairs::triangle_edge(mesh.vertex(p0), mesh.vertex(p1), mesh.vertex(qa),
                                             mesh.vertex(qb), s, sing),
                        2.0);
      } else if (shared == 1) {
        int p = -1;
        for (int i : v1)
          if (std::find(v2.begin(), v2.end(), i) != v2.end()) p = i;
        std::array<int, 5> nodes{p, -1, -1, -1, -1};
        int k = 1;
        for (int i : v1)
          if (i != p) nodes[k++] = i;
        for (int j : v2)
          if (j != p) nodes[k++] = j;
        const pairs::Triangle t(mesh.vertex(p), mesh.vertex(nodes[1]), mesh.vertex(nodes[2]));
        const pairs::Triangle tp(mesh.vertex(p), mesh.vertex(nodes[3]), mesh.vertex(nodes[4]));
        // small angular gaps between the two cones make the angular integrand nearly singular
        const double gap = pairs::cone_gap(t, tp);
        const int extra = gap >= 0.8 ? 0 : gap >= 0.4 ? 3 : gap >= 0.2 ? 6 : 10;
        detail::scatter(a, nodes, pairs::triangle_vertex(t, tp, s, rules_sing[std::min(extra, 10)]), 2.0);
      } else {
        const double dist = pairs::triangle_distance(corners[c1], corners[c2]);
        const TriangleRule& rule = rules[q.disjoint_order(dist / std::max(diam[c1], diam[c2]))];
        const std::array<int, 6> nodes{v1[0], v1[1], v1[2], v2[0], v2[1], v2[2]};
        detail::scatter(a, nodes, pairs::triangle_disjoint(tris[c1], tris[c2], s, rule), 2.0);
      }
    }
  }
  return a;
}

/// int_{y_lo}^{y_hi} (a0 + a1 y)(b0 + b1 y) y^{-2s} dy, exact.
inline double power_moment(double a0, double a1, double b0, double b1, double y_lo, double y_hi, double s) {
  const std::array<double, 3> c{a0 * b0, a0 * b1 + a1 * b0, a1 * b1};
  double r = 0.0;
  for (int k = 0; k < 3; ++k) {
    if (c[k] == 0.0) continue;
    const double e = k + 1.0 - 2.0 * s;
    if (std::abs(e) < 1e-12)
      r += c[k] * (std::log(y_hi) - std::log(y_lo));
    else
      r += c[k] * (std::pow(y_hi, e) - std::pow(y_lo, e)) / e;
  }
  return r;
}

inline Eigen::MatrixXd complement_1d(const SimplicialMesh& mesh, const ExteriorKernel& kappa, double s,
                                     const QuadratureSpec& q) {
  const int n = mesh.num_vertices();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  const GaussRule g = gauss_legendre(std::max(q.complement_order, 8));
  const double lo = kappa.lo(), hi = kappa.hi();
  for (int c = 0; c < mesh.num_cells(); ++c) {
    auto v = mesh.cell(c);
    const double x0 = mesh.vertex(v[0]).x(), x1 = mesh.vertex(v[1]).x(), h = x1 - x0;
    Eigen::Matrix2d local = Eigen::Matrix2d::Zero();
    for (int side = 0; side < 2; ++side) {
      // distance variable y = x - lo (side 0) or hi - x (side 1); hats as (alpha + beta y)/h
      const bool touches = side == 0 ? x0 == lo : x1 == hi;
      if (touches) {
        std::array<double, 2> al, be;
        double ylo, yhi;
        if (side == 0) {
          al = {x1 - lo, -(x0 - lo)};
          be = {-1.0, 1.0};
          ylo = x0 - lo;
          yhi = x1 - lo;
        } else {
          al = {-(hi - x1), hi - x0};
          be = {1.0, -1.0};
          ylo = hi - x1;
          yhi = hi - x0;
        }
        for (int i = 0; i < 2; ++i)
          for (int j = 0; j < 2; ++j) {
            if (!mesh.is_free(v[i]) || !mesh.is_free(v[j])) continue;
            local(i, j) += power_moment(al[i], be[i], al[j], be[j], ylo, yhi, s) / (h * h * 2.0 * s);
          }
      } else {
        for (int k = 0; k < g.size(); ++k) {
          const double x = x0 + h * g.x[k];
          const double y = side == 0 ? x - lo : hi - x;
          const double kv = std::pow(y, -2.0 * s) / (2.0 * s);
          const Eigen::Vector2d phi(1.0 - g.x[k], g.x[k]);
          local += (g.w[k] * h * kv) * (phi * phi.transpose());
        }
      }
    }
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j)
        if (mesh.is_free(v[i]) && mesh.is_free(v[j])) a(v[i], v[j]) += local(i, j);
  }
  return a;
}

/// Accumulates int phi_i phi_j kappa over the sub-triangle `tri` of `parent` into local. Contact
/// with the boundary of D (where kappa ~ dist^{-2s}) is handled by collapsing the cell onto the
/// contact vertex, or onto the vertex opposite a contact edge, and grading the collapse variable
/// as w^grading.
inline void complement_triangle(const std::array<Point, 3>& tri, const ExteriorKernel& kappa,
                                const pairs::Triangle& parent, const GaussRule& g, int grading,
                                Eigen::Matrix3d& local) {
  std::array<bool, 3> on{};
  int nb = 0;
  for (int k = 0; k < 3; ++k) nb += on[k] = kappa.on_boundary(tri[k]);
  const Eigen::Matrix2d inv = parent.b.inverse();
  auto add = [&](const Point& x, double w) {
    const Eigen::Vector2d ref = inv * (x - parent.p0);
    const Eigen::Vector3d phi(1.0 - ref.sum(), ref[0], ref[1]);
    local += (w * kappa(x)) * (phi * phi.transpose());
  };
  // apex c, opposite side (a, b): x = c + rho ((1 - u) (a - c) + u (b - c)). grade_rho clusters
  // points at the apex, grade_u toward the ray c -> a.
  auto collapsed = [&](const Point& c, const Point& a, const Point& b, bool grade_rho, bool grade_u) {
    const double jac = pairs::Triangle(c, a, b).jac;
    for (int i = 0; i < g.size(); ++i)
      for (int j = 0; j < g.size(); ++j) {
        double u = g.x[i], du = 1.0, rho = g.x[j], drho = 1.0;
        if (grade_u) {
          du = grading * std::pow(u, grading - 1);
          u = std::pow(u, grading);
        }
        if (grade_rho) {
          drho = grading * std::pow(rho, grading - 1);
          rho = std::pow(rho, grading);
        }
        const Point x = c + rho * ((1.0 - u) * (a - c) + u * (b - c));
        add(x, g.w[i] * g.w[j] * du * drho * jac * rho);
      }
  };
  if (nb == 0) {
    collapsed(tri[0], tri[1], tri[2], false, false);
    return;
  }
  if (nb == 1) {
    const int k = on[0] ? 0 : on[1] ? 1 : 2;
    collapsed(tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3], true, false);
    return;
  }
  for (int k = 0; k < 3; ++k) {
    const int a = (k + 1) % 3, b = (k + 2) % 3;
    if (on[a] && on[b]) {
      const Point m = 0.5 * (tri[a] + tri[b]);
      if (kappa.on_boundary(m)) {
        // contact edge: halves collapsed at its end points, graded toward the edge
        collapsed(tri[a], m, tri[k], true, true);
        collapsed(tri[b], m, tri[k], true, true);
        return;
      }
      // two separate contact vertices
      complement_triangle({tri[a], m, tri[k]}, kappa, parent, g, grading, local);
      complement_triangle({tri[b], tri[k], m}, kappa, parent, g, grading, local);
      return;
    }
  }
  raise("cell with free nodes has all vertices on the boundary of the extended domain");
}

inline Eigen::MatrixXd complement_2d(const SimplicialMesh& mesh, const ExteriorKernel& kappa,
                                     const QuadratureSpec& q) {
  const int n = mesh.num_vertices();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  const GaussRule g = gauss_legendre(q.complement_order);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    auto v = mesh.cell(c);
    bool any_free = false;
    for (int i : v) any_free |= mesh.is_free(i);
    if (!any_free) continue;
    const std::array<Point, 3> tri{mesh.vertex(v[0]), mesh.vertex(v[1]), mesh.vertex(v[2])};
    const pairs::Triangle parent(tri[0], tri[1], tri[2]);
    Eigen::Matrix3d local = Eigen::Matrix3d::Zero();
    complement_triangle(tri, kappa, parent, g, q.complement_grading, local);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (mesh.is_free(v[i]) && mesh.is_free(v[j])) a(v[i], v[j]) += local(i, j);
  }
  return a;
}

} // namespace detail

/// Assembled fractional stiffness. Rows and columns follow the mesh node order; rows/columns of
/// outer-boundary nodes are zero.
struct FracStiffness {
  Eigen::MatrixXd matrix;
  /// C/2 times the double integral over D x D for every node, before elimination.
  Eigen::MatrixXd double_part;
  FracParams params;
  QuadratureSpec quad;
  std::vector<char> free;
  double extent = 0.0; ///< radius (half length in 1D) of the extended domain

  int size() const { return static_cast<int>(matrix.rows()); }
  double s() const { return params.s; }
};

/// C/2 int_D int_D (phi_z(x)-phi_z(y))(phi_w(x)-phi_w(y)) |x-y|^{-d-2s} for all node pairs.
inline Eigen::MatrixXd assemble_double_integral(const SimplicialMesh& mesh, const FracParams& params,
                                                const QuadratureSpec& quad = {}) {
  quad.validate();
  Eigen::MatrixXd a = mesh.dim() == 1 ? detail::double_integral_1d(mesh, params.s, quad)
                                      : detail::double_integral_2d(mesh, params.s, quad);
  a *= 0.5 * params.constant();
  // the local integrals are symmetric; remove round-off asymmetry from accumulation order
  return 0.5 * (a + a.transpose());
}

/// int_D phi_z phi_w kappa for free node pairs (C included).
inline Eigen::MatrixXd assemble_complement(const SimplicialMesh& mesh, const FracParams& params,
                                           const QuadratureSpec& quad = {}) {
  quad.validate();
  const ExteriorKernel kappa(mesh, params.s);
  Eigen::MatrixXd a = mesh.dim() == 1 ? detail::complement_1d(mesh, kappa, params.s, quad)
                                      : detail::complement_2d(mesh, kappa, quad);
  a *= params.constant();
  return 0.5 * (a + a.transpose());
}

inline FracStiffness assemble_fractional_stiffness(const SimplicialMesh& mesh, const FracParams& params,
                                                   const QuadratureSpec& quad = {}) {
  require(params.d == mesh.dim(), "fractional parameters are for d = ", params.d, " but mesh has d = ",
          mesh.dim());
  FracStiffness k{Eigen::MatrixXd(), assemble_double_integral(mesh, params, quad), params, quad, {}, 0.0};
  const int n = mesh.num_vertices();
  k.free.resize(n);
  for (int z = 0; z < n; ++z) k.free[z] = mesh.is_free(z);
  k.matrix = k.double_part + assemble_complement(mesh, params, quad);
  for (int z = 0; z < n; ++z)
    if (!k.free[z]) {
      k.matrix.row(z).setZero();
      k.matrix.col(z).setZero();
    }
  for (const auto& v : mesh.vertices()) k.extent = std::max(k.extent, mesh.dim() == 1 ? std::abs(v.x()) : v.norm());
  return k;
}

/// y(z) = (A w)(z) / beta_z at free nodes, zero at eliminated nodes: the Riesz representative of
/// a(w, .) in the lumped inner product.
inline NodalField discrete_frac_laplacian(const NodalField& w, const FracStiffness& a, const LumpedMass& beta) {
  require(w.size() == a.size() && beta.size() == a.size(), "field, stiffness and weights disagree in size");
  Eigen::MatrixXd y = a.matrix * w.values();
  for (int z = 0; z < a.size(); ++z) {
    if (!a.free[z]) {
      y.row(z).setZero();
      continue;
    }
    require(beta.weights[z] > 0.0, "zero lumped weight at node ", z);
    y.row(z) /= beta.weights[z];
  }
  return NodalField(std::move(y));
}

/// E_{s,h}[u] = 1/2 sum_c u_c^T A u_c.
inline double fem_energy(const NodalField& u, const FracStiffness& a) {
  require(u.size() == a.size(), "field does not match the stiffness");
  return 0.5 * (u.values().transpose() * a.matrix * u.values()).trace();
}

/// Triplet export with header `n nnz s`; only nonzero entries are written.
inline void write_matrix_triplets(std::ostream& out, const FracStiffness& a) {
  int nnz = 0;
  for (int i = 0; i < a.size(); ++i)
    for (int j = 0; j < a.size(); ++j) nnz += a.matrix(i, j) != 0.0;
  out << a.size() << ' ' << nnz << ' ' << io::fmt(a.s()) << '\n';
  for (int i = 0; i < a.size(); ++i)
    for (int j = 0; j < a.size(); ++j)
      if (a.matrix(i, j) != 0.0) out << i << ' ' << j << ' ' << io::fmt(a.matrix(i, j)) << '\n';
}

// ---------------------------------------------------------------- standard P1 matrices

inline Eigen::MatrixXd consistent_mass(const SimplicialMesh& mesh) {
  const int n = mesh.num_vertices();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  const int d = mesh.dim();
  for (int c = 0; c < mesh.num_cells(); ++c) {
    auto v = mesh.cell(c);
    const double t = mesh.cell_measure(c);
    // int phi_i phi_j = |T| (1 + delta_ij) / ((d+1)(d+2))
    for (int i = 0; i <= d; ++i)
      for (int j = 0; j <= d; ++j) m(v[i], v[j]) += t * (i == j ? 2.0 : 1.0) / ((d + 1) * (d + 2));
  }
  return m;
}

inline Eigen::MatrixXd p1_laplacian(const SimplicialMesh& mesh) {
  const int n = mesh.num_vertices();
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(n, n);
  for (int c = 0; c < mesh.num_cells(); ++c) {
    auto v = mesh.cell(c);
    const double t = mesh.cell_measure(c);
    if (mesh.dim() == 1) {
      const double g = 1.0 / t;
      k(v[0], v[0]) += g;
      k(v[1], v[1]) += g;
      k(v[0], v[1]) -= g;
      k(v[1], v[0]) -= g;
      continue;
    }
    const pairs::Triangle tri(mesh.vertex(v[0]), mesh.vertex(v[1]), mesh.vertex(v[2]));
    const Eigen::Matrix2d binv_t = tri.b.inverse().transpose();
    const auto& gr = pairs::reference_gradients();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) k(v[i], v[j]) += t * (binv_t * gr[i]).dot(binv_t * gr[j]);
  }
  return k;
}

// ---------------------------------------------------------------- spectral Dirichlet power

/// Fractional power of the discrete Dirichlet Laplacian on the interior nodes through the
/// generalized eigenproblem K phi = lambda M phi (P1 stiffness K, consistent mass M).
class DirichletSpectralOp {
public:
  static constexpr int max_nodes = 2000;

  DirichletSpectralOp(const SimplicialMesh& mesh, double s) : s_(s), n_(mesh.num_vertices()) {
    require(s >= 0.0, "spectral power must be non-negative");
    for (int z = 0; z < n_; ++z)
      if (mesh.node_class(z) == NodeClass::interior) nodes_.push_back(z);
    const int m = static_cast<int>(nodes_.size());
    require(m > 0, "no interior nodes");
    require(m <= max_nodes, "dense eigen-decomposition is capped at ", max_nodes, " interior nodes, got ", m);
    const Eigen::MatrixXd kf = p1_laplacian(mesh), mf = consistent_mass(mesh);
    Eigen::MatrixXd k(m, m), mm(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        k(i, j) = kf(nodes_[i], nodes_[j]);
        mm(i, j) = mf(nodes_[i], nodes_[j]);
      }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(k, mm);
    require<SolverError>(es.info() == Eigen::Success, "generalized eigen-solver failed");
    lambda_ = es.eigenvalues();
    phi_ = es.eigenvectors();
    mass_ = std::move(mm);
  }

  double s() const { return s_; }
  const Eigen::VectorXd& eigenvalues() const { return lambda_; }
  const Eigen::MatrixXd& eigenvectors() const { return phi_; }
  const Eigen::MatrixXd& mass() const { return mass_; }
  const std::vector<int>& nodes() const { return nodes_; }

  /// sum_k lambda_k^sigma (u^T M phi_k) phi_k; sigma defaults to the operator's s.
  NodalField apply(const NodalField& u, double sigma = -1.0) const {
    if (sigma < 0.0) sigma = s_;
    require(u.size() == n_, "field does not live on the operator's mesh");
    const Eigen::MatrixXd coeff = coefficients(u);
    const Eigen::VectorXd pw = lambda_.array().pow(sigma).matrix();
    const Eigen::MatrixXd vals = phi_ * (pw.asDiagonal() * coeff);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_, u.components());
    for (std::size_t i = 0; i < nodes_.size(); ++i) out.row(nodes_[i]) = vals.row(i);
    return NodalField(std::move(out));
  }

  /// (sum_k lambda_k^sigma u_k^2)^{1/2}, summed over components.
  double seminorm(const NodalField& u, double sigma = -1.0) const {
    if (sigma < 0.0) sigma = s_;
    const Eigen::MatrixXd coeff = coefficients(u);
    double r = 0.0;
    for (int k = 0; k < lambda_.size(); ++k) r += std::pow(lambda_[k], sigma) * coeff.row(k).squaredNorm();
    return std::sqrt(r);
  }

private:
  Eigen::MatrixXd coefficients(const NodalField& u) const {
    Eigen::MatrixXd x(nodes_.size(), u.components());
    for (std::size_t i = 0; i < nodes_.size(); ++i) x.row(i) = u.at(nodes_[i]);
    return phi_.transpose() * (mass_ * x);
  }

  double s_;
  int n_;
  std::vector<int> nodes_;
  Eigen::VectorXd lambda_;
  Eigen::MatrixXd phi_;
  Eigen::MatrixXd mass_;
};

// ---------------------------------------------------------------- inverse estimate

struct InverseEstimateProbe {
  std::vector<double> h;
  std::vector<double> ratio; ///< max_v sqrt(v^T A v / v^T M_l v) per level
  double exponent = 0.0;     ///< least-squares slope of log(ratio) against log(1/h)
};

/// Largest sqrt of the generalized Rayleigh quotient of A against the lumped mass, by power
/// iteration on D^{-1/2} A D^{-1/2} over the free nodes.
inline double max_rayleigh_ratio(const FracStiffness& a, const LumpedMass& beta, int max_iter = 20000,
                                 double tol = 1e-11) {
  std::vector<int> idx;
  for (int z = 0; z < a.size(); ++z)
    if (a.free[z]) idx.push_back(z);
  const int m = static_cast<int>(idx.size());
  require(m > 0, "no free nodes");
  Eigen::MatrixXd b(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      b(i, j) = a.matrix(idx[i], idx[j]) / std::sqrt(beta.weights[idx[i]] * beta.weights[idx[j]]);
  Eigen::VectorXd v(m);
  for (int i = 0; i < m; ++i) v[i] = (i % 2 ? -1.0 : 1.0) * (1.0 + 0.1 * std::sin(1.0 + i));
  v.normalize();
  double rq = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::VectorXd w = b * v;
    const double next = v.dot(w);
    w.normalize();
    v = w;
    if (it > 0 && std::abs(next - rq) <= tol * std::abs(next)) {
      rq = next;
      break;
    }
    rq = next;
  }
  return std::sqrt(rq);
}

inline InverseEstimateProbe inverse_estimate_probe(std::span<const SimplicialMesh> meshes, double s,
                                                   const QuadratureSpec& quad = {}) {
  require(!meshes.empty(), "inverse-estimate probe needs at least one mesh");
  InverseEstimateProbe out;
  for (const auto& mesh : meshes) {
    const FracStiffness a = assemble_fractional_stiffness(mesh, FracParams(s, mesh.dim()), quad);
    const LumpedMass beta = lumped_weights(mesh, LumpedMass::Region::whole);
    out.h.push_back(mesh.h_max());
    out.ratio.push_back(max_rayleigh_ratio(a, beta));
  }
  if (meshes.size() >= 2) {
    const int n = static_cast<int>(out.h.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
      const double x = -std::log(out.h[i]), y = std::log(out.ratio[i]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    out.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return out;
}

} // namespace fraqmap
