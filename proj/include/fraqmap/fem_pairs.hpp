#pragma once

// Element-pair integrals of the fractional bilinear form
//
//   I_T,T'[z, w] = int_T int_T' (phi_z(x) - phi_z(y)) (phi_w(x) - phi_w(y)) |x - y|^{-d-2s} dy dx
//
// for P1 hat functions. For touching pairs (identical cells, shared edge, shared vertex) the
// integrand is positively homogeneous around the singular set once the pair is written in
// coordinates relative to the shared vertex, so a cone transform (Duffy type) separates a radial
// variable whose integral is a closed-form Beta value; the remaining angular variables carry a
// smooth integrand that is integrated with tensor Gauss rules. Disjoint pairs use tensor Gauss
// rules directly.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "fraqmap/quadrature.hpp"

namespace fraqmap::pairs {

/// Local matrix over an ordered list of global node indices.
struct LocalMatrix {
  std::vector<int> nodes;
  Eigen::MatrixXd values;
};

// ---------------------------------------------------------------- 1D

/// Same interval of length h.
inline Eigen::Matrix2d interval_identical(double h, double s) {
  const double c = 2.0 * std::pow(h, 1.0 - 2.0 * s) / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s));
  Eigen::Matrix2d m;
  m << c, -c, -c, c;
  return m;
}

/// Intervals [a - h1, a] and [a, a + h2] sharing the point a. Nodes: (left, shared, right).
inline Eigen::Matrix3d interval_touching(double h1, double h2, double s, const GaussRule& g) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
  for (int face = 0; face < 2; ++face)
    for (int i = 0; i < g.size(); ++i) {
      const double p = face == 0 ? h1 : h1 * g.x[i];
      const double q = face == 0 ? h2 * g.x[i] : h2;
      const Eigen::Vector3d d(p / h1, -p / h1 + q / h2, -q / h2);
      m += g.w[i] * std::pow(p + q, -1.0 - 2.0 * s) * (d * d.transpose());
    }
  return m * (h1 * h2 / (3.0 - 2.0 * s));
}

/// Disjoint intervals [x0, x0 + h1] and [y0, y0 + h2]. Nodes: (x0, x0+h1, y0, y0+h2).
inline Eigen::Matrix4d interval_disjoint(double x0, double h1, double y0, double h2, double s,
                                         const GaussRule& g) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  for (int i = 0; i < g.size(); ++i)
    for (int j = 0; j < g.size(); ++j) {
      const double x = x0 + h1 * g.x[i];
      const double y = y0 + h2 * g.x[j];
      const Eigen::Vector4d d(1.0 - g.x[i], g.x[i], -(1.0 - g.x[j]), -g.x[j]);
      m += g.w[i] * g.w[j] * std::pow(std::abs(x - y), -1.0 - 2.0 * s) * (d * d.transpose());
    }
  return m * (h1 * h2);
}

// ---------------------------------------------------------------- 2D

/// Affine triangle x = p0 + B xhat on the reference triangle {a, b >= 0, a + b <= 1}.
struct Triangle {
  Point p0;
  Eigen::Matrix2d b;
  double jac; // |det B|

  Triangle(const Point& v0, const Point& v1, const Point& v2) : p0(v0) {
    b.col(0) = v1 - v0;
    b.col(1) = v2 - v0;
    jac = std::abs(b.determinant());
  }
  Point map(double a, double c) const { return p0 + b.col(0) * a + b.col(1) * c; }
};

inline const std::array<Eigen::Vector2d, 3>& reference_gradients() {
  static const std::array<Eigen::Vector2d, 3> g{Eigen::Vector2d(-1.0, -1.0),
                                                Eigen::Vector2d(1.0, 0.0),
                                                Eigen::Vector2d(0.0, 1.0)};
  return g;
}

/// Identical triangle. The difference quotient only depends on r = x - y, so
///   int_T int_T F(x - y) = |det B|^2 int F(B r) |T^ cap (T^ + r)| dr,
/// with overlap area (1 - c(r))^2 / 2 for the hexagonal gauge c(r) = (|r1| + |r2| + |r1 + r2|)/2.
/// The radial integral is Beta(2 - 2s, 3) / 2.
inline Eigen::Matrix3d triangle_identical(const Triangle& t, double s, const GaussRule& g) {
  static const std::array<Eigen::Vector2d, 4> hex{Eigen::Vector2d(1.0, 0.0), Eigen::Vector2d(0.0, 1.0),
                                                  Eigen::Vector2d(-1.0, 1.0), Eigen::Vector2d(-1.0, 0.0)};
  Eigen::Matrix2d moment = Eigen::Matrix2d::Zero();
  for (int e = 0; e < 3; ++e)
    for (int i = 0; i < g.size(); ++i) {
      const Eigen::Vector2d w = hex[e] + g.x[i] * (hex[e + 1] - hex[e]);
      moment += g.w[i] * std::pow((t.b * w).norm(), -2.0 - 2.0 * s) * (w * w.transpose());
    }
  // opposite hexagon edges give identical contributions (r -> -r)
  moment *= 2.0 / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s) * (4.0 - 2.0 * s));
  Eigen::Matrix3d m;
  const auto& gr = reference_gradients();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(i, j) = gr[i].dot(moment * gr[j]);
  return m * (t.jac * t.jac);
}

/// Triangles (p0, p1, q) and (p0, p1, q') sharing the edge p0p1.
/// Nodes: (p0, p1, q, q').
///
/// With x = p0 + a_x e + b_x q_T and y = p0 + a_y e + b_y q_T', every difference
/// phi(x) - phi(y) and x - y depends only on (u, b_x, b_y) = (a_x - a_y, b_x, b_y); the a_y
/// extent of the fibre is L = 1 - c with gauge c = max(b_x + u, b_y) + max(0, -u). The cone
/// transform over the four faces {c = 1} leaves int_0^1 xi^{2-2s} (1 - xi) = 1/((3-2s)(4-2s)).
inline Eigen::Matrix4d triangle_edge(const Point& p0, const Point& p1, const Point& q, const Point& qp,
                                     double s, const GaussRule& g) {
  const Point e = p1 - p0;
  const Point qt = q - p0;
  const Point qtp = qp - p0;
  const double jac_t = std::abs(e.x() * qt.y() - e.y() * qt.x());
  const double jac_tp = std::abs(e.x() * qtp.y() - e.y() * qtp.x());
  // rows: node, cols: coefficient of (u, b_x, b_y) in phi(x) - phi(y)
  Eigen::Matrix<double, 4, 3> coef;
  coef << -1.0, -1.0, 1.0, //
      1.0, 0.0, 0.0,       //
      0.0, 1.0, 0.0,       //
      0.0, 0.0, -1.0;
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  for (int piece = 0; piece < 4; ++piece)
    for (int i = 0; i < g.size(); ++i)
      for (int j = 0; j < g.size(); ++j) {
        const double s1 = g.x[i], s2 = g.x[j];
        Eigen::Vector3d p;
        double jac;
        switch (piece) {
        case 0: p << s1, 1.0 - s1, s2; jac = 1.0; break;
        case 1: p << s1, (1.0 - s1) * s2, 1.0; jac = 1.0 - s1; break;
        case 2: p << -s1, 1.0, (1.0 - s1) * s2; jac = 1.0 - s1; break;
        default: p << -s1, s2, 1.0 - s1; jac = 1.0; break;
        }
        const Point r = e * p[0] + qt * p[1] - qtp * p[2];
        const Eigen::Vector4d d = coef * p;
        m += (g.w[i] * g.w[j] * jac * std::pow(r.norm(), -2.0 - 2.0 * s)) * (d * d.transpose());
      }
  return m * (jac_t * jac_tp / ((3.0 - 2.0 * s) * (4.0 - 2.0 * s)));
}

/// Triangles (p, a, b) and (p, a', b') sharing only the vertex p.
/// Nodes: (p, a, b, a', b').
///
/// In reference coordinates relative to p the pair is a cone over the faces {a_x + b_x = 1} and
/// {a_y + b_y = 1}; the radial integral is int_0^1 xi^{3-2s} = 1/(4-2s).
inline Eigen::Matrix<double, 5, 5> triangle_vertex(const Triangle& t, const Triangle& tp, double s,
                                                   const GaussRule& g) {
  Eigen::Matrix<double, 5, 5> m = Eigen::Matrix<double, 5, 5>::Zero();
  for (int piece = 0; piece < 2; ++piece)
    for (int i = 0; i < g.size(); ++i)
      for (int j = 0; j < g.size(); ++j)
        for (int k = 0; k < g.size(); ++k) {
          const double tt = g.x[i], w = g.x[j], v = g.x[k];
          Eigen::Vector2d face(tt, 1.0 - tt);
          Eigen::Vector2d inner(w, (1.0 - w) * v);
          const Eigen::Vector2d& xh = piece == 0 ? face : inner;
          const Eigen::Vector2d& yh = piece == 0 ? inner : face;
          const Point r = t.b * xh - tp.b * yh;
          Eigen::Matrix<double, 5, 1> d;
          d << -xh.sum() + yh.sum(), xh[0], xh[1], -yh[0], -yh[1];
          m += (g.w[i] * g.w[j] * g.w[k] * (1.0 - w) * std::pow(r.norm(), -2.0 - 2.0 * s)) *
               (d * d.transpose());
        }
  return m * (t.jac * tp.jac / (4.0 - 2.0 * s));
}

/// Smallest angle between the edge rays of two triangles sharing the vertex p0.
inline double cone_gap(const Triangle& t, const Triangle& tp) {
  double g = pi;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const Point u = t.b.col(i), v = tp.b.col(j);
      g = std::min(g, std::atan2(std::abs(u.x() * v.y() - u.y() * v.x()), u.dot(v)));
    }
  return g;
}

/// Disjoint triangles with collapsed tensor rules. Nodes: (t0, t1, t2, t'0, t'1, t'2).
inline Eigen::Matrix<double, 6, 6> triangle_disjoint(const Triangle& t, const Triangle& tp, double s,
                                                     const TriangleRule& rule) {
  const int n = rule.size();
  Eigen::MatrixXd lambda(n, 3);
  std::vector<Point> xs(n), ys(n);
  for (int p = 0; p < n; ++p) {
    lambda(p, 0) = 1.0 - rule.a[p] - rule.b[p];
    lambda(p, 1) = rule.a[p];
    lambda(p, 2) = rule.b[p];
    xs[p] = t.map(rule.a[p], rule.b[p]);
    ys[p] = tp.map(rule.a[p], rule.b[p]);
  }
  Eigen::MatrixXd k(n, n);
  const double expo = -1.0 - s; // on squared distance
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q)
      k(p, q) = rule.w[p] * rule.w[q] * std::pow((xs[p] - ys[q]).squaredNorm(), expo);
  const Eigen::VectorXd rows = k.rowwise().sum();
  const Eigen::VectorXd cols = k.colwise().sum().transpose();
  Eigen::Matrix<double, 6, 6> m;
  m.block<3, 3>(0, 0) = lambda.transpose() * rows.asDiagonal() * lambda;
  m.block<3, 3>(3, 3) = lambda.transpose() * cols.asDiagonal() * lambda;
  m.block<3, 3>(0, 3) = -lambda.transpose() * k * lambda;
  m.block<3, 3>(3, 0) = m.block<3, 3>(0, 3).transpose();
  return m * (t.jac * tp.jac);
}

/// Distance between two triangles (minimum over vertex-edge distances).
inline double triangle_distance(const std::array<Point, 3>& a, const std::array<Point, 3>& b) {
  auto seg = [](const Point& p, const Point& u, const Point& v) {
    const Point e = v - u;
    const double t = std::clamp((p - u).dot(e) / e.squaredNorm(), 0.0, 1.0);
    return (p - (u + t * e)).norm();
  };
  double d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      d = std::min(d, seg(a[i], b[j], b[(j + 1) % 3]));
      d = std::min(d, seg(b[i], a[j], a[(j + 1) % 3]));
    }
  return d;
}

} // namespace fraqmap::pairs
