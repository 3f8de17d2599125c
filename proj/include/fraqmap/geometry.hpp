#pragma once

// Spatial discretizations (periodic grid, simplicial meshes in 1D/2D),
// nodal vector fields, and the lumped-mass quadrature behind the discrete
// L^p_h norms.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "fraqmap/core.hpp"

namespace fraqmap {

/// Uniform grid x_j = j*2pi/M on the torus [0, 2pi).
class PeriodicGrid {
public:
  explicit PeriodicGrid(int m) : m_(m) {
    require(m >= 4 && m % 2 == 0, "periodic grid needs an even M >= 4, got ", m);
  }

  int size() const { return m_; }
  double spacing() const { return 2.0 * pi / m_; }
  double node(int j) const { return j * spacing(); }
  double length() const { return 2.0 * pi; }

  bool operator==(const PeriodicGrid&) const = default;

private:
  int m_;
};

enum class NodeClass : int {
  interior = 0,       ///< node of Omega where the unit-length constraint is imposed
  exterior = 1,       ///< node of the extension ring carrying Dirichlet data
  outer_boundary = 2, ///< node on the boundary of the extended domain, fixed to zero
};

/// Conforming mesh of intervals (d = 1) or triangles (d = 2) with per-vertex
/// classes. In 1D the y coordinate of every vertex is zero.
class SimplicialMesh {
public:
  using Cell = std::array<int, 3>;

  SimplicialMesh(int dim, std::vector<Point> vertices, std::vector<NodeClass> classes,
                 std::vector<Cell> cells)
      : dim_(dim), vertices_(std::move(vertices)), classes_(std::move(classes)),
        cells_(std::move(cells)) {
    require(dim_ == 1 || dim_ == 2, "mesh dimension must be 1 or 2, got ", dim_);
    require(classes_.size() == vertices_.size(), "one node class per vertex required");
    require(!cells_.empty(), "mesh has no cells");
    const int nv = static_cast<int>(vertices_.size());
    measures_.reserve(cells_.size());
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      auto& cell = cells_[c];
      if (dim_ == 1) cell[2] = -1;
      for (int k = 0; k <= dim_; ++k)
        require(cell[k] >= 0 && cell[k] < nv, "cell ", c, " references vertex ", cell[k],
                " outside [0, ", nv, ")");
      const double m = signed_measure(c);
      require(std::abs(m) > 0.0, "cell ", c, " is degenerate (zero measure)");
      // orient every cell positively
      if (m < 0.0) std::swap(cell[0], cell[1]);
      measures_.push_back(std::abs(m));
    }
    check_conforming();
    compute_quality();
  }

  int dim() const { return dim_; }
  int num_vertices() const { return static_cast<int>(vertices_.size()); }
  int num_cells() const { return static_cast<int>(cells_.size()); }
  const Point& vertex(int i) const { return vertices_[i]; }
  const std::vector<Point>& vertices() const { return vertices_; }
  NodeClass node_class(int i) const { return classes_[i]; }
  const std::vector<NodeClass>& node_classes() const { return classes_; }
  std::span<const int> cell(int c) const { return {cells_[c].data(), std::size_t(dim_ + 1)}; }
  double cell_measure(int c) const { return measures_[c]; }
  double h_max() const { return h_max_; }
  /// max over cells of diam^d / |T| (1 in 1D).
  double shape_regularity() const { return shape_regularity_; }

  bool is_free(int i) const { return classes_[i] != NodeClass::outer_boundary; }

  double total_measure() const {
    double m = 0.0;
    for (double v : measures_) m += v;
    return m;
  }

  double cell_diameter(int c) const {
    auto v = cell(c);
    double d = 0.0;
    for (int a = 0; a <= dim_; ++a)
      for (int b = a + 1; b <= dim_; ++b) d = std::max(d, (vertices_[v[a]] - vertices_[v[b]]).norm());
    return d;
  }

  /// Facets lying on exactly one cell (end points in 1D, edges in 2D), as vertex index pairs.
  /// In 1D the second index repeats the first.
  std::vector<std::array<int, 2>> boundary_facets() const {
    std::vector<std::array<int, 2>> out;
    for (const auto& [key, count] : facet_counts())
      if (count == 1) out.push_back(key);
    return out;
  }

  /// Uniform partition of [a, b]; end points are outer-boundary nodes, all others interior.
  static SimplicialMesh interval(double a, double b, int n) {
    return extended_interval(a, b, a, b, n);
  }

  /// Uniform partition of (lo, hi) with Omega = (omega_lo, omega_hi): nodes strictly inside
  /// Omega are interior, the remaining ones exterior, and the two end points outer boundary.
  static SimplicialMesh extended_interval(double lo, double hi, double omega_lo, double omega_hi,
                                          int n) {
    require(n >= 1 && hi > lo, "invalid interval mesh request");
    std::vector<Point> v;
    std::vector<NodeClass> cls;
    std::vector<Cell> cells;
    const double h = (hi - lo) / n;
    const double eps = 1e-12 * (hi - lo);
    for (int i = 0; i <= n; ++i) {
      const double x = (i == n) ? hi : lo + i * h;
      v.emplace_back(x, 0.0);
      if (i == 0 || i == n)
        cls.push_back(NodeClass::outer_boundary);
      else if (x > omega_lo + eps && x < omega_hi - eps)
        cls.push_back(NodeClass::interior);
      else
        cls.push_back(NodeClass::exterior);
    }
    for (int i = 0; i < n; ++i) cells.push_back({i, i + 1, -1});
    return SimplicialMesh(1, std::move(v), std::move(cls), std::move(cells));
  }

private:
  double signed_measure(std::size_t c) const {
    const auto& cell = cells_[c];
    const Point& a = vertices_[cell[0]];
    const Point& b = vertices_[cell[1]];
    if (dim_ == 1) return b.x() - a.x();
    const Point& p = vertices_[cell[2]];
    return 0.5 * ((b - a).x() * (p - a).y() - (b - a).y() * (p - a).x());
  }

  std::map<std::array<int, 2>, int> facet_counts() const {
    std::map<std::array<int, 2>, int> counts;
    for (const auto& cell : cells_) {
      if (dim_ == 1) {
        for (int k = 0; k < 2; ++k) ++counts[{cell[k], cell[k]}];
      } else {
        for (int k = 0; k < 3; ++k) {
          int a = cell[k], b = cell[(k + 1) % 3];
          if (a > b) std::swap(a, b);
          ++counts[{a, b}];
        }
      }
    }
    return counts;
  }

  void check_conforming() const {
    const auto counts = facet_counts();
    for (const auto& [key, count] : counts)
      require(count <= 2, "non-conforming mesh: facet (", key[0], ", ", key[1], ") shared by ",
              count, " cells");
    if (dim_ == 1) {
      // intervals may not overlap
      std::vector<std::pair<double, double>> iv;
      for (const auto& cell : cells_) iv.emplace_back(vertices_[cell[0]].x(), vertices_[cell[1]].x());
      std::sort(iv.begin(), iv.end());
      for (std::size_t i = 1; i < iv.size(); ++i)
        require(iv[i].first >= iv[i - 1].second - 1e-14 * std::abs(iv[i - 1].second),
                "non-conforming mesh: overlapping intervals");
      return;
    }
    // hanging nodes: a vertex in the relative interior of a boundary edge
    std::vector<char> used(vertices_.size(), 0);
    for (const auto& cell : cells_)
      for (int k = 0; k < 3; ++k) used[cell[k]] = 1;
    for (const auto& [key, count] : counts) {
      if (count != 1) continue;
      const Point& a = vertices_[key[0]];
      const Point& b = vertices_[key[1]];
      const Point e = b - a;
      const double len2 = e.squaredNorm();
      for (int i = 0; i < num_vertices(); ++i) {
        if (!used[i] || i == key[0] || i == key[1]) continue;
        const Point q = vertices_[i] - a;
        const double t = q.dot(e) / len2;
        if (t <= 1e-10 || t >= 1.0 - 1e-10) continue;
        const double cross = e.x() * q.y() - e.y() * q.x();
        require(std::abs(cross) > 1e-10 * len2, "non-conforming mesh: vertex ", i,
                " hangs on edge (", key[0], ", ", key[1], ")");
      }
    }
  }

  void compute_quality() {
    h_max_ = 0.0;
    shape_regularity_ = 1.0;
    for (int c = 0; c < num_cells(); ++c) {
      const double d = cell_diameter(c);
      h_max_ = std::max(h_max_, d);
      if (dim_ == 2) shape_regularity_ = std::max(shape_regularity_, d * d / measures_[c]);
    }
  }

  int dim_;
  std::vector<Point> vertices_;
  std::vector<NodeClass> classes_;
  std::vector<Cell> cells_;
  std::vector<double> measures_;
  double h_max_ = 0.0;
  double shape_regularity_ = 1.0;
};

/// Vector-valued values at the nodes of a grid or mesh; row z holds the value at node z.
class NodalField {
public:
  NodalField() = default;
  NodalField(int nodes, int n) : values_(Eigen::MatrixXd::Zero(nodes, n)) {}
  explicit NodalField(Eigen::MatrixXd values) : values_(std::move(values)) {
    require(values_.allFinite(), "nodal field has non-finite entries");
  }

  int size() const { return static_cast<int>(values_.rows()); }
  int components() const { return static_cast<int>(values_.cols()); }
  const Eigen::MatrixXd& values() const { return values_; }
  auto at(int z) const { return values_.row(z); }
  double operator()(int z, int c) const { return values_(z, c); }

  /// Column c as a scalar field.
  NodalField component(int c) const { return NodalField(Eigen::MatrixXd(values_.col(c))); }

  friend NodalField operator+(const NodalField& a, const NodalField& b) {
    check_same(a, b);
    return NodalField(Eigen::MatrixXd(a.values_ + b.values_));
  }
  friend NodalField operator-(const NodalField& a, const NodalField& b) {
    check_same(a, b);
    return NodalField(Eigen::MatrixXd(a.values_ - b.values_));
  }
  friend NodalField operator*(double s, const NodalField& a) {
    return NodalField(Eigen::MatrixXd(s * a.values_));
  }

  static void check_same(const NodalField& a, const NodalField& b) {
    require(a.size() == b.size() && a.components() == b.components(),
            "nodal field mismatch: ", a.size(), "x", a.components(), " vs ", b.size(), "x",
            b.components());
  }

private:
  Eigen::MatrixXd values_;
};

/// Lumped-mass weights beta_z = int phi_z dx. The weights of every node are the integrals over
/// the whole meshed domain; `counted` marks the nodes entering the discrete norms (the nodes of
/// Omega when the mesh distinguishes classes).
struct LumpedMass {
  enum class Region { whole, omega };

  Eigen::VectorXd weights;
  std::vector<char> counted;
  Region region = Region::whole;

  int size() const { return static_cast<int>(weights.size()); }
  double measure() const {
    double m = 0.0;
    for (int z = 0; z < size(); ++z)
      if (counted[z]) m += weights[z];
    return m;
  }
};

inline LumpedMass lumped_weights(const PeriodicGrid& grid) {
  LumpedMass w;
  w.weights = Eigen::VectorXd::Constant(grid.size(), grid.spacing());
  w.counted.assign(grid.size(), 1);
  return w;
}

/// Exact P1 hat integrals: each cell contributes |T|/(d+1) to each of its vertices.
/// With Region::omega only interior nodes are counted in norms; their weights coincide with the
/// integrals over Omega because their supports lie in Omega.
inline LumpedMass lumped_weights(const SimplicialMesh& mesh,
                                 LumpedMass::Region region = LumpedMass::Region::omega) {
  LumpedMass w;
  w.region = region;
  w.weights = Eigen::VectorXd::Zero(mesh.num_vertices());
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const double share = mesh.cell_measure(c) / (mesh.dim() + 1);
    for (int v : mesh.cell(c)) w.weights[v] += share;
  }
  w.counted.assign(mesh.num_vertices(), 1);
  if (region == LumpedMass::Region::omega) {
    bool any_interior = false;
    for (int z = 0; z < mesh.num_vertices(); ++z)
      any_interior |= mesh.node_class(z) == NodeClass::interior;
    if (any_interior)
      for (int z = 0; z < mesh.num_vertices(); ++z)
        w.counted[z] = mesh.node_class(z) == NodeClass::interior;
  }
  return w;
}

inline void check_compatible(const NodalField& v, const LumpedMass& w) {
  require(v.size() == w.size(), "field has ", v.size(), " nodes but weights cover ", w.size());
}

/// (y, v)_h = sum_z beta_z y(z).v(z) over the counted nodes.
inline double lumped_inner(const NodalField& y, const NodalField& v, const LumpedMass& w) {
  NodalField::check_same(y, v);
  check_compatible(y, w);
  double s = 0.0;
  for (int z = 0; z < y.size(); ++z)
    if (w.counted[z]) s += w.weights[z] * y.at(z).dot(v.at(z));
  return s;
}

inline double discrete_lp_norm(const NodalField& v, double p, const LumpedMass& w) {
  require(p >= 1.0, "discrete L^p norm needs p >= 1, got ", p);
  check_compatible(v, w);
  double s = 0.0;
  for (int z = 0; z < v.size(); ++z)
    if (w.counted[z]) s += w.weights[z] * std::pow(v.at(z).norm(), p);
  return std::pow(s, 1.0 / p);
}

/// sum_z beta_z | |u(z)|^2 - 1 | over the counted nodes.
inline double unit_violation(const NodalField& u, const LumpedMass& w) {
  check_compatible(u, w);
  double s = 0.0;
  for (int z = 0; z < u.size(); ++z)
    if (w.counted[z]) s += w.weights[z] * std::abs(u.at(z).squaredNorm() - 1.0);
  return s;
}

inline NodalField project_sphere(const NodalField& v) {
  Eigen::MatrixXd out = v.values();
  for (int z = 0; z < v.size(); ++z) {
    const double n = out.row(z).norm();
    require(n > 0.0, "cannot project zero vector at node ", z, " onto the sphere");
    out.row(z) /= n;
  }
  return NodalField(std::move(out));
}

/// I_h f on a mesh: f is evaluated at every vertex.
template <class F>
NodalField nodal_interpolation(F&& f, const SimplicialMesh& mesh) {
  Eigen::VectorXd first = f(mesh.vertex(0));
  Eigen::MatrixXd out(mesh.num_vertices(), first.size());
  out.row(0) = first.transpose();
  for (int z = 1; z < mesh.num_vertices(); ++z) out.row(z) = Eigen::VectorXd(f(mesh.vertex(z))).transpose();
  return NodalField(std::move(out));
}

template <class F>
NodalField nodal_interpolation(F&& f, const PeriodicGrid& grid) {
  Eigen::VectorXd first = f(grid.node(0));
  Eigen::MatrixXd out(grid.size(), first.size());
  out.row(0) = first.transpose();
  for (int j = 1; j < grid.size(); ++j) out.row(j) = Eigen::VectorXd(f(grid.node(j))).transpose();
  return NodalField(std::move(out));
}

/// Overwrites the nodes of class `cls` in `base` with f(z); all other nodes are untouched.
template <class F>
NodalField interpolate_on_class(const NodalField& base, const SimplicialMesh& mesh, NodeClass cls,
                                F&& f) {
  require(base.size() == mesh.num_vertices(), "field does not live on this mesh");
  Eigen::MatrixXd out = base.values();
  for (int z = 0; z < mesh.num_vertices(); ++z) {
    if (mesh.node_class(z) != cls) continue;
    Eigen::VectorXd val = f(mesh.vertex(z));
    require(val.size() == base.components(), "interpolated value has wrong dimension");
    out.row(z) = val.transpose();
  }
  return NodalField(std::move(out));
}

} // namespace fraqmap
