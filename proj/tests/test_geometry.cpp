#include <gtest/gtest.h>

#include <sstream>

#include "fraqmap/fem.hpp"
#include "fraqmap/geometry.hpp"
#include "fraqmap/io.hpp"
#include "fraqmap/rng.hpp"

using namespace fraqmap;

namespace {

SimplicialMesh unit_square_two_triangles() {
  std::vector<Point> v{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  std::vector<NodeClass> c(4, NodeClass::interior);
  return SimplicialMesh(2, v, c, {{0, 1, 2}, {0, 2, 3}});
}

NodalField random_field(int nodes, int n, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Eigen::MatrixXd m(nodes, n);
  for (int i = 0; i < nodes; ++i)
    for (int c = 0; c < n; ++c) m(i, c) = rng.normal();
  return NodalField(m);
}

} // namespace

TEST(PeriodicGrid, NodesAndSpacing) {
  PeriodicGrid g(8);
  EXPECT_DOUBLE_EQ(g.spacing(), 2 * pi / 8);
  for (int j = 1; j < 8; ++j) EXPECT_GT(g.node(j), g.node(j - 1));
  EXPECT_THROW(PeriodicGrid(7), InputError);
  EXPECT_THROW(PeriodicGrid(2), InputError);
}

TEST(SimplicialMesh, RejectsDegenerateAndNonConforming) {
  std::vector<Point> v{{0, 0}, {1, 0}, {2, 0}};
  std::vector<NodeClass> c(3, NodeClass::interior);
  EXPECT_THROW(SimplicialMesh(2, v, c, {{0, 1, 2}}), InputError);
  // vertex 4 hangs on the edge (0, 1) of the first triangle
  std::vector<Point> w{{0, 0}, {2, 0}, {0, 2}, {0, -1}, {1, 0}};
  std::vector<NodeClass> cw(5, NodeClass::interior);
  EXPECT_THROW(SimplicialMesh(2, w, cw, {{0, 1, 2}, {0, 3, 4}}), InputError);
  EXPECT_THROW(SimplicialMesh(2, v, c, {{0, 1, 5}}), InputError);
}

TEST(SimplicialMesh, QualityMeasures) {
  const auto m = unit_square_two_triangles();
  EXPECT_NEAR(m.h_max(), std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(m.shape_regularity(), 4.0, 1e-14);
  EXPECT_EQ(m.boundary_facets().size(), 4u);
  const auto line = SimplicialMesh::extended_interval(-1.5, 1.5, -0.5, 0.5, 6);
  EXPECT_EQ(line.node_class(0), NodeClass::outer_boundary);
  EXPECT_EQ(line.node_class(2), NodeClass::exterior);
  EXPECT_EQ(line.node_class(3), NodeClass::interior);
  EXPECT_FALSE(line.is_free(6));
}

TEST(LumpedWeights, TorusWeightsArePiOverTwo) {
  const auto w = lumped_weights(PeriodicGrid(4));
  for (int z = 0; z < 4; ++z) EXPECT_NEAR(w.weights[z], pi / 2, 1e-15);
}

TEST(LumpedWeights, IntervalTwoCells) {
  const auto w = lumped_weights(SimplicialMesh::interval(0, 1, 2), LumpedMass::Region::whole);
  EXPECT_NEAR(w.weights[0], 0.25, 1e-15);
  EXPECT_NEAR(w.weights[1], 0.5, 1e-15);
  EXPECT_NEAR(w.weights[2], 0.25, 1e-15);
}

TEST(LumpedWeights, SquareMatchesPerTriangleIntegration) {
  const auto m = unit_square_two_triangles();
  const auto w = lumped_weights(m, LumpedMass::Region::whole);
  // vertices 0 and 2 touch both triangles of area 1/2
  EXPECT_NEAR(w.weights[0], 1.0 / 3, 1e-15);
  EXPECT_NEAR(w.weights[1], 1.0 / 6, 1e-15);
  EXPECT_NEAR(w.weights[2], 1.0 / 3, 1e-15);
  EXPECT_NEAR(w.weights[3], 1.0 / 6, 1e-15);
}

TEST(LumpedWeights, PartitionOfUnity) {
  const auto m = io::read_mesh(std::filesystem::path(FRAQMAP_DATA_DIR "/meshes/square_h0.2.mesh"));
  const auto w = lumped_weights(m, LumpedMass::Region::whole);
  EXPECT_NEAR(w.weights.sum(), m.total_measure(), 1e-12 * m.total_measure());
  EXPECT_GT(w.weights.minCoeff(), 0.0);
}

TEST(LumpedInner, ConstantsAndOrthogonality) {
  PeriodicGrid g(8);
  const auto w = lumped_weights(g);
  NodalField one(Eigen::MatrixXd::Ones(8, 1));
  EXPECT_NEAR(lumped_inner(one, one, w), 2 * pi, 1e-14);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(8, 2), b = Eigen::MatrixXd::Zero(8, 2);
  a.col(0).setOnes();
  b.col(1).setConstant(3.0);
  EXPECT_EQ(lumped_inner(NodalField(a), NodalField(b), w), 0.0);
}

TEST(LumpedInner, MatchesDirectSumAndIsSymmetric) {
  PeriodicGrid g(16);
  const auto w = lumped_weights(g);
  const auto y = random_field(16, 3, 1), v = random_field(16, 3, 2);
  double direct = 0.0;
  for (int z = 0; z < 16; ++z)
    for (int c = 0; c < 3; ++c) direct += g.spacing() * y(z, c) * v(z, c);
  EXPECT_NEAR(lumped_inner(y, v, w), direct, 1e-14 * std::abs(direct));
  EXPECT_EQ(lumped_inner(y, v, w), lumped_inner(v, y, w));
  EXPECT_GT(lumped_inner(y, y, w), 0.0);
  EXPECT_THROW(lumped_inner(y, random_field(8, 3, 1), w), InputError);
}

TEST(DiscreteNorm, Examples) {
  PeriodicGrid g(12);
  const auto w = lumped_weights(g);
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(12, 3);
  e.col(2).setOnes();
  EXPECT_NEAR(discrete_lp_norm(NodalField(e), 2.0, w), std::sqrt(2 * pi), 1e-14);
  Eigen::MatrixXd single = Eigen::MatrixXd::Zero(12, 2);
  single.row(5) << 3.0, 4.0;
  EXPECT_NEAR(discrete_lp_norm(NodalField(single), 1.0, w), g.spacing() * 5.0, 1e-15);
  const auto r = random_field(12, 3, 9);
  EXPECT_NEAR(discrete_lp_norm(r, 2.0, w), std::sqrt(lumped_inner(r, r, w)), 1e-14);
  EXPECT_THROW(discrete_lp_norm(r, 0.5, w), InputError);
}

TEST(DiscreteNorm, OmegaRegionCountsInteriorNodesOnly) {
  const auto m = SimplicialMesh::extended_interval(-1.5, 1.5, -0.5, 0.5, 6);
  const auto w = lumped_weights(m);
  Eigen::MatrixXd v = Eigen::MatrixXd::Ones(7, 1);
  // only x = 0 is interior, with weight h = 0.5
  EXPECT_NEAR(discrete_lp_norm(NodalField(v), 1.0, w), 0.5, 1e-15);
}

TEST(UnitViolation, Examples) {
  PeriodicGrid g(10);
  const auto w = lumped_weights(g);
  Eigen::MatrixXd u = Eigen::MatrixXd::Zero(10, 3);
  u.col(0).setOnes();
  EXPECT_EQ(unit_violation(NodalField(u), w), 0.0);
  EXPECT_NEAR(unit_violation(NodalField(Eigen::MatrixXd(2.0 * u)), w), 6 * pi, 1e-13);
}

TEST(ProjectSphere, ExamplesAndIdempotence) {
  Eigen::MatrixXd v(3, 3);
  v << 0, 0, 2, 3, 4, 0, 1, 0, 0;
  const auto p = project_sphere(NodalField(v));
  EXPECT_NEAR((p.at(0) - Eigen::RowVector3d(0, 0, 1)).norm(), 0.0, 1e-16);
  EXPECT_NEAR((p.at(1) - Eigen::RowVector3d(0.6, 0.8, 0)).norm(), 0.0, 1e-16);
  EXPECT_EQ(p.at(2), Eigen::RowVector3d(1, 0, 0));
  const auto r = project_sphere(random_field(50, 3, 4));
  EXPECT_LT((project_sphere(r).values() - r.values()).cwiseAbs().maxCoeff(), 1e-15);
  Eigen::MatrixXd z = Eigen::MatrixXd::Ones(4, 2);
  z.row(2).setZero();
  try {
    project_sphere(NodalField(z));
    FAIL() << "zero node accepted";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find('2'), std::string::npos);
  }
}

TEST(NodalInterpolation, AffineAndExactAtNodes) {
  const auto m = unit_square_two_triangles();
  auto f = [](const Point& p) { return Eigen::Vector2d(1 + 2 * p.x() - p.y(), p.y()); };
  const auto u = nodal_interpolation(f, m);
  for (int c = 0; c < m.num_cells(); ++c) {
    Point bary = Point::Zero();
    Eigen::Vector2d avg = Eigen::Vector2d::Zero();
    for (int v : m.cell(c)) {
      bary += m.vertex(v) / 3.0;
      avg += u.at(v).transpose() / 3.0;
    }
    EXPECT_NEAR((avg - f(bary)).norm(), 0.0, 1e-15);
  }
  PeriodicGrid g(32);
  const auto s = nodal_interpolation([](double x) { return Eigen::VectorXd::Constant(1, std::sin(x)); }, g);
  for (int j = 0; j < 32; ++j) EXPECT_EQ(s(j, 0), std::sin(g.node(j)));
}

TEST(NodalInterpolation, ExteriorOnlyLeavesInteriorUntouched) {
  const auto m = SimplicialMesh::extended_interval(-1.5, 1.5, -0.5, 0.5, 6);
  NodalField base(Eigen::MatrixXd::Constant(7, 1, 7.0));
  const auto u = interpolate_on_class(base, m, NodeClass::exterior,
                                      [](const Point& p) { return Eigen::VectorXd::Constant(1, p.x()); });
  EXPECT_EQ(u(3, 0), 7.0);
  EXPECT_EQ(u(2, 0), -0.5);
  EXPECT_EQ(u(0, 0), 7.0);
}

TEST(LumpedNorm, EquivalentToL2AcrossRefinements) {
  double lo = 1e300, hi = 0.0;
  for (int n : {8, 16, 32}) {
    const auto m = SimplicialMesh::interval(0, 1, n);
    const auto w = lumped_weights(m, LumpedMass::Region::whole);
    const Eigen::MatrixXd mass = consistent_mass(m);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
      const auto v = random_field(n + 1, 1, seed);
      const double l2 = std::sqrt(v.values().col(0).dot(mass * v.values().col(0)));
      const double ratio = discrete_lp_norm(v, 2.0, w) / l2;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
  }
  // for P1 in 1D the spectrum of M_lumped^{-1} M lies in [1/3, 1]
  EXPECT_GE(lo, 1.0 - 1e-12);
  EXPECT_LE(hi, std::sqrt(3.0) + 1e-12);
}

TEST(MeshIo, RoundTripAndMalformedInput) {
  const auto m = SimplicialMesh::extended_interval(-1.5, 1.5, -0.5, 0.5, 6);
  std::stringstream ss;
  io::write_mesh(ss, m);
  const auto back = io::read_mesh(ss);
  ASSERT_EQ(back.num_vertices(), m.num_vertices());
  for (int i = 0; i < m.num_vertices(); ++i) {
    EXPECT_EQ(back.vertex(i), m.vertex(i));
    EXPECT_EQ(back.node_class(i), m.node_class(i));
  }
  std::stringstream bad("2 3 1\n0 0 0\n1 0 5\n0 1 0\n0 1 2\n");
  EXPECT_THROW(io::read_mesh(bad), InputError);
  std::stringstream truncated("1 3 2\n0 0\n1 0\n");
  EXPECT_THROW(io::read_mesh(truncated), InputError);
}

TEST(FieldIo, CsvRoundTripIsExact) {
  const auto f = random_field(9, 3, 12);
  std::stringstream ss;
  io::write_field_csv(ss, f);
  EXPECT_EQ(ss.str().substr(0, 9), "u1,u2,u3\n");
  EXPECT_EQ(io::read_field_csv(ss).values(), f.values());
}

TEST(SplitMix64, ReferenceStreamAndDeterminism) {
  // published first output of SplitMix64 seeded with 0
  SplitMix64 a(0);
  EXPECT_EQ(a.next(), 0xE220A8397B1DCDAFULL);
  SplitMix64 b(42), c(42);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(b.normal(), c.normal());
}
