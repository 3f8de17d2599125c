#include <gtest/gtest.h>

#include <sstream>

#include "fraqmap/spin.hpp"

using namespace fraqmap;

namespace {

NodalField random_unit(int nodes, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Eigen::MatrixXd u(nodes, 3);
  for (int i = 0; i < u.size(); ++i) u.data()[i] = rng.normal();
  return project_sphere(NodalField(u));
}

double max_unit_defect(const NodalField& u) {
  double d = 0.0;
  for (int z = 0; z < u.size(); ++z) d = std::max(d, std::abs(u.at(z).norm() - 1.0));
  return d;
}

} // namespace

TEST(InitialData, TravelingWave) {
  PeriodicGrid g(16);
  const auto u0 = make_traveling_wave(g, 0.0);
  for (int j = 0; j < 16; ++j) {
    EXPECT_EQ(u0(j, 0), 0.0);
    EXPECT_NEAR(u0(j, 1), std::cos(g.node(j)), 1e-15);
  }
  const auto u = make_traveling_wave(g, 0.5);
  EXPECT_LT(max_unit_defect(u), 1e-15);
  for (int j = 0; j < 16; ++j) EXPECT_EQ(u(j, 0), 0.5);
  EXPECT_THROW(make_traveling_wave(g, 1.0), InputError);
}

TEST(InitialData, PerturbedMap) {
  PeriodicGrid g(64);
  const auto h = make_perturbed_map(g, 5, 0.0);
  for (int j = 0; j < 64; ++j)
    EXPECT_LT((h.at(j) - Eigen::RowVector3d(0, std::cos(g.node(j)), std::sin(g.node(j)))).norm(), 1e-15);
  const auto p = make_perturbed_map(g, 5);
  EXPECT_LT(max_unit_defect(p), 1e-15);
  EXPECT_GT((p.values() - h.values()).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_EQ(make_perturbed_map(g, 5).values(), p.values());
  EXPECT_NE(make_perturbed_map(g, 6).values(), p.values());
  EXPECT_THROW(make_perturbed_map(g, 5, 0.6), InputError);
}

TEST(SpinStep, ReversibleUnderNegatedStep) {
  PeriodicGrid g(32);
  const auto u = make_perturbed_map(g, 2, 0.3);
  SpinConfig fwd{0.01, 1e-14, 100, SpectralBackend{g, 0.6}};
  SpinConfig bwd = fwd;
  bwd.tau = -fwd.tau;
  const auto there = spin_step(u, fwd);
  const auto back = spin_step(there.u_next, bwd);
  EXPECT_LT((back.u_next.values() - u.values()).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(SpinStep, ExactConservationOnTinyGrid) {
  PeriodicGrid g(8);
  SpinConfig cfg{0.05, 1e-13, 100, SpectralBackend{g, 0.5}};
  NodalField u = random_unit(8, 17);
  for (int k = 0; k < 20; ++k) {
    const auto st = spin_step(u, cfg);
    EXPECT_LE(std::abs(st.report.energy_after - st.report.energy_before), 1e-12);
    EXPECT_LE(st.report.unit_defect, 10 * cfg.tolerance);
    EXPECT_LT(st.report.max_ratio, 1.0);
    u = st.u_next;
  }
}

TEST(SpinStep, DefaultToleranceIsTauSquared) {
  PeriodicGrid g(32);
  SpinConfig cfg{0.02, 0.0, 100, SpectralBackend{g, 0.5}};
  EXPECT_DOUBLE_EQ(cfg.effective_tolerance(), 4e-4);
  const auto st = spin_step(make_traveling_wave(g, 0.5), cfg);
  EXPECT_LT(st.report.final_difference, 4e-4);
  EXPECT_LE(st.report.unit_defect, 10 * 4e-4);
}

TEST(SpinStep, FailuresAreReported) {
  PeriodicGrid g(64);
  const auto u = make_perturbed_map(g, 1, 0.4);
  SpinConfig huge{5.0, 1e-12, 100, SpectralBackend{g, 0.9}};
  EXPECT_THROW(spin_step(u, huge), SolverError);
  SpinConfig few{0.01, 1e-15, 1, SpectralBackend{g, 0.5}};
  EXPECT_THROW(spin_step(u, few), SolverError);
  EXPECT_THROW(spin_step(NodalField(64, 2), SpinConfig{0.01, 0, 100, SpectralBackend{g, 0.5}}), InputError);
  EXPECT_THROW(spin_step(u, SpinConfig{0.0, 0, 100, SpectralBackend{g, 0.5}}), InputError);
}

TEST(SpinRun, TravelingWaveIsSecondOrder) {
  double errs[2];
  int i = 0;
  for (int m : {32, 64}) {
    PeriodicGrid g(m);
    const double tau = g.spacing() / (m == 32 ? 10 : 20);
    const auto u0 = make_traveling_wave(g, 0.5);
    const auto res = run_spin(u0, 4 * pi, SpinConfig{tau, 1e-10, 100, SpectralBackend{g, 0.5}});
    // a shift by v T = 2 pi returns the exact solution to u0
    errs[i++] = (res.u.values() - u0.values()).cwiseAbs().maxCoeff();
    EXPECT_LE(res.trace.energy_drift(), 1e-8);
  }
  EXPECT_GE(errs[0] / errs[1], 3.0);
}

TEST(SpinRun, StepCountAndTrace) {
  EXPECT_EQ(spin_step_count(4 * pi, 2 * pi / 320), 640);
  EXPECT_EQ(spin_step_count(1.0, 0.3), 4);
  PeriodicGrid g(16);
  int calls = 0;
  const auto res = run_spin(make_traveling_wave(g, 0.2), 0.1, SpinConfig{0.025, 0, 100, SpectralBackend{g, 0.5}},
                            [&](int, const NodalField&) { ++calls; });
  EXPECT_EQ(calls, 4);
  ASSERT_EQ(res.trace.rows.size(), 5u);
  std::stringstream ss;
  res.trace.write_csv(ss);
  std::string header;
  std::getline(ss, header);
  EXPECT_EQ(header, "k,t,energy,unit_defect,fp_iters,fp_difference");
}

TEST(SpinRun, FemBackendConservesEnergyAndLength) {
  const auto mesh = SimplicialMesh::extended_interval(-1.5, 1.5, -0.5, 0.5, 24);
  const auto a = assemble_fractional_stiffness(mesh, FracParams(0.5, 1, 3));
  NodalField u = random_unit(mesh.num_vertices(), 9);
  SpinConfig cfg{0.005, 1e-13, 100, FemBackend(a, mesh)};
  const auto res = run_spin(u, 0.1, cfg);
  EXPECT_LE(res.trace.energy_drift(), 1e-10);
  EXPECT_LE(res.trace.max_unit_defect(), 1e-12);
  for (int z = 0; z < mesh.num_vertices(); ++z)
    if (mesh.node_class(z) != NodeClass::interior) {
      EXPECT_EQ(res.u.at(z), u.at(z));
    }
}

TEST(SpinRun, PerturbedMapConservesWithTightTolerance) {
  PeriodicGrid g(32);
  const auto spectral = run_spin(make_perturbed_map(g, 4), 1.0,
                                 SpinConfig{g.spacing() / 10, 1e-12, 100, SpectralBackend{g, 0.5}});
  EXPECT_LE(spectral.trace.energy_drift(), 1e-10);
  EXPECT_LT(spectral.trace.max_contraction(), 1.0);
}
