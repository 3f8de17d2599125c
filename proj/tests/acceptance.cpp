// Acceptance checks, one PASS/FAIL line per criterion. Exit status is the number of failures.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fraqmap/experiment.hpp"
#include "fraqmap/fem.hpp"
#include "fraqmap/heatflow.hpp"
#include "fraqmap/oracle.hpp"
#include "fraqmap/rng.hpp"
#include "fraqmap/spectral.hpp"
#include "fraqmap/spin.hpp"

using namespace fraqmap;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [violated: " << what << "]";
    }
  }
};

int failures = 0;

void criterion(int id, const std::string& title, double budget_s, const std::function<void(Verdict&)>& body) {
  Verdict v;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(v);
  } catch (const std::exception& e) {
    v.check(false, std::string("exception: ") + e.what());
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.check(dt < budget_s, "runtime budget " + io::fmt(budget_s) + " s");
  failures += !v.pass;
  std::printf("%s criterion %d (%s): %s time=%.2fs\n", v.pass ? "PASS" : "FAIL", id, title.c_str(),
              v.detail.str().c_str(), dt);
  std::fflush(stdout);
}

Json run(const std::string& experiment, const Json& file, const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("fraqmap_acceptance_" + tag);
  fs::remove_all(dir);
  std::ostringstream log;
  const Json cfg = resolve_config(experiment, file);
  run_experiment(cfg, dir, false, {}, log);
  std::ifstream in(dir / "summary.json");
  return Json::parse(in);
}

NodalField scalar(const PeriodicGrid& g, const std::function<double(double)>& f) {
  return nodal_interpolation([&](double x) { return Eigen::VectorXd::Constant(1, f(x)); }, g);
}

NodalField random_trig(const PeriodicGrid& g, int degree, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<double> a(2 * degree + 1);
  for (double& x : a) x = rng.normal();
  return scalar(g, [&](double x) {
    double v = 0.0;
    for (int k = 1; k <= degree; ++k) v += a[2 * k - 1] * std::cos(k * x) + a[2 * k] * std::sin(k * x);
    return v;
  });
}

double max_rel_to_oracle(const SimplicialMesh& mesh, const FracStiffness& a, const Eigen::MatrixXd& ref) {
  const auto idx = oracle::detail::free_nodes(mesh);
  double e = 0.0;
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j)
      e = std::max(e, std::abs(a.matrix(idx[i], idx[j]) - ref(i, j)) / std::abs(ref(i, j)));
  return e;
}

std::string label(double x) {
  std::ostringstream o;
  o << x;
  return o.str();
}

} // namespace

int main() {
  const std::string data = FRAQMAP_DATA_DIR;

  criterion(1, "spectral multiplier exactness", 1.0, [](Verdict& v) {
    const PeriodicGrid g(64);
    double worst = 0.0;
    for (double s : {0.1, 0.3, 0.5, 0.7, 0.9})
      for (int k = 1; k <= 31; ++k) {
        const auto phi = scalar(g, [&](double x) { return std::cos(k * x) + 0.5 * std::sin(k * x); });
        const double lam = std::pow(double(k), 2 * s);
        const auto out = frac_laplacian_spectral(phi, g, s);
        worst = std::max(worst, (out.values() - lam * phi.values()).norm() / (lam * phi.values().norm()));
      }
    v.detail << "max_rel_err=" << worst;
    v.check(worst <= 1e-12, "relative error <= 1e-12");
  });

  Json travel32, travel64;
  criterion(2, "traveling wave conservation and convergence", 10.0, [&](Verdict& v) {
    const Json base{{"s", 0.5}, {"v", 0.5}, {"T", 4 * pi}, {"fp_tol", 1e-10}};
    Json c32 = base, c64 = base;
    c32["M"] = 32;
    c32["tau_factor"] = 0.1;
    c64["M"] = 64;
    c64["tau_factor"] = 0.05;
    travel32 = run("spin-travel", c32, "travel32");
    travel64 = run("spin-travel", c64, "travel64");
    const double drift = travel32["conservation"]["energy_drift"].get<double>();
    const double tau = travel32["resolved"]["tau"].get<double>();
    const double defect = travel32["violation"].get<double>();
    const double e0 = travel32["initial_energy"].get<double>();
    const double err32 = travel32["exact_error_linf"].get<double>(), err64 = travel64["exact_error_linf"].get<double>();
    v.detail << "drift=" << drift << " unit_defect=" << defect << " e0-3pi/4=" << e0 - 0.75 * pi
             << " err32=" << err32 << " err64=" << err64 << " ratio=" << err32 / err64;
    v.check(drift <= 1e-8, "energy drift <= 1e-8");
    v.check(defect <= 10 * tau * tau, "unit defect <= 10 tau^2");
    v.check(std::abs(e0 - 0.75 * pi) <= 1e-10, "initial energy 3pi/4");
    v.check(err32 >= 3 * err64, "error ratio >= 3");
  });

  criterion(3, "fixed-point iteration counts", 1.0, [&](Verdict& v) {
    v.check(!travel32.is_null(), "criterion 2 run available");
    const double median = travel32["median_fp_iters"].get<double>();
    const double ratio = travel32["max_contraction_ratio"].get<double>();
    v.detail << "median_iters=" << median << " max_contraction=" << ratio;
    v.check(median <= 6, "median iterations <= 6");
    v.check(ratio < 1, "contraction ratio < 1");
  });

  criterion(4, "perturbed map conservation", 120.0, [](Verdict& v) {
    std::vector<double> drift;
    for (int m : {64, 128, 256}) {
      const Json s = run("spin-perturbed", Json{{"M", m}, {"seed", 7}}, "perturbed" + std::to_string(m));
      drift.push_back(s["conservation"]["energy_drift"].get<double>());
    }
    v.detail << "drift64=" << drift[0] << " drift128=" << drift[1] << " drift256=" << drift[2];
    v.check(drift[0] <= 1e-3, "M=64 drift <= 1e-3");
    v.check(drift[1] * 2 <= drift[0] && drift[2] * 2 <= drift[1], "halving per refinement");
  });

  criterion(5, "1D heat-flow identities", 30.0, [](Verdict& v) {
    const auto mesh = SimplicialMesh::extended_interval(-1.5, 1.5, -0.5, 0.5, 60);
    const auto a = assemble_fractional_stiffness(mesh, FracParams(0.5, 1, 2));
    HeatFlowOptions opt;
    opt.tau = 2.0 * mesh.h_max();
    const auto res =
        run_heat_flow(make_random_interior(mesh, 3), a, FlowMass::build(mesh, MassKind::consistent), mesh, opt);
    const double e0 = res.trace.initial_energy();
    double identity = 0.0;
    bool telescoped = true;
    for (std::size_t k = 1; k < res.trace.rows.size(); ++k) {
      const auto& r = res.trace.rows[k];
      identity = std::max(identity, std::abs(r.identity_residual));
      telescoped = telescoped && r.energy + r.dissipation <= e0 * (1 + 1e-12);
    }
    const double violation = res.trace.rows.back().violation;
    v.detail << "steps=" << res.trace.rows.back().k << " max_identity_residual=" << identity
             << " violation=" << violation << " bound=" << 2 * opt.tau * e0;
    v.check(res.converged, "stopping criterion reached");
    v.check(identity <= 1e-8, "identity residual <= 1e-8");
    v.check(telescoped, "telescoped inequality");
    v.check(violation <= 2 * opt.tau * e0, "violation <= 2 tau e0");
  });

  for (double s : {0.2, 0.6}) {
    criterion(6, "2D defect heat flow, s=" + label(s), 300.0, [&](Verdict& v) {
      const Json sum = run("heatflow-defect", Json{{"s", s}, {"mesh", data + "/meshes/square_h0.1.mesh"}, {"h", 0.1}},
                           "defect" + label(s));
      v.detail << "steps=" << sum["steps"] << " energy " << sum["initial_energy"] << " -> " << sum["final_energy"]
               << " clusters=" << sum["defect_clusters"].size() << " (qualitative)";
      v.check(sum["converged"].get<bool>(), "stopping criterion reached");
      v.check(sum["energy_strictly_decreasing"].get<bool>(), "strictly decreasing energy");
    });
  }

  criterion(7, "FEM assembly oracle", 60.0, [&](Verdict& v) {
    double dev = 0.0, asym = 0.0, min_eig = 1e300;
    const std::vector<std::pair<SimplicialMesh, std::vector<double>>> cases{
        {io::read_mesh(fs::path(data + "/meshes/six_cells_1d.mesh")), {0.25, 0.5, 0.75}},
        {io::read_mesh(fs::path(data + "/meshes/eight_triangles.mesh")), {0.25, 0.5, 0.75}}};
    for (const auto& [mesh, orders] : cases)
      for (double s : orders) {
        const auto a = assemble_fractional_stiffness(mesh, FracParams(s, mesh.dim()));
        dev = std::max(dev, max_rel_to_oracle(mesh, a, oracle::reference_stiffness(mesh, s)));
        asym = std::max(asym, (a.matrix - a.matrix.transpose()).cwiseAbs().maxCoeff());
        min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a.matrix).eigenvalues().minCoeff());
      }
    v.detail << "max_rel_dev=" << dev << " asymmetry=" << asym << " min_eig=" << min_eig;
    v.check(dev <= 1e-6, "oracle deviation <= 1e-6");
    v.check(asym == 0.0, "exact symmetry");
    v.check(min_eig >= -1e-10, "min eigenvalue >= -1e-10");
  });

  criterion(8, "inverse-estimate exponent", 60.0, [](Verdict& v) {
    std::vector<SimplicialMesh> meshes;
    for (int n : {12, 24, 48, 96}) meshes.push_back(SimplicialMesh::extended_interval(-1.5, 1.5, -0.5, 0.5, n));
    for (double s : {0.25, 0.5, 0.75}) {
      const double e = inverse_estimate_probe(meshes, s).exponent;
      v.detail << " s=" << s << ":" << e;
      v.check(std::abs(e - s) <= 0.25, "exponent within 0.25 of s=" + io::fmt(s));
    }
  });

  criterion(9, "Dirichlet spectral operator", 5.0, [](Verdict& v) {
    const auto mesh = SimplicialMesh::interval(0.0, 1.0, 101);
    const DirichletSpectralOp op(mesh, 0.5);
    v.check(op.nodes().size() == 100u, "100 interior nodes");
    SplitMix64 rng(11);
    Eigen::MatrixXd u(102, 2);
    for (int i = 0; i < u.size(); ++i) u.data()[i] = rng.normal();
    u.row(0).setZero();
    u.row(101).setZero();
    const NodalField f(u);
    const double id = (op.apply(f, 0.0).values() - u).cwiseAbs().maxCoeff();
    const auto one = op.apply(f, 0.7);
    const double semi = (op.apply(op.apply(f, 0.4), 0.3).values() - one.values()).cwiseAbs().maxCoeff() /
                        one.values().cwiseAbs().maxCoeff();
    const auto k = op.apply(f, 1.0);
    const Eigen::MatrixXd kf = p1_laplacian(mesh);
    Eigen::MatrixXd ku(100, 2), ki(100, 2);
    for (int i = 0; i < 100; ++i) {
      ku.row(i) = kf.row(op.nodes()[i]) * u;
      ki.row(i) = k.at(op.nodes()[i]);
    }
    const double lap = (op.mass() * ki - ku).cwiseAbs().maxCoeff() / ku.cwiseAbs().maxCoeff();
    v.detail << "s0_err=" << id << " semigroup_rel=" << semi << " s1_rel=" << lap;
    v.check(id <= 1e-10, "s=0 identity");
    v.check(semi <= 1e-10, "semigroup");
    v.check(lap <= 1e-10, "s=1 recovers the P1 Laplacian");
  });

  criterion(10, "Leibniz defect", 30.0, [](Verdict& v) {
    double const_err = 0.0, worst = 0.0;
    for (int m : {32, 64, 128}) {
      const PeriodicGrid g(m);
      const auto w = lumped_weights(g);
      const auto c = scalar(g, [](double) { return 2.5; });
      const auto probe = random_trig(g, 5, 3);
      const_err = std::max(const_err, leibniz_defect(c, probe, g, 0.6).values().cwiseAbs().maxCoeff());
      for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        SplitMix64 rng(1000 + seed);
        const double a1 = rng.normal(), b1 = rng.normal(), a2 = rng.normal();
        auto phi_fn = [&](double x) { return a1 * std::cos(x) + b1 * std::sin(x) + a2 * std::cos(2 * x); };
        auto dphi_fn = [&](double x) { return -a1 * std::sin(x) + b1 * std::cos(x) - 2 * a2 * std::sin(2 * x); };
        double phi_inf = 0.0, dphi_inf = 0.0;
        for (int j = 0; j < 4096; ++j) {
          const double x = 2 * pi * j / 4096;
          phi_inf = std::max(phi_inf, std::abs(phi_fn(x)));
          dphi_inf = std::max(dphi_inf, std::abs(dphi_fn(x)));
        }
        const auto phi = scalar(g, phi_fn);
        const auto gf = random_trig(g, std::min(12, m / 4), seed);
        for (double s : {0.3, 0.5, 0.8}) {
          const double num = discrete_lp_norm(leibniz_defect(gf, phi, g, s), 2.0, w);
          const double den = (phi_inf + dphi_inf) *
                             (discrete_lp_norm(gf, 2.0, w) + discrete_lp_norm(frac_laplacian_spectral(gf, g, s / 4), 2.0, w));
          worst = std::max(worst, num / den);
        }
      }
    }
    v.detail << "constant_defect=" << const_err << " max_ratio=" << worst;
    v.check(const_err <= 1e-12, "constant defect <= 1e-12");
    v.check(worst <= 10, "ratio <= 10");
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
