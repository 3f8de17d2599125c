#pragma once

// Experiment runner behind the command-line tool: flat JSON configuration with per-experiment
// defaults, initial data, and the on-disk artifacts (snapshots, trace, summary).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "fraqmap/fem.hpp"
#include "fraqmap/geometry.hpp"
#include "fraqmap/heatflow.hpp"
#include "fraqmap/io.hpp"
#include "fraqmap/oracle.hpp"
#include "fraqmap/rng.hpp"
#include "fraqmap/spectral.hpp"
#include "fraqmap/spin.hpp"

namespace fraqmap {

using Json = nlohmann::ordered_json;

/// Mollification radius of the radial exterior data.
inline constexpr double exterior_mollifier = 0.1;

/// x / max(|x|, rho) at every non-interior node (1D vertices are embedded as (x, 0)); interior
/// rows are copied from `base` or zero.
inline NodalField make_exterior_data(const SimplicialMesh& mesh, double rho = exterior_mollifier,
                                     const NodalField* base = nullptr) {
  require(rho >= 0.0, "mollification radius must be non-negative");
  Eigen::MatrixXd out = base ? base->values() : Eigen::MatrixXd::Zero(mesh.num_vertices(), 2);
  require(out.rows() == mesh.num_vertices() && out.cols() == 2, "exterior data needs an N = 2 field on the mesh");
  for (int z = 0; z < mesh.num_vertices(); ++z) {
    if (mesh.node_class(z) == NodeClass::interior) continue;
    const Point p = mesh.vertex(z);
    const double scale = std::max(p.norm(), rho);
    require(scale > 0.0, "exterior node ", z, " sits at the origin and no mollification was requested");
    out.row(z) = (p / scale).transpose();
  }
  return NodalField(std::move(out));
}

/// Unit vectors from normalized Gaussian samples at interior nodes (drawn in node order),
/// radial exterior data elsewhere.
inline NodalField make_random_interior(const SimplicialMesh& mesh, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(mesh.num_vertices(), 2);
  for (int z = 0; z < mesh.num_vertices(); ++z) {
    if (mesh.node_class(z) != NodeClass::interior) continue;
    Eigen::Vector2d g;
    do g = Eigen::Vector2d(rng.normal(), rng.normal());
    while (g.norm() < 1e-12);
    out.row(z) = g.normalized().transpose();
  }
  const NodalField interior(std::move(out));
  return make_exterior_data(mesh, exterior_mollifier, &interior);
}

/// Triangles around which an N = 2 field winds by a nonzero multiple of 2 pi, grouped into
/// edge-connected clusters.
struct DefectReport {
  int triangles = 0;
  std::vector<Point> cluster_centers;
  std::vector<int> cluster_degrees;
};

inline DefectReport locate_defects(const SimplicialMesh& mesh, const NodalField& u) {
  DefectReport rep;
  if (mesh.dim() != 2 || u.components() != 2) return rep;
  auto angle = [&](int z) { return std::atan2(u(z, 1), u(z, 0)); };
  auto wrap = [](double a) { return std::remainder(a, 2.0 * pi); };
  std::vector<int> degree(mesh.num_cells(), 0);
  std::vector<int> marked;
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto cell = mesh.cell(c);
    double w = 0.0;
    for (int k = 0; k < 3; ++k) w += wrap(angle(cell[(k + 1) % 3]) - angle(cell[k]));
    degree[c] = static_cast<int>(std::lround(w / (2.0 * pi)));
    if (degree[c] != 0) marked.push_back(c);
  }
  rep.triangles = static_cast<int>(marked.size());
  // union of marked cells sharing a vertex
  std::map<int, std::vector<int>> by_vertex;
  for (int c : marked)
    for (int v : mesh.cell(c)) by_vertex[v].push_back(c);
  std::set<int> seen;
  for (int c0 : marked) {
    if (seen.count(c0)) continue;
    std::vector<int> stack{c0}, members;
    seen.insert(c0);
    while (!stack.empty()) {
      const int c = stack.back();
      stack.pop_back();
      members.push_back(c);
      for (int v : mesh.cell(c))
        for (int nb : by_vertex[v])
          if (seen.insert(nb).second) stack.push_back(nb);
    }
    Point center = Point::Zero();
    int deg = 0;
    for (int c : members) {
      for (int v : mesh.cell(c)) center += mesh.vertex(v) / 3.0;
      deg += degree[c];
    }
    rep.cluster_centers.push_back(center / static_cast<double>(members.size()));
    rep.cluster_degrees.push_back(deg);
  }
  return rep;
}

// ---------------------------------------------------------------- configuration

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"spin-travel", "spin-perturbed", "heatflow-defect", "assemble-check"};
  return names;
}

/// Defaults of every accepted key; `null` marks keys that are derived when left unset.
inline Json experiment_defaults(const std::string& experiment) {
  Json j;
  j["experiment"] = experiment;
  if (experiment == "spin-travel" || experiment == "spin-perturbed") {
    const bool travel = experiment == "spin-travel";
    j["s"] = 0.5;
    j["M"] = travel ? 32 : 64;
    if (travel) j["v"] = 0.5;
    else {
      j["amplitude"] = 0.05;
      j["seed"] = 1;
    }
    j["T"] = travel ? 4.0 * pi : 4.0;
    j["tau"] = nullptr;
    j["tau_factor"] = 0.1;
    j["fp_tol"] = nullptr;
    j["fp_max_iters"] = 100;
    j["snapshot_count"] = 5;
  } else if (experiment == "heatflow-defect") {
    j["s"] = 0.6;
    j["mesh"] = "data/meshes/square_h0.1.mesh";
    j["interval_cells"] = 0;
    j["domain_radius"] = 1.5;
    j["h"] = nullptr;
    j["tau"] = nullptr;
    j["tau_factor"] = 2.0;
    j["stop_tol"] = 1e-6;
    j["stop_norm"] = "l2h";
    j["max_steps"] = 10000;
    j["mass"] = "consistent";
    j["cg_tol"] = 1e-10;
    j["seed"] = 1;
    j["snapshot_every"] = 0;
    j["quad_sing_order"] = QuadratureSpec{}.sing_order;
    j["quad_far_order"] = QuadratureSpec{}.far_order;
  } else if (experiment == "assemble-check") {
    j["s"] = 0.5;
    j["mesh"] = "data/meshes/six_cells_1d.mesh";
    j["check_tol"] = 1e-6;
    j["oracle_tol"] = 1e-11;
    j["quad_sing_order"] = QuadratureSpec{}.sing_order;
    j["quad_far_order"] = QuadratureSpec{}.far_order;
  } else {
    raise("unknown experiment '", experiment, "'");
  }
  return j;
}

namespace detail {

inline bool json_type_compatible(const Json& want, const Json& got) {
  if (want.is_null()) return got.is_null() || got.is_number();
  if (want.is_number_integer()) return got.is_number_integer();
  if (want.is_number()) return got.is_number();
  if (want.is_string()) return got.is_string();
  return want.type() == got.type();
}

inline Json parse_override_value(const std::string& text) {
  Json v = Json::parse(text, nullptr, false);
  if (v.is_discarded()) return Json(text);
  return v;
}

} // namespace detail

/// Merges defaults < file < overrides, rejecting unknown keys and mistyped values, then checks
/// ranges. Integral-valued doubles are accepted for integer keys.
inline Json resolve_config(const std::string& experiment, const Json& file,
                           const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  Json cfg = experiment_defaults(experiment);
  auto merge = [&](const std::string& key, Json value, const char* origin) {
    if (key == "experiment") {
      require(value.is_string() && value.get<std::string>() == experiment, "config key 'experiment' (", origin,
              ") names ", value.dump(), " but the command is '", experiment, "'");
      return;
    }
    if (!cfg.contains(key)) {
      if ((key == "stop_tol" || key == "max_steps") && experiment.rfind("spin", 0) == 0)
        raise("config key '", key, "' (", origin, "): spin experiments terminate at the final time T");
      if (key == "T" && experiment == "heatflow-defect")
        raise("config key 'T' (", origin, "): the heat flow terminates by stop_tol");
      raise("unknown config key '", key, "' (", origin, ") for experiment '", experiment, "'");
    }
    const Json& want = cfg[key];
    if (want.is_number_integer() && value.is_number_float() && std::floor(value.get<double>()) == value.get<double>())
      value = static_cast<std::int64_t>(value.get<double>());
    require(detail::json_type_compatible(want, value), "config key '", key, "' (", origin, ") has value ",
            value.dump(), " of the wrong type");
    cfg[key] = std::move(value);
  };
  require(file.is_object() || file.is_null(), "config file must hold a JSON object");
  if (file.is_object())
    for (const auto& [k, v] : file.items()) merge(k, v, "config file");
  for (const auto& [k, text] : overrides) merge(k, detail::parse_override_value(text), "command line");

  auto positive = [&](const char* key) {
    if (cfg.contains(key) && !cfg[key].is_null())
      require(cfg[key].get<double>() > 0.0, "config key '", key, "' must be positive, got ", cfg[key].dump());
  };
  const double s = cfg["s"].get<double>();
  require(s > 0.0 && s < 1.0, "config key 's' must lie in (0, 1), got ", s);
  for (const char* k : {"T", "tau", "tau_factor", "fp_tol", "stop_tol", "cg_tol", "h", "domain_radius", "check_tol",
                        "oracle_tol"})
    positive(k);
  if (cfg.contains("M")) {
    const auto m = cfg["M"].get<std::int64_t>();
    require(m >= 4 && m % 2 == 0, "config key 'M' must be an even integer >= 4, got ", m);
  }
  if (cfg.contains("v"))
    require(std::abs(cfg["v"].get<double>()) < 1.0, "config key 'v' must satisfy |v| < 1");
  if (cfg.contains("amplitude")) {
    const double a = cfg["amplitude"].get<double>();
    require(a >= 0.0 && a <= 0.5, "config key 'amplitude' must lie in [0, 1/2], got ", a);
  }
  for (const char* k : {"fp_max_iters", "max_steps"})
    if (cfg.contains(k)) require(cfg[k].get<std::int64_t>() >= 1, "config key '", k, "' must be >= 1");
  for (const char* k : {"snapshot_count", "snapshot_every", "interval_cells", "quad_far_order"})
    if (cfg.contains(k)) require(cfg[k].get<std::int64_t>() >= 0, "config key '", k, "' must be >= 0");
  if (cfg.contains("quad_sing_order")) {
    QuadratureSpec q;
    q.sing_order = cfg["quad_sing_order"].get<int>();
    q.far_order = cfg["quad_far_order"].get<int>();
    q.validate();
  }
  if (cfg.contains("seed")) require(cfg["seed"].get<std::int64_t>() >= 0, "config key 'seed' must be >= 0");
  if (cfg.contains("mass")) {
    const auto m = cfg["mass"].get<std::string>();
    require(m == "consistent" || m == "lumped", "config key 'mass' must be 'consistent' or 'lumped', got '", m, "'");
  }
  if (cfg.contains("stop_norm")) {
    const auto m = cfg["stop_norm"].get<std::string>();
    require(m == "l2h" || m == "s_weighted", "config key 'stop_norm' must be 'l2h' or 's_weighted', got '", m, "'");
  }
  return cfg;
}

// ---------------------------------------------------------------- artifacts

/// Legacy ASCII VTK unstructured grid with one vector point field (padded to 3 components).
inline void write_vtk(std::ostream& out, const std::vector<Eigen::Vector3d>& points,
                      const std::vector<std::vector<int>>& cells, const NodalField& u, const std::string& title) {
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << points.size() << " double\n";
  for (const auto& p : points) out << io::fmt(p.x()) << ' ' << io::fmt(p.y()) << ' ' << io::fmt(p.z()) << '\n';
  std::size_t total = 0;
  for (const auto& c : cells) total += c.size() + 1;
  out << "CELLS " << cells.size() << ' ' << total << '\n';
  for (const auto& c : cells) {
    out << c.size();
    for (int v : c) out << ' ' << v;
    out << '\n';
  }
  out << "CELL_TYPES " << cells.size() << '\n';
  for (const auto& c : cells) out << (c.size() == 3 ? 5 : 3) << '\n';
  out << "POINT_DATA " << points.size() << "\nVECTORS u double\n";
  for (int z = 0; z < u.size(); ++z)
    for (int c = 0; c < 3; ++c) out << (c < u.components() ? io::fmt(u(z, c)) : "0") << (c < 2 ? ' ' : '\n');
}

/// `x,u1,..` (1D or periodic) or `x,y,u1,..` (2D) rows.
inline void write_snapshot_csv(std::ostream& out, const std::vector<Point>& coords, int dim, const NodalField& u) {
  out << (dim == 2 ? "x,y" : "x");
  for (int c = 0; c < u.components(); ++c) out << ",u" << c + 1;
  out << '\n';
  for (int z = 0; z < u.size(); ++z) {
    out << io::fmt(coords[z].x());
    if (dim == 2) out << ',' << io::fmt(coords[z].y());
    for (int c = 0; c < u.components(); ++c) out << ',' << io::fmt(u(z, c));
    out << '\n';
  }
}

struct ExperimentOutcome {
  int exit_code = 0; ///< 0 success, 4 failed acceptance check
  Json summary;
};

namespace detail {

struct ArtifactWriter {
  std::filesystem::path dir;
  bool vtk = false;
  std::vector<Point> coords;
  int dim = 1;
  std::vector<std::vector<int>> cells;

  void prepare() const { std::filesystem::create_directories(dir / "snapshots"); }

  std::ofstream open(const std::filesystem::path& rel) const {
    std::ofstream f(dir / rel);
    require(f.good(), "cannot write ", (dir / rel).string());
    return f;
  }

  void snapshot(int k, const NodalField& u) const {
    const std::string stem = "snapshots/step_" + std::to_string(k);
    auto f = open(stem + ".csv");
    write_snapshot_csv(f, coords, dim, u);
    if (vtk) {
      std::vector<Eigen::Vector3d> pts;
      for (const auto& p : coords) pts.emplace_back(p.x(), dim == 2 ? p.y() : 0.0, 0.0);
      auto g = open(stem + ".vtk");
      write_vtk(g, pts, cells, u, "fraqmap step " + std::to_string(k));
    }
  }
};

inline std::filesystem::path resolve_mesh_path(const std::string& path, const std::filesystem::path& base) {
  std::filesystem::path p(path);
  if (p.is_relative() && !base.empty() && !std::filesystem::exists(p) && std::filesystem::exists(base / p))
    return base / p;
  return p;
}

inline QuadratureSpec quadrature_from(const Json& cfg) {
  QuadratureSpec q;
  q.sing_order = cfg["quad_sing_order"].get<int>();
  q.far_order = cfg["quad_far_order"].get<int>();
  q.near_order = std::max(q.near_order, q.far_order);
  q.validate();
  return q;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline ExperimentOutcome run_spin_experiment(const Json& cfg, ArtifactWriter& out, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const bool travel = cfg["experiment"] == "spin-travel";
  const PeriodicGrid grid(cfg["M"].get<int>());
  const double s = cfg["s"].get<double>();
  const double h = grid.spacing();
  const double tau = cfg["tau"].is_null() ? cfg["tau_factor"].get<double>() * h : cfg["tau"].get<double>();
  const double t_final = cfg["T"].get<double>();
  SpinConfig sc{tau, cfg["fp_tol"].is_null() ? 0.0 : cfg["fp_tol"].get<double>(), cfg["fp_max_iters"].get<int>(),
                SpectralBackend{grid, s}};
  const NodalField u0 = travel ? make_traveling_wave(grid, cfg["v"].get<double>())
                               : make_perturbed_map(grid, cfg["seed"].get<std::uint64_t>(), cfg["amplitude"].get<double>());

  // The fixed point contracts when (tau/2) times the largest symbol stays below 1; the largest
  // symbol is c_inv h^{-2s} with c_inv = (M h / 2)^{2s} = pi^{2s}.
  Json warnings = Json::array();
  const double c_inv = std::pow(0.5 * grid.size() * h, 2.0 * s);
  const double threshold = std::pow(h, 2.0 * s) / (c_inv * std::sqrt(grid.length()));
  if (tau >= threshold) {
    std::string w = "step size tau = " + io::fmt(tau) + " exceeds the heuristic contraction threshold " + io::fmt(threshold);
    log << "warning: " << w << '\n';
    warnings.push_back(w);
  }

  out.coords.clear();
  for (int j = 0; j < grid.size(); ++j) out.coords.emplace_back(grid.node(j), 0.0);
  out.dim = 1;
  out.cells.clear();
  for (int j = 0; j < grid.size(); ++j) out.cells.push_back({j, (j + 1) % grid.size()});
  out.prepare();

  const int steps = spin_step_count(t_final, tau);
  const int count = cfg["snapshot_count"].get<int>();
  std::set<int> schedule{0, steps};
  for (int l = 1; l < count; ++l) schedule.insert(static_cast<int>(std::lround(static_cast<double>(l) * steps / count)));
  out.snapshot(0, u0);
  const SpinRunResult res = run_spin(u0, t_final, sc, [&](int k, const NodalField& u) {
    if (schedule.count(k)) out.snapshot(k, u);
  });
  {
    auto f = out.open("trace.csv");
    res.trace.write_csv(f);
  }
  Json conservation;
  conservation["energy_drift"] = res.trace.energy_drift();
  conservation["max_unit_defect"] = res.trace.max_unit_defect();
  conservation["max_fp_iters"] = res.trace.max_fp_iters();
  {
    auto f = out.open("conservation.json");
    f << conservation.dump(2) << '\n';
  }

  Json summary;
  summary["config"] = cfg;
  summary["resolved"] = {{"h", h}, {"tau", tau}, {"fp_tol", sc.effective_tolerance()}, {"steps", steps}};
  summary["final_energy"] = res.trace.rows.back().energy;
  summary["initial_energy"] = res.trace.rows.front().energy;
  summary["violation"] = res.trace.max_unit_defect();
  summary["residual"] = res.trace.rows.back().fp_difference;
  summary["conservation"] = conservation;
  summary["median_fp_iters"] = res.trace.median_fp_iters();
  summary["max_contraction_ratio"] = res.trace.max_contraction();
  if (travel) {
    const double v = cfg["v"].get<double>();
    const double c = std::sqrt(1.0 - v * v);
    const double shift = v * steps * tau;
    const NodalField exact = nodal_interpolation(
        [&](double x) { return Eigen::Vector3d(v, c * std::cos(x - shift), c * std::sin(x - shift)); }, grid);
    summary["exact_error_linf"] = (res.u.values() - exact.values()).cwiseAbs().maxCoeff();
    summary["return_error_linf"] = (res.u.values() - u0.values()).cwiseAbs().maxCoeff();
  }
  summary["warnings"] = warnings;
  summary["wall_time_s"] = seconds_since(t0);
  log << cfg["experiment"].get<std::string>() << ": " << steps << " steps, energy drift "
      << res.trace.energy_drift() << ", max unit defect " << res.trace.max_unit_defect() << '\n';
  return {0, summary};
}

inline SimplicialMesh heat_mesh(const Json& cfg, const std::filesystem::path& base) {
  const int cells = cfg["interval_cells"].get<int>();
  if (cells > 0) {
    const double r = cfg["domain_radius"].get<double>();
    require(r > 0.5, "config key 'domain_radius' must exceed the half width 0.5 of Omega");
    return SimplicialMesh::extended_interval(-r, r, -0.5, 0.5, cells);
  }
  return io::read_mesh(resolve_mesh_path(cfg["mesh"].get<std::string>(), base));
}

inline ExperimentOutcome run_heat_experiment(const Json& cfg, ArtifactWriter& out, const std::filesystem::path& base,
                                             std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const SimplicialMesh mesh = heat_mesh(cfg, base);
  const double s = cfg["s"].get<double>();
  const double h = cfg["h"].is_null() ? mesh.h_max() : cfg["h"].get<double>();
  const double tau = cfg["tau"].is_null() ? cfg["tau_factor"].get<double>() * h : cfg["tau"].get<double>();
  const QuadratureSpec quad = quadrature_from(cfg);
  const FracStiffness a = assemble_fractional_stiffness(mesh, FracParams(s, mesh.dim(), 2), quad);
  const double t_assembly = seconds_since(t0);
  const FlowMass mass = FlowMass::build(mesh, cfg["mass"] == "lumped" ? MassKind::lumped : MassKind::consistent);
  HeatFlowOptions opt;
  opt.tau = tau;
  opt.stop_tol = cfg["stop_tol"].get<double>();
  opt.max_steps = cfg["max_steps"].get<int>();
  opt.stop_norm = cfg["stop_norm"] == "s_weighted" ? StopNorm::s_weighted : StopNorm::l2h;
  opt.cg_tol = cfg["cg_tol"].get<double>();
  const NodalField u0 = make_random_interior(mesh, cfg["seed"].get<std::uint64_t>());

  out.coords.assign(mesh.vertices().begin(), mesh.vertices().end());
  out.dim = mesh.dim();
  out.cells.clear();
  for (int c = 0; c < mesh.num_cells(); ++c) {
    const auto cell = mesh.cell(c);
    out.cells.emplace_back(cell.begin(), cell.end());
  }
  out.prepare();
  out.snapshot(0, u0);
  const int every = cfg["snapshot_every"].get<int>();
  const HeatFlowResult res = run_heat_flow(u0, a, mass, mesh, opt, [&](int k, const NodalField& u) {
    if (every > 0 && k % every == 0) out.snapshot(k, u);
  });
  const int steps = res.trace.rows.back().k;
  if (every <= 0 || steps % every != 0) out.snapshot(steps, res.u);
  {
    auto f = out.open("trace.csv");
    res.trace.write_csv(f);
  }

  bool decreasing = true;
  double max_identity = 0.0;
  for (std::size_t i = 1; i < res.trace.rows.size(); ++i) {
    decreasing = decreasing && res.trace.rows[i].energy < res.trace.rows[i - 1].energy;
    max_identity = std::max(max_identity, std::abs(res.trace.rows[i].identity_residual));
  }
  const DefectReport defects = locate_defects(mesh, res.u);
  Json clusters = Json::array();
  for (std::size_t i = 0; i < defects.cluster_centers.size(); ++i)
    clusters.push_back({{"x", defects.cluster_centers[i].x()},
                        {"y", defects.cluster_centers[i].y()},
                        {"degree", defects.cluster_degrees[i]}});

  Json summary;
  summary["config"] = cfg;
  summary["resolved"] = {{"h", h},
                         {"tau", tau},
                         {"nodes", mesh.num_vertices()},
                         {"interior_nodes", static_cast<int>(interior_nodes(mesh).size())},
                         {"cells", mesh.num_cells()}};
  summary["converged"] = res.converged;
  summary["steps"] = steps;
  summary["initial_energy"] = res.trace.initial_energy();
  summary["final_energy"] = res.trace.rows.back().energy;
  summary["energy_strictly_decreasing"] = decreasing;
  summary["violation"] = res.trace.rows.back().violation;
  summary["violation_bound"] = tau * res.trace.initial_energy();
  summary["residual"] = harmonic_residual(res.u, a, mass.lumped);
  summary["final_dtu_norm"] = res.trace.rows.back().dtu_norm;
  summary["max_identity_residual"] = max_identity;
  summary["bookkeeping_defect"] = res.bookkeeping_defect;
  summary["defect_triangles"] = defects.triangles;
  summary["defect_clusters"] = clusters;
  summary["assembly_time_s"] = t_assembly;
  summary["wall_time_s"] = seconds_since(t0);
  log << "heatflow-defect: " << steps << " steps, " << (res.converged ? "converged" : "not converged")
      << ", energy " << res.trace.initial_energy() << " -> " << res.trace.rows.back().energy
      << ", defect clusters " << defects.cluster_centers.size() << '\n';
  return {0, summary};
}

inline ExperimentOutcome run_assemble_check(const Json& cfg, ArtifactWriter& out, const std::filesystem::path& base,
                                            std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const SimplicialMesh mesh = io::read_mesh(resolve_mesh_path(cfg["mesh"].get<std::string>(), base));
  const double s = cfg["s"].get<double>();
  const FracStiffness a = assemble_fractional_stiffness(mesh, FracParams(s, mesh.dim()), quadrature_from(cfg));
  const Eigen::MatrixXd ref = oracle::reference_stiffness(mesh, s, cfg["oracle_tol"].get<double>());
  std::vector<int> free;
  for (int z = 0; z < mesh.num_vertices(); ++z)
    if (mesh.is_free(z)) free.push_back(z);
  double max_rel = 0.0, max_abs = 0.0;
  for (std::size_t i = 0; i < free.size(); ++i)
    for (std::size_t j = 0; j < free.size(); ++j) {
      const double d = std::abs(a.matrix(free[i], free[j]) - ref(i, j));
      max_abs = std::max(max_abs, d);
      max_rel = std::max(max_rel, d / std::max(std::abs(ref(i, j)), 1e-300));
    }
  const double asym = (a.matrix - a.matrix.transpose()).cwiseAbs().maxCoeff();
  const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a.matrix).eigenvalues().minCoeff();
  const double tol = cfg["check_tol"].get<double>();
  const bool pass = max_rel <= tol && asym == 0.0 && min_eig >= -1e-10;

  std::filesystem::create_directories(out.dir);
  {
    auto f = out.open("matrix.txt");
    write_matrix_triplets(f, a);
  }
  Json summary;
  summary["config"] = cfg;
  summary["free_nodes"] = static_cast<int>(free.size());
  summary["max_rel_deviation"] = max_rel;
  summary["max_abs_deviation"] = max_abs;
  summary["asymmetry"] = asym;
  summary["min_eigenvalue"] = min_eig;
  summary["pass"] = pass;
  summary["wall_time_s"] = seconds_since(t0);
  log << "max oracle deviation " << max_rel << " (relative), " << max_abs << " (absolute); "
      << (pass ? "within" : "outside") << " tolerance " << tol << '\n';
  return {pass ? 0 : 4, summary};
}

} // namespace detail

/// Runs one experiment and writes its artifacts below `out_dir`; relative mesh paths are looked
/// up in the working directory first and then below `base`.
inline ExperimentOutcome run_experiment(const Json& cfg, const std::filesystem::path& out_dir, bool vtk = false,
                                        const std::filesystem::path& base = {}, std::ostream& log = std::cerr) {
  detail::ArtifactWriter out{out_dir, vtk, {}, 1, {}};
  const std::string exp = cfg.at("experiment").get<std::string>();
  ExperimentOutcome o;
  if (exp == "spin-travel" || exp == "spin-perturbed")
    o = detail::run_spin_experiment(cfg, out, log);
  else if (exp == "heatflow-defect")
    o = detail::run_heat_experiment(cfg, out, base, log);
  else if (exp == "assemble-check")
    o = detail::run_assemble_check(cfg, out, base, log);
  else
    raise("unknown experiment '", exp, "'");
  std::filesystem::create_directories(out_dir);
  auto f = out.open("summary.json");
  f << o.summary.dump(2) << '\n';
  return o;
}

} // namespace fraqmap
