#pragma once

// Semi-implicit constrained L2 gradient flow for the fractional Dirichlet energy:
//
//   (d_t u^k, v) + a(u^{k-1} + tau d_t u^k, v) = 0   for all v in F_h[u^{k-1}],
//   u^k = u^{k-1} + tau d_t u^k,
//
// where F_h[u] holds the P1 fields tangent to u at every interior node and vanishing elsewhere.
// The update is linear; no renormalization is applied, so |u^k(z)|^2 grows by tau^2 |d_t u^k(z)|^2.

#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>

#include "fraqmap/fem.hpp"
#include "fraqmap/geometry.hpp"
#include "fraqmap/io.hpp"

namespace fraqmap {

/// Orthonormal bases of u(z)^perp at the constrained nodes.
class TangentFrame {
public:
  static constexpr double min_length = 0.5;

  TangentFrame(const NodalField& u, std::vector<int> nodes) : nodes_(std::move(nodes)), n_(u.components()) {
    require(n_ == 2 || n_ == 3, "tangent frames need N = 2 or 3, got ", n_);
    basis_.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const int z = nodes_[i];
      const Eigen::VectorXd v = u.at(z).transpose();
      const double len = v.norm();
      require<SolverError>(len >= min_length, "tangent frame degenerate at node ", z, ": |u| = ", len,
                           " < ", min_length);
      Eigen::MatrixXd t(n_, n_ - 1);
      if (n_ == 2) {
        t.col(0) = Eigen::Vector2d(-v[1], v[0]) / len;
      } else {
        const Eigen::Vector3d w = v;
        int m = 0;
        for (int k = 1; k < 3; ++k)
          if (std::abs(w[k]) < std::abs(w[m])) m = k;
        const Eigen::Vector3d t1 = Eigen::Vector3d::Unit(m).cross(w).normalized();
        const Eigen::Vector3d t2 = w.cross(t1).normalized();
        t.col(0) = t1;
        t.col(1) = t2;
      }
      basis_[i] = std::move(t);
    }
  }

  const std::vector<int>& nodes() const { return nodes_; }
  int components() const { return n_; }
  int reduced_size() const { return static_cast<int>(nodes_.size()) * (n_ - 1); }
  const Eigen::MatrixXd& at(int i) const { return basis_[i]; }

  /// Full-space field (zero off the constrained nodes) from frame coordinates.
  NodalField expand(const Eigen::VectorXd& c, int num_nodes) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(num_nodes, n_);
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      out.row(nodes_[i]) = (basis_[i] * c.segment(i * (n_ - 1), n_ - 1)).transpose();
    return NodalField(std::move(out));
  }

  /// P^T B P for a node-by-node matrix B (rows/cols in mesh numbering) acting componentwise.
  Eigen::MatrixXd reduce(const Eigen::MatrixXd& b) const {
    const int m = reduced_size(), k = n_ - 1;
    Eigen::MatrixXd r(m, m);
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      for (std::size_t j = 0; j < nodes_.size(); ++j)
        r.block(i * k, j * k, k, k) = b(nodes_[i], nodes_[j]) * (basis_[i].transpose() * basis_[j]);
    return r;
  }

  /// P^T g for a nodal field g.
  Eigen::VectorXd reduce(const NodalField& g) const {
    const int k = n_ - 1;
    Eigen::VectorXd r(reduced_size());
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      r.segment(i * k, k) = basis_[i].transpose() * g.at(nodes_[i]).transpose();
    return r;
  }

private:
  std::vector<int> nodes_;
  int n_;
  std::vector<Eigen::MatrixXd> basis_;
};

enum class MassKind { consistent, lumped };
enum class StopNorm { l2h, s_weighted };

/// The metric of the flow: consistent P1 mass or its row-sum lumping, plus the lumped weights
/// used for the discrete norms.
struct FlowMass {
  Eigen::MatrixXd matrix;
  LumpedMass lumped;
  MassKind kind = MassKind::consistent;

  static FlowMass build(const SimplicialMesh& mesh, MassKind kind) {
    FlowMass m;
    m.kind = kind;
    m.lumped = lumped_weights(mesh, LumpedMass::Region::omega);
    if (kind == MassKind::consistent) {
      m.matrix = consistent_mass(mesh);
    } else {
      const LumpedMass whole = lumped_weights(mesh, LumpedMass::Region::whole);
      m.matrix = whole.weights.asDiagonal();
    }
    return m;
  }

  double norm_sq(const NodalField& v) const { return (v.values().transpose() * matrix * v.values()).trace(); }
};

struct HeatStepReport {
  double energy_before = 0.0;
  double energy_after = 0.0;
  double dtu_mass_sq = 0.0;     ///< ||d_t u||^2 in the flow metric
  double dtu_l2h = 0.0;         ///< ||d_t u||_{L2_h}
  double dtu_a = 0.0;           ///< a(d_t u, d_t u)
  double identity_residual = 0.0;
  double orthogonality = 0.0;   ///< max_z |d_t u(z) . u_prev(z)|
  int cg_iterations = 0;
  double cg_error = 0.0;
};

struct HeatStepResult {
  NodalField u_next;
  NodalField dtu;
  HeatStepReport report;
};

inline std::vector<int> interior_nodes(const SimplicialMesh& mesh) {
  std::vector<int> idx;
  for (int z = 0; z < mesh.num_vertices(); ++z)
    if (mesh.node_class(z) == NodeClass::interior) idx.push_back(z);
  return idx;
}

/// One step of the constrained flow. Only interior nodes move.
inline HeatStepResult heat_flow_step(const NodalField& u_prev, double tau, const FracStiffness& a,
                                     const FlowMass& mass, const SimplicialMesh& mesh,
                                     double cg_tol = 1e-10) {
  require(tau > 0.0, "step size must be positive");
  require(u_prev.size() == a.size() && u_prev.size() == mesh.num_vertices(), "field does not match the mesh");
  const TangentFrame frame(u_prev, interior_nodes(mesh));
  require(frame.reduced_size() > 0, "mesh has no interior nodes");

  const Eigen::MatrixXd system = frame.reduce(Eigen::MatrixXd(mass.matrix + tau * a.matrix));
  const NodalField au(Eigen::MatrixXd(a.matrix * u_prev.values()));
  const Eigen::VectorXd rhs = -frame.reduce(au);

  Eigen::ConjugateGradient<Eigen::MatrixXd, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
  cg.setTolerance(cg_tol);
  cg.setMaxIterations(std::max(1000, 10 * frame.reduced_size()));
  cg.compute(system);
  Eigen::VectorXd c = Eigen::VectorXd::Zero(rhs.size());
  if (rhs.norm() > 0.0) c = cg.solve(rhs);
  require<SolverError>(rhs.norm() == 0.0 || cg.info() == Eigen::Success,
                       "conjugate gradient did not converge: relative residual ", cg.error(), " after ",
                       cg.iterations(), " iterations");

  HeatStepResult out{u_prev, frame.expand(c, u_prev.size()), {}};
  out.u_next = u_prev + tau * out.dtu;
  HeatStepReport& r = out.report;
  r.energy_before = fem_energy(u_prev, a);
  r.energy_after = fem_energy(out.u_next, a);
  r.dtu_mass_sq = mass.norm_sq(out.dtu);
  r.dtu_l2h = discrete_lp_norm(out.dtu, 2.0, mass.lumped);
  r.dtu_a = 2.0 * fem_energy(out.dtu, a);
  r.identity_residual = r.dtu_mass_sq + (r.energy_after - r.energy_before) / tau + 0.5 * tau * r.dtu_a;
  for (int z : frame.nodes()) r.orthogonality = std::max(r.orthogonality, std::abs(out.dtu.at(z).dot(u_prev.at(z))));
  r.cg_iterations = rhs.norm() > 0.0 ? static_cast<int>(cg.iterations()) : 0;
  r.cg_error = rhs.norm() > 0.0 ? cg.error() : 0.0;
  return out;
}

struct FlowTrace {
  struct Row {
    int k;
    double t;
    double energy;
    double dtu_norm;       ///< stopping norm of d_t u^k
    double violation;      ///< unit_violation(u^k)
    int cg_iters;
    double identity_residual;
    double dissipation;    ///< tau sum_{l <= k} ||d_t u^l||^2 in the flow metric
    double constraint_sum; ///< tau^2 sum_{l <= k} ||d_t u^l||^2_{L2_h}
  };
  double tau = 0.0;
  std::vector<Row> rows; ///< row 0 is the initial state

  double initial_energy() const { return rows.front().energy; }

  void write_csv(std::ostream& out) const {
    out << "k,t,energy,dtu_norm,violation,cg_iters\n";
    for (const auto& r : rows)
      out << r.k << ',' << io::fmt(r.t) << ',' << io::fmt(r.energy) << ',' << io::fmt(r.dtu_norm) << ','
          << io::fmt(r.violation) << ',' << r.cg_iters << '\n';
  }
};

struct HeatFlowOptions {
  double tau = 0.0;
  double stop_tol = 1e-6;
  int max_steps = 10000;
  StopNorm stop_norm = StopNorm::l2h;
  double cg_tol = 1e-10;
};

struct HeatFlowResult {
  NodalField u;
  FlowTrace trace;
  bool converged = false;
  /// Per node: |u^k(z)|^2 - 1 - tau^2 sum_l |d_t u^l(z)|^2, the bookkeeping defect of the update.
  double bookkeeping_defect = 0.0;
};

/// Iterates until the stopping norm of d_t u drops below stop_tol or max_steps is reached. The
/// callback, if given, sees (k, u^k) after every accepted step.
template <class Callback>
HeatFlowResult run_heat_flow(const NodalField& u0, const FracStiffness& a, const FlowMass& mass,
                             const SimplicialMesh& mesh, const HeatFlowOptions& opt, Callback&& on_step) {
  require(opt.tau > 0.0, "step size must be positive");
  require(opt.stop_tol > 0.0 && opt.max_steps >= 1, "invalid stopping rule");
  HeatFlowResult res{u0, {}, false, 0.0};
  res.trace.tau = opt.tau;
  res.trace.rows.push_back({0, 0.0, fem_energy(u0, a), 0.0, unit_violation(u0, mass.lumped), 0, 0.0, 0.0, 0.0});
  Eigen::VectorXd accumulated = Eigen::VectorXd::Zero(u0.size());
  Eigen::VectorXd initial_len(u0.size());
  for (int z = 0; z < u0.size(); ++z) initial_len[z] = u0.at(z).squaredNorm();
  double dissipation = 0.0, constraint_sum = 0.0;
  for (int k = 1; k <= opt.max_steps; ++k) {
    HeatStepResult step = heat_flow_step(res.u, opt.tau, a, mass, mesh, opt.cg_tol);
    const HeatStepReport& r = step.report;
    dissipation += opt.tau * r.dtu_mass_sq;
    constraint_sum += opt.tau * opt.tau * r.dtu_l2h * r.dtu_l2h;
    for (int z = 0; z < u0.size(); ++z) accumulated[z] += opt.tau * opt.tau * step.dtu.at(z).squaredNorm();
    const double stop_value =
        opt.stop_norm == StopNorm::l2h ? r.dtu_l2h : std::sqrt(r.dtu_l2h * r.dtu_l2h + r.dtu_a);
    res.u = std::move(step.u_next);
    res.trace.rows.push_back({k, k * opt.tau, r.energy_after, stop_value, unit_violation(res.u, mass.lumped),
                              r.cg_iterations, r.identity_residual, dissipation, constraint_sum});
    on_step(k, res.u);
    if (stop_value < opt.stop_tol) {
      res.converged = true;
      break;
    }
  }
  for (int z = 0; z < u0.size(); ++z)
    res.bookkeeping_defect = std::max(
        res.bookkeeping_defect, std::abs(res.u.at(z).squaredNorm() - initial_len[z] - accumulated[z]));
  return res;
}

inline HeatFlowResult run_heat_flow(const NodalField& u0, const FracStiffness& a, const FlowMass& mass,
                                    const SimplicialMesh& mesh, const HeatFlowOptions& opt) {
  return run_heat_flow(u0, a, mass, mesh, opt, [](int, const NodalField&) {});
}

/// L2_h norm over interior nodes of the tangential part of A u / beta: zero exactly for discrete
/// fractional harmonic maps.
inline double harmonic_residual(const NodalField& u, const FracStiffness& a, const LumpedMass& beta) {
  const NodalField y = discrete_frac_laplacian(u, a, beta);
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(u.size(), u.components());
  for (int z = 0; z < u.size(); ++z) {
    if (!beta.counted[z] || !a.free[z]) continue;
    const Eigen::VectorXd v = u.at(z).transpose();
    const double len = v.norm();
    require<SolverError>(len >= TangentFrame::min_length, "degenerate node ", z, " in harmonic residual");
    const Eigen::VectorXd w = y.at(z).transpose();
    t.row(z) = (w - (w.dot(v) / (len * len)) * v).transpose();
  }
  return discrete_lp_norm(NodalField(std::move(t)), 2.0, beta);
}

} // namespace fraqmap
