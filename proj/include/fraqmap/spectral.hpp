#pragma once

// Fourier-side fractional Laplacian on the torus T = [0, 2pi).
//
// Normalization: v~_k = (2pi/M) sum_j exp(-i k x_j) v(x_j) for k = -M/2 .. M/2-1 and
// v(x_j) = (1/2pi) sum_k v~_k exp(i k x_j). The Nyquist mode k = -M/2 carries |M/2|^{2s} like every
// other mode; on the grid it is the real sequence (-1)^j, so real fields stay real. Dropping it would
// leave an energy-free mode that aliasing feeds in the nonlinear spin dynamics.

#include <complex>
#include <ostream>
#include <span>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "fraqmap/geometry.hpp"
#include "fraqmap/io.hpp"

namespace fraqmap {

/// Fractional order s in (0, 1) together with the integral-form constant
/// C_{d,s} = s 2^{2s} Gamma((2s+d)/2) / (pi^{d/2} Gamma(1-s)).
struct FracParams {
  double s;
  int d = 1;
  int n = 1;

  FracParams(double s_, int d_ = 1, int n_ = 1) : s(s_), d(d_), n(n_) {
    require(s > 0.0 && s < 1.0, "fractional order s must lie in (0, 1), got ", s);
    require(d == 1 || d == 2, "spatial dimension must be 1 or 2, got ", d);
  }

  double constant() const {
    return s * std::pow(2.0, 2.0 * s) * std::tgamma((2.0 * s + d) / 2.0) /
           (std::pow(pi, d / 2.0) * std::tgamma(1.0 - s));
  }
};

/// Coefficients v~_k, row k + M/2 holding mode k, one column per component.
struct FourierField {
  int m = 0;
  Eigen::MatrixXcd coefficients;

  int components() const { return static_cast<int>(coefficients.cols()); }
  std::complex<double> operator()(int k, int c) const { return coefficients(k + m / 2, c); }
  std::complex<double>& operator()(int k, int c) { return coefficients(k + m / 2, c); }
};

namespace detail {

inline Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> engine;
  return engine;
}

} // namespace detail

inline FourierField dft_forward(const NodalField& v, const PeriodicGrid& grid) {
  require(v.size() == grid.size(), "field has ", v.size(), " nodes but grid has ", grid.size());
  const int m = grid.size();
  FourierField out{m, Eigen::MatrixXcd(m, v.components())};
  std::vector<std::complex<double>> in(m), spec(m);
  const double scale = grid.spacing();
  for (int c = 0; c < v.components(); ++c) {
    for (int j = 0; j < m; ++j) in[j] = v(j, c);
    detail::fft_engine().fwd(spec, in);
    for (int k = -m / 2; k < m / 2; ++k) out(k, c) = scale * spec[(k + m) % m];
  }
  return out;
}

/// Complex nodal values (1/2pi) sum_k v~_k exp(i k x_j).
inline Eigen::MatrixXcd dft_inverse_complex(const FourierField& f) {
  const int m = f.m;
  Eigen::MatrixXcd out(m, f.components());
  std::vector<std::complex<double>> spec(m), vals(m);
  for (int c = 0; c < f.components(); ++c) {
    for (int k = -m / 2; k < m / 2; ++k) spec[(k + m) % m] = f(k, c);
    detail::fft_engine().inv(vals, spec); // carries 1/M
    for (int j = 0; j < m; ++j) out(j, c) = vals[j] * (m / (2.0 * pi));
  }
  return out;
}

/// Real nodal field; fails when the imaginary residue exceeds 1e-10 relative to the data, which
/// signals coefficients without conjugate symmetry.
inline NodalField dft_inverse(const FourierField& f) {
  const Eigen::MatrixXcd z = dft_inverse_complex(f);
  const double scale = std::max(1.0, z.real().cwiseAbs().maxCoeff());
  const double residue = z.imag().cwiseAbs().maxCoeff();
  require<SolverError>(residue <= 1e-10 * scale, "inverse DFT has imaginary residue ", residue,
                       " (coefficients lack conjugate symmetry)");
  return NodalField(Eigen::MatrixXd(z.real()));
}

/// Applies the Fourier multiplier |k|^{2 sigma}, i.e. (-Delta)_M^sigma. sigma = 0 is the identity.
inline FourierField apply_fractional_multiplier(FourierField f, double sigma) {
  require(sigma >= 0.0, "fractional power must be non-negative, got ", sigma);
  const int m = f.m;
  for (int c = 0; c < f.components(); ++c) {
    for (int k = -m / 2; k < m / 2; ++k) {
      if (k == 0) {
        if (sigma > 0.0) f(0, c) = 0.0;
        continue;
      }
      f(k, c) *= std::pow(std::abs(static_cast<double>(k)), 2.0 * sigma);
    }
  }
  return f;
}

/// (-Delta)_M^s v; also used with s/2 for the half Laplacian.
inline NodalField frac_laplacian_spectral(const NodalField& v, const PeriodicGrid& grid, double s) {
  return dft_inverse(apply_fractional_multiplier(dft_forward(v, grid), s));
}

/// (1/2) (1/2pi) sum_k |k|^{2s} |v~_k|^2 summed over components, i.e. 1/2 ||(-Delta)^{s/2} v||^2.
inline double frac_energy(const NodalField& v, const PeriodicGrid& grid, double s) {
  const FourierField f = dft_forward(v, grid);
  double e = 0.0;
  for (int c = 0; c < f.components(); ++c)
    for (int k = -f.m / 2; k < f.m / 2; ++k)
      if (k != 0) e += std::pow(std::abs(static_cast<double>(k)), 2.0 * s) * std::norm(f(k, c));
  return 0.5 * e / (2.0 * pi);
}

/// H_s(f, phi) = (-Delta)^{s/2}(f phi) - f (-Delta)^{s/2} phi - ((-Delta)^{s/2} f) phi.
/// phi is either scalar (broadcast against every component of f) or has f's components.
inline NodalField leibniz_defect(const NodalField& f, const NodalField& phi, const PeriodicGrid& grid,
                                 double s) {
  require(f.size() == phi.size(), "defect operands live on different grids");
  require(phi.components() == 1 || phi.components() == f.components(),
          "phi must be scalar or match f's components");
  const int n = f.components();
  Eigen::MatrixXd phi_b(f.size(), n);
  for (int c = 0; c < n; ++c) phi_b.col(c) = phi.values().col(phi.components() == 1 ? 0 : c);
  const NodalField phi_field(phi_b);
  const NodalField product(Eigen::MatrixXd(f.values().cwiseProduct(phi_b)));
  const double half = 0.5 * s;
  const NodalField lp = frac_laplacian_spectral(product, grid, half);
  const NodalField lphi = frac_laplacian_spectral(phi_field, grid, half);
  const NodalField lf = frac_laplacian_spectral(f, grid, half);
  return NodalField(Eigen::MatrixXd(lp.values() - f.values().cwiseProduct(lphi.values()) -
                                    lf.values().cwiseProduct(phi_b)));
}

/// Matrix convention: H_s(A, v)_i = sum_k H_s(A^{ik}, v^k), with rows[i] holding A^{i.}.
inline NodalField leibniz_defect_matrix(std::span<const NodalField> rows, const NodalField& v,
                                        const PeriodicGrid& grid, double s) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(v.size(), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require(rows[i].components() == v.components(), "matrix row ", i, " has wrong width");
    const NodalField h = leibniz_defect(rows[i], v, grid, s);
    out.col(i) = h.values().rowwise().sum();
  }
  return NodalField(std::move(out));
}

/// CSV `k,Re,Im` for one component.
inline void write_spectrum_csv(std::ostream& out, const FourierField& f, int component) {
  out << "k,Re,Im\n";
  for (int k = -f.m / 2; k < f.m / 2; ++k)
    out << k << ',' << io::fmt(f(k, component).real()) << ',' << io::fmt(f(k, component).imag())
        << '\n';
}

} // namespace fraqmap
