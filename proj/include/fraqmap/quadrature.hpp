#pragma once

#include <cmath>
#include <vector>

#include "fraqmap/core.hpp"

namespace fraqmap {

/// Gauss-Legendre rule mapped to [0, 1].
struct GaussRule {
  std::vector<double> x;
  std::vector<double> w;
  int size() const { return static_cast<int>(x.size()); }
};

inline GaussRule gauss_legendre(int n) {
  require(n >= 1 && n <= 200, "Gauss-Legendre order must be in [1, 200], got ", n);
  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double t = std::cos(pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (t * p0 - p1) / (t * t - 1.0);
      const double dt = p0 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-16) break;
    }
    double p0 = 1.0, p1 = 0.0;
    for (int k = 1; k <= n; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p2) / k;
    }
    dp = n * (t * p0 - p1) / (t * t - 1.0);
    const double w = 2.0 / ((1.0 - t * t) * dp * dp);
    r.x[i] = 0.5 * (1.0 - t);
    r.x[n - 1 - i] = 0.5 * (1.0 + t);
    r.w[i] = r.w[n - 1 - i] = 0.5 * w;
  }
  return r;
}

/// Collapsed (Duffy) tensor rule on the reference triangle {a, b >= 0, a + b <= 1}:
/// n^2 points, exact for polynomials of degree 2n - 2.
struct TriangleRule {
  std::vector<double> a, b, w;
  int size() const { return static_cast<int>(w.size()); }
};

inline TriangleRule collapsed_triangle_rule(int n) {
  const GaussRule g = gauss_legendre(n);
  TriangleRule t;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      t.a.push_back(g.x[i]);
      t.b.push_back((1.0 - g.x[i]) * g.x[j]);
      t.w.push_back(g.w[i] * g.w[j] * (1.0 - g.x[i]));
    }
  return t;
}

} // namespace fraqmap
