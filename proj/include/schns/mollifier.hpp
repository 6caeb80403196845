#pragma once

// Separable truncated Gaussian smoothing. x wraps periodically; in y the
// field is extended by even reflection about the wall faces, which keeps the
// convolution matrix symmetric and doubly stochastic.

#include <cmath>
#include <string>
#include <vector>

#include "schns/grid.hpp"

namespace schns {

struct MollifierKernel {
  double eps = 0.0;
  int half_width_x = 0;
  int half_width_y = 0;
  std::vector<double> wx;  // offsets -half_width_x .. half_width_x
  std::vector<double> wy;

  static std::vector<double> weights_1d(double eps, double h, int& half_width) {
    half_width = static_cast<int>(std::ceil(eps / h - 1e-12));
    if (half_width < 1) half_width = 1;
    const double sigma = 0.5 * eps;
    std::vector<double> w(2 * half_width + 1);
    double sum = 0.0;
    for (int m = -half_width; m <= half_width; ++m) {
      const double r = m * h / sigma;
      w[m + half_width] = std::exp(-0.5 * r * r);
      sum += w[m + half_width];
    }
    for (double& v : w) v /= sum;
    return w;
  }

  static MollifierKernel build(const Grid& g, double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps)) {
      throw ParameterError("mollifier radius must be positive, got " + std::to_string(eps));
    }
    MollifierKernel k;
    k.eps = eps;
    k.wx = weights_1d(eps, g.hx(), k.half_width_x);
    k.wy = weights_1d(eps, g.hy(), k.half_width_y);
    return k;
  }

  double weight(int mx, int my) const { return wx[mx + half_width_x] * wy[my + half_width_y]; }
};

namespace detail {

/// Index of the reflected image of row j in [0, n).
inline int reflect(int j, int n) {
  const int p = 2 * n;
  int m = j % p;
  if (m < 0) m += p;
  return m < n ? m : p - 1 - m;
}

inline void convolve_periodic(const std::vector<double>& w, int hw, const std::vector<double>& in,
                              std::vector<double>& out) {
  const int n = static_cast<int>(in.size());
  out.assign(in.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int m = -hw; m <= hw; ++m) s += w[m + hw] * in[wrap(i + m, n)];
    out[i] = s;
  }
}

}  // namespace detail

class Mollifier {
 public:
  /// eps == 0 gives the identity.
  Mollifier(const Grid& g, double eps) : grid_(g) {
    if (eps < 0.0 || !std::isfinite(eps)) throw ParameterError("mollifier radius must be >= 0");
    if (eps > 0.0) {
      kernel_ = MollifierKernel::build(g, eps);
      active_ = true;
    }
  }

  bool active() const { return active_; }
  const MollifierKernel& kernel() const { return kernel_; }

  ScalarField apply(const ScalarField& f) const {
    detail::require(grid_, f, "mollify");
    if (!active_) return f;
    const int nx = grid_.nx(), ny = grid_.ny();
    const int hx = kernel_.half_width_x, hy = kernel_.half_width_y;
    ScalarField tmp(grid_), out(grid_);
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        double s = 0.0;
        for (int m = -hx; m <= hx; ++m) s += kernel_.wx[m + hx] * f(detail::wrap(i + m, nx), j);
        tmp(i, j) = s;
      }
    }
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        double s = 0.0;
        for (int m = -hy; m <= hy; ++m) s += kernel_.wy[m + hy] * tmp(i, detail::reflect(j + m, ny));
        out(i, j) = s;
      }
    }
    return out;
  }

  VectorField apply(const VectorField& v) const { return VectorField(apply(v.x), apply(v.y)); }

  BoundaryField apply(const BoundaryField& b) const {
    detail::require(grid_, b, "mollify_boundary");
    if (!active_) return b;
    BoundaryField out(grid_);
    detail::convolve_periodic(kernel_.wx, kernel_.half_width_x, b.bottom, out.bottom);
    detail::convolve_periodic(kernel_.wx, kernel_.half_width_x, b.top, out.top);
    return out;
  }

 private:
  Grid grid_;
  MollifierKernel kernel_;
  bool active_ = false;
};

inline ScalarField mollify(const Grid& g, const ScalarField& f, double eps) {
  MollifierKernel::build(g, eps);
  return Mollifier(g, eps).apply(f);
}

inline VectorField mollify(const Grid& g, const VectorField& v, double eps) {
  MollifierKernel::build(g, eps);
  return Mollifier(g, eps).apply(v);
}

inline BoundaryField mollify_boundary(const Grid& g, const BoundaryField& b, double eps) {
  MollifierKernel::build(g, eps);
  return Mollifier(g, eps).apply(b);
}

}  // namespace schns
