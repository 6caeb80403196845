#pragma once

// Cell-centred fields on the periodic channel [0, lx) x (0, ly) and the
// finite-difference operators shared by every other module.
//
// Storage is row-major with x fastest: f(i, j) = data[j * nx + i], where i
// indexes x (periodic) and j indexes y (walls at y = 0 and y = ly). Wall data
// live on the two face rows below j = 0 and above j = ny - 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "schns/error.hpp"

namespace schns {

class Grid {
 public:
  static constexpr int min_cells = 8;

  Grid() = default;
  Grid(int nx, int ny, double lx = 1.0, double ly = 1.0)
      : nx_(nx), ny_(ny), lx_(lx), ly_(ly) {
    if (nx < min_cells || ny < min_cells) {
      throw DimensionError("grid needs at least 8 cells per direction, got " +
                           std::to_string(nx) + "x" + std::to_string(ny));
    }
    if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly)) {
      throw ParameterError("domain lengths must be positive and finite");
    }
  }

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double lx() const { return lx_; }
  double ly() const { return ly_; }
  double hx() const { return lx_ / nx_; }
  double hy() const { return ly_ / ny_; }
  double cell_area() const { return hx() * hy(); }
  std::size_t cells() const { return static_cast<std::size_t>(nx_) * ny_; }
  double volume() const { return lx_ * ly_; }
  /// Total length of both walls.
  double wall_measure() const { return 2.0 * lx_; }
  double x(int i) const { return (i + 0.5) * hx(); }
  double y(int j) const { return (j + 0.5) * hy(); }

  bool operator==(const Grid&) const = default;

 private:
  int nx_ = 0;
  int ny_ = 0;
  double lx_ = 1.0;
  double ly_ = 1.0;
};

class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(int nx, int ny, double value = 0.0)
      : nx_(nx), ny_(ny), data_(static_cast<std::size_t>(nx) * ny, value) {}
  explicit ScalarField(const Grid& g, double value = 0.0)
      : ScalarField(g.nx(), g.ny(), value) {}

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t size() const { return data_.size(); }
  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(j) * nx_ + i]; }
  double operator()(int i, int j) const { return data_[static_cast<std::size_t>(j) * nx_ + i]; }
  double& operator[](std::size_t k) { return data_[k]; }
  double operator[](std::size_t k) const { return data_[k]; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  bool matches(const Grid& g) const { return nx_ == g.nx() && ny_ == g.ny(); }

  ScalarField& operator+=(const ScalarField& o) {
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  ScalarField& operator-=(const ScalarField& o) {
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  ScalarField& operator*=(double a) {
    for (double& v : data_) v *= a;
    return *this;
  }
  /// this += a * o
  ScalarField& axpy(double a, const ScalarField& o) {
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += a * o.data_[k];
    return *this;
  }

  bool operator==(const ScalarField&) const = default;

 private:
  int nx_ = 0;
  int ny_ = 0;
  std::vector<double> data_;
};

inline ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
inline ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
inline ScalarField operator*(double s, ScalarField a) { return a *= s; }

struct VectorField {
  ScalarField x;
  ScalarField y;

  VectorField() = default;
  explicit VectorField(const Grid& g) : x(g), y(g) {}
  VectorField(ScalarField fx, ScalarField fy) : x(std::move(fx)), y(std::move(fy)) {}

  bool matches(const Grid& g) const { return x.matches(g) && y.matches(g); }
  VectorField& operator+=(const VectorField& o) { x += o.x; y += o.y; return *this; }
  VectorField& operator-=(const VectorField& o) { x -= o.x; y -= o.y; return *this; }
  VectorField& operator*=(double a) { x *= a; y *= a; return *this; }
  VectorField& axpy(double a, const VectorField& o) { x.axpy(a, o.x); y.axpy(a, o.y); return *this; }
  bool operator==(const VectorField&) const = default;
};

inline VectorField operator+(VectorField a, const VectorField& b) { return a += b; }
inline VectorField operator-(VectorField a, const VectorField& b) { return a -= b; }
inline VectorField operator*(double s, VectorField a) { return a *= s; }

/// Values on the two walls, indexed by the x cell index.
struct BoundaryField {
  std::vector<double> bottom;
  std::vector<double> top;

  BoundaryField() = default;
  explicit BoundaryField(int nx, double value = 0.0)
      : bottom(static_cast<std::size_t>(nx), value), top(static_cast<std::size_t>(nx), value) {}
  explicit BoundaryField(const Grid& g, double value = 0.0) : BoundaryField(g.nx(), value) {}

  int nx() const { return static_cast<int>(bottom.size()); }
  bool matches(const Grid& g) const {
    return static_cast<int>(bottom.size()) == g.nx() && static_cast<int>(top.size()) == g.nx();
  }
  std::vector<double>& side(int s) { return s == 0 ? bottom : top; }
  const std::vector<double>& side(int s) const { return s == 0 ? bottom : top; }

  BoundaryField& operator+=(const BoundaryField& o) {
    for (std::size_t i = 0; i < bottom.size(); ++i) { bottom[i] += o.bottom[i]; top[i] += o.top[i]; }
    return *this;
  }
  BoundaryField& operator-=(const BoundaryField& o) {
    for (std::size_t i = 0; i < bottom.size(); ++i) { bottom[i] -= o.bottom[i]; top[i] -= o.top[i]; }
    return *this;
  }
  BoundaryField& operator*=(double a) {
    for (std::size_t i = 0; i < bottom.size(); ++i) { bottom[i] *= a; top[i] *= a; }
    return *this;
  }
  BoundaryField& axpy(double a, const BoundaryField& o) {
    for (std::size_t i = 0; i < bottom.size(); ++i) { bottom[i] += a * o.bottom[i]; top[i] += a * o.top[i]; }
    return *this;
  }
  bool operator==(const BoundaryField&) const = default;
};

inline BoundaryField operator+(BoundaryField a, const BoundaryField& b) { return a += b; }
inline BoundaryField operator-(BoundaryField a, const BoundaryField& b) { return a -= b; }
inline BoundaryField operator*(double s, BoundaryField a) { return a *= s; }

namespace detail {

inline void require(const Grid& g, const ScalarField& f, const char* what) {
  if (!f.matches(g)) {
    throw DimensionError(std::string(what) + ": field is " + std::to_string(f.nx()) + "x" +
                         std::to_string(f.ny()) + ", grid is " + std::to_string(g.nx()) + "x" +
                         std::to_string(g.ny()));
  }
}
inline void require(const Grid& g, const VectorField& v, const char* what) {
  require(g, v.x, what);
  require(g, v.y, what);
}
inline void require(const Grid& g, const BoundaryField& b, const char* what) {
  if (!b.matches(g)) {
    throw DimensionError(std::string(what) + ": boundary field has " + std::to_string(b.bottom.size()) +
                         "/" + std::to_string(b.top.size()) + " entries, grid has nx=" +
                         std::to_string(g.nx()));
  }
}

inline int wrap(int i, int n) {
  int r = i % n;
  return r < 0 ? r + n : r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Second differences

/// Compact five-point Laplacian with zero normal flux on both walls.
inline ScalarField laplacian_neumann(const Grid& g, const ScalarField& f) {
  detail::require(g, f, "laplacian_neumann");
  const int nx = g.nx(), ny = g.ny();
  const double ix2 = 1.0 / (g.hx() * g.hx()), iy2 = 1.0 / (g.hy() * g.hy());
  ScalarField out(g);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double c = f(i, j);
      double v = (f(detail::wrap(i - 1, nx), j) - 2.0 * c + f(detail::wrap(i + 1, nx), j)) * ix2;
      if (j > 0) v += (f(i, j - 1) - c) * iy2;
      if (j < ny - 1) v += (f(i, j + 1) - c) * iy2;
      out(i, j) = v;
    }
  }
  return out;
}

/// Compact Laplacian with prescribed outward normal flux on the walls.
inline ScalarField laplacian_flux(const Grid& g, const ScalarField& f, const BoundaryField& flux) {
  detail::require(g, flux, "laplacian_flux");
  ScalarField out = laplacian_neumann(g, f);
  const double ih = 1.0 / g.hy();
  for (int i = 0; i < g.nx(); ++i) {
    out(i, 0) += flux.bottom[i] * ih;
    out(i, g.ny() - 1) += flux.top[i] * ih;
  }
  return out;
}

/// Compact Laplacian with wall values taken half a cell beyond the outer row.
inline ScalarField laplacian_dirichlet(const Grid& g, const ScalarField& f, const BoundaryField& wall) {
  detail::require(g, f, "laplacian_dirichlet");
  detail::require(g, wall, "laplacian_dirichlet");
  ScalarField out = laplacian_neumann(g, f);
  const double iy2 = 1.0 / (g.hy() * g.hy());
  const int top = g.ny() - 1;
  for (int i = 0; i < g.nx(); ++i) {
    out(i, 0) += 2.0 * (wall.bottom[i] - f(i, 0)) * iy2;
    out(i, top) += 2.0 * (wall.top[i] - f(i, top)) * iy2;
  }
  return out;
}

/// Outward normal derivative matching laplacian_dirichlet: 2 (wall - f_adjacent) / hy.
inline BoundaryField wall_flux(const Grid& g, const ScalarField& f, const BoundaryField& wall) {
  detail::require(g, f, "wall_flux");
  detail::require(g, wall, "wall_flux");
  BoundaryField out(g);
  const double s = 2.0 / g.hy();
  for (int i = 0; i < g.nx(); ++i) {
    out.bottom[i] = s * (wall.bottom[i] - f(i, 0));
    out.top[i] = s * (wall.top[i] - f(i, g.ny() - 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// First differences

/// Central differences; second-order one-sided in y on the wall-adjacent rows.
inline VectorField gradient(const Grid& g, const ScalarField& f) {
  detail::require(g, f, "gradient");
  const int nx = g.nx(), ny = g.ny();
  const double ax = 0.5 / g.hx(), ay = 0.5 / g.hy();
  VectorField out(g);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      out.x(i, j) = (f(detail::wrap(i + 1, nx), j) - f(detail::wrap(i - 1, nx), j)) * ax;
      double dy;
      if (j == 0) {
        dy = -3.0 * f(i, 0) + 4.0 * f(i, 1) - f(i, 2);
      } else if (j == ny - 1) {
        dy = 3.0 * f(i, ny - 1) - 4.0 * f(i, ny - 2) + f(i, ny - 3);
      } else {
        dy = f(i, j + 1) - f(i, j - 1);
      }
      out.y(i, j) = dy * ay;
    }
  }
  return out;
}

/// Negative adjoint of gradient in the cell inner product, so that
/// sum(divergence(v) * f) = -sum(v . gradient(f)) holds to rounding.
inline ScalarField divergence(const Grid& g, const VectorField& v) {
  detail::require(g, v, "divergence");
  const int nx = g.nx(), ny = g.ny();
  const double ax = 0.5 / g.hx(), ay = 0.5 / g.hy();
  ScalarField out(g);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      out(i, j) = (v.x(detail::wrap(i + 1, nx), j) - v.x(detail::wrap(i - 1, nx), j)) * ax;
    }
  }
  // Transpose of the y-difference matrix, accumulated column by column.
  for (int i = 0; i < nx; ++i) {
    auto add = [&](int row, int col, double w) { out(i, col) -= w * v.y(i, row) * ay; };
    add(0, 0, -3.0);
    add(0, 1, 4.0);
    add(0, 2, -1.0);
    for (int j = 1; j < ny - 1; ++j) {
      add(j, j + 1, 1.0);
      add(j, j - 1, -1.0);
    }
    add(ny - 1, ny - 1, 3.0);
    add(ny - 1, ny - 2, -4.0);
    add(ny - 1, ny - 3, 1.0);
  }
  return out;
}

/// Three-point one-sided outward normal derivative from the cell values.
inline BoundaryField normal_derivative(const Grid& g, const ScalarField& f) {
  detail::require(g, f, "normal_derivative");
  BoundaryField out(g);
  const int t = g.ny() - 1;
  const double ih = 1.0 / g.hy();
  for (int i = 0; i < g.nx(); ++i) {
    out.bottom[i] = (2.0 * f(i, 0) - 3.0 * f(i, 1) + f(i, 2)) * ih;
    out.top[i] = (2.0 * f(i, t) - 3.0 * f(i, t - 1) + f(i, t - 2)) * ih;
  }
  return out;
}

/// Quadratic extrapolation of the three outer rows onto each wall.
inline BoundaryField trace(const Grid& g, const ScalarField& f) {
  detail::require(g, f, "trace");
  BoundaryField out(g);
  const int t = g.ny() - 1;
  for (int i = 0; i < g.nx(); ++i) {
    out.bottom[i] = (15.0 * f(i, 0) - 10.0 * f(i, 1) + 3.0 * f(i, 2)) / 8.0;
    out.top[i] = (15.0 * f(i, t) - 10.0 * f(i, t - 1) + 3.0 * f(i, t - 2)) / 8.0;
  }
  return out;
}

/// Periodic central difference along each wall.
inline BoundaryField boundary_gradient(const Grid& g, const BoundaryField& b) {
  detail::require(g, b, "boundary_gradient");
  const int nx = g.nx();
  const double a = 0.5 / g.hx();
  BoundaryField out(g);
  for (int s = 0; s < 2; ++s) {
    const auto& in = b.side(s);
    auto& o = out.side(s);
    for (int i = 0; i < nx; ++i) o[i] = (in[detail::wrap(i + 1, nx)] - in[detail::wrap(i - 1, nx)]) * a;
  }
  return out;
}

inline BoundaryField boundary_laplacian(const Grid& g, const BoundaryField& b) {
  detail::require(g, b, "boundary_laplacian");
  const int nx = g.nx();
  const double a = 1.0 / (g.hx() * g.hx());
  BoundaryField out(g);
  for (int s = 0; s < 2; ++s) {
    const auto& in = b.side(s);
    auto& o = out.side(s);
    for (int i = 0; i < nx; ++i) {
      o[i] = (in[detail::wrap(i - 1, nx)] - 2.0 * in[i] + in[detail::wrap(i + 1, nx)]) * a;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quadratures

inline double integrate(const Grid& g, const ScalarField& f) {
  detail::require(g, f, "integrate");
  double s = 0.0;
  for (double v : f.data()) s += v;
  return s * g.cell_area();
}

inline double mean(const Grid& g, const ScalarField& f) { return integrate(g, f) / g.volume(); }

inline double inner(const Grid& g, const ScalarField& a, const ScalarField& b) {
  detail::require(g, a, "inner");
  detail::require(g, b, "inner");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s * g.cell_area();
}

inline double inner(const Grid& g, const VectorField& a, const VectorField& b) {
  return inner(g, a.x, b.x) + inner(g, a.y, b.y);
}

inline double norm_sq(const Grid& g, const ScalarField& f) { return inner(g, f, f); }
inline double norm_sq(const Grid& g, const VectorField& v) { return inner(g, v, v); }

inline double wall_integral(const Grid& g, const BoundaryField& b) {
  detail::require(g, b, "wall_integral");
  double s = 0.0;
  for (int i = 0; i < g.nx(); ++i) s += b.bottom[i] + b.top[i];
  return s * g.hx();
}

inline double wall_mean(const Grid& g, const BoundaryField& b) {
  return wall_integral(g, b) / g.wall_measure();
}

inline double wall_inner(const Grid& g, const BoundaryField& a, const BoundaryField& b) {
  detail::require(g, a, "wall_inner");
  detail::require(g, b, "wall_inner");
  double s = 0.0;
  for (int i = 0; i < g.nx(); ++i) s += a.bottom[i] * b.bottom[i] + a.top[i] * b.top[i];
  return s * g.hx();
}

inline double wall_norm_sq(const Grid& g, const BoundaryField& b) { return wall_inner(g, b, b); }

inline double max_abs(const ScalarField& f) {
  double m = 0.0;
  for (double v : f.data()) m = std::max(m, std::abs(v));
  return m;
}
inline double max_abs(const VectorField& v) { return std::max(max_abs(v.x), max_abs(v.y)); }
inline double max_abs(const BoundaryField& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < b.bottom.size(); ++i) m = std::max({m, std::abs(b.bottom[i]), std::abs(b.top[i])});
  return m;
}

inline bool all_finite(const ScalarField& f) {
  return std::all_of(f.data().begin(), f.data().end(), [](double v) { return std::isfinite(v); });
}
inline bool all_finite(const VectorField& v) { return all_finite(v.x) && all_finite(v.y); }
inline bool all_finite(const BoundaryField& b) {
  auto ok = [](const std::vector<double>& s) {
    return std::all_of(s.begin(), s.end(), [](double v) { return std::isfinite(v); });
  };
  return ok(b.bottom) && ok(b.top);
}

// ---------------------------------------------------------------------------
// Discrete H1 seminorms consistent with the second differences above.

/// Squared gradient norm of f with zero flux through the walls; equals
/// -inner(f, laplacian_neumann(f)).
inline double grad_norm_sq_neumann(const Grid& g, const ScalarField& f) {
  detail::require(g, f, "grad_norm_sq_neumann");
  const int nx = g.nx(), ny = g.ny();
  const double wx = g.hy() / g.hx(), wy = g.hx() / g.hy();
  double s = 0.0;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double dx = f(detail::wrap(i + 1, nx), j) - f(i, j);
      s += wx * dx * dx;
      if (j + 1 < ny) {
        const double dy = f(i, j + 1) - f(i, j);
        s += wy * dy * dy;
      }
    }
  }
  return s;
}

/// Squared gradient norm of f with wall values on the half cells; equals
/// -inner(f, laplacian_dirichlet(f, wall)) + wall_inner(wall, wall_flux(f, wall)).
inline double grad_norm_sq_dirichlet(const Grid& g, const ScalarField& f, const BoundaryField& wall) {
  detail::require(g, wall, "grad_norm_sq_dirichlet");
  double s = grad_norm_sq_neumann(g, f);
  const double w = 2.0 * g.hx() / g.hy();
  const int t = g.ny() - 1;
  for (int i = 0; i < g.nx(); ++i) {
    const double b = f(i, 0) - wall.bottom[i];
    const double u = f(i, t) - wall.top[i];
    s += w * (b * b + u * u);
  }
  return s;
}

/// Squared tangential gradient norm along both walls (forward differences);
/// equals -wall_inner(b, boundary_laplacian(b)).
inline double boundary_grad_norm_sq(const Grid& g, const BoundaryField& b) {
  detail::require(g, b, "boundary_grad_norm_sq");
  const int nx = g.nx();
  double s = 0.0;
  for (int side = 0; side < 2; ++side) {
    const auto& v = b.side(side);
    for (int i = 0; i < nx; ++i) {
      const double d = v[detail::wrap(i + 1, nx)] - v[i];
      s += d * d;
    }
  }
  return s / g.hx();
}

// ---------------------------------------------------------------------------
// Construction helpers

template <class F>
ScalarField sample(const Grid& g, F&& f) {
  ScalarField out(g);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) out(i, j) = f(g.x(i), g.y(j));
  return out;
}

/// Evaluate f(x, y) on the walls y = 0 and y = ly.
template <class F>
BoundaryField sample_walls(const Grid& g, F&& f) {
  BoundaryField out(g);
  for (int i = 0; i < g.nx(); ++i) {
    out.bottom[i] = f(g.x(i), 0.0);
    out.top[i] = f(g.x(i), g.ly());
  }
  return out;
}

}  // namespace schns
