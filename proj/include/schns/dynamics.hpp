#pragma once

// Time stepper for the cut-off, mollified stochastic CHNS system.
//
// One full step from t_n to t_{n+1}:
//   1. Cahn-Hilliard with dynamic wall condition, theta-weighted in the linear
//      terms, explicit (extrapolated) in f, g and transport.
//   2. Stokes with generalized Navier slip data, solved as a coupled
//      velocity/pressure system so the update is exactly discretely
//      divergence free.
//   3. Multiplicative noise h(u_n, grad phi_n) dW added and projected.
//
// Linear systems are diagonalised by the FFT in x and factorised once per
// wavenumber with dense LU in y.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "schns/grid.hpp"
#include "schns/mollifier.hpp"
#include "schns/noise.hpp"
#include "schns/potentials.hpp"
#include "schns/regularization.hpp"
#include "schns/spectral.hpp"

namespace schns {

struct SchemeParams {
  double dt = 1e-4;
  /// Mollifier radius and truncation parameter; 0 disables both.
  double eps = 0.0;
  double delta = 0.0;
  double R = std::numeric_limits<double>::infinity();
  double div_tol = 1e-10;
  double trace_tol = 1e-2;
  double theta = 0.5;
  /// Evaluate explicit terms at (1 + theta) x_n - theta x_{n-1}.
  bool extrapolate = true;
  double blowup_guard = 1e6;

  bool operator==(const SchemeParams&) const = default;

  void validate() const {
    auto bad = [](const char* k, const std::string& why) { throw ParameterError(std::string(k) + ": " + why); };
    if (!(dt > 0.0) || !std::isfinite(dt)) bad("dt", "must be > 0");
    if (!(eps >= 0.0) || !std::isfinite(eps)) bad("eps", "must be >= 0");
    if (eps > 1.0) bad("eps", "must be <= 1");
    if (!(delta >= 0.0) || !std::isfinite(delta)) bad("delta", "must be >= 0");
    if (!(R > 0.0)) bad("R", "must be > 0");
    if (!(div_tol > 0.0)) bad("div_tol", "must be > 0");
    if (!(trace_tol > 0.0)) bad("trace_tol", "must be > 0");
    if (!(theta >= 0.5 && theta <= 1.0)) bad("theta", "must lie in [0.5, 1]");
    if (!(blowup_guard > 0.0)) bad("blowup_guard", "must be > 0");
  }
};

struct Dissipation {
  double viscous = 0.0;
  double slip = 0.0;
  double chemical = 0.0;
  double boundary = 0.0;
  double regularization = 0.0;

  double total() const { return viscous + slip + chemical + boundary + regularization; }
  bool operator==(const Dissipation&) const = default;
};

/// Quantities realised while taking the step that produced a state.
struct StepRecord {
  Dissipation dissipation;
  /// ||h||_HS^2 at the start of the step.
  double hs_norm_sq = 0.0;
  /// sum_k (h_k, u)^2 and sum_k (h_k, grad phi)^2 at the start of the step.
  double pairing_u = 0.0;
  double pairing_gradphi = 0.0;
  double cutoff = 1.0;
  bool operator==(const StepRecord&) const = default;
};

struct History {
  VectorField u;
  ScalarField phi;
  BoundaryField psi;
  BoundaryField ell;
  bool operator==(const History&) const = default;
};

struct State {
  VectorField u;
  ScalarField phi;
  BoundaryField psi;
  ScalarField mu;
  BoundaryField kpsi;
  double t = 0.0;
  std::uint64_t step = 0;
  /// Wall slip data used in the step that produced this state.
  BoundaryField ell;
  /// Fields at the start of the previous step, for extrapolation.
  std::optional<History> prev;
  StepRecord last;

  bool operator==(const State&) const = default;
};

// ---------------------------------------------------------------------------
// Velocity boundary closure: u_x obeys -/+ d_y u_x + u_x = ell on the bottom/top
// wall, u_y vanishes.

/// Wall value of u_x implied by the slip condition with cell value u_adj.
inline BoundaryField wall_slip(const Grid& g, const ScalarField& ux, const BoundaryField& ell) {
  detail::require(g, ux, "wall_slip");
  detail::require(g, ell, "wall_slip");
  const double h = g.hy();
  BoundaryField w(g);
  for (int i = 0; i < g.nx(); ++i) {
    w.bottom[i] = (h * ell.bottom[i] + 2.0 * ux(i, 0)) / (h + 2.0);
    w.top[i] = (h * ell.top[i] + 2.0 * ux(i, g.ny() - 1)) / (h + 2.0);
  }
  return w;
}

inline VectorField vector_laplacian(const Grid& g, const VectorField& u, const BoundaryField& ell) {
  return VectorField(laplacian_dirichlet(g, u.x, wall_slip(g, u.x, ell)),
                     laplacian_dirichlet(g, u.y, BoundaryField(g)));
}

/// ||grad u||^2 with the wall values used by vector_laplacian.
inline double velocity_grad_norm_sq(const Grid& g, const VectorField& u, const BoundaryField& ell) {
  return grad_norm_sq_dirichlet(g, u.x, wall_slip(g, u.x, ell)) +
         grad_norm_sq_dirichlet(g, u.y, BoundaryField(g));
}

// ---------------------------------------------------------------------------
// Trilinear forms

/// Skew-symmetric advection (u . grad) v + (1/2)(div u) v, written with the
/// discrete divergence so that (b0(u, v), v) vanishes identically.
inline VectorField skew_advection(const Grid& g, const VectorField& u, const VectorField& v) {
  detail::require(g, u, "skew_advection");
  detail::require(g, v, "skew_advection");
  VectorField out(g);
  for (int comp = 0; comp < 2; ++comp) {
    const ScalarField& vc = comp == 0 ? v.x : v.y;
    const VectorField gv = gradient(g, vc);
    VectorField flux(g);
    ScalarField adv(g);
    for (std::size_t c = 0; c < vc.size(); ++c) {
      adv[c] = u.x[c] * gv.x[c] + u.y[c] * gv.y[c];
      flux.x[c] = u.x[c] * vc[c];
      flux.y[c] = u.y[c] * vc[c];
    }
    ScalarField d = divergence(g, flux);
    ScalarField& o = comp == 0 ? out.x : out.y;
    for (std::size_t c = 0; c < vc.size(); ++c) o[c] = 0.5 * (adv[c] + d[c]);
  }
  return out;
}

inline double bilinear_b0(const Grid& g, const VectorField& u, const VectorField& v, const VectorField& w) {
  return inner(g, skew_advection(g, u, v), w);
}

/// (mu grad phi, w)
inline double bilinear_b1(const Grid& g, const ScalarField& mu, const ScalarField& phi, const VectorField& w) {
  const VectorField gp = gradient(g, phi);
  detail::require(g, mu, "bilinear_b1");
  detail::require(g, w, "bilinear_b1");
  double s = 0.0;
  for (std::size_t c = 0; c < mu.size(); ++c) s += mu[c] * (gp.x[c] * w.x[c] + gp.y[c] * w.y[c]);
  return s * g.cell_area();
}

/// (u . grad phi, rho)
inline double bilinear_b2(const Grid& g, const VectorField& u, const ScalarField& phi, const ScalarField& rho) {
  const VectorField gp = gradient(g, phi);
  detail::require(g, u, "bilinear_b2");
  detail::require(g, rho, "bilinear_b2");
  double s = 0.0;
  for (std::size_t c = 0; c < rho.size(); ++c) s += (u.x[c] * gp.x[c] + u.y[c] * gp.y[c]) * rho[c];
  return s * g.cell_area();
}

/// (u_tau d_tau psi, eta) over both walls.
inline double bilinear_bGamma(const Grid& g, const BoundaryField& u_tau, const BoundaryField& psi,
                              const BoundaryField& eta) {
  const BoundaryField d = boundary_gradient(g, psi);
  detail::require(g, u_tau, "bilinear_bGamma");
  detail::require(g, eta, "bilinear_bGamma");
  double s = 0.0;
  for (int i = 0; i < g.nx(); ++i) {
    s += u_tau.bottom[i] * d.bottom[i] * eta.bottom[i] + u_tau.top[i] * d.top[i] * eta.top[i];
  }
  return s * g.hx();
}

// ---------------------------------------------------------------------------
// y-direction matrices

namespace detail {

using Mat = Eigen::MatrixXd;

inline Mat gy_matrix(const Grid& g) {
  const int n = g.ny();
  const double a = 0.5 / g.hy();
  Mat m = Mat::Zero(n, n);
  m(0, 0) = -3.0 * a; m(0, 1) = 4.0 * a; m(0, 2) = -a;
  for (int j = 1; j < n - 1; ++j) { m(j, j - 1) = -a; m(j, j + 1) = a; }
  m(n - 1, n - 1) = 3.0 * a; m(n - 1, n - 2) = -4.0 * a; m(n - 1, n - 3) = a;
  return m;
}

/// Three-point second difference with zero flux, plus `corner` on the two
/// wall-adjacent diagonal entries.
inline Mat lyy_matrix(const Grid& g, double corner) {
  const int n = g.ny();
  const double a = 1.0 / (g.hy() * g.hy());
  Mat m = Mat::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    if (j > 0) { m(j, j - 1) = a; m(j, j) -= a; }
    if (j < n - 1) { m(j, j + 1) = a; m(j, j) -= a; }
  }
  m(0, 0) += corner;
  m(n - 1, n - 1) += corner;
  return m;
}

inline double dirichlet_corner(const Grid& g) { return -2.0 / (g.hy() * g.hy()); }
inline double robin_corner(const Grid& g) { return -2.0 / ((g.hy() + 2.0) * g.hy()); }

/// Solve a real system with the real and imaginary parts of b as two columns.
inline void solve_complex(const Eigen::PartialPivLU<Mat>& lu, Eigen::VectorXcd& b) {
  Mat rhs(b.size(), 2);
  rhs.col(0) = b.real();
  rhs.col(1) = b.imag();
  const Mat x = lu.solve(rhs);
  b.real() = x.col(0);
  b.imag() = x.col(1);
}

inline cplx spec_at(const std::vector<cplx>& s, int ny, int k, int j) {
  return s[static_cast<std::size_t>(k) * ny + j];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Helmholtz-Leray projection: v - G q with G^T G q = G^T v.

class Projector {
 public:
  explicit Projector(const Grid& g) : grid_(g), fft_(g) {
    const int n = g.ny();
    const detail::Mat gy = detail::gy_matrix(g);
    const detail::Mat gtg = gy.transpose() * gy;
    for (int k = 0; k < fft_.modes(); ++k) {
      const double s = RowTransform::difference_symbol(g, k);
      detail::Mat m = gtg + s * s * detail::Mat::Identity(n, n);
      if (s == 0.0) m += detail::Mat::Ones(n, n);
      lu_.emplace_back(m);
    }
    gy_ = gy;
  }

  const Grid& grid() const { return grid_; }

  VectorField apply(const VectorField& v) const {
    detail::require(grid_, v, "helmholtz_project");
    if (!all_finite(v)) throw DataError("helmholtz_project: input is not finite");
    const int n = grid_.ny();
    auto vx = fft_.forward(v.x);
    auto vy = fft_.forward(v.y);
    Eigen::VectorXcd ax(n), ay(n), q(n);
    for (int k = 0; k < fft_.modes(); ++k) {
      const double s = RowTransform::difference_symbol(grid_, k);
      for (int j = 0; j < n; ++j) { ax[j] = detail::spec_at(vx, n, k, j); ay[j] = detail::spec_at(vy, n, k, j); }
      q = cplx(0.0, -s) * ax + gy_.transpose() * ay;
      detail::solve_complex(lu_[k], q);
      ax -= cplx(0.0, s) * q;
      ay -= gy_ * q;
      for (int j = 0; j < n; ++j) {
        vx[static_cast<std::size_t>(k) * n + j] = ax[j];
        vy[static_cast<std::size_t>(k) * n + j] = ay[j];
      }
    }
    VectorField out(fft_.inverse(vx), fft_.inverse(vy));
    return out;
  }

 private:
  Grid grid_;
  RowTransform fft_;
  detail::Mat gy_;
  std::vector<Eigen::PartialPivLU<detail::Mat>> lu_;
};

inline VectorField helmholtz_project(const Grid& g, const VectorField& v) { return Projector(g).apply(v); }

// ---------------------------------------------------------------------------
// Stokes: (u' - u)/dt = L(u_theta) + force - G q, G^T u' = 0,
// u_theta = theta u' + (1 - theta) u, slip data ell on the walls.

class StokesSolver {
 public:
  StokesSolver(const Grid& g, double dt, double theta) : grid_(g), dt_(dt), theta_(theta), fft_(g) {
    if (!(dt > 0.0)) throw ParameterError("stokes: dt must be > 0");
    const int n = g.ny();
    const detail::Mat gy = detail::gy_matrix(g);
    const detail::Mat lr = detail::lyy_matrix(g, detail::robin_corner(g));
    const detail::Mat ld = detail::lyy_matrix(g, detail::dirichlet_corner(g));
    const detail::Mat id = detail::Mat::Identity(n, n);
    for (int k = 0; k < fft_.modes(); ++k) {
      const double c = RowTransform::laplace_symbol(g, k);
      const double s = RowTransform::difference_symbol(g, k);
      // Unknowns (w, u_y, q) with u_x = i w; the system is then real symmetric.
      detail::Mat m = detail::Mat::Zero(3 * n, 3 * n);
      m.block(0, 0, n, n) = id / dt - theta * (lr - c * id);
      m.block(n, n, n, n) = id / dt - theta * (ld - c * id);
      m.block(0, 2 * n, n, n) = s * id;
      m.block(2 * n, 0, n, n) = s * id;
      m.block(n, 2 * n, n, n) = gy;
      m.block(2 * n, n, n, n) = gy.transpose();
      if (s == 0.0) m.block(2 * n, 2 * n, n, n) = detail::Mat::Ones(n, n);
      lu_.emplace_back(m);
    }
  }

  double dt() const { return dt_; }
  double theta() const { return theta_; }

  VectorField solve(const VectorField& u, const VectorField& force, const BoundaryField& ell) const {
    const Grid& g = grid_;
    detail::require(g, u, "stokes_substep");
    detail::require(g, force, "stokes_substep");
    detail::require(g, ell, "stokes_substep");
    if (!all_finite(ell)) throw DataError("stokes_substep: wall data is not finite");
    const int n = g.ny();
    VectorField r = (1.0 / dt_) * u;
    r.axpy(1.0 - theta_, vector_laplacian(g, u, BoundaryField(g)));
    r += force;
    const double robin = -detail::robin_corner(g);
    for (int i = 0; i < g.nx(); ++i) {
      r.x(i, 0) += robin * ell.bottom[i];
      r.x(i, n - 1) += robin * ell.top[i];
    }
    auto rx = fft_.forward(r.x);
    auto ry = fft_.forward(r.y);
    Eigen::VectorXcd b(3 * n);
    for (int k = 0; k < fft_.modes(); ++k) {
      for (int j = 0; j < n; ++j) {
        b[j] = cplx(0.0, -1.0) * detail::spec_at(rx, n, k, j);
        b[n + j] = detail::spec_at(ry, n, k, j);
        b[2 * n + j] = 0.0;
      }
      detail::solve_complex(lu_[k], b);
      for (int j = 0; j < n; ++j) {
        rx[static_cast<std::size_t>(k) * n + j] = cplx(0.0, 1.0) * b[j];
        ry[static_cast<std::size_t>(k) * n + j] = b[n + j];
      }
    }
    return VectorField(fft_.inverse(rx), fft_.inverse(ry));
  }

 private:
  Grid grid_;
  double dt_;
  double theta_;
  RowTransform fft_;
  std::vector<Eigen::PartialPivLU<detail::Mat>> lu_;
};

inline VectorField stokes_substep(const Grid& g, const VectorField& u, const VectorField& body_force,
                                  const BoundaryField& ell, double dt, double theta) {
  return StokesSolver(g, dt, theta).solve(u, body_force, ell);
}

// ---------------------------------------------------------------------------
// Cahn-Hilliard with dynamic wall condition.
//
//   (phi' - phi)/dt + a_phi = L_N mu + s_phi
//   mu = -L_D(phi_theta; psi_theta) + delta (phi' - phi)/dt + f_expl
//   (psi' - psi)/dt + a_psi = -K + s_psi
//   K = -D_tau psi_theta + d_n(phi_theta; psi_theta) + psi_theta + g_expl

struct ChInput {
  ScalarField phi;
  BoundaryField psi;
  ScalarField f_explicit;
  BoundaryField g_explicit;
  ScalarField advection;
  BoundaryField wall_advection;
  /// Optional volume and wall sources (manufactured solutions).
  std::optional<ScalarField> source;
  std::optional<BoundaryField> wall_source;
};

struct ChResult {
  ScalarField phi;
  BoundaryField psi;
  ScalarField mu;
  BoundaryField kpsi;
  ScalarField phi_theta;
  BoundaryField psi_theta;
  ScalarField f_explicit;
  BoundaryField g_explicit;
};

/// -D_tau psi + d_n(phi; psi) + psi
inline BoundaryField wall_operator(const Grid& g, const ScalarField& phi, const BoundaryField& psi) {
  BoundaryField k = wall_flux(g, phi, psi);
  k -= boundary_laplacian(g, psi);
  k += psi;
  return k;
}

class CahnHilliardSolver {
 public:
  CahnHilliardSolver(const Grid& g, double dt, double theta, double delta)
      : grid_(g), dt_(dt), theta_(theta), delta_(delta), fft_(g) {
    if (!(dt > 0.0)) throw ParameterError("cahn-hilliard: dt must be > 0");
    const int n = g.ny();
    const int size = 2 * n + 2;
    const detail::Mat ln = detail::lyy_matrix(g, 0.0);
    const detail::Mat ld = detail::lyy_matrix(g, detail::dirichlet_corner(g));
    const detail::Mat id = detail::Mat::Identity(n, n);
    const double iy2 = 1.0 / (g.hy() * g.hy());
    const double fy = 2.0 / g.hy();
    for (int k = 0; k < fft_.modes(); ++k) {
      const double c = RowTransform::laplace_symbol(g, k);
      detail::Mat m = detail::Mat::Zero(size, size);
      m.block(0, 0, n, n) = id;
      m.block(0, n, n, n) = -dt * (ln - c * id);
      m.block(n, n, n, n) = id;
      m.block(n, 0, n, n) = theta * (ld - c * id) - (delta / dt) * id;
      m(n, 2 * n) = theta * 2.0 * iy2;
      m(2 * n - 1, 2 * n + 1) = theta * 2.0 * iy2;
      const double diag = 1.0 + dt * theta * (c + fy + 1.0);
      m(2 * n, 2 * n) = diag;
      m(2 * n, 0) = -dt * theta * fy;
      m(2 * n + 1, 2 * n + 1) = diag;
      m(2 * n + 1, n - 1) = -dt * theta * fy;
      lu_.emplace_back(m);
    }
  }

  double dt() const { return dt_; }
  double theta() const { return theta_; }
  double delta() const { return delta_; }

  ChResult solve(const ChInput& in) const {
    const Grid& g = grid_;
    detail::require(g, in.phi, "ch_substep");
    detail::require(g, in.psi, "ch_substep");
    detail::require(g, in.f_explicit, "ch_substep");
    detail::require(g, in.g_explicit, "ch_substep");
    detail::require(g, in.advection, "ch_substep");
    detail::require(g, in.wall_advection, "ch_substep");
    const int n = g.ny();
    const double a = 1.0 - theta_;

    ScalarField r1 = in.phi;
    r1.axpy(-dt_, in.advection);
    if (in.source) r1.axpy(dt_, *in.source);
    ScalarField r2 = in.f_explicit;
    r2.axpy(-a, laplacian_dirichlet(g, in.phi, in.psi));
    r2.axpy(-delta_ / dt_, in.phi);
    BoundaryField r3 = in.psi;
    const BoundaryField k0 = wall_operator(g, in.phi, in.psi);
    r3.axpy(-dt_ * a, k0);
    r3.axpy(-dt_, in.g_explicit);
    r3.axpy(-dt_, in.wall_advection);
    if (in.wall_source) r3.axpy(dt_, *in.wall_source);

    auto s1 = fft_.forward(r1);
    auto s2 = fft_.forward(r2);
    auto sb = fft_.forward(r3.bottom);
    auto st = fft_.forward(r3.top);
    Eigen::VectorXcd b(2 * n + 2);
    for (int k = 0; k < fft_.modes(); ++k) {
      for (int j = 0; j < n; ++j) {
        b[j] = detail::spec_at(s1, n, k, j);
        b[n + j] = detail::spec_at(s2, n, k, j);
      }
      b[2 * n] = sb[k];
      b[2 * n + 1] = st[k];
      detail::solve_complex(lu_[k], b);
      for (int j = 0; j < n; ++j) {
        s1[static_cast<std::size_t>(k) * n + j] = b[j];
        s2[static_cast<std::size_t>(k) * n + j] = b[n + j];
      }
      sb[k] = b[2 * n];
      st[k] = b[2 * n + 1];
    }

    ChResult out;
    out.phi = fft_.inverse(s1);
    out.mu = fft_.inverse(s2);
    out.psi = BoundaryField(g);
    out.psi.bottom = fft_.inverse_wall(sb);
    out.psi.top = fft_.inverse_wall(st);
    out.phi_theta = theta_ * out.phi;
    out.phi_theta.axpy(a, in.phi);
    out.psi_theta = theta_ * out.psi;
    out.psi_theta.axpy(a, in.psi);
    out.kpsi = theta_ * wall_operator(g, out.phi, out.psi);
    out.kpsi.axpy(a, k0);
    out.kpsi += in.g_explicit;
    out.f_explicit = in.f_explicit;
    out.g_explicit = in.g_explicit;
    return out;
  }

 private:
  Grid grid_;
  double dt_, theta_, delta_;
  RowTransform fft_;
  std::vector<Eigen::PartialPivLU<detail::Mat>> lu_;
};

// ---------------------------------------------------------------------------
// Full stepper

inline ScalarField map_field(const ScalarField& f, auto&& fn) {
  ScalarField out = f;
  for (double& v : out.data()) v = fn(v);
  return out;
}

inline BoundaryField map_field(const BoundaryField& b, auto&& fn) {
  BoundaryField out = b;
  for (double& v : out.bottom) v = fn(v);
  for (double& v : out.top) v = fn(v);
  return out;
}

inline ScalarField pointwise_dot(const VectorField& a, const VectorField& b) {
  ScalarField out(a.x.nx(), a.x.ny());
  for (std::size_t c = 0; c < out.size(); ++c) out[c] = a.x[c] * b.x[c] + a.y[c] * b.y[c];
  return out;
}

inline BoundaryField pointwise_mul(const BoundaryField& a, const BoundaryField& b) {
  BoundaryField out = a;
  for (std::size_t i = 0; i < out.bottom.size(); ++i) {
    out.bottom[i] *= b.bottom[i];
    out.top[i] *= b.top[i];
  }
  return out;
}

inline double trace_mismatch(const Grid& g, const ScalarField& phi, const BoundaryField& psi) {
  return max_abs(psi - trace(g, phi));
}

class Stepper {
 public:
  Stepper(const Grid& g, const SchemeParams& p, const PotentialSpec& pot, std::optional<NoiseModel> noise = {})
      : grid_(g),
        params_((p.validate(), p)),
        pot_(pot),
        noise_(std::move(noise)),
        mollifier_(g, p.eps),
        projector_(g),
        stokes_(g, p.dt, p.theta),
        ch_(g, p.dt, p.theta, p.delta) {
    if (noise_ && !(noise_->grid() == g)) throw DimensionError("noise model built for a different grid");
  }

  const Grid& grid() const { return grid_; }
  const SchemeParams& params() const { return params_; }
  const PotentialSpec& potentials() const { return pot_; }
  const std::optional<NoiseModel>& noise() const { return noise_; }
  const Projector& projector() const { return projector_; }
  const StokesSolver& stokes() const { return stokes_; }
  const CahnHilliardSolver& cahn_hilliard() const { return ch_; }

  double cutoff(const State& s) const {
    const CutoffParams cp{params_.R};
    if (!cp.enabled()) return 1.0;
    return psi_R(cp, std::sqrt(norm_sq(grid_, s.u)), v1_norm(grid_, s.phi, s.psi));
  }

  /// Draw the noise increments from rng, then step.
  State step(const State& s, Rng& rng) const {
    if (!noise_) return step(s, nullptr);
    const NoiseIncrement inc = noise_->sample_increments(params_.dt, rng);
    return step(s, &inc);
  }

  /// Step with given increments (nullptr: no noise).
  State step(const State& s, const NoiseIncrement* inc) const {
    const Grid& g = grid_;
    const SchemeParams& p = params_;
    check_state(s);
    if (trace_mismatch(g, s.phi, s.psi) > p.trace_tol) {
      throw StateError("wall values differ from the trace of phi by " +
                       std::to_string(trace_mismatch(g, s.phi, s.psi)) + " > trace_tol");
    }

    const double cut = cutoff(s);
    const bool ext = p.extrapolate && s.prev.has_value();
    const double th = p.theta;
    auto extrap = [&](const auto& now, const auto& old) {
      auto out = (1.0 + th) * now;
      out.axpy(-th, old);
      return out;
    };
    const VectorField ut = ext ? extrap(s.u, s.prev->u) : s.u;
    const ScalarField phit = ext ? extrap(s.phi, s.prev->phi) : s.phi;
    const BoundaryField psit = ext ? extrap(s.psi, s.prev->psi) : s.psi;
    const BoundaryField ell_prev = s.ell.matches(g) ? s.ell : BoundaryField(g);

    const ScalarField jphi = mollifier_.apply(phit);
    const BoundaryField jpsi = mollifier_.apply(psit);
    const VectorField ju = mollifier_.apply(ut);
    const VectorField gjphi = gradient(g, jphi);
    const BoundaryField djpsi = boundary_gradient(g, jpsi);

    ChInput in;
    in.phi = s.phi;
    in.psi = s.psi;
    in.f_explicit = map_field(phit, [&](double r) { return pot_.f_at(r, p.eps); });
    in.g_explicit = map_field(psit, [&](double r) { return pot_.g_at(r, p.eps); });
    in.advection = cut * pointwise_dot(ut, gjphi);
    // Wall transport uses the slip velocity of the new slip data; one corrector
    // pass from the previous step's data keeps the wall work consistent.
    in.wall_advection = cut * pointwise_mul(wall_slip(g, ut.x, ell_prev), djpsi);
    ChResult ch = ch_.solve(in);
    in.wall_advection = cut * pointwise_mul(wall_slip(g, ut.x, cut * pointwise_mul(ch.kpsi, djpsi)), djpsi);
    ch = ch_.solve(in);

    VectorField force = -1.0 * skew_advection(g, ut, ju);
    for (std::size_t c = 0; c < force.x.size(); ++c) {
      force.x[c] += ch.mu[c] * gjphi.x[c];
      force.y[c] += ch.mu[c] * gjphi.y[c];
    }
    force *= cut;
    const BoundaryField ell = cut * pointwise_mul(ch.kpsi, djpsi);
    const VectorField us = stokes_.solve(s.u, force, ell);

    State out;
    out.phi = std::move(ch.phi);
    out.psi = std::move(ch.psi);
    out.mu = std::move(ch.mu);
    out.kpsi = std::move(ch.kpsi);
    out.t = s.t + p.dt;
    out.step = s.step + 1;
    out.ell = ell;
    out.prev = History{s.u, s.phi, s.psi, s.ell.matches(g) ? s.ell : BoundaryField(g)};
    out.last.cutoff = cut;

    VectorField uth = th * us;
    uth.axpy(1.0 - th, s.u);
    Dissipation& d = out.last.dissipation;
    d.viscous = velocity_grad_norm_sq(g, uth, ell);
    d.slip = wall_norm_sq(g, wall_slip(g, uth.x, ell));
    d.chemical = grad_norm_sq_neumann(g, out.mu);
    d.boundary = wall_norm_sq(g, out.kpsi);
    if (p.delta > 0.0) {
      ScalarField rate = out.phi - s.phi;
      rate *= 1.0 / p.dt;
      d.regularization = p.delta * norm_sq(g, rate);
    }

    if (noise_ && inc) {
      const VectorField gphi = gradient(g, s.phi);
      out.last.hs_norm_sq = noise_->hs_norm_sq(s.u, gphi);
      out.last.pairing_u = noise_->pairing_sq_sum(s.u, gphi, s.u);
      out.last.pairing_gradphi = noise_->pairing_sq_sum(s.u, gphi, gphi);
      out.u = projector_.apply(us + noise_->apply_h(s.u, gphi, *inc));
    } else {
      out.u = us;
    }

    const double div = max_abs(divergence(g, out.u));
    if (!(div <= p.div_tol)) {
      throw SolverError("divergence " + std::to_string(div) + " exceeds div_tol after step " +
                        std::to_string(out.step));
    }
    check_blowup(out);
    return out;
  }

 private:
  void check_state(const State& s) const {
    const Grid& g = grid_;
    detail::require(g, s.u, "state.u");
    detail::require(g, s.phi, "state.phi");
    detail::require(g, s.psi, "state.psi");
  }

  void check_blowup(const State& s) const {
    const Grid& g = grid_;
    const double nu = std::sqrt(norm_sq(g, s.u));
    const double np = std::sqrt(norm_sq(g, s.phi));
    const double nm = std::sqrt(norm_sq(g, s.mu));
    const double nb = std::sqrt(wall_norm_sq(g, s.psi));
    const double nk = std::sqrt(wall_norm_sq(g, s.kpsi));
    const double guard = params_.blowup_guard;
    auto ok = [&](double v) { return std::isfinite(v) && v <= guard; };
    if (!(ok(nu) && ok(np) && ok(nm) && ok(nb) && ok(nk))) {
      std::ostringstream os;
      os.precision(6);
      os << "norm blow-up at step " << s.step << " (t=" << s.t << "): |u|=" << nu << " |phi|=" << np
         << " |mu|=" << nm << " |psi|=" << nb << " |K|=" << nk << " guard=" << guard;
      throw DivergenceError(os.str());
    }
  }

  Grid grid_;
  SchemeParams params_;
  PotentialSpec pot_;
  std::optional<NoiseModel> noise_;
  Mollifier mollifier_;
  Projector projector_;
  StokesSolver stokes_;
  CahnHilliardSolver ch_;
};

/// One CH step with explicit potentials at (phi, psi), transport by u and no cut-off.
inline ChResult ch_substep(const Grid& g, const ScalarField& phi, const BoundaryField& psi,
                           const VectorField& u_transport, const SchemeParams& params,
                           const PotentialSpec& pot) {
  params.validate();
  if (trace_mismatch(g, phi, psi) > params.trace_tol) {
    throw StateError("wall values differ from the trace of phi beyond trace_tol");
  }
  const Mollifier j(g, params.eps);
  ChInput in;
  in.phi = phi;
  in.psi = psi;
  in.f_explicit = map_field(phi, [&](double r) { return pot.f_at(r, params.eps); });
  in.g_explicit = map_field(psi, [&](double r) { return pot.g_at(r, params.eps); });
  in.advection = pointwise_dot(u_transport, gradient(g, j.apply(phi)));
  in.wall_advection =
      pointwise_mul(wall_slip(g, u_transport.x, BoundaryField(g)), boundary_gradient(g, j.apply(psi)));
  return CahnHilliardSolver(g, params.dt, params.theta, params.delta).solve(in);
}

inline State full_step(const State& s, const Grid& g, const SchemeParams& params, const PotentialSpec& pot,
                       const std::optional<NoiseModel>& noise, Rng& rng) {
  return Stepper(g, params, pot, noise).step(s, rng);
}

// ---------------------------------------------------------------------------
// Initial data

struct InitialCondition {
  /// zero | cosine | random
  std::string kind = "cosine";
  double phi_mean = 0.2;
  double phi_amp = 0.3;
  double u_amp = 0.0;
  int mode = 1;
  std::uint64_t seed = 0;
  bool operator==(const InitialCondition&) const = default;
};

/// Fields from smooth profiles; u is projected, psi is the profile on the walls,
/// mu and K are evaluated from (phi, psi).
inline State make_initial_state(const Grid& g, const InitialCondition& ic, const PotentialSpec& pot,
                                double eps = 0.0, const Projector* projector = nullptr) {
  const double tau = 2.0 * std::numbers::pi;
  const double lx = g.lx(), ly = g.ly();
  State s;
  if (ic.kind == "zero") {
    s.u = VectorField(g);
    s.phi = ScalarField(g);
    s.psi = BoundaryField(g);
  } else if (ic.kind == "cosine" || ic.kind == "random") {
    std::vector<double> a(8, 0.0), b(8, 0.0);
    if (ic.kind == "cosine") {
      a[0] = 1.0;
    } else {
      Rng rng(ic.seed);
      for (int m = 0; m < 8; ++m) {
        a[m] = rng.normal() / (1.0 + m);
        b[m] = rng.normal() / (1.0 + m);
      }
    }
    auto phi_fn = [&](double x, double y) {
      double v = 0.0;
      for (int m = 0; m < 4; ++m) {
        v += a[m] * std::cos(tau * (ic.mode + m) * x / lx) * std::cos(std::numbers::pi * (m % 2 + 1) * y / ly);
      }
      for (int m = 0; m < 4; ++m) {
        v += a[4 + m] * std::sin(tau * (ic.mode + m) * x / lx) * std::cos(std::numbers::pi * m * y / ly);
      }
      return ic.phi_mean + ic.phi_amp * v;
    };
    s.phi = sample(g, phi_fn);
    s.psi = sample_walls(g, phi_fn);
    // Velocity from a wall-vanishing stream function, then projected.
    auto stream_dx = [&](double x, double y) {
      double v = 0.0;
      const double w = std::sin(std::numbers::pi * y / ly);
      for (int m = 0; m < 4; ++m) {
        const double kx = tau * (ic.mode + m) / lx;
        const double am = ic.kind == "cosine" ? (m == 0 ? 1.0 : 0.0) : b[m];
        v += am * kx * std::cos(kx * x) * w * w;
      }
      return v;
    };
    auto stream_dy = [&](double x, double y) {
      double v = 0.0;
      const double ky = std::numbers::pi / ly;
      const double dw2 = 2.0 * std::sin(ky * y) * std::cos(ky * y) * ky;
      for (int m = 0; m < 4; ++m) {
        const double kx = tau * (ic.mode + m) / lx;
        const double am = ic.kind == "cosine" ? (m == 0 ? 1.0 : 0.0) : b[m];
        v += am * std::sin(kx * x) * dw2;
      }
      return v;
    };
    VectorField u(sample(g, stream_dy), -1.0 * sample(g, stream_dx));
    u *= ic.u_amp;
    s.u = projector ? projector->apply(u) : helmholtz_project(g, u);
  } else {
    throw ParameterError("unknown initial condition '" + ic.kind + "'");
  }
  const ScalarField f = map_field(s.phi, [&](double r) { return pot.f_at(r, eps); });
  const BoundaryField gg = map_field(s.psi, [&](double r) { return pot.g_at(r, eps); });
  s.mu = f - laplacian_dirichlet(g, s.phi, s.psi);
  s.kpsi = wall_operator(g, s.phi, s.psi) + gg;
  s.ell = BoundaryField(g);
  return s;
}

}  // namespace schns
