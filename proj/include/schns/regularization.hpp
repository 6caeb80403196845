#pragma once

// Smooth cut-off of the nonlinear terms and the matching stopping-time
// detector.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>

#include "schns/grid.hpp"

namespace schns {

struct CutoffParams {
  /// Infinite radius disables the cut-off.
  double R = std::numeric_limits<double>::infinity();

  bool enabled() const { return std::isfinite(R); }
};

namespace detail {
inline double bump(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }
}  // namespace detail

/// 1 on [0, R), 0 on [2R, inf), smooth and nonincreasing in between.
inline double psi_bar(const CutoffParams& p, double x) {
  if (std::isnan(x)) throw DataError("cut-off argument is NaN");
  if (x < 0.0) throw ParameterError("cut-off argument must be >= 0, got " + std::to_string(x));
  if (!(p.R > 0.0)) throw ParameterError("cut-off radius must be positive");
  if (x < p.R) return 1.0;
  if (x >= 2.0 * p.R) return 0.0;
  const double a = detail::bump((2.0 * p.R - x) / p.R);
  const double b = detail::bump((x - p.R) / p.R);
  return a / (a + b);
}

inline double psi_R(const CutoffParams& p, double u_norm, double v1_norm) {
  return psi_bar(p, u_norm) * psi_bar(p, v1_norm);
}

/// Sup of |d psi_bar / dx| * R for the profile above (attained at x = 1.5 R).
inline double psi_bar_profile_constant() {
  const CutoffParams unit{1.0};
  const double h = 1e-6;
  return (psi_bar(unit, 1.5 - h) - psi_bar(unit, 1.5 + h)) / (2.0 * h);
}

/// sqrt(||phi||_H1^2 + ||psi||_H1(wall)^2) with the discrete seminorms of grid.hpp.
inline double v1_norm(const Grid& g, const ScalarField& phi, const BoundaryField& psi) {
  const double s = norm_sq(g, phi) + grad_norm_sq_dirichlet(g, phi, psi) + wall_norm_sq(g, psi) +
                   boundary_grad_norm_sq(g, psi);
  return std::sqrt(s);
}

struct NormSample {
  double u_norm = 0.0;
  double v1_norm = 0.0;
};

enum class StopNorm {
  /// sqrt(||u||^2 + ||(phi, psi)||_V1^2)
  euclidean,
  velocity,
  phase,
  /// ||u|| + ||(phi, psi)||_V1
  sum,
};

inline double combined_norm(const NormSample& s, StopNorm which) {
  switch (which) {
    case StopNorm::euclidean: return std::hypot(s.u_norm, s.v1_norm);
    case StopNorm::velocity: return s.u_norm;
    case StopNorm::phase: return s.v1_norm;
    case StopNorm::sum: return s.u_norm + s.v1_norm;
  }
  return 0.0;
}

/// First index whose monitored norm reaches 2R; nullopt if none does.
inline std::optional<std::size_t> stopping_time_index(std::span<const NormSample> traj, double R,
                                                      StopNorm which = StopNorm::euclidean) {
  if (traj.empty()) throw DataError("stopping time needs a nonempty trajectory");
  for (std::size_t n = 0; n < traj.size(); ++n) {
    if (std::isnan(traj[n].u_norm) || std::isnan(traj[n].v1_norm)) {
      throw DataError("NaN norm at trajectory index " + std::to_string(n));
    }
  }
  for (std::size_t n = 0; n < traj.size(); ++n) {
    if (combined_norm(traj[n], which) >= 2.0 * R) return n;
  }
  return std::nullopt;
}

}  // namespace schns
