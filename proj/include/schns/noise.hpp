#pragma once

// Truncated Wiener process with K spatial modes and the multiplicative
// intensity h_k(u, grad phi) = sigma_k * (alpha_u u + alpha_phi grad phi) e_k.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "schns/grid.hpp"

namespace schns {

/// splitmix64 finalizer over a golden-ratio counter; seeds for path i.
inline std::uint64_t split_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// mt19937_64 with a Box-Muller normal sampler that keeps no cached variate,
/// so the engine state alone determines every future draw.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  std::string state() const {
    std::ostringstream os;
    os << engine_;
    return os.str();
  }

  void set_state(const std::string& s) {
    std::istringstream is(s);
    std::mt19937_64 e;
    is >> e;
    if (is.fail()) throw FormatError("malformed random engine state");
    engine_ = e;
  }

  bool operator==(const Rng& o) const { return engine_ == o.engine_; }

 private:
  std::mt19937_64 engine_;
};

struct NoiseIncrement {
  std::vector<double> dW;
  double dt = 0.0;
};

class NoiseModel {
 public:
  NoiseModel() = default;

  NoiseModel(const Grid& g, std::vector<ScalarField> basis, std::vector<double> sigma, double alpha_u,
             double alpha_phi)
      : grid_(g), basis_(std::move(basis)), sigma_(std::move(sigma)), alpha_u_(alpha_u), alpha_phi_(alpha_phi) {
    if (basis_.empty()) throw ParameterError("noise model needs at least one mode");
    if (basis_.size() != sigma_.size()) throw DimensionError("noise basis and amplitude counts differ");
    for (const auto& e : basis_) detail::require(g, e, "noise basis");
    for (double s : sigma_)
      if (!(s >= 0.0) || !std::isfinite(s)) throw ParameterError("noise amplitudes must be finite and >= 0");
    weight_ = ScalarField(g);
    for (std::size_t k = 0; k < basis_.size(); ++k) {
      const double s2 = sigma_[k] * sigma_[k];
      for (std::size_t c = 0; c < weight_.size(); ++c) weight_[c] += s2 * basis_[k][c] * basis_[k][c];
      e_max_ = std::max(e_max_, max_abs(basis_[k]));
    }
  }

  /// Low x-Fourier modes times wall-vanishing polynomials in y, orthonormalised
  /// in the discrete L2 product; sigma_k = sigma0 * k^-gamma.
  static NoiseModel channel_modes(const Grid& g, int modes, double sigma0, double gamma, double alpha_u,
                                  double alpha_phi) {
    if (modes < 1) throw ParameterError("noise needs at least one mode");
    if (!(gamma > 0.5)) throw ParameterError("noise decay exponent must exceed 1/2");
    if (!(sigma0 >= 0.0)) throw ParameterError("noise amplitude must be >= 0");
    std::vector<ScalarField> basis;
    const double tau = 2.0 * std::numbers::pi;
    for (int level = 0; static_cast<int>(basis.size()) < modes; ++level) {
      if (level > g.nx() / 2 + g.ny()) throw ParameterError("grid too coarse for the requested noise modes");
      for (int m = 0; m <= level && static_cast<int>(basis.size()) < modes; ++m) {
        const int n = level - m;
        if (2 * m >= g.nx()) continue;
        for (int part = 0; part < (m == 0 ? 1 : 2) && static_cast<int>(basis.size()) < modes; ++part) {
          ScalarField e = sample(g, [&](double x, double y) {
            const double s = y / g.ly();
            const double phase = tau * m * x / g.lx();
            return (part == 0 ? std::cos(phase) : std::sin(phase)) * s * (1.0 - s) * std::pow(2.0 * s - 1.0, n);
          });
          for (const auto& b : basis) e.axpy(-inner(g, e, b), b);
          const double nrm = std::sqrt(norm_sq(g, e));
          if (nrm < 1e-8) continue;
          e *= 1.0 / nrm;
          basis.push_back(std::move(e));
        }
      }
    }
    std::vector<double> sigma(modes);
    for (int k = 0; k < modes; ++k) sigma[k] = sigma0 * std::pow(static_cast<double>(k + 1), -gamma);
    return NoiseModel(g, std::move(basis), std::move(sigma), alpha_u, alpha_phi);
  }

  const Grid& grid() const { return grid_; }
  int modes() const { return static_cast<int>(basis_.size()); }
  const ScalarField& basis(int k) const { return basis_[k]; }
  double sigma(int k) const { return sigma_[k]; }
  double alpha_u() const { return alpha_u_; }
  double alpha_phi() const { return alpha_phi_; }

  double sigma_sq_sum() const {
    double s = 0.0;
    for (double v : sigma_) s += v * v;
    return s;
  }

  /// Constant C in ||h(u, grad phi)||_HS^2 <= C (1 + ||u||^2 + ||grad phi||^2); since
  /// h is linear the same C bounds the Lipschitz estimate.
  double a1_constant() const {
    return sigma_sq_sum() * (alpha_u_ * alpha_u_ + alpha_phi_ * alpha_phi_) * e_max_ * e_max_;
  }

  VectorField intensity(const VectorField& u, const VectorField& gradphi) const {
    detail::require(grid_, u, "noise intensity");
    detail::require(grid_, gradphi, "noise intensity");
    VectorField w = alpha_u_ * u;
    w.axpy(alpha_phi_, gradphi);
    return w;
  }

  /// h_k(u, grad phi) for a single mode.
  VectorField mode_field(const VectorField& u, const VectorField& gradphi, int k) const {
    VectorField w = intensity(u, gradphi);
    modulate(w, basis_[k], sigma_[k]);
    return w;
  }

  VectorField apply_h(const VectorField& u, const VectorField& gradphi, const NoiseIncrement& inc) const {
    check(inc);
    ScalarField m(grid_);
    for (int k = 0; k < modes(); ++k) m.axpy(sigma_[k] * inc.dW[k], basis_[k]);
    VectorField w = intensity(u, gradphi);
    modulate(w, m, 1.0);
    return w;
  }

  double hs_norm_sq(const VectorField& u, const VectorField& gradphi) const {
    const VectorField w = intensity(u, gradphi);
    double s = 0.0;
    for (std::size_t c = 0; c < weight_.size(); ++c) s += weight_[c] * (w.x[c] * w.x[c] + w.y[c] * w.y[c]);
    return s * grid_.cell_area();
  }

  /// (h_k(u, grad phi), v) for every mode.
  std::vector<double> pairings(const VectorField& u, const VectorField& gradphi, const VectorField& v) const {
    const VectorField w = intensity(u, gradphi);
    detail::require(grid_, v, "noise pairing");
    ScalarField wv(grid_);
    for (std::size_t c = 0; c < wv.size(); ++c) wv[c] = w.x[c] * v.x[c] + w.y[c] * v.y[c];
    std::vector<double> out(modes());
    for (int k = 0; k < modes(); ++k) out[k] = sigma_[k] * inner(grid_, wv, basis_[k]);
    return out;
  }

  /// Sum over modes of (h_k, v)^2.
  double pairing_sq_sum(const VectorField& u, const VectorField& gradphi, const VectorField& v) const {
    double s = 0.0;
    for (double p : pairings(u, gradphi, v)) s += p * p;
    return s;
  }

  NoiseIncrement sample_increments(double dt, Rng& rng) const {
    if (!(dt >= 0.0) || !std::isfinite(dt)) throw ParameterError("noise increment needs dt >= 0");
    NoiseIncrement inc;
    inc.dt = dt;
    inc.dW.resize(basis_.size());
    const double s = std::sqrt(dt);
    for (double& w : inc.dW) w = s * rng.normal();
    return inc;
  }

 private:
  void check(const NoiseIncrement& inc) const {
    if (static_cast<int>(inc.dW.size()) != modes()) {
      throw DimensionError("noise increment has " + std::to_string(inc.dW.size()) + " modes, model has " +
                           std::to_string(modes()));
    }
  }

  static void modulate(VectorField& w, const ScalarField& m, double scale) {
    for (std::size_t c = 0; c < m.size(); ++c) {
      w.x[c] *= scale * m[c];
      w.y[c] *= scale * m[c];
    }
  }

  Grid grid_;
  std::vector<ScalarField> basis_;
  std::vector<double> sigma_;
  double alpha_u_ = 0.0;
  double alpha_phi_ = 0.0;
  ScalarField weight_;
  double e_max_ = 0.0;
};

inline NoiseIncrement sample_increments(const NoiseModel& model, double dt, Rng& rng) {
  return model.sample_increments(dt, rng);
}

inline VectorField apply_h(const NoiseModel& model, const VectorField& u, const VectorField& gradphi,
                           const NoiseIncrement& inc) {
  return model.apply_h(u, gradphi, inc);
}

inline double hs_norm_sq(const NoiseModel& model, const VectorField& u, const VectorField& gradphi) {
  return model.hs_norm_sq(u, gradphi);
}

}  // namespace schns
