#pragma once

// Real FFT along the periodic x direction. Spectra are stored mode-major,
// spec[k * ny + j] for k = 0 .. nx/2, which is the layout the per-mode
// solvers in dynamics.hpp consume.

#include <complex>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "schns/grid.hpp"

namespace schns {

using cplx = std::complex<double>;

class RowTransform {
 public:
  RowTransform() = default;
  explicit RowTransform(const Grid& g) : nx_(g.nx()), ny_(g.ny()), modes_(g.nx() / 2 + 1) {
    fft_.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    row_.resize(nx_);
    spec_row_.resize(modes_);
  }

  int modes() const { return modes_; }

  std::vector<cplx> forward(const ScalarField& f) const {
    std::vector<cplx> out(static_cast<std::size_t>(modes_) * ny_);
    for (int j = 0; j < ny_; ++j) {
      for (int i = 0; i < nx_; ++i) row_[i] = f(i, j);
      fft_.fwd(spec_row_, row_);
      for (int k = 0; k < modes_; ++k) out[static_cast<std::size_t>(k) * ny_ + j] = spec_row_[k];
    }
    return out;
  }

  ScalarField inverse(const std::vector<cplx>& spec) const {
    ScalarField out(nx_, ny_);
    for (int j = 0; j < ny_; ++j) {
      for (int k = 0; k < modes_; ++k) spec_row_[k] = spec[static_cast<std::size_t>(k) * ny_ + j];
      clean_real_modes();
      fft_.inv(row_, spec_row_, nx_);
      for (int i = 0; i < nx_; ++i) out(i, j) = row_[i];
    }
    return out;
  }

  std::vector<cplx> forward(const std::vector<double>& wall) const {
    row_.assign(wall.begin(), wall.end());
    fft_.fwd(spec_row_, row_);
    return spec_row_;
  }

  std::vector<double> inverse_wall(const std::vector<cplx>& spec) const {
    spec_row_ = spec;
    clean_real_modes();
    fft_.inv(row_, spec_row_, nx_);
    return row_;
  }

  /// Eigenvalue of minus the periodic three-point second difference.
  static double laplace_symbol(const Grid& g, int k) {
    const double t = 2.0 * std::numbers::pi * k / g.nx();
    return (2.0 - 2.0 * std::cos(t)) / (g.hx() * g.hx());
  }

  /// Central first difference acts on mode k as multiplication by i * s_k.
  static double difference_symbol(const Grid& g, int k) {
    if (2 * k == g.nx()) return 0.0;
    const double t = 2.0 * std::numbers::pi * k / g.nx();
    return std::sin(t) / g.hx();
  }

 private:
  void clean_real_modes() const {
    spec_row_[0].imag(0.0);
    if (nx_ % 2 == 0) spec_row_[modes_ - 1].imag(0.0);
  }

  int nx_ = 0;
  int ny_ = 0;
  int modes_ = 0;
  mutable Eigen::FFT<double> fft_;
  mutable std::vector<double> row_;
  mutable std::vector<cplx> spec_row_;
};

}  // namespace schns
