#pragma once

// Bulk and wall nonlinearities. f and g act in the chemical potentials, F and
// G are their primitives with F(0) = G(0) = 0. The truncated versions f_eps,
// g_eps agree with f, g on |r| <= 1/eps and continue linearly outside.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <unsupported/Eigen/Polynomials>

#include "schns/error.hpp"

namespace schns {

class Polynomial {
 public:
  Polynomial() = default;
  /// c[k] is the coefficient of r^k.
  explicit Polynomial(std::vector<double> c) : c_(std::move(c)) {
    while (c_.size() > 1 && c_.back() == 0.0) c_.pop_back();
    if (c_.empty()) c_.push_back(0.0);
  }

  const std::vector<double>& coefficients() const { return c_; }
  int degree() const { return static_cast<int>(c_.size()) - 1; }

  double operator()(double r) const {
    double s = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) s = s * r + *it;
    return s;
  }

  Polynomial derivative() const {
    if (c_.size() <= 1) return Polynomial({0.0});
    std::vector<double> d(c_.size() - 1);
    for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = static_cast<double>(k) * c_[k];
    return Polynomial(std::move(d));
  }

  /// Primitive vanishing at 0.
  Polynomial primitive() const {
    std::vector<double> p(c_.size() + 1, 0.0);
    for (std::size_t k = 0; k < c_.size(); ++k) p[k + 1] = c_[k] / static_cast<double>(k + 1);
    return Polynomial(std::move(p));
  }

  /// Real roots inside [lo, hi], sorted.
  std::vector<double> real_roots(double lo, double hi) const {
    std::vector<double> out;
    if (degree() < 1) return out;
    if (degree() == 1) {
      const double r = -c_[0] / c_[1];
      if (r >= lo && r <= hi) out.push_back(r);
      return out;
    }
    Eigen::VectorXd coeffs(c_.size());
    for (std::size_t k = 0; k < c_.size(); ++k) coeffs[static_cast<Eigen::Index>(k)] = c_[k];
    Eigen::PolynomialSolver<double, Eigen::Dynamic> solver(coeffs);
    std::vector<double> roots;
    solver.realRoots(roots, 1e-8);
    for (double r : roots)
      if (r >= lo && r <= hi) out.push_back(r);
    std::sort(out.begin(), out.end());
    return out;
  }

  bool operator==(const Polynomial&) const = default;

 private:
  std::vector<double> c_{0.0};
};

enum class BulkKind { double_well, polynomial };
enum class BoundaryKind { linear, double_well };

class PotentialSpec {
 public:
  /// f(r) = r^3 - r in the bulk and g(r) = r on the walls.
  PotentialSpec() : PotentialSpec(BulkKind::double_well, {}, BoundaryKind::linear) {}

  PotentialSpec(BulkKind bulk, std::vector<double> bulk_coefficients, BoundaryKind boundary)
      : bulk_(bulk), boundary_(boundary) {
    if (bulk == BulkKind::double_well) {
      f_ = Polynomial({0.0, -1.0, 0.0, 1.0});
    } else {
      if (bulk_coefficients.empty()) throw ParameterError("polynomial bulk potential needs coefficients");
      for (double c : bulk_coefficients)
        if (!std::isfinite(c)) throw ParameterError("bulk potential coefficients must be finite");
      f_ = Polynomial(std::move(bulk_coefficients));
      if (f_(0.0) != 0.0) throw ParameterError("bulk potential must satisfy f(0) = 0");
    }
    g_ = boundary == BoundaryKind::linear ? Polynomial({0.0, 1.0}) : Polynomial({0.0, -1.0, 0.0, 1.0});
    F_ = f_.primitive();
    G_ = g_.primitive();
    df_ = f_.derivative();
    dg_ = g_.derivative();
    c2_ = std::max({0.0, -lower_bound(F_, f_), -lower_bound(G_, g_)});
  }

  static PotentialSpec double_well() { return PotentialSpec(); }

  bool operator==(const PotentialSpec&) const = default;

  BulkKind bulk_kind() const { return bulk_; }
  BoundaryKind boundary_kind() const { return boundary_; }
  const Polynomial& bulk() const { return f_; }
  const Polynomial& boundary() const { return g_; }

  double f(double r) const { return f_(r); }
  double F(double r) const { return F_(r); }
  double g(double r) const { return g_(r); }
  double G(double r) const { return G_(r); }
  double df(double r) const { return df_(r); }
  double dg(double r) const { return dg_(r); }

  /// Lower bound F, G >= -c2.
  double c2() const { return c2_; }

  static double truncation_radius(double eps) {
    check_eps(eps);
    return 1.0 / eps;
  }

  double f_eps(double r, double eps) const { return truncated(f_, df_, r, truncation_radius(eps)); }
  double g_eps(double r, double eps) const { return truncated(g_, dg_, r, truncation_radius(eps)); }
  double F_eps(double r, double eps) const { return truncated_primitive(F_, f_, df_, r, truncation_radius(eps)); }
  double G_eps(double r, double eps) const { return truncated_primitive(G_, g_, dg_, r, truncation_radius(eps)); }

  /// f or its truncation; eps == 0 selects the untruncated potential.
  double f_at(double r, double eps) const { return eps > 0.0 ? f_eps(r, eps) : f(r); }
  double g_at(double r, double eps) const { return eps > 0.0 ? g_eps(r, eps) : g(r); }
  double F_at(double r, double eps) const { return eps > 0.0 ? F_eps(r, eps) : F(r); }
  double G_at(double r, double eps) const { return eps > 0.0 ? G_eps(r, eps) : G(r); }

  /// Global Lipschitz constant of f_eps: max of |f'| over [-M, M].
  double lipschitz_f(double eps) const { return max_abs_on(df_, truncation_radius(eps)); }
  double lipschitz_g(double eps) const { return max_abs_on(dg_, truncation_radius(eps)); }

 private:
  static void check_eps(double eps) {
    if (!(eps > 0.0) || !(eps <= 1.0)) {
      throw ParameterError("regularization parameter must lie in (0, 1], got " + std::to_string(eps));
    }
  }

  static double truncated(const Polynomial& p, const Polynomial& dp, double r, double m) {
    if (r > m) return p(m) + dp(m) * (r - m);
    if (r < -m) return p(-m) + dp(-m) * (r + m);
    return p(r);
  }

  static double truncated_primitive(const Polynomial& P, const Polynomial& p, const Polynomial& dp,
                                    double r, double m) {
    if (r > m) {
      const double d = r - m;
      return P(m) + p(m) * d + 0.5 * dp(m) * d * d;
    }
    if (r < -m) {
      const double d = r + m;
      return P(-m) + p(-m) * d + 0.5 * dp(-m) * d * d;
    }
    return P(r);
  }

  static double max_abs_on(const Polynomial& p, double m) {
    double best = std::max(std::abs(p(-m)), std::abs(p(m)));
    for (double r : p.derivative().real_roots(-m, m)) best = std::max(best, std::abs(p(r)));
    return best;
  }

  /// Global minimum of the primitive P with P' = p.
  static double lower_bound(const Polynomial& P, const Polynomial& p) {
    const int d = P.degree();
    if (d == 0) return P(0.0);
    if (d % 2 == 1 || P.coefficients().back() < 0.0) {
      throw ParameterError("potential primitive is not bounded below");
    }
    double lo = 0.0;
    const double big = std::numeric_limits<double>::max();
    for (double r : p.real_roots(-big, big)) lo = std::min(lo, P(r));
    return lo;
  }

  BulkKind bulk_ = BulkKind::double_well;
  BoundaryKind boundary_ = BoundaryKind::linear;
  Polynomial f_, F_, df_, g_, G_, dg_;
  double c2_ = 0.0;
};

}  // namespace schns
