#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "schns/grid.hpp"

namespace testing_support {

using schns::BoundaryField;
using schns::Grid;
using schns::ScalarField;
using schns::VectorField;

inline ScalarField uniform_field(const Grid& g, std::mt19937_64& gen, double a = 1.0) {
  std::uniform_real_distribution<double> d(-a, a);
  ScalarField f(g);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = d(gen);
  return f;
}

inline VectorField uniform_vector(const Grid& g, std::mt19937_64& gen, double a = 1.0) {
  VectorField v(g);
  v.x = uniform_field(g, gen, a);
  v.y = uniform_field(g, gen, a);
  return v;
}

inline BoundaryField uniform_wall(const Grid& g, std::mt19937_64& gen, double a = 1.0) {
  std::uniform_real_distribution<double> d(-a, a);
  BoundaryField b(g);
  for (auto& v : b.bottom) v = d(gen);
  for (auto& v : b.top) v = d(gen);
  return b;
}

/// Slope of log(err) against log(h) through the end points.
inline double order(const std::vector<double>& h, const std::vector<double>& err) {
  return std::log(err.front() / err.back()) / std::log(h.front() / h.back());
}

inline double max_diff(const ScalarField& a, const ScalarField& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

inline double max_diff(const BoundaryField& a, const BoundaryField& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.bottom.size(); ++k)
    m = std::max({m, std::abs(a.bottom[k] - b.bottom[k]), std::abs(a.top[k] - b.top[k])});
  return m;
}

inline bool bit_equal(const ScalarField& a, const ScalarField& b) { return a.data() == b.data(); }
inline bool bit_equal(const VectorField& a, const VectorField& b) { return bit_equal(a.x, b.x) && bit_equal(a.y, b.y); }
inline bool bit_equal(const BoundaryField& a, const BoundaryField& b) { return a.bottom == b.bottom && a.top == b.top; }

}  // namespace testing_support
