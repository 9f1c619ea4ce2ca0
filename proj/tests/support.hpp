#pragma once

// Shared fixtures and independent oracles for the unit tests.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <complex>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rabichirp/rabichirp.hpp"

namespace testing_support {

using rabichirp::SystemModel;
using rabichirp::TimeFunction;

inline SystemModel constant_model(double wab, int sign, double maa, double mbb, double mab) {
  SystemModel m;
  m.omega_ab = TimeFunction::constant(wab);
  m.sign_ab = sign;
  m.mu_aa = TimeFunction::constant(maa);
  m.mu_bb = TimeFunction::constant(mbb);
  m.mu_ab = TimeFunction::constant(mab);
  return m;
}

/// Adaptive Gauss–Kronrod ∫_a^b f.
inline double adaptive_integral(const std::function<double(double)>& f, double a, double b) {
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14, &err);
}

/// Polynomial through (xs, ys) evaluated at x in Lagrange form.
inline double lagrange(std::span<const double> xs, std::span<const double> ys, double x) {
  double acc = 0.0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    double w = 1.0;
    for (std::size_t k = 0; k < xs.size(); ++k)
      if (k != j) w *= (x - xs[k]) / (xs[j] - xs[k]);
    acc += w * ys[j];
  }
  return acc;
}

using Mat2 = Eigen::Matrix2cd;
using Vec2 = Eigen::Vector2cd;

/// exp(M) by Eigen's Padé-based matrix exponential.
inline Mat2 expm(const Mat2& m) { return m.exp(); }

/// Fresh scratch directory under the build tree, removed first if present.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("rabichirp_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support
