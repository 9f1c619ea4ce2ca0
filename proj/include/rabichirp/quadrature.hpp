#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "rabichirp/errors.hpp"

namespace rabichirp::quadrature {

namespace detail {

// ∫ over one grid interval of the degree-5 interpolant through six
// consecutive nodes, in units of h/1440. Row a integrates [a, a+1] with the
// stencil on nodes 0..5; rows 3 and 4 are mirrors of 1 and 0.
inline constexpr std::array<std::array<double, 6>, 3> kIntervalWeights{{
    {475.0, 1427.0, -798.0, 482.0, -173.0, 27.0},
    {-27.0, 637.0, 1022.0, -258.0, 77.0, -11.0},
    {11.0, -93.0, 802.0, 802.0, -93.0, 11.0},
}};

inline double interval_integral(std::span<const double> f, std::size_t i, double h) {
  const std::size_t n = f.size();
  if (n < 6) return 0.5 * h * (f[i] + f[i + 1]);
  const std::size_t s = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(i) - 2, 0,
                                                   static_cast<std::ptrdiff_t>(n) - 6);
  const std::size_t a = i - s;
  double acc = 0.0;
  if (a <= 2) {
    const auto& w = kIntervalWeights[a];
    for (std::size_t j = 0; j < 6; ++j) acc += w[j] * f[s + j];
  } else {
    const auto& w = kIntervalWeights[4 - a];
    for (std::size_t j = 0; j < 6; ++j) acc += w[5 - j] * f[s + j];
  }
  return acc * h / 1440.0;
}

}  // namespace detail

/// ∫ f over each grid interval [x_i, x_{i+1}] of a uniform grid of spacing h.
/// Sixth-order Newton–Cotes interval rules (one-sided near the ends);
/// fewer than six nodes fall back to the trapezoid rule.
inline std::vector<double> interval_integrals(std::span<const double> f, double h) {
  std::vector<double> out;
  if (f.size() < 2) return out;
  out.reserve(f.size() - 1);
  for (std::size_t i = 0; i + 1 < f.size(); ++i) out.push_back(detail::interval_integral(f, i, h));
  return out;
}

/// Running integral F_k = ∫_{x_0}^{x_k} f, built from `interval_integrals`.
inline std::vector<double> cumulative(std::span<const double> f, double h) {
  if (f.empty()) return {};
  std::vector<double> out(f.size(), 0.0);
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < f.size(); ++i) {
    acc += detail::interval_integral(f, i, h);
    out[i + 1] = acc;
  }
  return out;
}

/// Richardson estimate of the error of `cumulative(f, h)`: the same rule on
/// every other node, compared at the shared nodes and scaled by 1/(2⁶ − 1).
/// Returns 0 when the grid is too short for the coarse pass.
inline double richardson_error(std::span<const double> f, double h) {
  if (f.size() < 13) return 0.0;
  const std::vector<double> fine = cumulative(f, h);
  std::vector<double> coarse_f;
  for (std::size_t i = 0; i < f.size(); i += 2) coarse_f.push_back(f[i]);
  const std::vector<double> coarse = cumulative(coarse_f, 2.0 * h);
  double worst = 0.0;
  for (std::size_t k = 0; k < coarse.size(); ++k)
    worst = std::max(worst, std::abs(fine[2 * k] - coarse[k]));
  return worst / 63.0;
}

/// Finite-difference weights for the m-th derivative at z from nodes x
/// (Fornberg's recursion). Returns one weight per node.
inline std::vector<double> fd_weights(double z, std::span<const double> x, int m) {
  const std::size_t n = x.size();
  std::vector<std::vector<double>> c(n, std::vector<double>(m + 1, 0.0));
  double c1 = 1.0;
  double c4 = x[0] - z;
  c[0][0] = 1.0;
  for (std::size_t i = 1; i < n; ++i) {
    const int mn = std::min<int>(static_cast<int>(i), m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - z;
    for (std::size_t j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = c[i][m];
  return w;
}

/// First derivative of uniformly sampled data at every node using
/// `points`-point stencils, centred where possible and shifted at the ends.
inline std::vector<double> differentiate(std::span<const double> f, double h,
                                         std::size_t points = 9) {
  const std::size_t n = f.size();
  if (n < 2) throw ValidationError("differentiate needs at least two samples");
  points = std::min(points, n);
  std::vector<double> offsets(points);
  std::vector<double> out(n);
  // weights depend only on the node's position inside the stencil
  std::vector<std::vector<double>> cache(points);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t s = std::clamp<std::ptrdiff_t>(
        static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(points / 2), 0,
        static_cast<std::ptrdiff_t>(n - points));
    const std::size_t at = k - s;
    if (cache[at].empty()) {
      for (std::size_t j = 0; j < points; ++j) offsets[j] = static_cast<double>(j);
      cache[at] = fd_weights(static_cast<double>(at), offsets, 1);
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < points; ++j) acc += cache[at][j] * f[s + j];
    out[k] = acc / h;
  }
  return out;
}

}  // namespace rabichirp::quadrature
