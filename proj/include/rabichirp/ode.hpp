#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <sstream>

#include "rabichirp/errors.hpp"

namespace rabichirp::ode {

struct Options {
  double rtol = 1e-9;
  double atol = 1e-9;
  double initial_step = 0.0;  ///< 0 picks one from the step ceiling and span
  std::size_t max_steps = 50'000'000;
};

struct Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t evaluations = 0;
};

/// Dormand–Prince 5(4) with PI step control, integrating y' = f(x, y) through
/// the increasing abscissae `samples` (samples[0] is the initial point) and
/// landing exactly on each one. `ceiling(x)` bounds the step taken from x.
/// `observe(k, x, y)` sees every sample, including the initial one.
template <std::size_t N, class Rhs, class Ceiling, class Observe>
Stats dopri5(Rhs&& f, std::array<double, N> y, std::span<const double> samples,
             const Options& opt, Ceiling&& ceiling, Observe&& observe) {
  using State = std::array<double, N>;
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double beta = 0.04, expo = 0.2 - 0.75 * beta, safety = 0.9;

  Stats stats;
  if (samples.empty()) return stats;
  double x = samples[0];
  observe(std::size_t{0}, x, static_cast<const State&>(y));
  if (samples.size() == 1) return stats;

  const double span = samples.back() - samples.front();
  double h = opt.initial_step > 0.0 ? opt.initial_step : std::min(span, ceiling(x)) * 1e-2;
  if (!(h > 0.0)) h = span * 1e-6;
  double err_old = 1e-4;

  State k1 = f(x, y), k2, k3, k4, k5, k6, k7, tmp, ynew;
  ++stats.evaluations;

  for (std::size_t next = 1; next < samples.size(); ++next) {
    const double target = samples[next];
    while (x < target) {
      if (stats.accepted + stats.rejected >= opt.max_steps) {
        std::ostringstream msg;
        msg << "integrator exceeded " << opt.max_steps << " steps at x = " << x;
        throw IntegrationError(msg.str(), x);
      }
      const double cap = ceiling(x);
      h = std::min(h, cap);
      const double min_step = 64.0 * std::numeric_limits<double>::epsilon() *
                              std::max(std::abs(x), std::abs(target));
      if (h < min_step) {
        std::ostringstream msg;
        msg << "step size underflow at x = " << x << " (h = " << h << ")";
        throw IntegrationError(msg.str(), x);
      }
      bool clipped = false;
      double step = h;
      if (x + step >= target || target - (x + step) < min_step) {
        step = target - x;
        clipped = true;
      }

      for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + step * a21 * k1[i];
      k2 = f(x + c2 * step, tmp);
      for (std::size_t i = 0; i < N; ++i) tmp[i] = y[i] + step * (a31 * k1[i] + a32 * k2[i]);
      k3 = f(x + c3 * step, tmp);
      for (std::size_t i = 0; i < N; ++i)
        tmp[i] = y[i] + step * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      k4 = f(x + c4 * step, tmp);
      for (std::size_t i = 0; i < N; ++i)
        tmp[i] = y[i] + step * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      k5 = f(x + c5 * step, tmp);
      for (std::size_t i = 0; i < N; ++i)
        tmp[i] = y[i] + step * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                a65 * k5[i]);
      const double x_new = clipped ? target : x + step;
      k6 = f(x_new, tmp);
      for (std::size_t i = 0; i < N; ++i)
        ynew[i] = y[i] + step * (a71 * k1[i] + a73 * k3[i] + a74 * k4[i] + a75 * k5[i] +
                                 a76 * k6[i]);
      k7 = f(x_new, ynew);
      stats.evaluations += 6;

      double err = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const double e = step * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] +
                                 e6 * k6[i] + e7 * k7[i]);
        const double sc = opt.atol + opt.rtol * std::max(std::abs(y[i]), std::abs(ynew[i]));
        err = std::max(err, std::abs(e) / sc);
      }
      if (!std::isfinite(err)) {
        std::ostringstream msg;
        msg << "non-finite derivative at x = " << x;
        throw IntegrationError(msg.str(), x);
      }

      if (err <= 1.0) {
        ++stats.accepted;
        x = x_new;
        y = ynew;
        k1 = k7;
        const double fac = std::clamp(safety * std::pow(err, -expo) * std::pow(err_old, beta),
                                      0.2, 5.0);
        err_old = std::max(err, 1e-4);
        // a step shortened to hit a sample says nothing about the next one
        h = clipped ? std::max(h, step * fac) : step * fac;
      } else {
        ++stats.rejected;
        h = step * std::max(0.2, safety * std::pow(err, -expo));
      }
    }
    observe(next, x, static_cast<const State&>(y));
  }
  return stats;
}

}  // namespace rabichirp::ode
