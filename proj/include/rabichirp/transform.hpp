#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <vector>

#include "rabichirp/errors.hpp"
#include "rabichirp/model.hpp"
#include "rabichirp/quadrature.hpp"

namespace rabichirp {

/// dτ/dt = F₀ m ω μ_αβ / (2 ω_αβ).
inline double tau_rate(const SystemModel& model, const PulseSpec& pulse, double t) {
  return pulse.f0 * pulse.envelope(t) * pulse.chirp(t) * model.mu_ab(t) /
         (2.0 * model.omega_ab(t));
}

/// Monotone map between lab time t and transformed time τ, sampled on a
/// uniform t grid. Between nodes τ(t) is a cubic Hermite segment built from
/// the node values and the exact rates dτ/dt (order 3), or a straight line
/// (order 1). The inverse solves the same segment, so t → τ → t round-trips
/// to solver precision.
class TauMap {
 public:
  TauMap(double t_start, double t_end, std::vector<double> tau, std::vector<double> rate,
         int order = 3, double quadrature_error = 0.0)
      : t0_(t_start), t1_(t_end), tau_(std::move(tau)), rate_(std::move(rate)), order_(order),
        quadrature_error_(quadrature_error) {
    if (tau_.size() < 2 || tau_.size() != rate_.size())
      throw ValidationError("tau map needs matching tau and rate samples (at least 2)");
    if (order_ != 1 && order_ != 3) throw ValidationError("tau map order must be 1 or 3");
    if (!(t1_ > t0_)) throw ValidationError("tau map needs t_end > t_start");
    h_ = (t1_ - t0_) / static_cast<double>(tau_.size() - 1);
  }

  std::size_t size() const noexcept { return tau_.size(); }
  double t_start() const noexcept { return t0_; }
  double t_end() const noexcept { return t1_; }
  double step() const noexcept { return h_; }
  double tau_max() const noexcept { return tau_.back(); }
  int order() const noexcept { return order_; }
  const std::vector<double>& tau_grid() const noexcept { return tau_; }
  const std::vector<double>& rate_grid() const noexcept { return rate_; }
  /// Richardson estimate of the accumulated quadrature error in τ.
  double quadrature_error() const noexcept { return quadrature_error_; }

  std::vector<double> t_grid() const {
    std::vector<double> t(size());
    for (std::size_t i = 0; i < size(); ++i) t[i] = t_at(i);
    return t;
  }

  double t_at(std::size_t i) const {
    return i + 1 == size() ? t1_ : t0_ + h_ * static_cast<double>(i);
  }

  /// τ(t).
  double tau(double t) const {
    if (!(t >= t0_ && t <= t_end())) {
      std::ostringstream msg;
      msg << "t = " << t << " outside the tau map [" << t0_ << ", " << t_end() << "]";
      throw DomainError(msg.str());
    }
    const double x = (t - t0_) / h_;
    auto i = static_cast<std::size_t>(std::clamp<double>(std::floor(x), 0.0, size() - 2.0));
    return segment(i, x - static_cast<double>(i));
  }

  /// Mean dτ/dt over the grid interval containing τ; positive wherever the
  /// map is invertible.
  double mean_rate_at_tau(double tau_value) const {
    const std::size_t i = interval_of(tau_value);
    return (tau_[i + 1] - tau_[i]) / h_;
  }

  /// t(τ). Plateaus at τ = 0 or τ = τ_max resolve to the end facing the
  /// pulse support; interior plateaus are ambiguous.
  double invert(double tau_value) const {
    if (!(tau_value >= 0.0 && tau_value <= tau_max())) {
      std::ostringstream msg;
      msg << "tau = " << tau_value << " outside [0, " << tau_max() << "]";
      throw DomainError(msg.str());
    }
    const std::size_t i = interval_of(tau_value);
    const double lo = tau_[i], hi = tau_[i + 1];
    if (tau_value <= lo) return t_at(i);
    if (tau_value >= hi) return t_at(i + 1);
    if (order_ == 1) return std::min(t_at(i) + h_ * (tau_value - lo) / (hi - lo), t1_);

    // safeguarded Newton on the Hermite segment, bracket [a, b] in s ∈ [0, 1]
    double a = 0.0, b = 1.0;
    double s = (tau_value - lo) / (hi - lo);
    for (int it = 0; it < 60; ++it) {
      const double f = segment(i, s) - tau_value;
      if (f > 0.0) b = s; else a = s;
      if (f == 0.0 || b - a < 1e-16) break;
      const double d = segment_slope(i, s);
      double next = (d > 0.0) ? s - f / d : 0.5 * (a + b);
      if (!(next > a && next < b)) next = 0.5 * (a + b);
      if (std::abs(next - s) < 1e-16) { s = next; break; }
      s = next;
    }
    return std::min(t_at(i) + h_ * s, t1_);
  }

 private:
  // Interval index i with tau_[i] ≤ τ ≤ tau_[i+1], choosing a non-flat one.
  std::size_t interval_of(double tau_value) const {
    const std::size_t n = size();
    auto up = std::upper_bound(tau_.begin(), tau_.end(), tau_value);
    std::size_t j = static_cast<std::size_t>(up - tau_.begin());  // first node with τ > value
    if (j == 0) j = 1;
    if (j >= n) {
      // τ == τ_max: first node attaining it
      auto first = std::lower_bound(tau_.begin(), tau_.end(), tau_value);
      std::size_t k = static_cast<std::size_t>(first - tau_.begin());
      return k == 0 ? 0 : k - 1;
    }
    const std::size_t i = j - 1;
    if (tau_[i] == tau_value && i > 0 && tau_[i - 1] == tau_value && tau_value > 0.0) {
      std::ostringstream msg;
      msg << "tau = " << tau_value << " lies on a flat segment of the tau map (envelope or "
          << "coupling vanishes there); the lab time is ambiguous";
      throw AmbiguityError(msg.str());
    }
    return i;
  }

  double segment(std::size_t i, double s) const {
    if (order_ == 1) return tau_[i] + s * (tau_[i + 1] - tau_[i]);
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    const double h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s);
    const double h11 = s * s * (s - 1);
    return h00 * tau_[i] + h10 * h_ * rate_[i] + h01 * tau_[i + 1] + h11 * h_ * rate_[i + 1];
  }

  double segment_slope(std::size_t i, double s) const {
    const double d00 = 6 * s * s - 6 * s;
    const double d10 = 3 * s * s - 4 * s + 1;
    const double d01 = -d00;
    const double d11 = 3 * s * s - 2 * s;
    return d00 * tau_[i] + d10 * h_ * rate_[i] + d01 * tau_[i + 1] + d11 * h_ * rate_[i + 1];
  }

  double t0_;
  double t1_;
  double h_ = 0.0;
  std::vector<double> tau_;
  std::vector<double> rate_;
  int order_;
  double quadrature_error_;
};

/// τ(t) = ∫_{t_start}^{t} F₀ m ω μ_αβ / (2 ω_αβ) dt′ on `n_grid` uniform nodes.
inline TauMap build_tau_map(const SystemModel& model, const PulseSpec& pulse,
                            std::size_t n_grid, int order = 3) {
  if (n_grid < 2) throw ValidationError("n_grid must be >= 2");
  const double h = (pulse.t_end - pulse.t_start) / static_cast<double>(n_grid - 1);
  std::vector<double> rate(n_grid);
  for (std::size_t i = 0; i < n_grid; ++i) {
    const double t = (i + 1 == n_grid) ? pulse.t_end : pulse.t_start + h * static_cast<double>(i);
    const SystemValues v = eval_system(model, t);
    const double m = pulse.envelope(t);
    rate[i] = pulse.f0 * m * pulse.chirp(t) * v.mu_ab / (2.0 * v.omega_ab);
    if (rate[i] < 0.0) {
      std::ostringstream msg;
      msg << "tau integrand is negative at t = " << t << " (mu_ab = " << v.mu_ab
          << " under a positive envelope); absorb the sign of mu_ab into its phase convention "
          << "so that mu_ab >= 0";
      throw OrientationError(msg.str());
    }
    if (m > 0.0 && v.mu_ab == 0.0) {
      std::ostringstream msg;
      msg << "mu_ab vanishes inside the pulse support at t = " << t;
      throw DegenerateCouplingError(msg.str());
    }
  }
  std::vector<double> pieces = quadrature::interval_integrals(rate, h);
  std::vector<double> tau(n_grid, 0.0);
  for (std::size_t i = 0; i + 1 < n_grid; ++i) {
    // a nonnegative integrand has a nonnegative integral; both ends zero marks a plateau
    double piece = std::max(pieces[i], 0.0);
    if (rate[i] == 0.0 && rate[i + 1] == 0.0) piece = 0.0;
    tau[i + 1] = tau[i] + piece;
  }
  const double err = quadrature::richardson_error(rate, h);
  return TauMap(pulse.t_start, pulse.t_end, std::move(tau), std::move(rate), order, err);
}

inline TauMap build_tau_map(const SystemModel& model, const PulseSpec& pulse) {
  return build_tau_map(model, pulse, carrier_grid_size(model, pulse));
}

inline double invert_tau(const TauMap& map, double tau) { return map.invert(tau); }

struct Detunings {
  double delta_plus;   ///< ω + ω_αβ
  double delta_minus;  ///< ω − ω_αβ
};

inline Detunings detunings(const SystemModel& model, const PulseSpec& pulse, double t) {
  check_window(pulse, t);
  const double w = pulse.chirp(t);
  const double wab = model.omega_ab(t);
  return {w + wab, w - wab};
}

enum class Level { alpha, beta };

/// f_i = 2 (μ_ii / μ_αβ) ω_αβ t sin φ(t), all factors at lab time t.
inline double f_diagonal(const SystemModel& model, const PulseSpec& pulse,
                         const CarrierPhases& phases, double t, Level level) {
  check_window(pulse, t);
  const double mu_ab = model.mu_ab(t);
  if (mu_ab == 0.0) {
    std::ostringstream msg;
    msg << "f_diagonal: mu_ab vanishes at t = " << t;
    throw DegenerateCouplingError(msg.str());
  }
  const double mu_ii = level == Level::alpha ? model.mu_aa(t) : model.mu_bb(t);
  return 2.0 * (mu_ii / mu_ab) * model.omega_ab(t) * t * std::sin(phases.carrier(t));
}

inline double f_diagonal(const SystemModel& model, const PulseSpec& pulse, double t,
                         Level level) {
  return f_diagonal(model, pulse, CarrierPhases(model, pulse), t, level);
}

}  // namespace rabichirp
