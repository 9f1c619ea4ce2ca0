#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "rabichirp/errors.hpp"
#include "rabichirp/quadrature.hpp"
#include "rabichirp/time_function.hpp"

namespace rabichirp {

/// Level structure and field-induced dipole moments, all as functions of lab
/// time. Units are whatever the caller uses consistently (ħ = 1).
struct SystemModel {
  TimeFunction omega_ab = TimeFunction::constant(1.0);  ///< |E_α − E_β| (rad / time)
  int sign_ab = 1;                                       ///< sign of E_α − E_β
  TimeFunction mu_aa = TimeFunction::constant(0.0);
  TimeFunction mu_bb = TimeFunction::constant(0.0);
  TimeFunction mu_ab = TimeFunction::constant(1.0);

  bool operator==(const SystemModel&) const = default;
};

/// F(t) = F₀ m(t) cos(ω(t) t) on [t_start, t_end].
struct PulseSpec {
  double f0 = 1.0;
  TimeFunction envelope = TimeFunction::constant(1.0);
  TimeFunction chirp = TimeFunction::constant(1.0);
  double t_start = 0.0;
  double t_end = 1.0;

  bool operator==(const PulseSpec&) const = default;
};

/// How the oscillating phases are formed from instantaneous frequencies:
/// the literal product ω(t)·t, or the accumulated ∫ω dt from t_start.
enum class PhaseConvention { product, integral };

enum class DerivativeMode { exact, envelope_slow };

/// Instantaneous model values at one lab time.
struct SystemValues {
  double omega_ab;
  int sign_ab;
  double mu_aa;
  double mu_bb;
  double mu_ab;
};

namespace detail {

inline constexpr std::size_t kValidationSamples = 10000;

inline std::string where(double t) {
  std::ostringstream s;
  s << "t = " << t;
  return s.str();
}

template <class Fn>
void for_each_sample(double a, double b, std::size_t n, Fn&& fn) {
  for (std::size_t i = 0; i < n; ++i) fn(a + (b - a) * static_cast<double>(i) / (n - 1));
}

}  // namespace detail

inline void check_window(const PulseSpec& pulse, double t) {
  if (!(t >= pulse.t_start && t <= pulse.t_end)) {
    std::ostringstream msg;
    msg << "t = " << t << " outside the pulse window [" << pulse.t_start << ", "
        << pulse.t_end << "]";
    throw DomainError(msg.str());
  }
}

/// Checks the pulse invariants on a 10⁴-point grid of the window.
/// F₀ = 0 is accepted as the field-free pulse.
inline void validate(const PulseSpec& pulse) {
  if (!std::isfinite(pulse.f0) || pulse.f0 < 0.0) {
    std::ostringstream msg;
    msg << "f0: field amplitude must satisfy F0 > 0 (got " << pulse.f0 << ")";
    throw ValidationError(msg.str());
  }
  if (!(pulse.t_start >= 0.0))
    throw ValidationError("t_start: must be >= 0");
  if (!(pulse.t_end > pulse.t_start))
    throw ValidationError("t_end: must be greater than t_start");
  if (!pulse.envelope.covers(pulse.t_start, pulse.t_end))
    throw ValidationError("envelope: samples do not cover [t_start, t_end]");
  if (!pulse.chirp.covers(pulse.t_start, pulse.t_end))
    throw ValidationError("chirp: samples do not cover [t_start, t_end]");
  detail::for_each_sample(pulse.t_start, pulse.t_end, detail::kValidationSamples, [&](double t) {
    const double m = pulse.envelope(t);
    if (!(m >= 0.0 && m <= 1.0))
      throw ValidationError("envelope: must satisfy 0 <= m(t) <= 1, violated at " +
                            detail::where(t));
    if (!(pulse.chirp(t) > 0.0))
      throw ValidationError("chirp: must be > 0, violated at " + detail::where(t));
  });
}

/// Checks the model invariants over [a, b]: coverage, sign, no level crossing.
inline void validate(const SystemModel& model, double a, double b) {
  if (model.sign_ab != 1 && model.sign_ab != -1)
    throw ValidationError("sign_ab: must be +1 or -1");
  const struct {
    const char* name;
    const TimeFunction* fn;
  } fns[] = {{"omega_ab", &model.omega_ab},
             {"mu_aa", &model.mu_aa},
             {"mu_bb", &model.mu_bb},
             {"mu_ab", &model.mu_ab}};
  for (const auto& f : fns)
    if (!f.fn->covers(a, b))
      throw ValidationError(std::string(f.name) + ": samples do not cover the pulse window");
  detail::for_each_sample(a, b, detail::kValidationSamples, [&](double t) {
    if (!(model.omega_ab(t) > 0.0))
      throw LevelCrossingError("omega_ab must be > 0 (no level crossing), violated at " +
                               detail::where(t));
  });
}

inline SystemValues eval_system(const SystemModel& model, double t) {
  SystemValues v{model.omega_ab(t), model.sign_ab, model.mu_aa(t), model.mu_bb(t),
                 model.mu_ab(t)};
  if (!(v.omega_ab > 0.0))
    throw LevelCrossingError("omega_ab must be > 0 (no level crossing), violated at " +
                             detail::where(t));
  return v;
}

/// As above, additionally rejecting μ_αβ = 0 where the pulse envelope is on.
inline SystemValues eval_system(const SystemModel& model, const PulseSpec& pulse, double t) {
  SystemValues v = eval_system(model, t);
  if (v.mu_ab == 0.0 && pulse.envelope(t) > 0.0)
    throw DegenerateCouplingError("mu_ab vanishes inside the pulse support at " +
                                  detail::where(t));
  return v;
}

/// Carrier phase φ(t) and level phase θ(t) under a chosen convention.
/// product: φ = ω(t)·t, θ = ω_αβ(t)·t. integral: φ = ∫ω, θ = ∫ω_αβ from
/// t_start, tabulated once and interpolated with cubic Hermite segments.
class CarrierPhases {
 public:
  CarrierPhases(const SystemModel& model, const PulseSpec& pulse,
                PhaseConvention convention = PhaseConvention::product,
                std::size_t points_per_period = 64)
      : convention_(convention), chirp_(pulse.chirp), omega_ab_(model.omega_ab),
        t0_(pulse.t_start) {
    if (convention_ == PhaseConvention::product) return;
    double fastest = 0.0;
    detail::for_each_sample(pulse.t_start, pulse.t_end, 1001, [&](double t) {
      fastest = std::max({fastest, chirp_(t), omega_ab_(t)});
    });
    const double span = pulse.t_end - pulse.t_start;
    const auto n = static_cast<std::size_t>(
        std::ceil(span * fastest / (2.0 * std::numbers::pi) * points_per_period)) + 1;
    n_ = std::max<std::size_t>(n, 64);
    h_ = span / static_cast<double>(n_ - 1);
    std::vector<double> w(n_), wab(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const double t = node(i);
      w[i] = chirp_(t);
      wab[i] = omega_ab_(t);
    }
    carrier_ = quadrature::cumulative(w, h_);
    level_ = quadrature::cumulative(wab, h_);
    carrier_rate_ = std::move(w);
    level_rate_ = std::move(wab);
  }

  PhaseConvention convention() const noexcept { return convention_; }

  double carrier(double t) const {
    if (convention_ == PhaseConvention::product) return chirp_(t) * t;
    return hermite(carrier_, carrier_rate_, t);
  }

  double level(double t) const {
    if (convention_ == PhaseConvention::product) return omega_ab_(t) * t;
    return hermite(level_, level_rate_, t);
  }

  /// dφ/dt: ω + t dω/dt for the product form, ω for the integral form.
  double carrier_rate(double t) const {
    if (convention_ == PhaseConvention::product) return chirp_(t) + t * chirp_.derivative(t);
    return chirp_(t);
  }

 private:
  double node(std::size_t i) const { return t0_ + h_ * static_cast<double>(i); }

  double hermite(const std::vector<double>& y, const std::vector<double>& dy, double t) const {
    const double x = (t - t0_) / h_;
    auto i = static_cast<std::ptrdiff_t>(std::floor(x));
    i = std::clamp<std::ptrdiff_t>(i, 0, static_cast<std::ptrdiff_t>(n_) - 2);
    const double s = x - static_cast<double>(i);
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
    const double h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s);
    const double h11 = s * s * (s - 1);
    return h00 * y[i] + h10 * h_ * dy[i] + h01 * y[i + 1] + h11 * h_ * dy[i + 1];
  }

  PhaseConvention convention_;
  TimeFunction chirp_;
  TimeFunction omega_ab_;
  double t0_;
  std::size_t n_ = 0;
  double h_ = 0.0;
  std::vector<double> carrier_, level_, carrier_rate_, level_rate_;
};

inline double eval_field(const PulseSpec& pulse, double t) {
  check_window(pulse, t);
  return pulse.f0 * pulse.envelope(t) * std::cos(pulse.chirp(t) * t);
}

inline double eval_field(const PulseSpec& pulse, const CarrierPhases& phases, double t) {
  check_window(pulse, t);
  return pulse.f0 * pulse.envelope(t) * std::cos(phases.carrier(t));
}

/// dF/dt. `exact` applies the chain rule to m and to the carrier phase;
/// `envelope_slow` keeps only −F₀ m ω sin φ.
inline double eval_field_derivative(const PulseSpec& pulse, const CarrierPhases& phases,
                                    double t, DerivativeMode mode) {
  check_window(pulse, t);
  const double m = pulse.envelope(t);
  const double phi = phases.carrier(t);
  if (mode == DerivativeMode::envelope_slow)
    return -pulse.f0 * m * pulse.chirp(t) * std::sin(phi);
  return pulse.f0 *
         (pulse.envelope.derivative(t) * std::cos(phi) - m * phases.carrier_rate(t) * std::sin(phi));
}

inline double eval_field_derivative(const PulseSpec& pulse, double t, DerivativeMode mode) {
  const SystemModel unused;
  return eval_field_derivative(pulse, CarrierPhases(unused, pulse), t, mode);
}

/// Dipole moments induced in proportion to the cycle-averaged field
/// amplitude, μ_ij(t) = κ_ij F₀ m(t). Returns a model with the given level
/// splitting and sign.
inline SystemModel induced_dipole_model(TimeFunction omega_ab, int sign_ab, double kappa_aa,
                                        double kappa_bb, double kappa_ab,
                                        const PulseSpec& pulse) {
  SystemModel model;
  model.omega_ab = std::move(omega_ab);
  model.sign_ab = sign_ab;
  model.mu_aa = scaled(pulse.envelope, kappa_aa * pulse.f0);
  model.mu_bb = scaled(pulse.envelope, kappa_bb * pulse.f0);
  model.mu_ab = scaled(pulse.envelope, kappa_ab * pulse.f0);
  return model;
}

/// Uniform-grid size resolving the fastest of ω(t), ω_αβ(t) with at least
/// `points_per_period` samples per period.
inline std::size_t carrier_grid_size(const SystemModel& model, const PulseSpec& pulse,
                                     std::size_t points_per_period = 64) {
  double fastest = 0.0;
  detail::for_each_sample(pulse.t_start, pulse.t_end, 1001, [&](double t) {
    fastest = std::max({fastest, pulse.chirp(t), model.omega_ab(t)});
  });
  const double periods = (pulse.t_end - pulse.t_start) * fastest / (2.0 * std::numbers::pi);
  const auto n = static_cast<std::size_t>(std::ceil(periods * points_per_period)) + 1;
  return std::max<std::size_t>(n, 16);
}

}  // namespace rabichirp
