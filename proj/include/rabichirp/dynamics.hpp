#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rabichirp/errors.hpp"
#include "rabichirp/model.hpp"
#include "rabichirp/ode.hpp"
#include "rabichirp/quadrature.hpp"
#include "rabichirp/transform.hpp"

namespace rabichirp {

using cplx = std::complex<double>;
using Matrix2 = std::array<std::array<cplx, 2>, 2>;

/// c (lab), a (τ) or b (Rabi) amplitudes.
enum class Frame { lab_c, tau_a, rabi_b };

inline std::string to_string(Frame f) {
  switch (f) {
    case Frame::lab_c: return "lab-c";
    case Frame::tau_a: return "tau-a";
    case Frame::rabi_b: return "rabi-b";
  }
  return "?";
}

struct Amplitudes {
  cplx first{1.0, 0.0};
  cplx second{0.0, 0.0};
  Frame frame = Frame::lab_c;

  double population_first() const { return std::norm(first); }
  double population_second() const { return std::norm(second); }
  double norm() const { return std::norm(first) + std::norm(second); }

  bool operator==(const Amplitudes&) const = default;
};

struct TraceSample {
  double t;
  double tau;  ///< NaN when no τ map was supplied
  cplx first;
  cplx second;
  double pop_first;
  double pop_second;
  double field;
  double chirp;
};

struct Trace {
  Frame frame = Frame::lab_c;
  std::vector<TraceSample> samples;
  ode::Stats stats;

  /// max over samples of |P_α + P_β − 1|.
  double max_norm_drift() const {
    double worst = 0.0;
    for (const auto& s : samples) worst = std::max(worst, std::abs(s.pop_first + s.pop_second - 1.0));
    return worst;
  }
};

enum class TauEquation { full, rwa };

/// Per-step error target as a fraction of IntegratorOptions::tol. Explicit
/// RK steps lose a little norm on oscillatory problems, and the loss adds up
/// over a run; at 1/100 a run of a few thousand error-limited steps still
/// ends within tol.
inline constexpr double kLocalTolFraction = 0.01;

struct IntegratorOptions {
  /// Accuracy target for a whole run (populations, norm).
  double tol = 1e-9;
  /// Step ceiling: this many steps per shortest phase period.
  double steps_per_period = 20.0;
  DerivativeMode derivative = DerivativeMode::exact;  ///< lab frame only
  std::size_t max_steps = 50'000'000;

  bool operator==(const IntegratorOptions&) const = default;
};

namespace detail {

inline std::array<double, 4> pack(cplx a, cplx b) { return {a.real(), a.imag(), b.real(), b.imag()}; }

inline std::array<double, 4> apply(const Matrix2& m, const std::array<double, 4>& y) {
  const cplx a{y[0], y[1]}, b{y[2], y[3]};
  const cplx ra = m[0][0] * a + m[0][1] * b;
  const cplx rb = m[1][0] * a + m[1][1] * b;
  return pack(ra, rb);
}

inline void require_increasing(std::span<const double> xs, const char* what) {
  if (xs.empty()) throw ValidationError(std::string(what) + ": no sample points");
  for (std::size_t i = 1; i < xs.size(); ++i)
    if (!(xs[i] > xs[i - 1]))
      throw ValidationError(std::string(what) + ": sample points must be strictly increasing");
}

}  // namespace detail

/// Lab-frame generator G(t) with dc/dt = G c:
/// dF/dt (μ_αβ/ω_αβ) [[−i (μ_αα/μ_αβ) ω_αβ t, e^{i s θ}], [−e^{−i s θ}, −i (μ_ββ/μ_αβ) ω_αβ t]].
/// The diagonal is formed as −i dF/dt μ_ii t, so μ_αβ = 0 is harmless here.
inline Matrix2 lab_generator(const SystemModel& model, const PulseSpec& pulse,
                             const CarrierPhases& phases, double t, DerivativeMode mode) {
  const double dF = eval_field_derivative(pulse, phases, t, mode);
  const SystemValues v = eval_system(model, t);
  const double s = v.sign_ab;
  const double theta = phases.level(t);
  const cplx i{0.0, 1.0};
  const double coupling = dF * v.mu_ab / v.omega_ab;
  return {{{-i * dF * v.mu_aa * t, coupling * std::exp(i * s * theta)},
           {-coupling * std::exp(-i * s * theta), -i * dF * v.mu_bb * t}}};
}

/// τ-frame generator G(t) with da/dτ = G a, evaluated at the lab time t = t(τ):
/// −i [[−f_α, s(e^{−i s Φ₋} − e^{i s Φ₊})], [s(e^{i s Φ₋} − e^{−i s Φ₊}), −f_β]],
/// Φ± = φ ± θ. The RWA drops the Φ₊ terms.
inline Matrix2 tau_generator(const SystemModel& model, const PulseSpec& pulse,
                             const CarrierPhases& phases, double t, TauEquation eq) {
  const double fa = f_diagonal(model, pulse, phases, t, Level::alpha);
  const double fb = f_diagonal(model, pulse, phases, t, Level::beta);
  const double s = model.sign_ab;
  const double phi = phases.carrier(t);
  const double theta = phases.level(t);
  const cplx i{0.0, 1.0};
  cplx upper = s * std::exp(-i * s * (phi - theta));
  cplx lower = s * std::exp(i * s * (phi - theta));
  if (eq == TauEquation::full) {
    upper -= s * std::exp(i * s * (phi + theta));
    lower -= s * std::exp(-i * s * (phi + theta));
  }
  return {{{i * fa, -i * upper}, {-i * lower, i * fb}}};
}

/// Solves the lab-frame equation from init at sample_times[0] through every
/// sample time. When `map` is given the trace also carries τ(t).
inline Trace integrate_lab(const SystemModel& model, const PulseSpec& pulse,
                           const CarrierPhases& phases, const Amplitudes& init,
                           std::span<const double> sample_times, const IntegratorOptions& opt,
                           const TauMap* map = nullptr) {
  if (init.frame != Frame::lab_c) throw ValidationError("integrate_lab: initial state must be in the lab-c frame");
  if (!(opt.tol > 0.0)) throw ValidationError("tol must be > 0");
  detail::require_increasing(sample_times, "integrate_lab");
  check_window(pulse, sample_times.front());
  check_window(pulse, sample_times.back());

  auto rhs = [&](double t, const std::array<double, 4>& y) {
    return detail::apply(lab_generator(model, pulse, phases, t, opt.derivative), y);
  };
  auto ceiling = [&](double t) {
    const double speed = std::abs(phases.carrier_rate(t)) + model.omega_ab(t) +
                         std::abs(t * model.omega_ab.derivative(t));
    return 2.0 * std::numbers::pi / (opt.steps_per_period * speed);
  };
  Trace trace;
  trace.frame = Frame::lab_c;
  trace.samples.reserve(sample_times.size());
  auto observe = [&](std::size_t, double t, const std::array<double, 4>& y) {
    const cplx a{y[0], y[1]}, b{y[2], y[3]};
    trace.samples.push_back({t, map ? map->tau(t) : std::numeric_limits<double>::quiet_NaN(), a,
                             b, std::norm(a), std::norm(b), eval_field(pulse, phases, t),
                             pulse.chirp(t)});
  };
  const double local = opt.tol * kLocalTolFraction;
  ode::Options o{local, local, 0.0, opt.max_steps};
  trace.stats = ode::dopri5<4>(rhs, detail::pack(init.first, init.second), sample_times, o,
                               ceiling, observe);
  return trace;
}

/// Solves the τ-frame equation (full or RWA) from init at sample_taus[0].
/// The amplitudes are stepped in lab time, da/dt = (dτ/dt) G a: near an
/// envelope zero t(τ) has an infinite slope, which no step controller in τ
/// can follow, while the t form stays smooth. Samples land on t(τ_k).
inline Trace integrate_tau(const SystemModel& model, const PulseSpec& pulse,
                           const CarrierPhases& phases, const TauMap& map, TauEquation eq,
                           const Amplitudes& init, std::span<const double> sample_taus,
                           const IntegratorOptions& opt) {
  if (init.frame != Frame::tau_a) throw ValidationError("integrate_tau: initial state must be in the tau-a frame");
  if (!(opt.tol > 0.0)) throw ValidationError("tol must be > 0");
  detail::require_increasing(sample_taus, "integrate_tau");
  if (sample_taus.front() < 0.0 || sample_taus.back() > map.tau_max())
    throw DomainError("integrate_tau: sample taus outside [0, tau_max] of the map");

  std::vector<double> times(sample_taus.size());
  for (std::size_t k = 0; k < times.size(); ++k) times[k] = map.invert(sample_taus[k]);
  // flat stretches of τ(t) collapse neighbouring samples onto one time
  for (std::size_t k = 1; k < times.size(); ++k) times[k] = std::max(times[k], times[k - 1]);

  const bool has_diagonal = !(model.mu_aa.is_constant() && model.mu_aa(0.0) == 0.0 &&
                              model.mu_bb.is_constant() && model.mu_bb(0.0) == 0.0);
  auto rhs = [&](double t, const std::array<double, 4>& y) {
    Matrix2 g = tau_generator(model, pulse, phases, t, eq);
    const double rate = tau_rate(model, pulse, t);
    for (auto& row : g)
      for (auto& e : row) e *= rate;
    return detail::apply(g, y);
  };
  auto ceiling = [&](double t) {
    const double carrier = std::abs(phases.carrier_rate(t));
    const double level = model.omega_ab(t) + std::abs(t * model.omega_ab.derivative(t));
    double speed = eq == TauEquation::full ? carrier + level : std::abs(carrier - level);
    if (has_diagonal) speed = std::max(speed, carrier);
    speed += std::abs(tau_rate(model, pulse, t));
    if (speed == 0.0) return std::numeric_limits<double>::infinity();
    return 2.0 * std::numbers::pi / (opt.steps_per_period * speed);
  };
  Trace trace;
  trace.frame = Frame::tau_a;
  trace.samples.reserve(sample_taus.size());
  auto observe = [&](std::size_t k, double t, const std::array<double, 4>& y) {
    const cplx a{y[0], y[1]}, b{y[2], y[3]};
    trace.samples.push_back({t, sample_taus[k], a, b, std::norm(a), std::norm(b),
                             eval_field(pulse, phases, t), pulse.chirp(t)});
  };
  const double local = opt.tol * kLocalTolFraction;
  ode::Options o{local, local, 0.0, opt.max_steps};
  trace.stats = ode::dopri5<4>(rhs, detail::pack(init.first, init.second), times, o, ceiling,
                               observe);
  return trace;
}

inline Trace integrate_tau_full(const SystemModel& model, const PulseSpec& pulse,
                                const CarrierPhases& phases, const TauMap& map,
                                const Amplitudes& init, std::span<const double> sample_taus,
                                const IntegratorOptions& opt) {
  return integrate_tau(model, pulse, phases, map, TauEquation::full, init, sample_taus, opt);
}

inline Trace integrate_tau_rwa(const SystemModel& model, const PulseSpec& pulse,
                               const CarrierPhases& phases, const TauMap& map,
                               const Amplitudes& init, std::span<const double> sample_taus,
                               const IntegratorOptions& opt) {
  return integrate_tau(model, pulse, phases, map, TauEquation::rwa, init, sample_taus, opt);
}

/// ρ₁(τ) = ∫₀^τ f_α dτ′ and ρ₂(τ) = ∫₀^τ f_β dτ′, accumulated in lab time on
/// the τ map's grid (f_i dτ = F₀ μ_ii m ω t sin φ dt) and interpolated with
/// quintic Hermite segments; the integrand's slope comes from grid differences.
class PhaseIntegrals {
 public:
  PhaseIntegrals(const SystemModel& model, const PulseSpec& pulse, const CarrierPhases& phases,
                 const TauMap& map)
      : map_(map) {
    const std::size_t n = map.size();
    d1_.resize(n);
    d2_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double t = map.t_at(i);
      d1_[i] = integrand(model.mu_aa, pulse, phases, t);
      d2_[i] = integrand(model.mu_bb, pulse, phases, t);
    }
    rho1_ = quadrature::cumulative(d1_, map.step());
    rho2_ = quadrature::cumulative(d2_, map.step());
    dd1_ = quadrature::differentiate(d1_, map.step());
    dd2_ = quadrature::differentiate(d2_, map.step());
  }

  double rho1(double tau) const { return at(rho1_, d1_, dd1_, map_.invert(tau)); }
  double rho2(double tau) const { return at(rho2_, d2_, dd2_, map_.invert(tau)); }

  /// Values at lab time t instead of τ.
  double rho1_at_t(double t) const { return at(rho1_, d1_, dd1_, t); }
  double rho2_at_t(double t) const { return at(rho2_, d2_, dd2_, t); }

 private:
  static double integrand(const TimeFunction& mu, const PulseSpec& pulse,
                          const CarrierPhases& phases, double t) {
    return pulse.f0 * mu(t) * pulse.envelope(t) * pulse.chirp(t) * t * std::sin(phases.carrier(t));
  }

  double at(const std::vector<double>& y, const std::vector<double>& dy,
            const std::vector<double>& ddy, double t) const {
    const double h = map_.step();
    const double x = (t - map_.t_start()) / h;
    auto i = static_cast<std::size_t>(std::clamp<double>(std::floor(x), 0.0, y.size() - 2.0));
    const double s = x - static_cast<double>(i);
    const double s2 = s * s, s3 = s2 * s, s4 = s3 * s, s5 = s4 * s;
    const double h0 = 1 - 10 * s3 + 15 * s4 - 6 * s5;
    const double h1 = s - 6 * s3 + 8 * s4 - 3 * s5;
    const double h2 = 0.5 * (s2 - 3 * s3 + 3 * s4 - s5);
    const double g0 = 10 * s3 - 15 * s4 + 6 * s5;
    const double g1 = -4 * s3 + 7 * s4 - 3 * s5;
    const double g2 = 0.5 * (s3 - 2 * s4 + s5);
    return h0 * y[i] + h1 * h * dy[i] + h2 * h * h * ddy[i] + g0 * y[i + 1] +
           g1 * h * dy[i + 1] + g2 * h * h * ddy[i + 1];
  }

  TauMap map_;
  std::vector<double> d1_, d2_, dd1_, dd2_, rho1_, rho2_;
};

inline PhaseIntegrals phase_integrals(const SystemModel& model, const PulseSpec& pulse,
                                      const CarrierPhases& phases, const TauMap& map) {
  return PhaseIntegrals(model, pulse, phases, map);
}

/// b = e^{−iΛ(τ)} a with Λ = diag(ρ₁, ρ₂).
inline Amplitudes to_rabi_frame(const Amplitudes& a, double rho1, double rho2) {
  const cplx i{0.0, 1.0};
  return {std::exp(-i * rho1) * a.first, std::exp(-i * rho2) * a.second, Frame::rabi_b};
}

inline Amplitudes to_rabi_frame(const Amplitudes& a, const PhaseIntegrals& phases, double tau) {
  return to_rabi_frame(a, phases.rho1(tau), phases.rho2(tau));
}

/// Trace in the b frame from a τ-frame trace.
inline Trace to_rabi_frame(const Trace& tau_trace, const PhaseIntegrals& phases) {
  Trace out = tau_trace;
  out.frame = Frame::rabi_b;
  for (auto& s : out.samples) {
    const Amplitudes b =
        to_rabi_frame(Amplitudes{s.first, s.second, Frame::tau_a}, phases.rho1_at_t(s.t),
                      phases.rho2_at_t(s.t));
    s.first = b.first;
    s.second = b.second;
    s.pop_first = std::norm(b.first);
    s.pop_second = std::norm(b.second);
  }
  return out;
}

/// Closed-form solution of db/dτ = sign · i σ_x b:
/// b(τ) = cos τ · b(0) + sign · i sin τ · σ_x b(0).
inline Amplitudes rabi_reference(const Amplitudes& init, double tau, int sign) {
  const cplx i{0.0, 1.0};
  const double c = std::cos(tau), s = std::sin(tau);
  const double sg = sign >= 0 ? 1.0 : -1.0;
  return {c * init.first + sg * i * s * init.second, c * init.second + sg * i * s * init.first,
          Frame::rabi_b};
}

/// `n` points uniformly covering [a, b].
inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> x(n);
  if (n == 1) {
    x[0] = a;
    return x;
  }
  for (std::size_t i = 0; i < n; ++i) x[i] = a + (b - a) * static_cast<double>(i) / (n - 1);
  x.back() = b;
  return x;
}

}  // namespace rabichirp
