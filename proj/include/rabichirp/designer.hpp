#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rabichirp/dynamics.hpp"
#include "rabichirp/errors.hpp"
#include "rabichirp/model.hpp"
#include "rabichirp/quadrature.hpp"
#include "rabichirp/transform.hpp"

namespace rabichirp {

struct DesignOptions {
  std::size_t points_per_period = 64;
  double tol_fp = 1e-8;  ///< relative sup-norm change between iterates
  std::size_t max_iter = 100;
  double relaxation = 1.0;  ///< λ in ω ← ω + λ (G[ω] − ω)
  PhaseConvention convention = PhaseConvention::product;
  /// Fraction of the window, from t = 0, where the 1/t-weighted integral is
  /// replaced by its series (only when t_start = 0).
  double series_fraction = 0.01;

  bool operator==(const DesignOptions&) const = default;
};

struct ChirpIterate {
  std::size_t index = 0;
  double change = 0.0;        ///< relative sup-norm change from the previous iterate
  double residual_sup = 0.0;  ///< sup-norm of the chirp residual of this iterate
  double relaxation = 1.0;
};

struct ResidualReport {
  std::vector<double> t;
  std::vector<double> residual;  ///< NaN where dτ/dt = 0
  double sup_norm = 0.0;
};

struct DesignReport {
  std::vector<double> grid;
  std::vector<double> chirp_values;
  TimeFunction chirp;
  std::vector<ChirpIterate> history;
  bool converged = false;
  double residual_sup = std::numeric_limits<double>::quiet_NaN();
  double rwa_metric = std::numeric_limits<double>::quiet_NaN();
  PhaseConvention convention = PhaseConvention::product;
};

/// Uniform design grid over the pulse window with the carrier-resolution rule
/// applied to the resonant seed ω = ω_αβ.
inline std::vector<double> design_grid(const SystemModel& model, const PulseSpec& pulse,
                                       std::size_t points_per_period) {
  PulseSpec seeded = pulse;
  seeded.chirp = model.omega_ab;
  return linspace(pulse.t_start, pulse.t_end, carrier_grid_size(model, seeded, points_per_period));
}

/// Fixed-point map for the resonance-restoring chirp,
///   G[ω](t) = ω_αβ(t) − s (F₀ / t) ∫_{t_start}^{t} (μ_αα − μ_ββ) m ω t₁ sin(ω t₁) dt₁,
/// on a uniform grid. With the integral phase convention the condition is
/// local instead: G[ω](t) = ω_αβ − s F₀ (μ_αα − μ_ββ) m ω t sin φ(t), φ = ∫ω.
class ChirpMap {
 public:
  ChirpMap(const SystemModel& model, const PulseSpec& pulse, std::vector<double> grid,
           PhaseConvention convention = PhaseConvention::product, double series_fraction = 0.01)
      : grid_(std::move(grid)), convention_(convention), f0_(pulse.f0), sign_(model.sign_ab) {
    if (grid_.size() < 8) throw ValidationError("design grid needs at least 8 nodes");
    h_ = grid_[1] - grid_[0];
    const std::size_t n = grid_.size();
    omega_ab_.resize(n);
    dmu_.resize(n);
    envelope_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = grid_[k];
      omega_ab_[k] = eval_system(model, t).omega_ab;
      dmu_[k] = model.mu_aa(t) - model.mu_bb(t);
      envelope_[k] = pulse.envelope(t);
    }
    if (grid_.front() == 0.0 && convention_ == PhaseConvention::product) {
      // the fit must also stay within a fraction of a carrier cycle
      const double w_max = *std::max_element(omega_ab_.begin(), omega_ab_.end());
      const double cutoff = std::min(series_fraction * (grid_.back() - grid_.front()), 1.0 / w_max);
      while (series_end_ + 1 < n && grid_[series_end_ + 1] < cutoff) ++series_end_;
    }
  }

  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<double>& omega_ab() const noexcept { return omega_ab_; }
  PhaseConvention convention() const noexcept { return convention_; }

  /// Last node index handled by the small-t series (0 when unused).
  std::size_t series_end() const noexcept { return series_end_; }

  std::vector<double> apply(const std::vector<double>& omega) const {
    return convention_ == PhaseConvention::product ? apply_product(omega) : apply_integral(omega);
  }

 private:
  std::vector<double> apply_product(const std::vector<double>& omega) const {
    const std::size_t n = grid_.size();
    std::vector<double> integrand(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = grid_[k];
      integrand[k] = dmu_[k] * envelope_[k] * omega[k] * t * std::sin(omega[k] * t);
    }
    const std::vector<double> running = quadrature::cumulative(integrand, h_);
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = grid_[k];
      double weighted;  // (1/t) ∫ ... dt₁
      if (t == 0.0) {
        weighted = 0.0;
      } else if (k <= series_end_) {
        weighted = series(integrand, omega.front(), t);
      } else {
        weighted = running[k] / t;
      }
      out[k] = omega_ab_[k] - sign_ * f0_ * weighted;
    }
    return out;
  }

  std::vector<double> apply_integral(const std::vector<double>& omega) const {
    const std::size_t n = grid_.size();
    const std::vector<double> phase = quadrature::cumulative(omega, h_);
    std::vector<double> out(n);
    for (std::size_t k = 0; k < n; ++k)
      out[k] = omega_ab_[k] -
               sign_ * f0_ * dmu_[k] * envelope_[k] * omega[k] * grid_[k] * std::sin(phase[k]);
    return out;
  }

  // Near t = 0 the integrand is t₁² q(t₁) with q smooth; fit q by the
  // degree-5 interpolant through six nodes spanning the series region and
  // integrate term by term: (1/t) ∫₀ᵗ t₁² Σ c_j t₁ʲ dt₁ = Σ c_j t^{j+2} / (j+3).
  double series(const std::vector<double>& integrand, double omega0, double t) const {
    constexpr std::size_t p = 6;
    const std::size_t last = std::max<std::size_t>(series_end_, p - 1);
    std::array<double, p> x{}, q{};
    for (std::size_t j = 0; j < p; ++j) {
      const std::size_t k = (j * last + (p - 1) / 2) / (p - 1);
      x[j] = grid_[k];
      // q(0) = Δμ m ω² since sin(ω t)/t → ω
      q[j] = k == 0 ? dmu_[0] * envelope_[0] * omega0 * omega0
                    : integrand[k] / (grid_[k] * grid_[k]);
    }
    // Newton divided differences, then expand into monomial coefficients
    std::array<double, p> dd = q;
    for (std::size_t lvl = 1; lvl < p; ++lvl)
      for (std::size_t j = p - 1; j >= lvl; --j) dd[j] = (dd[j] - dd[j - 1]) / (x[j] - x[j - lvl]);
    std::array<double, p> coef{};
    for (std::size_t j = p; j-- > 0;) {
      // coef ← coef·(t − x_j) + dd_j
      for (std::size_t d = p - 1; d > 0; --d) coef[d] = coef[d - 1] - x[j] * coef[d];
      coef[0] = -x[j] * coef[0];
      coef[0] += dd[j];
    }
    double acc = 0.0;
    double tp = t * t;
    for (std::size_t j = 0; j < p; ++j, tp *= t) acc += coef[j] * tp / static_cast<double>(j + 3);
    return acc;
  }

  std::vector<double> grid_;
  PhaseConvention convention_;
  double f0_;
  int sign_;
  double h_ = 0.0;
  std::vector<double> omega_ab_, dmu_, envelope_;
  std::size_t series_end_ = 0;
};

/// Residual of d/dτ(Δ₋ t) = −s (f_α − f_β) on `n_grid` uniform nodes.
/// d/dτ is taken as (dt/dτ) d/dt with d/dt from ninth-order-stencil finite
/// differences of the sampled (ω − ω_αβ) t, independent of how the chirp was
/// produced. With the integral convention the left side is (ω − ω_αβ) dt/dτ.
/// Nodes where dτ/dt = 0 carry NaN and are left out of the sup-norm.
inline ResidualReport chirp_residual(const SystemModel& model, const PulseSpec& pulse,
                                     std::size_t n_grid,
                                     PhaseConvention convention = PhaseConvention::product) {
  ResidualReport out;
  out.t = linspace(pulse.t_start, pulse.t_end, n_grid);
  const double h = out.t[1] - out.t[0];
  const CarrierPhases phases(model, pulse, convention);
  const std::size_t n = out.t.size();
  std::vector<double> detuning_phase(n), lhs(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = out.t[k];
    const double d = pulse.chirp(t) - model.omega_ab(t);
    detuning_phase[k] = convention == PhaseConvention::product ? d * t : d;
  }
  if (convention == PhaseConvention::product) {
    lhs = quadrature::differentiate(detuning_phase, h, 9);
  } else {
    lhs = detuning_phase;
  }
  out.residual.resize(n);
  const double s = model.sign_ab;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = out.t[k];
    const double rate = tau_rate(model, pulse, t);
    if (!(rate > 0.0)) {
      out.residual[k] = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double rhs = -s * (f_diagonal(model, pulse, phases, t, Level::alpha) -
                             f_diagonal(model, pulse, phases, t, Level::beta));
    out.residual[k] = lhs[k] / rate - rhs;
    out.sup_norm = std::max(out.sup_norm, std::abs(out.residual[k]));
  }
  return out;
}

/// min over the pulse support of Δ₊ · dt/dτ: the counter-rotating phase speed
/// in τ units. Also reports where the minimum sits.
struct RwaMetric {
  double value = std::numeric_limits<double>::infinity();
  double t_at_min = std::numeric_limits<double>::quiet_NaN();
};

inline RwaMetric rwa_validity(const SystemModel& model, const PulseSpec& pulse,
                              const TauMap& map) {
  RwaMetric best;
  for (std::size_t i = 0; i < map.size(); ++i) {
    const double rate = map.rate_grid()[i];
    if (!(rate > 0.0)) continue;
    const double t = map.t_at(i);
    const double v = detunings(model, pulse, t).delta_plus / rate;
    if (v < best.value) best = {v, t};
  }
  return best;
}

inline double rwa_validity_metric(const SystemModel& model, const PulseSpec& pulse,
                                  const TauMap& map) {
  return rwa_validity(model, pulse, map).value;
}

/// Picard iteration of `ChirpMap` from the resonant seed ω⁽⁰⁾ = ω_αβ.
/// Non-convergence is reported, not thrown; a non-positive iterate throws.
inline DesignReport design_chirp(const SystemModel& model, const PulseSpec& pulse_without_chirp,
                                 const DesignOptions& opt = {}) {
  if (!(opt.tol_fp > 0.0)) throw ValidationError("tol_fp must be > 0");
  if (!(opt.relaxation > 0.0 && opt.relaxation <= 1.0))
    throw ValidationError("relaxation must lie in (0, 1]");
  if (opt.max_iter == 0) throw ValidationError("max_iter must be >= 1");
  PulseSpec pulse = pulse_without_chirp;
  pulse.chirp = model.omega_ab;
  validate(pulse);
  validate(model, pulse.t_start, pulse.t_end);

  DesignReport report;
  report.convention = opt.convention;
  report.grid = design_grid(model, pulse, opt.points_per_period);
  const ChirpMap map(model, pulse, report.grid, opt.convention, opt.series_fraction);

  std::vector<double> omega = map.omega_ab();
  double lambda = opt.relaxation;
  double previous_change = std::numeric_limits<double>::infinity();
  int growing = 0;
  for (std::size_t it = 1; it <= opt.max_iter; ++it) {
    const std::vector<double> image = map.apply(omega);
    double change = 0.0, scale = 0.0;
    std::vector<double> next(omega.size());
    for (std::size_t k = 0; k < omega.size(); ++k) {
      // λ = 1 takes the image verbatim so that a vanishing correction stays bit-exact
      next[k] = lambda == 1.0 ? image[k] : omega[k] + lambda * (image[k] - omega[k]);
      if (!(next[k] > 0.0)) {
        std::ostringstream msg;
        msg << "chirp iterate " << it << " became non-positive (" << next[k] << ") at t = "
            << report.grid[k] << "; the recurrence does not contract for this field strength";
        throw DesignError(msg.str());
      }
      change = std::max(change, std::abs(next[k] - omega[k]));
      scale = std::max(scale, std::abs(omega[k]));
    }
    change /= scale;
    omega = std::move(next);

    ChirpIterate record;
    record.index = it;
    record.change = change;
    record.relaxation = lambda;
    PulseSpec trial = pulse;
    trial.chirp = Tabulated(report.grid, omega, 3);
    record.residual_sup = chirp_residual(model, trial, report.grid.size(), opt.convention).sup_norm;
    report.history.push_back(record);

    if (change < opt.tol_fp) {
      report.converged = true;
      break;
    }
    // oscillating or growing updates: damp
    growing = change > previous_change ? growing + 1 : 0;
    if (growing >= 2 && lambda > 0.5) {
      lambda = 0.5;
      growing = 0;
    }
    previous_change = change;
  }

  report.chirp_values = omega;
  report.chirp = Tabulated(report.grid, omega, 3);
  report.residual_sup = report.history.back().residual_sup;
  PulseSpec designed = pulse;
  designed.chirp = report.chirp;
  report.rwa_metric = rwa_validity_metric(model, designed,
                                          build_tau_map(model, designed, report.grid.size()));
  return report;
}

struct TransferResult {
  double p_beta_max = 0.0;
  double tau_at_max = 0.0;
  /// min P_β over [π − window, π + window] ∩ [0, τ_max]; NaN when τ_max < π − window.
  double p_beta_near_pi = std::numeric_limits<double>::quiet_NaN();
  double norm_drift = 0.0;
  Trace trace;
};

struct VerifyOptions {
  IntegratorOptions integrator{};
  TauEquation equation = TauEquation::rwa;
  PhaseConvention convention = PhaseConvention::product;
  std::size_t samples = 4001;
  double near_pi_window = 0.1;
};

/// Propagates from (1, 0) in the τ frame over the whole τ range of the pulse
/// and locates the first transfer maximum (searched on τ ∈ [0, π]).
inline TransferResult verify_transfer(const SystemModel& model, const PulseSpec& pulse,
                                      const Amplitudes& init, const VerifyOptions& opt = {}) {
  const CarrierPhases phases(model, pulse, opt.convention);
  const TauMap map = build_tau_map(model, pulse);
  const std::vector<double> taus = linspace(0.0, map.tau_max(), opt.samples);
  TransferResult r;
  Amplitudes start = init;
  start.frame = Frame::tau_a;
  r.trace = integrate_tau(model, pulse, phases, map, opt.equation, start, taus, opt.integrator);
  r.norm_drift = r.trace.max_norm_drift();
  for (const auto& s : r.trace.samples) {
    if (s.tau <= std::numbers::pi && s.pop_second > r.p_beta_max) {
      r.p_beta_max = s.pop_second;
      r.tau_at_max = s.tau;
    }
    if (std::abs(s.tau - std::numbers::pi) <= opt.near_pi_window) {
      r.p_beta_near_pi = std::isnan(r.p_beta_near_pi) ? s.pop_second
                                                      : std::min(r.p_beta_near_pi, s.pop_second);
    }
  }
  return r;
}

}  // namespace rabichirp
