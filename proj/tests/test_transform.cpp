#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"

using namespace rabichirp;
using testing_support::adaptive_integral;
using testing_support::constant_model;
using std::numbers::pi;

namespace {

PulseSpec pulse_of(double f0, TimeFunction envelope, double w, double t_end) {
  PulseSpec p;
  p.f0 = f0;
  p.envelope = std::move(envelope);
  p.chirp = TimeFunction::constant(w);
  p.t_start = 0.0;
  p.t_end = t_end;
  return p;
}

double rate_oracle(const SystemModel& m, const PulseSpec& p, double t) {
  return p.f0 * p.envelope(t) * p.chirp(t) * m.mu_ab(t) / (2.0 * m.omega_ab(t));
}

}  // namespace

// quadrature helpers

TEST(Quadrature, IntegratesQuinticExactly) {
  const double h = 0.1;
  std::vector<double> f;
  for (int i = 0; i <= 20; ++i) {
    const double x = i * h;
    f.push_back(1 - 2 * x + 3 * std::pow(x, 4) - 0.5 * std::pow(x, 5));
  }
  const auto c = quadrature::cumulative(f, h);
  for (int k = 0; k <= 20; ++k) {
    const double x = k * h;
    const double exact = x - x * x + 0.6 * std::pow(x, 5) - std::pow(x, 6) / 12;
    EXPECT_NEAR(c[k], exact, 1e-13);
  }
}

TEST(Quadrature, SixthOrderConvergence) {
  auto err = [](int n) {
    const double h = 2.0 / n;
    std::vector<double> f;
    for (int i = 0; i <= n; ++i) f.push_back(std::exp(std::sin(3 * i * h)));
    const double oracle = adaptive_integral([](double x) { return std::exp(std::sin(3 * x)); }, 0.0, 2.0);
    return std::abs(quadrature::cumulative(f, h).back() - oracle);
  };
  const double slope = std::log2(err(40) / err(80));
  EXPECT_GT(slope, 5.5);
}

TEST(Quadrature, RichardsonEstimateBoundsError) {
  const int n = 60;
  const double h = 3.0 / n;
  std::vector<double> f;
  for (int i = 0; i <= n; ++i) f.push_back(std::cos(4 * i * h));
  const double actual = std::abs(quadrature::cumulative(f, h).back() - std::sin(12.0) / 4);
  const double estimate = quadrature::richardson_error(f, h);
  EXPECT_GT(estimate, 0.0);
  EXPECT_LT(actual, 10 * estimate);
}

TEST(Quadrature, DifferentiateNinePoint) {
  const double h = 0.05;
  std::vector<double> f;
  for (int i = 0; i <= 100; ++i) f.push_back(std::sin(i * h));
  const auto d = quadrature::differentiate(f, h, 9);
  for (int i = 0; i <= 100; ++i) EXPECT_NEAR(d[i], std::cos(i * h), 1e-9);
}

// build_tau_map / invert_tau

TEST(TauMap, ConstantCase) {
  const SystemModel m = constant_model(1.0, 1, 0.0, 0.0, 0.5);
  const PulseSpec p = pulse_of(1.0, TimeFunction::constant(1.0), 2.0, 4.0);
  const TauMap map = build_tau_map(m, p, 101);
  EXPECT_NEAR(map.tau_max(), 2.0, 1e-14);
  EXPECT_EQ(map.tau(0.0), 0.0);
  EXPECT_NEAR(invert_tau(map, 1.0), 2.0, 1e-13);
  EXPECT_EQ(invert_tau(map, 0.0), 0.0);
  EXPECT_THROW(invert_tau(map, 2.5), DomainError);
  EXPECT_THROW(invert_tau(map, -0.1), DomainError);
}

TEST(TauMap, GaussianMatchesAdaptiveQuadrature) {
  const SystemModel m = constant_model(1.3, 1, 0.0, 0.0, 0.7);
  const PulseSpec p = pulse_of(0.8, Gaussian{10.0, 3.0, 1.0}, 1.3, 20.0);
  const TauMap map = build_tau_map(m, p);
  const double oracle = adaptive_integral([&](double t) { return rate_oracle(m, p, t); }, 0.0, 20.0);
  EXPECT_NEAR(map.tau_max(), oracle, 1e-8 * oracle);
}

TEST(TauMap, GaussianInversionRoundTrip) {
  const SystemModel m = constant_model(1.3, 1, 0.0, 0.0, 0.7);
  const PulseSpec p = pulse_of(0.8, Gaussian{10.0, 3.0, 1.0}, 1.3, 20.0);
  const TauMap map = build_tau_map(m, p);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, map.tau_max());
  for (int k = 0; k < 50; ++k) {
    const double tau = u(rng);
    const double t = invert_tau(map, tau);
    // bisection on the independently integrated map
    double lo = 0.0, hi = 20.0;
    for (int it = 0; it < 80; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double v = adaptive_integral([&](double x) { return rate_oracle(m, p, x); }, 0.0, mid);
      (v < tau ? lo : hi) = mid;
      if (hi - lo < 1e-13) break;
    }
    const double tau_back = adaptive_integral([&](double x) { return rate_oracle(m, p, x); }, 0.0, t);
    EXPECT_NEAR(tau_back, tau, 1e-8);
    EXPECT_NEAR(t, 0.5 * (lo + hi), 1e-7);
  }
}

TEST(TauMap, MonotoneForRandomSmoothModels) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 20; ++k) {
    const SystemModel m = constant_model(0.5 + 2 * u(rng), 1, 0.0, 0.0, 0.2 + u(rng));
    const double T = 5.0 + 30.0 * u(rng);
    const PulseSpec p = pulse_of(0.1 + u(rng), Gaussian{T * u(rng), T * (0.25 + u(rng)), 1.0},
                                 m.omega_ab(0.0), T);
    const TauMap map = build_tau_map(m, p);
    double previous = -1.0;
    for (int i = 0; i <= 2000; ++i) {
      const double tau = map.tau(T * i / 2000.0);
      ASSERT_GT(tau, previous);
      previous = tau;
    }
  }
}

TEST(TauMap, FlatSegmentIsAmbiguous) {
  const SystemModel m = constant_model(1.0, 1, 0.0, 0.0, 0.5);
  // first pulse on [0, 5], off on [5, 10], envelope tabulated with a gap
  PulseSpec p = pulse_of(1.0, TimeFunction::constant(1.0), 1.0, 10.0);
  std::vector<double> ts, ms;
  for (int i = 0; i <= 100; ++i) {
    const double t = 0.1 * i;
    ts.push_back(t);
    ms.push_back(t <= 5.0 ? std::pow(std::sin(pi * t / 5.0), 2) : 0.0);
  }
  p.envelope = Tabulated(ts, ms, 1);
  const TauMap map = build_tau_map(m, p, 101, 1);
  // τ_max is reached at t = 5 and stays; that end faces the support
  EXPECT_NEAR(invert_tau(map, map.tau_max()), 5.0, 1e-12);
  EXPECT_EQ(map.tau(7.0), map.tau_max());
}

TEST(TauMap, InteriorPlateauThrows) {
  const SystemModel m = constant_model(1.0, 1, 0.0, 0.0, 0.5);
  PulseSpec p = pulse_of(1.0, TimeFunction::constant(1.0), 1.0, 10.0);
  std::vector<double> ts, ms;
  for (int i = 0; i <= 100; ++i) {
    const double t = 0.1 * i;
    ts.push_back(t);
    ms.push_back(t < 4.0 || t > 6.0 ? 1.0 : 0.0);
  }
  p.envelope = Tabulated(ts, ms, 1);
  const TauMap map = build_tau_map(m, p, 101, 1);
  const double plateau = map.tau(5.0);
  EXPECT_THROW(invert_tau(map, plateau), AmbiguityError);
}

TEST(TauMap, NegativeCouplingIsOrientationError) {
  const SystemModel m = constant_model(1.0, 1, 0.0, 0.0, -0.5);
  const PulseSpec p = pulse_of(1.0, TimeFunction::constant(1.0), 1.0, 4.0);
  EXPECT_THROW(build_tau_map(m, p, 11), OrientationError);
}

// detunings / f_diagonal

TEST(Detunings, Values) {
  const SystemModel m = constant_model(1.0, 1, 0.0, 0.0, 0.5);
  const Detunings d = detunings(m, pulse_of(1.0, TimeFunction::constant(1.0), 2.0, 5.0), 1.0);
  EXPECT_EQ(d.delta_plus, 3.0);
  EXPECT_EQ(d.delta_minus, 1.0);
  EXPECT_EQ(detunings(m, pulse_of(1.0, TimeFunction::constant(1.0), 1.0, 5.0), 2.0).delta_minus, 0.0);
}

TEST(Detunings, ChirpedMatchesDirectEvaluation) {
  SystemModel m = constant_model(1.0, 1, 0.0, 0.0, 0.5);
  m.omega_ab = Tabulated({0.0, 2.0, 4.0, 6.0}, {1.0, 1.1, 0.95, 1.0});
  PulseSpec p = pulse_of(1.0, TimeFunction::constant(1.0), 1.0, 6.0);
  p.chirp = Gaussian{3.0, 2.0, 1.5};
  for (double t : {0.3, 2.7, 5.9}) {
    const Detunings d = detunings(m, p, t);
    EXPECT_EQ(d.delta_plus, p.chirp(t) + m.omega_ab(t));
    EXPECT_EQ(d.delta_minus, p.chirp(t) - m.omega_ab(t));
    EXPECT_GT(d.delta_plus, std::abs(d.delta_minus));
  }
}

TEST(FDiagonal, Values) {
  const SystemModel sym = constant_model(1.0, 1, 0.0, 0.0, 0.5);
  const PulseSpec p = pulse_of(1.0, TimeFunction::constant(1.0), 2.0, 5.0);
  for (double t : {0.0, 1.0, 3.3}) EXPECT_EQ(f_diagonal(sym, p, t, Level::alpha), 0.0);
  const SystemModel m = constant_model(1.0, 1, 0.2, 0.0, 0.5);
  EXPECT_EQ(f_diagonal(m, p, 0.0, Level::alpha), 0.0);
  EXPECT_NEAR(f_diagonal(m, p, pi / 4, Level::alpha), 0.2 * pi, 1e-14);
  EXPECT_THROW(f_diagonal(constant_model(1.0, 1, 0.2, 0.0, 0.0), p, 1.0, Level::alpha),
               DegenerateCouplingError);
}

TEST(FDiagonal, OddUnderHalfCycleShift) {
  // shifting the carrier phase by π: ω t → ω t + π is ω → ω + π/t at fixed t
  const SystemModel m = constant_model(1.0, 1, 0.3, -0.1, 0.5);
  for (double t : {0.7, 1.9, 4.2}) {
    const PulseSpec p = pulse_of(1.0, TimeFunction::constant(1.0), 2.0, 5.0);
    const PulseSpec shifted = pulse_of(1.0, TimeFunction::constant(1.0), 2.0 + pi / t, 5.0);
    for (Level l : {Level::alpha, Level::beta})
      EXPECT_NEAR(f_diagonal(m, shifted, t, l), -f_diagonal(m, p, t, l), 1e-12);
  }
}

// the τ-frame generator is the lab generator times dt/dτ once dF/dt is
// replaced by its envelope-slow form
TEST(FrameConsistency, TauGeneratorIsScaledLabGenerator) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 200; ++k) {
    const int sign = u(rng) < 0.5 ? 1 : -1;
    const SystemModel m = constant_model(0.5 + u(rng), sign, u(rng) - 0.5, u(rng) - 0.5, 0.2 + u(rng));
    PulseSpec p = pulse_of(0.2 + u(rng), Gaussian{10.0, 3.0, 1.0}, 0.5 + u(rng), 20.0);
    const CarrierPhases phases(m, p);
    const double t = 20.0 * u(rng);
    const Matrix2 lab = lab_generator(m, p, phases, t, DerivativeMode::envelope_slow);
    const Matrix2 tau = tau_generator(m, p, phases, t, TauEquation::full);
    const double dt_dtau = 1.0 / tau_rate(m, p, t);
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        const cplx scaled_lab = lab[i][j] * dt_dtau;
        EXPECT_LE(std::abs(scaled_lab - tau[i][j]), 1e-6 * std::max(1.0, std::abs(tau[i][j])));
      }
  }
}
