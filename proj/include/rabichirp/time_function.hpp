#pragma once

#include <gsl/gsl_spline.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "rabichirp/errors.hpp"

namespace rabichirp {

struct Constant {
  double value = 0.0;
  bool operator==(const Constant&) const = default;
};

/// height · exp(−(t − center)² / (2 width²)); width is the standard deviation.
struct Gaussian {
  double center = 0.0;
  double width = 1.0;
  double height = 1.0;
  bool operator==(const Gaussian&) const = default;
};

/// height · sin²(π (t − start) / duration) on [start, start + duration], zero elsewhere.
struct SinSquared {
  double start = 0.0;
  double duration = 1.0;
  double height = 1.0;
  bool operator==(const SinSquared&) const = default;
};

/// Sampled function, linear (order 1) or natural cubic spline (order 3).
/// Never extrapolates.
class Tabulated {
 public:
  Tabulated(std::vector<double> times, std::vector<double> values, int order = 3,
            std::string source = {})
      : times_(std::move(times)), values_(std::move(values)), order_(order),
        source_(std::move(source)) {
    if (times_.size() != values_.size())
      throw ValidationError("tabulated function: times and values differ in length");
    if (times_.size() < 2)
      throw ValidationError("tabulated function needs at least 2 samples");
    if (order_ != 1 && order_ != 3)
      throw ValidationError("tabulated function: interpolation order must be 1 or 3, got " +
                            std::to_string(order_));
    for (std::size_t i = 1; i < times_.size(); ++i)
      if (!(times_[i] > times_[i - 1]))
        throw ValidationError("tabulated function: sample times must be strictly increasing");
    for (double v : values_)
      if (!std::isfinite(v)) throw ValidationError("tabulated function: non-finite sample value");

    // natural cubic needs three nodes; two nodes degrade to the straight line
    const gsl_interp_type* type =
        (order_ == 3 && times_.size() >= 3) ? gsl_interp_cspline : gsl_interp_linear;
    gsl_spline* raw = gsl_spline_alloc(type, times_.size());
    if (raw == nullptr) throw Error("gsl_spline_alloc failed");
    spline_.reset(raw, gsl_spline_free);
    gsl_spline_init(raw, times_.data(), values_.data(), times_.size());
  }

  const std::vector<double>& times() const noexcept { return times_; }
  const std::vector<double>& values() const noexcept { return values_; }
  int order() const noexcept { return order_; }
  /// File the samples were read from, empty for in-memory tables.
  const std::string& source() const noexcept { return source_; }
  double lo() const noexcept { return times_.front(); }
  double hi() const noexcept { return times_.back(); }

  double value(double t) const {
    check(t);
    return gsl_spline_eval(spline_.get(), t, nullptr);
  }

  double derivative(double t) const {
    check(t);
    return gsl_spline_eval_deriv(spline_.get(), t, nullptr);
  }

  bool operator==(const Tabulated& other) const {
    return times_ == other.times_ && values_ == other.values_ && order_ == other.order_;
  }

 private:
  void check(double t) const {
    if (!(t >= lo() && t <= hi())) {
      std::ostringstream msg;
      msg << "tabulated function evaluated at t = " << t << " outside [" << lo() << ", "
          << hi() << "]";
      throw DomainError(msg.str());
    }
  }

  std::vector<double> times_;
  std::vector<double> values_;
  int order_;
  std::string source_;
  // gsl_spline is never mutated after init; evaluation passes no accelerator
  std::shared_ptr<const gsl_spline> spline_;
};

/// Scalar function of lab time: the carrier for envelopes, chirps, level
/// splittings and dipole moments.
class TimeFunction {
 public:
  using Representation = std::variant<Constant, Gaussian, SinSquared, Tabulated>;

  TimeFunction() : rep_(Constant{0.0}) {}
  TimeFunction(Constant c) : rep_(c) {}
  TimeFunction(Gaussian g) : rep_(g) {
    if (!(g.width > 0.0)) throw ValidationError("gaussian width must be > 0");
  }
  TimeFunction(SinSquared s) : rep_(s) {
    if (!(s.duration > 0.0)) throw ValidationError("sin-squared duration must be > 0");
  }
  TimeFunction(Tabulated t) : rep_(std::move(t)) {}

  static TimeFunction constant(double v) { return Constant{v}; }

  const Representation& representation() const noexcept { return rep_; }

  double operator()(double t) const { return value(t); }

  double value(double t) const {
    return std::visit([t](const auto& f) { return eval(f, t); }, rep_);
  }

  double derivative(double t) const {
    return std::visit([t](const auto& f) { return deriv(f, t); }, rep_);
  }

  /// Lower and upper end of the domain; infinite for analytic forms.
  std::pair<double, double> domain() const {
    if (const auto* tab = std::get_if<Tabulated>(&rep_)) return {tab->lo(), tab->hi()};
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {-inf, inf};
  }

  bool covers(double a, double b) const {
    auto [lo, hi] = domain();
    return lo <= a && b <= hi;
  }

  bool is_constant() const noexcept { return std::holds_alternative<Constant>(rep_); }

  bool operator==(const TimeFunction&) const = default;

 private:
  static double eval(const Constant& c, double) { return c.value; }
  static double eval(const Gaussian& g, double t) {
    const double x = (t - g.center) / g.width;
    return g.height * std::exp(-0.5 * x * x);
  }
  static double eval(const SinSquared& s, double t) {
    if (t < s.start || t > s.start + s.duration) return 0.0;
    const double v = std::sin(std::numbers::pi * (t - s.start) / s.duration);
    return s.height * v * v;
  }
  static double eval(const Tabulated& tab, double t) { return tab.value(t); }

  static double deriv(const Constant&, double) { return 0.0; }
  static double deriv(const Gaussian& g, double t) {
    return -(t - g.center) / (g.width * g.width) * eval(g, t);
  }
  static double deriv(const SinSquared& s, double t) {
    if (t < s.start || t > s.start + s.duration) return 0.0;
    const double k = std::numbers::pi / s.duration;
    return s.height * k * std::sin(2.0 * k * (t - s.start));
  }
  static double deriv(const Tabulated& tab, double t) { return tab.derivative(t); }

  Representation rep_;
};

/// Same function multiplied by `factor`, keeping its representation kind.
inline TimeFunction scaled(const TimeFunction& f, double factor) {
  return std::visit(
      [factor](const auto& r) -> TimeFunction {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, Constant>) {
          return Constant{r.value * factor};
        } else if constexpr (std::is_same_v<R, Gaussian>) {
          return Gaussian{r.center, r.width, r.height * factor};
        } else if constexpr (std::is_same_v<R, SinSquared>) {
          return SinSquared{r.start, r.duration, r.height * factor};
        } else {
          std::vector<double> v = r.values();
          for (double& x : v) x *= factor;
          return Tabulated(r.times(), std::move(v), r.order());
        }
      },
      f.representation());
}

/// Reads a two-column whitespace-separated table; '#' starts a comment.
inline std::pair<std::vector<double>, std::vector<double>> read_sample_table(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open sample table '" + path + "'");
  std::vector<double> ts, vs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    double t = 0.0, v = 0.0;
    if (!(fields >> t)) continue;  // blank
    std::string extra;
    if (!(fields >> v) || (fields >> extra))
      throw ValidationError("sample table '" + path + "' line " + std::to_string(lineno) +
                            ": expected two numeric columns");
    ts.push_back(t);
    vs.push_back(v);
  }
  return {std::move(ts), std::move(vs)};
}

inline TimeFunction load_tabulated(const std::string& path, int order = 3) {
  auto [ts, vs] = read_sample_table(path);
  try {
    return Tabulated(std::move(ts), std::move(vs), order, path);
  } catch (const ValidationError& e) {
    throw ValidationError("sample table '" + path + "': " + e.what());
  }
}

}  // namespace rabichirp
