#pragma once

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rabichirp/config.hpp"
#include "rabichirp/designer.hpp"
#include "rabichirp/dynamics.hpp"
#include "rabichirp/io.hpp"
#include "rabichirp/transform.hpp"

namespace rabichirp::cli {

enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kDesignFailed = 2,
  kIntegrationFailed = 3,
  kVerifyFailed = 4,
};

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

namespace detail {

// Thrown inside a command to leave with a specific exit code.
struct Exit {
  int code;
};

// Maps library exceptions to exit codes, reporting on `err`.
template <class Fn>
int guarded(Streams io, Fn&& body) {
  try {
    return body();
  } catch (const Exit& e) {
    return e.code;
  } catch (const IntegrationError& e) {
    io.err << "error: integration failed at " << io::format_double(e.where()) << ": " << e.what()
           << '\n';
    return kIntegrationFailed;
  } catch (const DesignError& e) {
    io.err << "error: design failed: " << e.what() << '\n';
    return kDesignFailed;
  } catch (const Error& e) {
    io.err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << '\n';
    return kConfigError;
  }
}

inline std::filesystem::path prepare_output(const RunConfig& cfg,
                                            const std::filesystem::path& config_path) {
  const auto dir = resolve_output_dir(cfg, config_path);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_design(const DesignReport& report, const std::filesystem::path& dir,
                         Streams io) {
  const auto report_path = dir / "design_report.txt";
  const auto chirp_path = dir / "chirp.dat";
  io::write_key_values(report_path, io::report_fields(report));
  io::write_chirp_table(chirp_path, report.grid, report.chirp_values);
  io.out << "converged=" << (report.converged ? "true" : "false") << '\n'
         << "iterations=" << report.history.size() << '\n'
         << "residual_sup=" << io::format_double(report.residual_sup) << '\n'
         << "rwa_metric=" << io::format_double(report.rwa_metric) << '\n'
         << "report=" << report_path.string() << '\n'
         << "chirp_table=" << chirp_path.string() << '\n';
}

// The pulse with its final chirp; runs (and records) the design when the
// config asks for one.
inline PulseSpec resolve_pulse(const RunConfig& cfg, const std::filesystem::path& dir,
                               Streams io) {
  if (!cfg.design_chirp) return cfg.pulse;
  const DesignReport report = design_chirp(cfg.model, cfg.pulse, cfg.design);
  write_design(report, dir, io);
  if (!report.converged) {
    io.err << "error: chirp design did not converge in " << cfg.design.max_iter
           << " iterations\n";
    throw Exit{kDesignFailed};
  }
  PulseSpec pulse = cfg.pulse;
  pulse.chirp = report.chirp;
  return pulse;
}

}  // namespace detail

/// Designs the chirp of a `chirp: design` config; writes design_report.txt
/// and chirp.dat. Exit 0 on convergence, 2 otherwise.
inline int cmd_design(const std::filesystem::path& config_path,
                      const std::vector<std::string>& overrides, Streams io) {
  return detail::guarded(io, [&] {
    const RunConfig cfg = load_config(config_path, overrides);
    if (!cfg.design_chirp)
      throw ConfigError("pulse.chirp", "the design command needs 'chirp: design'");
    const auto dir = detail::prepare_output(cfg, config_path);
    const DesignReport report = design_chirp(cfg.model, cfg.pulse, cfg.design);
    detail::write_design(report, dir, io);
    return report.converged ? kOk : kDesignFailed;
  });
}

/// Propagates the pulse in every selected frame and writes trace_<frame>.csv.
/// τ frames sample τ uniformly on [0, τ_max]; the lab frame uses the matching
/// lab times, so rows line up across files.
inline int cmd_simulate(const std::filesystem::path& config_path,
                        const std::vector<std::string>& overrides, Streams io) {
  return detail::guarded(io, [&] {
    const RunConfig cfg = load_config(config_path, overrides);
    const auto dir = detail::prepare_output(cfg, config_path);
    const PulseSpec pulse = detail::resolve_pulse(cfg, dir, io);
    const CarrierPhases phases(cfg.model, pulse, cfg.convention);
    const TauMap map = build_tau_map(cfg.model, pulse);
    const bool any_tau = std::any_of(cfg.frames.begin(), cfg.frames.end(),
                                     [](const std::string& f) { return f != "lab"; });
    const bool has_tau = map.tau_max() > 0.0;
    if (any_tau && !has_tau)
      throw ConfigError("simulate.frames", "tau frames need a nonzero pulse area (tau_max = 0)");

    std::vector<double> taus, times;
    if (has_tau) {
      taus = linspace(0.0, map.tau_max(), cfg.samples);
      times.reserve(taus.size());
      for (double tau : taus) times.push_back(map.invert(tau));
    } else {
      times = linspace(pulse.t_start, pulse.t_end, cfg.samples);
    }

    std::map<std::string, Trace> traces;
    Amplitudes init = cfg.init;
    for (const auto& frame : cfg.frames) {
      if (frame == "lab") {
        init.frame = Frame::lab_c;
        traces[frame] = integrate_lab(cfg.model, pulse, phases, init, times, cfg.integrator,
                                      has_tau ? &map : nullptr);
      } else {
        const bool full = frame == "tau-full";
        const std::string source = full ? "tau-full" : "tau-rwa";
        if (!traces.count(source)) {
          init.frame = Frame::tau_a;
          traces[source] = integrate_tau(cfg.model, pulse, phases, map,
                                         full ? TauEquation::full : TauEquation::rwa, init, taus,
                                         cfg.integrator);
        }
        if (frame == "rabi")
          traces[frame] = to_rabi_frame(traces[source], PhaseIntegrals(cfg.model, pulse, phases, map));
      }
    }
    io.out << "tau_max=" << io::format_double(map.tau_max()) << '\n';
    for (const auto& frame : cfg.frames) {
      const auto path = dir / ("trace_" + frame + ".csv");
      io::write_trace_csv(path, traces[frame]);
      io.out << "trace." << frame << '=' << path.string() << '\n'
             << "norm_drift." << frame << '=' << io::format_double(traces[frame].max_norm_drift())
             << '\n';
    }
    return kOk;
  });
}

/// Checks complete transfer and the RWA metric. Prints stable key=value
/// lines; exit 0 when both clear their thresholds, 4 otherwise.
inline int cmd_verify(const std::filesystem::path& config_path,
                      const std::vector<std::string>& overrides, Streams io) {
  return detail::guarded(io, [&] {
    const RunConfig cfg = load_config(config_path, overrides);
    const auto dir = detail::prepare_output(cfg, config_path);
    const PulseSpec pulse = detail::resolve_pulse(cfg, dir, io);
    const TauMap map = build_tau_map(cfg.model, pulse);
    const double metric = rwa_validity_metric(cfg.model, pulse, map);

    TransferResult r;
    if (map.tau_max() > 0.0) {
      VerifyOptions vo;
      vo.integrator = cfg.integrator;
      vo.equation = cfg.verify_equation;
      vo.convention = cfg.convention;
      vo.samples = cfg.verify_samples;
      vo.near_pi_window = cfg.near_pi_window;
      r = verify_transfer(cfg.model, pulse, cfg.init, vo);
      io::write_trace_csv(dir / "trace_verify.csv", r.trace);
    } else {
      r.p_beta_max = cfg.init.population_second();
    }
    const bool pass = r.p_beta_max >= cfg.transfer_threshold && metric >= cfg.rwa_threshold;
    const io::KeyValues kv{
        {"equation", cfg.verify_equation == TauEquation::full ? "full" : "rwa"},
        {"tau_max", io::format_double(map.tau_max())},
        {"p_beta_max", io::format_double(r.p_beta_max)},
        {"tau_at_max", io::format_double(r.tau_at_max)},
        {"p_beta_near_pi", io::format_double(r.p_beta_near_pi)},
        {"rwa_metric", io::format_double(metric)},
        {"norm_drift", io::format_double(r.norm_drift)},
        {"transfer_threshold", io::format_double(cfg.transfer_threshold)},
        {"rwa_threshold", io::format_double(cfg.rwa_threshold)},
        {"status", pass ? "pass" : "fail"},
    };
    io::write_key_values(dir / "verify_report.txt", kv);
    io::write_key_values(io.out, kv);
    return pass ? kOk : kVerifyFailed;
  });
}

/// Runs `command` on every config concurrently. Each run gets its own output
/// directory, <root>/<stem> (suffixed with its position on a name clash), and
/// its own buffered output, printed in input order with a `[stem]` prefix.
/// Returns the largest exit code.
inline int cmd_sweep(const std::vector<std::filesystem::path>& configs, const std::string& command,
                     const std::vector<std::string>& overrides, unsigned jobs, Streams io) {
  if (command != "design" && command != "simulate" && command != "verify") {
    io.err << "error: sweep command must be design, simulate or verify\n";
    return kConfigError;
  }
  std::vector<std::string> names;
  std::map<std::string, int> seen;
  for (const auto& c : configs) ++seen[c.stem().string()];
  for (std::size_t k = 0; k < configs.size(); ++k) {
    std::string stem = configs[k].stem().string();
    if (seen[stem] > 1) stem += "_" + std::to_string(k);
    names.push_back(stem);
  }
  std::vector<std::ostringstream> outs(configs.size()), errs(configs.size());
  std::vector<int> codes(configs.size(), kOk);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < configs.size();) {
      std::vector<std::string> ov = overrides;
      ov.push_back("output_dir=" + names[k]);
      Streams s{outs[k], errs[k]};
      codes[k] = command == "design"     ? cmd_design(configs[k], ov, s)
                 : command == "simulate" ? cmd_simulate(configs[k], ov, s)
                                         : cmd_verify(configs[k], ov, s);
    }
  };
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(configs.size())));
  std::vector<std::thread> pool;
  for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  int worst = kOk;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    std::istringstream lines(outs[k].str());
    for (std::string line; std::getline(lines, line);) io.out << '[' << names[k] << "] " << line << '\n';
    io.out << '[' << names[k] << "] exit=" << codes[k] << '\n';
    io.err << errs[k].str();
    worst = std::max(worst, codes[k]);
  }
  return worst;
}

}  // namespace rabichirp::cli
