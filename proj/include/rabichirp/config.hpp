#pragma once

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rabichirp/designer.hpp"
#include "rabichirp/dynamics.hpp"
#include "rabichirp/errors.hpp"
#include "rabichirp/io.hpp"
#include "rabichirp/model.hpp"

namespace rabichirp {

/// A config problem; the message starts with the offending key.
class ConfigError : public ValidationError {
 public:
  ConfigError(const std::string& key, const std::string& what)
      : ValidationError("config key '" + key + "': " + what), key_(key) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

inline constexpr const char* kOutputRootEnv = "RABICHIRP_OUTPUT_ROOT";

inline const std::vector<std::string>& known_frames() {
  static const std::vector<std::string> names{"lab", "tau-full", "tau-rwa", "rabi"};
  return names;
}

struct RunConfig {
  SystemModel model;
  PulseSpec pulse;
  bool design_chirp = false;  ///< `pulse.chirp: design`
  PhaseConvention convention = PhaseConvention::product;
  DesignOptions design;
  IntegratorOptions integrator;
  std::vector<std::string> frames{"lab", "tau-full"};
  std::size_t samples = 2001;
  TauEquation verify_equation = TauEquation::rwa;
  std::size_t verify_samples = 4001;
  double near_pi_window = 0.1;
  double rwa_threshold = 10.0;
  double transfer_threshold = 0.99;
  std::string output_dir;  ///< as written; empty picks the config's stem
  Amplitudes init{{1.0, 0.0}, {0.0, 0.0}, Frame::lab_c};

  bool operator==(const RunConfig&) const = default;
};

namespace config_detail {

inline std::string join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

inline void check_keys(const YAML::Node& node, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) throw ConfigError(where, "expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(join(where, key), "unknown key");
  }
}

template <class T>
T scalar(const YAML::Node& node, const std::string& key) {
  if (!node.IsScalar()) throw ConfigError(key, "expected a scalar value");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(key, "cannot read value '" + node.Scalar() + "'");
  }
}

template <class T>
T scalar_or(const YAML::Node& parent, const char* name, const std::string& where, T fallback) {
  const YAML::Node n = parent[name];
  return n ? scalar<T>(n, join(where, name)) : fallback;
}

inline double positive(const YAML::Node& parent, const char* name, const std::string& where,
                       double fallback) {
  const double v = scalar_or<double>(parent, name, where, fallback);
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(join(where, name), "must be > 0");
  return v;
}

inline std::size_t count(const YAML::Node& parent, const char* name, const std::string& where,
                         std::size_t fallback, std::size_t minimum) {
  const YAML::Node n = parent[name];
  if (!n) return fallback;
  const long long v = scalar<long long>(n, join(where, name));
  if (v < static_cast<long long>(minimum))
    throw ConfigError(join(where, name), "must be >= " + std::to_string(minimum));
  return static_cast<std::size_t>(v);
}

inline TimeFunction time_function(const YAML::Node& node, const std::string& key,
                                  const std::filesystem::path& base_dir) {
  if (!node) throw ConfigError(key, "missing");
  if (node.IsScalar()) return TimeFunction::constant(scalar<double>(node, key));
  if (!node.IsMap()) throw ConfigError(key, "expected a number or a function mapping");
  const std::string kind = node["kind"] ? scalar<std::string>(node["kind"], key + ".kind") : "";
  try {
    if (kind == "constant") {
      check_keys(node, key, {"kind", "value"});
      if (!node["value"]) throw ConfigError(key + ".value", "missing");
      return TimeFunction::constant(scalar<double>(node["value"], key + ".value"));
    }
    if (kind == "gaussian") {
      check_keys(node, key, {"kind", "center", "width", "height"});
      for (const char* k : {"center", "width"})
        if (!node[k]) throw ConfigError(key + "." + k, "missing");
      return Gaussian{scalar<double>(node["center"], key + ".center"),
                      scalar<double>(node["width"], key + ".width"),
                      scalar_or<double>(node, "height", key, 1.0)};
    }
    if (kind == "sin_squared") {
      check_keys(node, key, {"kind", "start", "duration", "height"});
      for (const char* k : {"start", "duration"})
        if (!node[k]) throw ConfigError(key + "." + k, "missing");
      return SinSquared{scalar<double>(node["start"], key + ".start"),
                        scalar<double>(node["duration"], key + ".duration"),
                        scalar_or<double>(node, "height", key, 1.0)};
    }
    if (kind == "table") {
      check_keys(node, key, {"kind", "path", "order"});
      if (!node["path"]) throw ConfigError(key + ".path", "missing");
      std::filesystem::path p = scalar<std::string>(node["path"], key + ".path");
      if (p.is_relative()) p = base_dir / p;
      const int order = scalar_or<int>(node, "order", key, 3);
      try {
        return load_tabulated(p.lexically_normal().string(), order);
      } catch (const ValidationError& e) {
        throw ConfigError(key + ".path", e.what());
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const ValidationError& e) {
    throw ConfigError(key, e.what());
  }
  throw ConfigError(key + ".kind",
                    "expected one of constant, gaussian, sin_squared, table (got '" + kind + "')");
}

inline YAML::Node emit_function(const TimeFunction& f, const std::string& key) {
  YAML::Node n;
  std::visit(
      [&](const auto& r) {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, Constant>) {
          n["kind"] = "constant";
          n["value"] = io::format_double(r.value);
        } else if constexpr (std::is_same_v<R, Gaussian>) {
          n["kind"] = "gaussian";
          n["center"] = io::format_double(r.center);
          n["width"] = io::format_double(r.width);
          n["height"] = io::format_double(r.height);
        } else if constexpr (std::is_same_v<R, SinSquared>) {
          n["kind"] = "sin_squared";
          n["start"] = io::format_double(r.start);
          n["duration"] = io::format_double(r.duration);
          n["height"] = io::format_double(r.height);
        } else {
          if (r.source().empty())
            throw ConfigError(key, "an in-memory table has no file to refer to");
          n["kind"] = "table";
          n["path"] = std::filesystem::absolute(r.source()).lexically_normal().string();
          n["order"] = r.order();
        }
      },
      f.representation());
  return n;
}

// Prefixes a library validation message with the config section it concerns.
[[noreturn]] inline void rethrow_in(const std::string& section, const Error& e) {
  const std::string msg = e.what();
  const auto colon = msg.find(':');
  const bool keyed = colon != std::string::npos && colon > 0 &&
                     std::all_of(msg.begin(), msg.begin() + colon,
                                 [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
  if (keyed) throw ConfigError(section + "." + msg.substr(0, colon), msg.substr(colon + 2));
  throw ConfigError(section, msg);
}

inline void set_path(YAML::Node root, const std::string& dotted, const YAML::Node& value) {
  std::vector<std::string> parts;
  std::stringstream ss(dotted);
  for (std::string p; std::getline(ss, p, '.');) {
    if (p.empty()) throw ConfigError(dotted, "malformed override key");
    parts.push_back(p);
  }
  if (parts.empty()) throw ConfigError(dotted, "malformed override key");
  std::vector<YAML::Node> chain{root};
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    YAML::Node child = chain.back()[parts[i]];
    if (child && !child.IsMap()) {
      // a scalar shorthand (e.g. `mu_aa: 0.1`) becomes its constant mapping
      if (child.IsScalar() && parts[i + 1] == "value") {
        const std::string v = child.Scalar();
        child = YAML::Node(YAML::NodeType::Map);
        child["kind"] = "constant";
        child["value"] = v;
        chain.back()[parts[i]] = child;
      } else {
        throw ConfigError(dotted, "cannot descend into '" + parts[i] + "'");
      }
    }
    chain.push_back(chain.back()[parts[i]]);
  }
  chain.back()[parts.back()] = value;
}

}  // namespace config_detail

/// Applies `key.path=value` overrides to a parsed YAML tree. Values are read
/// as YAML, so `--pulse.f0=0.3` and `--simulate.frames=[lab,rabi]` both work.
inline void apply_overrides(YAML::Node& root, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError(o, "override must look like key=value");
    YAML::Node value;
    try {
      value = YAML::Load(o.substr(eq + 1));
    } catch (const YAML::Exception& e) {
      throw ConfigError(o.substr(0, eq), std::string("unreadable value: ") + e.what());
    }
    config_detail::set_path(root, o.substr(0, eq), value);
  }
}

/// Builds and validates a RunConfig. Relative table paths resolve against
/// `base_dir`.
inline RunConfig parse_config(const YAML::Node& root,
                              const std::filesystem::path& base_dir = ".") {
  using namespace config_detail;
  if (!root || !root.IsMap()) throw ConfigError("<root>", "expected a mapping");
  check_keys(root, "", {"model", "pulse", "phase_convention", "design", "integrator", "simulate",
                        "verify", "output_dir", "init"});
  RunConfig c;

  const YAML::Node m = root["model"];
  if (!m) throw ConfigError("model", "missing");
  check_keys(m, "model", {"omega_ab", "sign_ab", "mu_aa", "mu_bb", "mu_ab"});
  c.model.omega_ab = time_function(m["omega_ab"], "model.omega_ab", base_dir);
  c.model.sign_ab = scalar_or<int>(m, "sign_ab", "model", 1);
  c.model.mu_aa = time_function(m["mu_aa"], "model.mu_aa", base_dir);
  c.model.mu_bb = time_function(m["mu_bb"], "model.mu_bb", base_dir);
  c.model.mu_ab = time_function(m["mu_ab"], "model.mu_ab", base_dir);

  const YAML::Node p = root["pulse"];
  if (!p) throw ConfigError("pulse", "missing");
  check_keys(p, "pulse", {"f0", "envelope", "chirp", "t_start", "t_end"});
  for (const char* k : {"f0", "t_end", "chirp", "envelope"})
    if (!p[k]) throw ConfigError(std::string("pulse.") + k, "missing");
  c.pulse.f0 = scalar<double>(p["f0"], "pulse.f0");
  c.pulse.t_start = scalar_or<double>(p, "t_start", "pulse", 0.0);
  c.pulse.t_end = scalar<double>(p["t_end"], "pulse.t_end");
  c.pulse.envelope = time_function(p["envelope"], "pulse.envelope", base_dir);
  if (p["chirp"].IsScalar() && p["chirp"].Scalar() == "design") {
    c.design_chirp = true;
    c.pulse.chirp = c.model.omega_ab;
  } else {
    c.pulse.chirp = time_function(p["chirp"], "pulse.chirp", base_dir);
  }

  const std::string conv = scalar_or<std::string>(root, "phase_convention", "", "product");
  if (conv == "product") c.convention = PhaseConvention::product;
  else if (conv == "integral") c.convention = PhaseConvention::integral;
  else throw ConfigError("phase_convention", "expected product or integral (got '" + conv + "')");
  c.design.convention = c.convention;

  if (const YAML::Node d = root["design"]) {
    check_keys(d, "design", {"points_per_period", "tol_fp", "max_iter", "relaxation", "series_fraction"});
    c.design.points_per_period = count(d, "points_per_period", "design", c.design.points_per_period, 4);
    c.design.tol_fp = positive(d, "tol_fp", "design", c.design.tol_fp);
    c.design.max_iter = count(d, "max_iter", "design", c.design.max_iter, 1);
    c.design.relaxation = positive(d, "relaxation", "design", c.design.relaxation);
    if (c.design.relaxation > 1.0) throw ConfigError("design.relaxation", "must lie in (0, 1]");
    c.design.series_fraction = positive(d, "series_fraction", "design", c.design.series_fraction);
  }

  if (const YAML::Node in = root["integrator"]) {
    check_keys(in, "integrator", {"tol", "steps_per_period", "derivative", "max_steps"});
    c.integrator.tol = positive(in, "tol", "integrator", c.integrator.tol);
    c.integrator.steps_per_period =
        positive(in, "steps_per_period", "integrator", c.integrator.steps_per_period);
    c.integrator.max_steps = count(in, "max_steps", "integrator", c.integrator.max_steps, 1);
    const std::string mode = scalar_or<std::string>(in, "derivative", "integrator", "exact");
    if (mode == "exact") c.integrator.derivative = DerivativeMode::exact;
    else if (mode == "envelope_slow") c.integrator.derivative = DerivativeMode::envelope_slow;
    else throw ConfigError("integrator.derivative", "expected exact or envelope_slow");
  }

  if (const YAML::Node s = root["simulate"]) {
    check_keys(s, "simulate", {"frames", "samples"});
    c.samples = count(s, "samples", "simulate", c.samples, 2);
    if (const YAML::Node f = s["frames"]) {
      c.frames.clear();
      auto add = [&](const std::string& name) {
        const auto& known = known_frames();
        if (std::find(known.begin(), known.end(), name) == known.end())
          throw ConfigError("simulate.frames",
                            "unknown frame '" + name + "' (expected lab, tau-full, tau-rwa, rabi)");
        if (std::find(c.frames.begin(), c.frames.end(), name) == c.frames.end())
          c.frames.push_back(name);
      };
      if (f.IsSequence()) {
        for (const auto& x : f) add(scalar<std::string>(x, "simulate.frames"));
      } else {
        // comma list, as typed on the command line
        std::stringstream ss(scalar<std::string>(f, "simulate.frames"));
        for (std::string name; std::getline(ss, name, ',');) add(name);
      }
      if (c.frames.empty()) throw ConfigError("simulate.frames", "no frame selected");
    }
  }

  if (const YAML::Node v = root["verify"]) {
    check_keys(v, "verify", {"equation", "samples", "near_pi_window", "rwa_threshold",
                             "transfer_threshold"});
    const std::string eq = scalar_or<std::string>(v, "equation", "verify", "rwa");
    if (eq == "rwa") c.verify_equation = TauEquation::rwa;
    else if (eq == "full") c.verify_equation = TauEquation::full;
    else throw ConfigError("verify.equation", "expected rwa or full");
    c.verify_samples = count(v, "samples", "verify", c.verify_samples, 2);
    c.near_pi_window = positive(v, "near_pi_window", "verify", c.near_pi_window);
    c.rwa_threshold = positive(v, "rwa_threshold", "verify", c.rwa_threshold);
    c.transfer_threshold = positive(v, "transfer_threshold", "verify", c.transfer_threshold);
    if (c.transfer_threshold > 1.0) throw ConfigError("verify.transfer_threshold", "must be <= 1");
  }

  c.output_dir = scalar_or<std::string>(root, "output_dir", "", "");

  if (const YAML::Node i = root["init"]) {
    check_keys(i, "init", {"first", "second"});
    auto amp = [&](const char* name, cplx fallback) {
      const YAML::Node a = i[name];
      if (!a) return fallback;
      const std::string key = std::string("init.") + name;
      if (!a.IsSequence() || a.size() != 2) throw ConfigError(key, "expected [re, im]");
      return cplx{scalar<double>(a[0], key), scalar<double>(a[1], key)};
    };
    c.init.first = amp("first", c.init.first);
    c.init.second = amp("second", c.init.second);
    if (std::abs(c.init.norm() - 1.0) > 1e-12) throw ConfigError("init", "state must have unit norm");
  }

  try {
    validate(c.pulse);
  } catch (const Error& e) {
    rethrow_in("pulse", e);
  }
  try {
    validate(c.model, c.pulse.t_start, c.pulse.t_end);
  } catch (const Error& e) {
    rethrow_in("model", e);
  }
  return c;
}

inline YAML::Node load_config_tree(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("<file>", "'" + path.string() + "' not found");
  try {
    return YAML::LoadFile(path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError("<file>", "'" + path.string() + "' does not parse: " + e.what());
  }
}

inline RunConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {}) {
  YAML::Node root = load_config_tree(path);
  apply_overrides(root, overrides);
  return parse_config(root, path.parent_path().empty() ? "." : path.parent_path());
}

inline RunConfig parse_config_text(const std::string& text,
                                   const std::filesystem::path& base_dir = ".") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("<text>", std::string("does not parse: ") + e.what());
  }
  return parse_config(root, base_dir);
}

/// Every key written out explicitly; parses back to an equal RunConfig.
inline std::string serialize_config(const RunConfig& c) {
  using config_detail::emit_function;
  using io::format_double;
  YAML::Node root;
  root["model"]["omega_ab"] = emit_function(c.model.omega_ab, "model.omega_ab");
  root["model"]["sign_ab"] = c.model.sign_ab;
  root["model"]["mu_aa"] = emit_function(c.model.mu_aa, "model.mu_aa");
  root["model"]["mu_bb"] = emit_function(c.model.mu_bb, "model.mu_bb");
  root["model"]["mu_ab"] = emit_function(c.model.mu_ab, "model.mu_ab");
  root["pulse"]["f0"] = format_double(c.pulse.f0);
  root["pulse"]["envelope"] = emit_function(c.pulse.envelope, "pulse.envelope");
  root["pulse"]["chirp"] = c.design_chirp ? YAML::Node("design") : emit_function(c.pulse.chirp, "pulse.chirp");
  root["pulse"]["t_start"] = format_double(c.pulse.t_start);
  root["pulse"]["t_end"] = format_double(c.pulse.t_end);
  root["phase_convention"] = c.convention == PhaseConvention::product ? "product" : "integral";
  root["design"]["points_per_period"] = c.design.points_per_period;
  root["design"]["tol_fp"] = format_double(c.design.tol_fp);
  root["design"]["max_iter"] = c.design.max_iter;
  root["design"]["relaxation"] = format_double(c.design.relaxation);
  root["design"]["series_fraction"] = format_double(c.design.series_fraction);
  root["integrator"]["tol"] = format_double(c.integrator.tol);
  root["integrator"]["steps_per_period"] = format_double(c.integrator.steps_per_period);
  root["integrator"]["derivative"] =
      c.integrator.derivative == DerivativeMode::exact ? "exact" : "envelope_slow";
  root["integrator"]["max_steps"] = c.integrator.max_steps;
  for (const auto& f : c.frames) root["simulate"]["frames"].push_back(f);
  root["simulate"]["samples"] = c.samples;
  root["verify"]["equation"] = c.verify_equation == TauEquation::rwa ? "rwa" : "full";
  root["verify"]["samples"] = c.verify_samples;
  root["verify"]["near_pi_window"] = format_double(c.near_pi_window);
  root["verify"]["rwa_threshold"] = format_double(c.rwa_threshold);
  root["verify"]["transfer_threshold"] = format_double(c.transfer_threshold);
  if (!c.output_dir.empty()) root["output_dir"] = c.output_dir;
  const std::pair<const char*, cplx> amps[] = {{"first", c.init.first}, {"second", c.init.second}};
  for (const auto& [name, a] : amps) {
    YAML::Node pair;
    pair.SetStyle(YAML::EmitterStyle::Flow);
    pair.push_back(format_double(a.real()));
    pair.push_back(format_double(a.imag()));
    root["init"][name] = pair;
  }
  YAML::Emitter out;
  out << root;
  return std::string(out.c_str()) + "\n";
}

/// Output directory of a run: `output_dir` (or the config's stem), taken
/// relative to $RABICHIRP_OUTPUT_ROOT when set, else to the working directory.
inline std::filesystem::path resolve_output_dir(const RunConfig& c,
                                                const std::filesystem::path& config_path) {
  std::filesystem::path dir = c.output_dir.empty() ? config_path.stem() : std::filesystem::path(c.output_dir);
  if (dir.is_relative()) {
    const char* root = std::getenv(kOutputRootEnv);
    if (root != nullptr && *root != '\0') dir = std::filesystem::path(root) / dir;
  }
  return dir;
}

}  // namespace rabichirp
