// Command-line front end: design, simulate, verify and sweep.
//
// Any `--section.key=value` (or `--section.key value`) argument overrides the
// matching config key, e.g. `--pulse.f0=0.3` or `--design.tol_fp 1e-10`.

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "rabichirp/cli.hpp"

namespace {

// Turns leftover `--a.b=v` / `--a.b v` tokens into `a.b=v` overrides.
std::vector<std::string> collect_overrides(const std::vector<std::string>& extras) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0 || tok.find('.') == std::string::npos) {
      throw CLI::ExtrasError({tok});
    }
    std::string body = tok.substr(2);
    if (body.find('=') == std::string::npos) {
      if (i + 1 >= extras.size()) throw CLI::ExtrasError({tok});
      body += "=" + extras[++i];
    }
    out.push_back(body);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Chirped-pulse design and verification for two-level systems with induced dipoles"};
  app.require_subcommand(1);

  std::string config;
  std::string frames;
  std::string output_dir;
  std::vector<std::string> sweep_configs;
  std::string sweep_command = "verify";
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config, "Run config (YAML)")->required()->check(CLI::ExistingFile);
    sub->add_option("--output-dir", output_dir, "Same as --output_dir=<dir>");
    sub->allow_extras();
  };
  CLI::App* design = app.add_subcommand("design", "Design the chirp of a 'chirp: design' config");
  add_common(design);
  CLI::App* simulate = app.add_subcommand("simulate", "Propagate and write trace CSVs");
  add_common(simulate);
  simulate->add_option("--frames", frames, "Comma list of lab, tau-full, tau-rwa, rabi");
  CLI::App* verify = app.add_subcommand("verify", "Check complete transfer and the RWA metric");
  add_common(verify);
  CLI::App* sweep = app.add_subcommand("sweep", "Run one command over many configs in parallel");
  sweep->add_option("configs", sweep_configs, "Run configs")->required()->check(CLI::ExistingFile);
  sweep->add_option("--command", sweep_command, "design, simulate or verify")
      ->check(CLI::IsMember({"design", "simulate", "verify"}));
  sweep->add_option("--jobs", jobs, "Concurrent runs")->check(CLI::PositiveNumber);
  sweep->allow_extras();

  std::vector<std::string> overrides;
  try {
    app.parse(argc, argv);
    CLI::App* sub = app.get_subcommands().front();
    overrides = collect_overrides(sub->remaining());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : rabichirp::cli::kConfigError;
  }
  if (!output_dir.empty()) overrides.push_back("output_dir=" + output_dir);
  if (!frames.empty()) overrides.push_back("simulate.frames=" + frames);

  const rabichirp::cli::Streams io{std::cout, std::cerr};
  if (design->parsed()) return rabichirp::cli::cmd_design(config, overrides, io);
  if (simulate->parsed()) return rabichirp::cli::cmd_simulate(config, overrides, io);
  if (verify->parsed()) return rabichirp::cli::cmd_verify(config, overrides, io);
  std::vector<std::filesystem::path> paths(sweep_configs.begin(), sweep_configs.end());
  return rabichirp::cli::cmd_sweep(paths, sweep_command, overrides, jobs, io);
}
