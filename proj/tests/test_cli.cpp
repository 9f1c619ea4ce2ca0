#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include "rabichirp/cli.hpp"
#include "support.hpp"

using namespace rabichirp;
namespace fs = std::filesystem;
using std::numbers::pi;

namespace {

const fs::path kDemos = RABICHIRP_DEMO_DIR;

struct CmdResult {
  int code;
  std::string out;
  std::string err;
};

template <class Cmd>
CmdResult run(Cmd cmd, const fs::path& config, std::vector<std::string> overrides) {
  std::ostringstream out, err;
  const int code = cmd(config, overrides, cli::Streams{out, err});
  return {code, out.str(), err.str()};
}

std::map<std::string, std::string> key_values(const std::string& text) {
  std::istringstream in(text);
  return io::read_key_values(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

const char* kSmall = R"(model:
  omega_ab: 1.0
  mu_aa: 0.0
  mu_bb: 0.0
  mu_ab: 0.5
pulse:
  f0: 0.4
  envelope: 1.0
  chirp: 1.0
  t_end: 15.707963267948966
integrator:
  tol: 1.0e-10
)";

}  // namespace

// io

TEST(Io, DoubleTextRoundTrips) {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0, -0.0}) {
    const double y = io::parse_double(io::format_double(x));
    EXPECT_EQ(std::memcmp(&x, &y, sizeof x), 0);
  }
  EXPECT_TRUE(std::isnan(io::parse_double("nan")));
  EXPECT_THROW(io::parse_double("1.0x"), ValidationError);
}

TEST(Io, TraceCsvRoundTrip) {
  Trace t;
  t.frame = Frame::tau_a;
  t.samples.push_back({0.0, 0.0, {1.0, 0.0}, {0.0, 0.0}, 1.0, 0.0, 0.4, 1.0});
  t.samples.push_back({1.5, 0.15, {0.9887710779360422, 0.0}, {0.0, 0.14943813247359922}, 0.977668, 0.022332, -0.1, 1.0});
  std::stringstream s;
  io::write_trace_csv(s, t);
  const Trace back = io::read_trace_csv(s);
  EXPECT_EQ(back.frame, Frame::tau_a);
  ASSERT_EQ(back.samples.size(), 2u);
  EXPECT_EQ(back.samples[1].t, 1.5);
  EXPECT_EQ(back.samples[1].second, t.samples[1].second);
  EXPECT_EQ(back.samples[1].pop_first, t.samples[1].pop_first);
  std::istringstream bad("t,tau\n1,2\n");
  EXPECT_THROW(io::read_trace_csv(bad), ValidationError);
}

// config

TEST(Config, RoundTripThroughText) {
  const auto dir = testing_support::scratch_dir("roundtrip");
  std::ofstream(dir / "w.dat") << "0 1.0\n10 1.1\n20 1.05\n31 1.0\n";
  const std::string text = R"(model:
  omega_ab: {kind: table, path: w.dat, order: 3}
  sign_ab: -1
  mu_aa: 0.01
  mu_bb: {kind: constant, value: -0.02}
  mu_ab: 0.5
pulse:
  f0: 0.3
  envelope: {kind: sin_squared, start: 0.0, duration: 30.0}
  chirp: design
  t_end: 30.0
phase_convention: integral
design: {tol_fp: 1.0e-9, relaxation: 0.5}
integrator: {tol: 1.0e-8, derivative: envelope_slow}
simulate: {frames: [lab, rabi], samples: 11}
verify: {equation: full, near_pi_window: 0.2}
output_dir: out/here
init: {first: [0.6, 0.0], second: [0.0, 0.8]}
)";
  const RunConfig a = load_config(write_config(dir, "run.yaml", text));
  const RunConfig b = parse_config_text(serialize_config(a));
  EXPECT_TRUE(a == b);
  EXPECT_EQ(serialize_config(a), serialize_config(b));
  EXPECT_EQ(b.model.sign_ab, -1);
  EXPECT_TRUE(b.design_chirp);
  EXPECT_EQ(b.convention, PhaseConvention::integral);
  EXPECT_EQ(b.frames, (std::vector<std::string>{"lab", "rabi"}));
}

TEST(Config, DefaultsRoundTrip) {
  const RunConfig a = parse_config_text(kSmall);
  EXPECT_TRUE(a == parse_config_text(serialize_config(a)));
  EXPECT_EQ(a.verify_equation, TauEquation::rwa);
  EXPECT_EQ(a.design.tol_fp, 1e-8);
}

TEST(Config, ErrorsNameTheKey) {
  auto key_of = [](const std::string& text) -> std::string {
    try {
      parse_config_text(text);
    } catch (const ConfigError& e) {
      return e.key();
    }
    return "<none>";
  };
  std::string t = kSmall;
  EXPECT_EQ(key_of(t + "bogus: 1\n"), "bogus");
  EXPECT_EQ(key_of(t + "design: {tol_fp: -1}\n"), "design.tol_fp");
  EXPECT_EQ(key_of(t + "simulate: {frames: [lab, moon]}\n"), "simulate.frames");
  std::string neg = kSmall;
  neg.replace(neg.find("f0: 0.4"), 7, "f0: -0.4");
  EXPECT_EQ(key_of(neg), "pulse.f0");
  std::string missing = kSmall;
  missing.replace(missing.find("mu_ab: 0.5"), 10, "mu_ax: 0.5");
  EXPECT_EQ(key_of(missing), "model.mu_ax");
}

TEST(Config, OverridesUseDottedKeys) {
  const auto dir = testing_support::scratch_dir("overrides");
  const fs::path p = write_config(dir, "c.yaml", kSmall);
  const RunConfig c = load_config(p, {"pulse.f0=0.2", "simulate.frames=lab,tau-rwa", "verify.equation=full"});
  EXPECT_EQ(c.pulse.f0, 0.2);
  EXPECT_EQ(c.frames, (std::vector<std::string>{"lab", "tau-rwa"}));
  EXPECT_EQ(c.verify_equation, TauEquation::full);
  EXPECT_THROW(load_config(p, {"pulse.f0"}), ConfigError);
}

TEST(Config, OutputRootFromEnvironment) {
  RunConfig c;
  ::unsetenv(kOutputRootEnv);
  EXPECT_EQ(resolve_output_dir(c, "x/run.yaml"), fs::path("run"));
  ::setenv(kOutputRootEnv, "/tmp/root", 1);
  EXPECT_EQ(resolve_output_dir(c, "x/run.yaml"), fs::path("/tmp/root/run"));
  c.output_dir = "/abs";
  EXPECT_EQ(resolve_output_dir(c, "x/run.yaml"), fs::path("/abs"));
  ::unsetenv(kOutputRootEnv);
}

// commands

class Commands : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = testing_support::scratch_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
    ::setenv(kOutputRootEnv, root_.c_str(), 1);
  }
  void TearDown() override { ::unsetenv(kOutputRootEnv); }
  fs::path root_;
};

TEST_F(Commands, DesignSymmetricDemo) {
  const CmdResult r = run(cli::cmd_design, kDemos / "symmetric_design.yaml", {});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto kv = key_values(slurp(root_ / "symmetric_design" / "design_report.txt"));
  EXPECT_EQ(kv.at("converged"), "true");
  EXPECT_EQ(kv.at("iterations"), "1");
  std::ifstream table(root_ / "symmetric_design" / "chirp.dat");
  std::string header;
  std::getline(table, header);
  int rows = 0;
  for (double t, w; table >> t >> w; ++rows) EXPECT_EQ(w, 2.0);
  EXPECT_GT(rows, 100);
}

TEST_F(Commands, DesignAsymmetricDemo) {
  const CmdResult r = run(cli::cmd_design, kDemos / "asymmetric.yaml", {});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  EXPECT_LT(io::parse_double(key_values(r.out).at("residual_sup")), 1e-6);
}

TEST_F(Commands, DesignNeedsDesignChirp) {
  EXPECT_EQ(run(cli::cmd_design, kDemos / "resonant_rabi.yaml", {}).code, cli::kConfigError);
}

TEST_F(Commands, DesignNonConvergenceIsExitTwo) {
  const CmdResult r = run(cli::cmd_design, kDemos / "asymmetric.yaml", {"design.max_iter=1"});
  EXPECT_EQ(r.code, cli::kDesignFailed);
  EXPECT_TRUE(fs::exists(root_ / "asymmetric" / "design_report.txt"));
}

TEST_F(Commands, NegativeFieldIsExitOne) {
  const CmdResult r = run(cli::cmd_design, kDemos / "asymmetric.yaml", {"pulse.f0=-1"});
  EXPECT_EQ(r.code, cli::kConfigError);
  EXPECT_NE(r.err.find("F0 > 0"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("pulse.f0"), std::string::npos) << r.err;
}

TEST_F(Commands, MissingConfigIsExitOne) {
  EXPECT_EQ(run(cli::cmd_verify, root_ / "nope.yaml", {}).code, cli::kConfigError);
}

TEST_F(Commands, SimulateZeroFieldIsConstant) {
  const CmdResult r = run(cli::cmd_simulate, kDemos / "zero_field.yaml", {});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const Trace t = io::read_trace_csv(root_ / "zero_field" / "trace_lab.csv");
  ASSERT_EQ(t.samples.size(), 401u);
  for (const auto& s : t.samples) {
    EXPECT_EQ(s.pop_first, 1.0);
    EXPECT_EQ(s.pop_second, 0.0);
  }
}

TEST_F(Commands, SimulateRabiFrameFollowsSinSquared) {
  const CmdResult r = run(cli::cmd_simulate, kDemos / "resonant_rabi.yaml", {});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const Trace t = io::read_trace_csv(root_ / "resonant_rabi" / "trace_rabi.csv");
  EXPECT_EQ(t.frame, Frame::rabi_b);
  for (const auto& s : t.samples) EXPECT_NEAR(s.pop_second, std::pow(std::sin(s.tau), 2), 1e-8);
}

TEST_F(Commands, SimulateLabAndTauFullAgree) {
  // slow envelope, resonant carrier; compare the two CSVs row by row
  const std::string text = R"(model: {omega_ab: 1.0, mu_aa: 0.005, mu_bb: 0.0, mu_ab: 0.5}
pulse:
  f0: 0.000532
  envelope: {kind: gaussian, center: 15079.6, width: 3769.9}
  chirp: 1.0
  t_end: 30159.3
integrator: {tol: 1.0e-9}
simulate: {frames: [lab, tau-full], samples: 201}
)";
  const fs::path p = write_config(root_, "slow.yaml", text);
  const CmdResult r = run(cli::cmd_simulate, p, {});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const Trace lab = io::read_trace_csv(root_ / "slow" / "trace_lab.csv");
  const Trace full = io::read_trace_csv(root_ / "slow" / "trace_tau-full.csv");
  ASSERT_EQ(lab.samples.size(), full.samples.size());
  EXPECT_GT(full.samples.back().tau, 1.0);
  for (std::size_t k = 0; k < lab.samples.size(); ++k) {
    EXPECT_EQ(lab.samples[k].t, full.samples[k].t);
    EXPECT_NEAR(lab.samples[k].pop_second, full.samples[k].pop_second, 1e-6);
    // every trace keeps the norm
    EXPECT_NEAR(lab.samples[k].pop_first + lab.samples[k].pop_second, 1.0, 1e-8);
    EXPECT_NEAR(full.samples[k].pop_first + full.samples[k].pop_second, 1.0, 1e-8);
  }
}

TEST_F(Commands, SimulateIsByteIdenticalAcrossRuns) {
  ASSERT_EQ(run(cli::cmd_simulate, kDemos / "asymmetric.yaml", {"simulate.samples=101"}).code, cli::kOk);
  const std::string first = slurp(root_ / "asymmetric" / "trace_lab.csv");
  const std::string chirp = slurp(root_ / "asymmetric" / "chirp.dat");
  ASSERT_EQ(run(cli::cmd_simulate, kDemos / "asymmetric.yaml", {"simulate.samples=101"}).code, cli::kOk);
  EXPECT_EQ(first, slurp(root_ / "asymmetric" / "trace_lab.csv"));
  EXPECT_EQ(chirp, slurp(root_ / "asymmetric" / "chirp.dat"));
}

TEST_F(Commands, SimulateIntegrationFailureIsExitThree) {
  const CmdResult r = run(cli::cmd_simulate, kDemos / "resonant_rabi.yaml", {"integrator.max_steps=5"});
  EXPECT_EQ(r.code, cli::kIntegrationFailed);
  EXPECT_NE(r.err.find("integration failed at"), std::string::npos);
}

TEST_F(Commands, VerifyResonantDemo) {
  const CmdResult r = run(cli::cmd_verify, kDemos / "resonant_rabi.yaml", {});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto kv = key_values(r.out);
  EXPECT_GE(io::parse_double(kv.at("p_beta_max")), 1.0 - 1e-6);
  EXPECT_EQ(kv.at("status"), "pass");
  for (const char* k : {"equation", "tau_max", "tau_at_max", "p_beta_near_pi", "rwa_metric", "norm_drift"})
    EXPECT_TRUE(kv.count(k)) << k;
  EXPECT_EQ(key_values(slurp(root_ / "resonant_rabi" / "verify_report.txt")), kv);
}

TEST_F(Commands, VerifyDetunedDemoFails) {
  const CmdResult r = run(cli::cmd_verify, kDemos / "detuned.yaml", {});
  EXPECT_EQ(r.code, cli::kVerifyFailed);
  EXPECT_LT(io::parse_double(key_values(r.out).at("p_beta_max")), 0.5);
}

TEST_F(Commands, VerifyAsymmetricDemo) {
  const CmdResult r = run(cli::cmd_verify, kDemos / "asymmetric.yaml", {});
  ASSERT_EQ(r.code, cli::kOk) << r.err;
  const auto kv = key_values(r.out);
  EXPECT_EQ(kv.at("equation"), "full");
  EXPECT_GE(io::parse_double(kv.at("p_beta_max")), 0.99);
  EXPECT_GE(io::parse_double(kv.at("rwa_metric")), 10.0);
}

TEST_F(Commands, SweepIsolatesRuns) {
  std::ostringstream out, err;
  const std::vector<fs::path> configs{kDemos / "resonant_rabi.yaml", kDemos / "detuned.yaml",
                                      kDemos / "zero_field.yaml"};
  const int code = cli::cmd_sweep(configs, "simulate", {"simulate.samples=51"}, 3, {out, err});
  EXPECT_EQ(code, cli::kOk) << err.str();
  for (const char* stem : {"resonant_rabi", "detuned", "zero_field"}) {
    EXPECT_TRUE(fs::is_directory(root_ / stem)) << stem;
    EXPECT_NE(out.str().find(std::string("[") + stem + "] exit=0"), std::string::npos);
  }
  // same result as a standalone run
  const std::string swept = slurp(root_ / "detuned" / "trace_lab.csv");
  ASSERT_EQ(run(cli::cmd_simulate, kDemos / "detuned.yaml", {"simulate.samples=51", "output_dir=alone"}).code, cli::kOk);
  EXPECT_EQ(swept, slurp(root_ / "alone" / "trace_lab.csv"));
}

TEST_F(Commands, SweepReturnsWorstExitAndSeparatesDuplicates) {
  std::ostringstream out, err;
  const std::vector<fs::path> configs{kDemos / "resonant_rabi.yaml", kDemos / "detuned.yaml",
                                      kDemos / "detuned.yaml"};
  EXPECT_EQ(cli::cmd_sweep(configs, "verify", {}, 2, {out, err}), cli::kVerifyFailed);
  EXPECT_TRUE(fs::exists(root_ / "detuned_1" / "verify_report.txt"));
  EXPECT_TRUE(fs::exists(root_ / "detuned_2" / "verify_report.txt"));
}

TEST(Tool, ExitCodes) {
  const auto dir = testing_support::scratch_dir("tool");
  const std::string tool = RABICHIRP_TOOL;
  auto status = [&](const std::string& args) {
    const std::string cmd = "cd '" + dir.string() + "' && '" + tool + "' " + args + " >/dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  const std::string demos = kDemos.string();
  EXPECT_EQ(status("verify " + demos + "/resonant_rabi.yaml"), 0);
  EXPECT_EQ(status("verify " + demos + "/detuned.yaml"), 4);
  EXPECT_EQ(status("design " + demos + "/asymmetric.yaml --pulse.f0=-1"), 1);
  EXPECT_EQ(status("design " + demos + "/asymmetric.yaml --design.max_iter 1"), 2);
  EXPECT_EQ(status("simulate " + demos + "/resonant_rabi.yaml --integrator.max_steps=5"), 3);
  EXPECT_EQ(status("frobnicate"), 1);
  EXPECT_EQ(status("simulate " + demos + "/zero_field.yaml --output-dir zf --frames lab"), 0);
  EXPECT_TRUE(fs::exists(dir / "zf" / "trace_lab.csv"));
}
