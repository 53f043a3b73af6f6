#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "lfm/config.hpp"
#include "lfm/errors.hpp"
#include "lfm/experiments.hpp"
#include "lfm/timeseries_io.hpp"

namespace lfm::app {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lfm_app_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

double max_abs(const std::vector<Vector>& xs, Eigen::Index i = 0) {
  double m = 0.0;
  for (const auto& x : xs) m = std::max(m, std::abs(x(i)));
  return m;
}

size_t index_at(const std::vector<double>& times, double t) {
  const auto it = std::lower_bound(times.begin(), times.end(), t - 1e-9);
  return size_t(it - times.begin());
}

// Config

TEST(Config, DefaultsPerKind) {
  const auto spring = default_config(ExperimentKind::SpringOpenLoop);
  EXPECT_EQ(spring.timing.dt, 0.01);
  EXPECT_EQ(spring.timing.horizon, 100.0);
  EXPECT_EQ(spring.gp.kind, gpss::CovarianceKind::SquaredExponential);
  const auto heat = default_config(ExperimentKind::HeatControl);
  EXPECT_EQ(heat.heat.modes_per_axis, 10);
  EXPECT_EQ(heat.timing.dt, 0.1);
  EXPECT_EQ(heat.timing.horizon, 20.0);
  EXPECT_EQ(heat.timing.control_on, 0.0);
  for (auto k : {ExperimentKind::SpringOpenLoop, ExperimentKind::SpringControl, ExperimentKind::HeatControl,
                 ExperimentKind::KernelCheck, ExperimentKind::Certify}) {
    EXPECT_NO_THROW(default_config(k).validate());
    EXPECT_EQ(parse_experiment(to_string(k)), k);
  }
  EXPECT_THROW(parse_experiment("spring"), ArgumentError);
}

TEST(Config, OverridesAndRejections) {
  const auto cfg = parse_config("[experiment]\nseed = 7\n[spring]\nforce_scale = 0.5\n[gp]\nkind = matern32\n",
                                ExperimentKind::SpringOpenLoop);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.spring.force_scale, 0.5);
  EXPECT_EQ(cfg.gp.kind, gpss::CovarianceKind::Matern32);
  EXPECT_THROW(parse_config("[spring]\nstiffness = 2\n", ExperimentKind::SpringOpenLoop), ArgumentError);
  EXPECT_THROW(parse_config("[nonsense]\nx = 1\n", ExperimentKind::SpringOpenLoop), ArgumentError);
  EXPECT_THROW(parse_config("lambda = 0.1\n", ExperimentKind::SpringOpenLoop), ArgumentError);
  EXPECT_THROW(parse_config("[spring]\nlambda = abc\n", ExperimentKind::SpringOpenLoop), ArgumentError);
  EXPECT_THROW(parse_config("[timing]\ndt = -1\n", ExperimentKind::SpringOpenLoop), ArgumentError);
  EXPECT_THROW(load_config("/nonexistent/cfg.ini", ExperimentKind::SpringOpenLoop), ArgumentError);
}

TEST(Config, IniRoundTrip) {
  auto cfg = default_config(ExperimentKind::HeatControl);
  cfg.seed = 42;
  cfg.heat.snapshot_times = {1.5, 6.9};
  cfg.gp.sigma = 0.123456789;
  cfg.certify.system = "heat";
  const auto back = parse_config(cfg.to_ini(), ExperimentKind::HeatControl);
  EXPECT_EQ(back.to_ini(), cfg.to_ini());
  EXPECT_EQ(back.heat.snapshot_times, cfg.heat.snapshot_times);
  EXPECT_EQ(back.gp.sigma, cfg.gp.sigma);
}

TEST(Config, ValidateCatchesInconsistency) {
  auto cfg = default_config(ExperimentKind::SpringControl);
  cfg.timing.train_end = 0.0;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg = default_config(ExperimentKind::SpringControl);
  cfg.cost.control_weight = 0.0;
  EXPECT_THROW(cfg.validate(), ArgumentError);
  cfg = default_config(ExperimentKind::Certify);
  cfg.certify.system = "pendulum";
  EXPECT_THROW(cfg.validate(), ArgumentError);
}

// IO

TEST(Io, FormatDoubleRoundTrips) {
  for (double v : {0.0, -0.0, 1.0, 0.1, 1.0 / 3.0, 1e-300, -2.5e17, 6.02214076e23,
                   std::numeric_limits<double>::denorm_min(), std::numeric_limits<double>::max()}) {
    EXPECT_EQ(std::strtod(io::format_double(v).c_str(), nullptr), v) << io::format_double(v);
  }
  EXPECT_EQ(io::format_double(0.1), "0.1");
}

TEST(Io, TimeseriesRoundTripWithGaps) {
  const auto dir = scratch("io");
  infer::TimeSeriesData data;
  for (int k = 0; k < 6; ++k) {
    data.times.push_back(0.1 * k);
    if (k == 2 || k == 4) {
      data.observations.emplace_back(std::nullopt);
    } else {
      data.observations.emplace_back(Vector::Constant(2, std::sin(double(k))));
    }
  }
  io::write_timeseries_csv(dir / "ts.csv", data);
  const auto back = io::read_timeseries_csv(dir / "ts.csv");
  ASSERT_EQ(back.times, data.times);
  for (size_t k = 0; k < data.times.size(); ++k) {
    ASSERT_EQ(back.observations[k].has_value(), data.observations[k].has_value());
    if (data.observations[k]) EXPECT_EQ(*back.observations[k], *data.observations[k]);
  }
}

TEST(Io, RejectsMalformedRows) {
  const auto dir = scratch("io_bad");
  std::ofstream(dir / "partial.csv") << "t,y_1,y_2\n0,1,2\n0.1,,3\n";
  EXPECT_THROW(io::read_timeseries_csv(dir / "partial.csv"), ArgumentError);
  std::ofstream(dir / "word.csv") << "t,y_1\n0,abc\n";
  EXPECT_THROW(io::read_timeseries_csv(dir / "word.csv"), ArgumentError);
}

// Kernel check and certification

TEST(KernelCheck, SquaredExponentialTable) {
  auto cfg = default_config(ExperimentKind::KernelCheck);
  cfg.gp.sigma = 1.0;
  cfg.gp.ell = 1.0;
  const auto rows = kernel_table(cfg);
  ASSERT_EQ(rows.size(), size_t(cfg.kernel.points));
  double worst = 0.0;
  for (const auto& r : rows) {
    EXPECT_NEAR(r.exact, std::exp(-r.tau * r.tau), 1e-15);
    EXPECT_EQ(r.error, std::abs(r.state_space - r.exact));
    worst = std::max(worst, r.error);
  }
  EXPECT_LE(worst, 0.01);
}

TEST(Certify, SpringReport) {
  auto cfg = default_config(ExperimentKind::Certify);
  cfg.out_dir = scratch("certify");
  run_experiment(cfg);
  const auto report = slurp(cfg.out_dir / "report.json");
  const auto r = systheory::certify(certify_model(cfg), cfg.timing.dt);
  EXPECT_TRUE(r.observable.verdict);
  EXPECT_EQ(r.observable.rank, 3);
  EXPECT_FALSE(r.controllable.verdict);
  EXPECT_EQ(r.controllable.rank, 2);
  EXPECT_TRUE(r.output_controllable.verdict);
  EXPECT_EQ(r.output_controllable.rank, 2);
  EXPECT_NE(report.find("\"controllable\""), std::string::npos);
  EXPECT_NE(report.find("\"observable\""), std::string::npos);

  cfg.certify.coupling = 0.0;
  const auto u = systheory::certify(certify_model(cfg), cfg.timing.dt);
  EXPECT_FALSE(u.observable.verdict);
  EXPECT_EQ(u.observable.rank, 2);
}

// Spring open loop

class SpringOpenLoop : public ::testing::Test {
 protected:
  static const SpringOpenLoopResult& result() {
    static const SpringOpenLoopResult r = spring_open_loop(default_config(ExperimentKind::SpringOpenLoop));
    return r;
  }
  static double u_mean(size_t k) { return (result().latent_readout * result().smoothed[k].mean.tail(result().latent_readout.cols()))(0); }
  static double u_std(size_t k) {
    const auto& r = result();
    const Eigen::Index nu = r.latent_readout.cols();
    const auto& cov = r.smoothed[k].cov;
    return std::sqrt((r.latent_readout * cov.bottomRightCorner(nu, nu) * r.latent_readout.transpose())(0, 0));
  }
};

TEST_F(SpringOpenLoop, InterpolatesLatentForce) {
  EXPECT_LE(result().rmse_u_interior, 0.1);
}

TEST_F(SpringOpenLoop, UncertaintyGrowsAfterData) {
  const auto& t = result().record.times;
  EXPECT_GT(u_std(index_at(t, 100.0)), u_std(index_at(t, 90.0)));
}

TEST_F(SpringOpenLoop, EstimateRevertsAfterData) {
  const auto& t = result().record.times;
  EXPECT_LT(std::abs(u_mean(index_at(t, 100.0))), std::abs(u_mean(index_at(t, 90.0))));
}

TEST(SpringOpenLoopNoiseless, TracksUnforcedState) {
  auto cfg = default_config(ExperimentKind::SpringOpenLoop);
  cfg.spring.force_scale = 0.0;
  cfg.spring.initial_position = 0.5;
  cfg.timing.noise_std = 0.0;
  const auto r = spring_open_loop(cfg);
  double worst = 0.0;
  for (size_t k = 0; k < r.record.times.size() && r.record.times[k] <= 90.0; ++k) {
    worst = std::max(worst, std::abs(r.smoothed[k].mean(0) - r.record.f_true[k](0)));
  }
  EXPECT_LE(worst, 1e-6);
}

// Spring control

class SpringControl : public ::testing::Test {
 protected:
  static const SpringControlResult& result() {
    static const SpringControlResult r = spring_control(default_config(ExperimentKind::SpringControl));
    return r;
  }
};

TEST_F(SpringControl, LatentAwareGainTracksBetter) {
  const auto& r = result();
  EXPECT_LT(r.lfm.tracking_error, r.basic.tracking_error);
  EXPECT_LE(r.lfm.tracking_error / r.basic.tracking_error, 0.6);
}

TEST_F(SpringControl, ControlIsBounded) {
  const auto& r = result();
  const double force = max_abs(r.lfm.u_true);
  EXPECT_LE(max_abs(r.lfm.control), 10.0 * force);
  EXPECT_LE(max_abs(r.basic.control), 10.0 * force);
}

TEST_F(SpringControl, PhysicalGainIsShared) {
  const auto& r = result();
  EXPECT_LT((r.lfm_gain.gain.leftCols(2) - r.basic_gain.gain.leftCols(2)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SpringControlUnforced, ControllersAgree) {
  auto cfg = default_config(ExperimentKind::SpringControl);
  cfg.spring.force_scale = 0.0;
  const auto r = spring_control(cfg);
  ASSERT_EQ(r.basic.times.size(), r.lfm.times.size());
  double worst = 0.0;
  for (size_t k = 0; k < r.basic.times.size(); ++k) {
    worst = std::max(worst, (r.basic.f_true[k] - r.lfm.f_true[k]).cwiseAbs().maxCoeff());
    worst = std::max(worst, (r.basic.control[k] - r.lfm.control[k]).cwiseAbs().maxCoeff());
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(SpringControlDisabled, MatchesOpenLoopTruth) {
  auto cfg = default_config(ExperimentKind::SpringControl);
  cfg.timing.horizon = 60.0;
  cfg.timing.meas_end = 60.0;
  cfg.timing.control_on = 60.0;
  const auto r = spring_control(cfg);
  const auto open = spring_open_loop(cfg);
  ASSERT_EQ(open.record.times.size(), r.basic.times.size());
  for (size_t k = 0; k < r.basic.times.size(); ++k) {
    EXPECT_EQ(r.basic.f_true[k], open.record.f_true[k]);
    EXPECT_EQ(r.lfm.f_true[k], open.record.f_true[k]);
    EXPECT_EQ(r.basic.measurements[k], open.record.measurements[k]);
    if (r.basic.times[k] < cfg.timing.control_on) EXPECT_EQ(r.basic.control[k].cwiseAbs().maxCoeff(), 0.0);
  }
}

// Heat control on a reduced mode set

ExperimentConfig small_heat() {
  auto cfg = default_config(ExperimentKind::HeatControl);
  cfg.heat.modes_per_axis = 3;
  cfg.heat.sensors_per_axis = 4;
  cfg.heat.field_grid = 20;
  return cfg;
}

TEST(HeatControl, LatentAwareControllerCancelsSource) {
  const auto cfg = small_heat();
  const auto r = heat_control(cfg);
  double peak_basic = 0.0, peak_lfm = 0.0;
  for (size_t k = 0; k < r.times.size(); ++k) {
    if (r.times[k] > cfg.heat.source_duration) break;
    peak_basic = std::max(peak_basic, r.max_basic[k]);
    peak_lfm = std::max(peak_lfm, r.max_lfm[k]);
  }
  EXPECT_LT(peak_lfm, peak_basic);
  const size_t k = index_at(r.lfm.times, 6.9);
  EXPECT_LT(r.lfm.control[k].dot(r.lfm.u_est[k]), 0.0);
}

TEST(HeatControl, UnforcedFieldStaysNearZero) {
  auto cfg = small_heat();
  cfg.heat.amplitude = 0.0;
  const auto r = heat_control(cfg);
  // Without forcing or feedback the field is the zero solution.
  for (size_t k = 0; k < r.times.size(); ++k) EXPECT_LE(std::abs(r.max_uncontrolled[k]), 3.0 * cfg.timing.noise_std);
}

// Outputs

TEST(Outputs, DeterministicAndComplete) {
  auto cfg = default_config(ExperimentKind::KernelCheck);
  cfg.out_dir = scratch("det_a");
  const auto a = run_experiment(cfg);
  cfg.out_dir = scratch("det_b");
  const auto b = run_experiment(cfg);
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].filename(), b[i].filename());
    if (a[i].filename() == "manifest.txt") continue;  // carries wall time
    EXPECT_EQ(slurp(a[i]), slurp(b[i])) << a[i];
  }
  const auto manifest = slurp(cfg.out_dir / "manifest.txt");
  for (const char* key : {"experiment", "library_version", "seed", "wall_time_seconds", "kernel.csv",
                          "summary.json"}) {
    EXPECT_NE(manifest.find(key), std::string::npos) << key;
  }
}

TEST(Outputs, SeededRunsAreByteIdentical) {
  auto cfg = small_heat();
  cfg.heat.modes_per_axis = 2;
  cfg.timing.train_end = cfg.timing.meas_end = cfg.timing.horizon = 4.0;
  cfg.heat.snapshot_times = {1.0};
  cfg.out_dir = scratch("seed_a");
  const auto a = run_experiment(cfg);
  cfg.out_dir = scratch("seed_b");
  const auto b = run_experiment(cfg);
  ASSERT_EQ(a.size(), b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i].filename() == "manifest.txt") continue;
    EXPECT_EQ(slurp(a[i]), slurp(b[i])) << a[i];
  }
}

TEST(Outputs, FailureLeavesNothingBehind) {
  auto cfg = default_config(ExperimentKind::KernelCheck);
  cfg.out_dir = scratch("guard");
  fs::create_directories(cfg.out_dir / "summary.json");  // blocks the second write
  EXPECT_THROW(run_experiment(cfg), Error);
  EXPECT_FALSE(fs::exists(cfg.out_dir / "kernel.csv"));
  EXPECT_FALSE(fs::exists(cfg.out_dir / "manifest.txt"));
}

// Command line

int lfmctl(const std::string& args) {
  const int status = std::system((std::string(LFMCTL_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("cli");
  EXPECT_EQ(lfmctl("kernel-check --out " + (dir / "ok").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "ok" / "kernel.csv"));
  std::ofstream(dir / "bad.ini") << "[timing]\ndt = -1\n";
  EXPECT_EQ(lfmctl("kernel-check --config " + (dir / "bad.ini").string() + " --out " + (dir / "x").string()), 2);
  std::ofstream(dir / "file") << "not a directory";
  EXPECT_EQ(lfmctl("kernel-check --out " + (dir / "file" / "sub").string()), 3);
  EXPECT_NE(lfmctl("no-such-command"), 0);
}

}  // namespace
}  // namespace lfm::app
