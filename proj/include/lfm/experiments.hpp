#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lfm/config.hpp"
#include "lfm/control.hpp"
#include "lfm/infer.hpp"
#include "lfm/model.hpp"
#include "lfm/systheory.hpp"

namespace lfm::app {

using numlin::Matrix;
using numlin::Vector;

// Spring scenario pieces, shared by the runners and the tests.
model::LtiPhysicalSystem spring_system(const ExperimentConfig& cfg);
control::ScenarioTruth spring_truth(const ExperimentConfig& cfg);
control::CostSpec spring_cost(const ExperimentConfig& cfg);
infer::MeasurementModel spring_measurement(const ExperimentConfig& cfg);

struct SpringOpenLoopResult {
  infer::FitResult fit;
  control::TrajectoryRecord record;              // truth and measurements
  std::vector<infer::GaussianBelief> smoothed;   // one per record time
  Matrix latent_readout;                         // Cu of the fitted model
  double rmse_u_measured = 0.0;                  // [0, meas_end]
  double rmse_u_extrapolated = 0.0;              // (meas_end, horizon]
  double rmse_u_interior = 0.0;                  // [10, 85]
  double rmse_f_measured = 0.0;
  double rmse_f_extrapolated = 0.0;
};

SpringOpenLoopResult spring_open_loop(const ExperimentConfig& cfg);

struct SpringControlResult {
  infer::FitResult fit;
  control::LqrSolution basic_gain, lfm_gain;
  control::TrajectoryRecord basic, lfm;
};

SpringControlResult spring_control(const ExperimentConfig& cfg);

// Heat scenario.
model::HeatConfig heat_config(const ExperimentConfig& cfg);
// Modal projection of the moving Gaussian source at time t.
Vector heat_source_modes(const ExperimentConfig& cfg, const model::HeatConfig& heat, double t);

struct HeatControlResult {
  std::vector<double> times;
  std::vector<double> max_basic, max_lfm, max_uncontrolled;
  control::TrajectoryRecord basic, lfm, uncontrolled;
  Matrix field_basis;  // field-grid evaluation of the modes
  std::vector<std::array<double, 2>> field_points;
};

HeatControlResult heat_control(const ExperimentConfig& cfg, bool with_uncontrolled = true);

struct KernelRow {
  double tau, exact, state_space, error;
};
std::vector<KernelRow> kernel_table(const ExperimentConfig& cfg);

model::AugmentedLfm certify_model(const ExperimentConfig& cfg);

// Runs the configured experiment and writes its outputs into cfg.out_dir.
// Any output written before a failure is removed again.
std::vector<std::filesystem::path> run_experiment(const ExperimentConfig& cfg);

}  // namespace lfm::app
