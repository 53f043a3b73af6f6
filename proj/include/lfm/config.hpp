#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lfm/gpss.hpp"

namespace lfm::app {

enum class ExperimentKind { SpringOpenLoop, SpringControl, HeatControl, KernelCheck, Certify };

std::string to_string(ExperimentKind kind);
ExperimentKind parse_experiment(const std::string& text);

struct SpringSection {
  double lambda = 0.1;
  double gamma = 1.0;
  double force_scale = 1.0;  // multiplies sin(0.23 t) + sin(0.13 t)
  double initial_position = 0.0;
  double initial_velocity = 0.0;
};

struct GpSection {
  gpss::CovarianceKind kind = gpss::CovarianceKind::SquaredExponential;
  double sigma = 1.0;
  double ell = 1.0;
  int pade_numerator = 4;
  int pade_denominator = 8;
  bool fit = true;  // spring runs: estimate sigma, ell on the training window

  gpss::CovarianceSpec spec() const;
};

struct TimingSection {
  double dt = 0.01;       // measurement interval
  double sim_dt = 0.001;  // truth simulation step
  double noise_std = 0.01;
  double train_end = 50.0;
  double meas_end = 90.0;
  double horizon = 100.0;
  double control_on = 50.0;
};

struct CostSection {
  double state_weight = 1.0;     // position (spring) or every mode (heat)
  double velocity_weight = 0.0;  // spring only
  double control_weight = 1.0;
};

struct HeatSection {
  double D = 0.001;
  double lambda = 0.2;
  int modes_per_axis = 10;
  int sensors_per_axis = 10;
  double space_ell = 0.1;
  double amplitude = 5.0;
  double footprint = 0.05;
  double start_x = 0.8, start_y = 0.8;
  double end_x = 0.2, end_y = 0.2;
  double source_duration = 10.0;
  int field_grid = 40;  // cell-centre evaluation grid per axis
  std::vector<double> snapshot_times{6.9};
};

struct KernelSection {
  double tau_max_ells = 3.0;
  int points = 301;
};

struct CertifySection {
  std::string system = "spring";  // spring | heat
  double coupling = 1.0;          // scales Bf; 0 gives the uncoupled variant
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::SpringOpenLoop;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";
  SpringSection spring;
  GpSection gp;
  TimingSection timing;
  CostSection cost;
  HeatSection heat;
  KernelSection kernel;
  CertifySection certify;

  // Throws ArgumentError on inconsistent values.
  void validate() const;
  // Canonical INI text; loading it back gives the same configuration.
  std::string to_ini() const;
};

// Defaults for each experiment; heat runs use their own time scale and prior.
ExperimentConfig default_config(ExperimentKind kind);

// Reads INI text over the defaults of `kind`. Unknown sections or keys are
// rejected.
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentKind kind);
ExperimentConfig parse_config(const std::string& text, ExperimentKind kind);

}  // namespace lfm::app
