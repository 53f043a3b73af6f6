#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "lfm/infer.hpp"
#include "lfm/model.hpp"
#include "lfm/numlin.hpp"

namespace lfm::control {

using numlin::Matrix;
using numlin::Vector;

// Quadratic cost on the physical state; lifted to X_g, Phi_g internally.
struct CostSpec {
  Matrix X;    // n_f x n_f
  Matrix U;    // m x m, positive definite
  Matrix Phi;  // n_f x n_f terminal penalty
  double horizon = std::numeric_limits<double>::infinity();

  void validate(Eigen::Index n_f, Eigen::Index m) const;
};

enum class GainMode { Stationary, FiniteHorizon };

struct LqrSolution {
  GainMode mode = GainMode::Stationary;
  Eigen::Index n_f = 0;
  Matrix P;     // stationary solution, or P at the first grid point
  Matrix gain;  // m x N, c = -gain * g
  std::vector<double> times;
  std::vector<Matrix> P_trajectory;
  std::vector<Matrix> gain_trajectory;

  Matrix P11() const { return P.topLeftCorner(n_f, n_f); }
  Matrix P12() const { return P.topRightCorner(n_f, P.cols() - n_f); }
  Matrix P22() const { return P.bottomRightCorner(P.rows() - n_f, P.cols() - n_f); }
  // Stationary gain, or the trajectory gain at the last grid point <= t.
  const Matrix& gain_at(double t) const;
};

// RK4 step used for the backward Riccati ODE: min(0.01, 0.1 / ||A||_F).
double riccati_step(const Matrix& a);

LqrSolution solve_finite_horizon(const model::AugmentedLfm& aug, const CostSpec& cost,
                                 const std::vector<double>& grid);
// Integrates the P11, P12, P22 block equations separately.
LqrSolution solve_finite_horizon_partitioned(const model::AugmentedLfm& aug, const CostSpec& cost,
                                             const std::vector<double>& grid);

// With `decouple`, independent sub-blocks of the Riccati equation (for example
// one per heat mode) are solved separately.
LqrSolution solve_stationary(const model::AugmentedLfm& aug, const CostSpec& cost,
                             bool decouple = true);
// Physical ARE plus a Sylvester solve for the cross block P12.
LqrSolution gain_via_sylvester(const model::AugmentedLfm& aug, const CostSpec& cost);
// Physical-only gain embedded as [K_f, 0] over latent_dim extra states.
LqrSolution basic_lqr_gain(const model::LtiPhysicalSystem& phys, const CostSpec& cost,
                           Eigen::Index latent_dim = 0);

// Deterministic truth for simulation: force u(t) per channel, initial state.
struct ScenarioTruth {
  std::function<Vector(double)> force;
  Vector initial_state;
};

struct SimulationSchedule {
  double t_start = 0.0;
  double horizon = 100.0;
  double meas_dt = 0.01;
  double sim_dt = 0.001;
  double meas_end = std::numeric_limits<double>::infinity();  // no measurements after
  double control_on = 0.0;
  double noise_std = 0.01;
  std::uint64_t seed = 1;
  Eigen::Index tracked_state = 0;
};

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<Vector> f_true, f_est, f_var;
  std::vector<Vector> u_true, u_est, u_var;
  std::vector<Vector> control;
  std::vector<std::optional<Vector>> measurements;
  double tracking_error = 0.0;  // mean |f_true[tracked]| over the control window
  double control_energy = 0.0;  // integral of |c|^2 over the control window

  infer::TimeSeriesData as_data() const;
};

// Exact ZOH simulation of the physical system with deterministic force.
class TruthSimulator {
 public:
  TruthSimulator(const model::LtiPhysicalSystem& phys, ScenarioTruth truth, double sim_dt,
                 double t0 = 0.0);

  const Vector& state() const { return state_; }
  double time() const { return time_; }
  Vector force_now() const { return truth_.force(time_); }
  // Advances one sim step holding u(t) and c constant.
  void step(const Vector& control);

 private:
  ScenarioTruth truth_;
  double sim_dt_;
  long steps_ = 0;
  double t0_ = 0.0;
  double time_ = 0.0;
  Vector state_;
  Matrix transition_, force_gain_, control_gain_;
};

// Certainty-equivalence loop: Kalman filter on `model` feeding c = -gain g_hat
// from the first measurement at or after control_on, ZOH between measurements.
// A null gain runs open loop.
TrajectoryRecord closed_loop_simulate(const model::LtiPhysicalSystem& truth_phys,
                                      const ScenarioTruth& truth, const model::AugmentedLfm& model,
                                      const infer::GaussianBelief& prior, const LqrSolution* gain,
                                      const infer::MeasurementModel& meas,
                                      const SimulationSchedule& schedule);

}  // namespace lfm::control
