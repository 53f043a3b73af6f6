#include <cmath>
#include <random>
#include <sstream>

#include "lfm/control.hpp"
#include "lfm/errors.hpp"

namespace lfm::control {

TruthSimulator::TruthSimulator(const model::LtiPhysicalSystem& phys, ScenarioTruth truth, double sim_dt,
                               double t0)
    : truth_(std::move(truth)), sim_dt_(sim_dt), t0_(t0), time_(t0) {
  phys.validate();
  if (!(sim_dt > 0.0)) throw ArgumentError("TruthSimulator: sim_dt must be positive");
  if (!truth_.force) throw ArgumentError("TruthSimulator: missing force function");
  const auto n = phys.state_dim(), p = phys.force_channels(), m = phys.control_dim();
  if (truth_.initial_state.size() != n) throw ArgumentError("TruthSimulator: initial state has wrong size");
  // Exact ZOH for force and control held over one step.
  Matrix block = Matrix::Zero(n + p + m, n + p + m);
  block.topLeftCorner(n, n) = phys.Af;
  block.block(0, n, n, p) = phys.Bf;
  block.block(0, n + p, n, m) = phys.Mf;
  const Matrix e = numlin::expm(block * sim_dt);
  transition_ = e.topLeftCorner(n, n);
  force_gain_ = e.block(0, n, n, p);
  control_gain_ = e.block(0, n + p, n, m);
  state_ = truth_.initial_state;
}

void TruthSimulator::step(const Vector& control) {
  const Vector u = truth_.force(time_);
  state_ = transition_ * state_ + force_gain_ * u + control_gain_ * control;
  ++steps_;
  time_ = t0_ + double(steps_) * sim_dt_;
}

infer::TimeSeriesData TrajectoryRecord::as_data() const {
  infer::TimeSeriesData d;
  d.times = times;
  d.observations = measurements;
  d.controls = control;
  return d;
}

TrajectoryRecord closed_loop_simulate(const model::LtiPhysicalSystem& truth_phys,
                                      const ScenarioTruth& truth, const model::AugmentedLfm& model,
                                      const infer::GaussianBelief& prior, const LqrSolution* gain,
                                      const infer::MeasurementModel& meas,
                                      const SimulationSchedule& schedule) {
  const auto& s = schedule;
  if (!(s.meas_dt > 0.0) || !(s.sim_dt > 0.0) || !(s.horizon > s.t_start)) {
    throw ArgumentError("closed_loop_simulate: invalid schedule");
  }
  if (!(s.noise_std >= 0.0)) throw ArgumentError("closed_loop_simulate: noise std must be non-negative");
  const long substeps = std::lround(s.meas_dt / s.sim_dt);
  if (substeps < 1 || std::abs(double(substeps) * s.sim_dt - s.meas_dt) > 1e-9 * s.meas_dt) {
    throw ArgumentError("closed_loop_simulate: meas_dt must be an integer multiple of sim_dt");
  }
  meas.validate();
  const auto nf = model.n_f, nu = model.n_u, m = model.M.cols();
  if (meas.C.cols() != model.dim() || meas.C.rows() != truth_phys.Cf.rows() ||
      truth_phys.state_dim() != nf || truth_phys.control_dim() != m) {
    throw ArgumentError("closed_loop_simulate: truth, model and measurement dimensions disagree");
  }
  if (gain && gain->gain.cols() != model.dim()) {
    throw ArgumentError("closed_loop_simulate: gain width differs from the model state");
  }
  if (s.tracked_state < 0 || s.tracked_state >= nf) {
    throw ArgumentError("closed_loop_simulate: tracked state out of range");
  }
  prior.validate();

  TruthSimulator sim(truth_phys, truth, s.sim_dt, s.t_start);
  infer::DiscretizationCache cache(model);
  const auto dm = cache.get(s.meas_dt);
  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const long count = long(std::floor((s.horizon - s.t_start) / s.meas_dt + 1e-9)) + 1;
  const Matrix& cu = model.Cu;

  TrajectoryRecord rec;
  infer::GaussianBelief belief = prior;
  Vector c = Vector::Zero(m);
  double tracked_sum = 0.0;
  long tracked_count = 0;
  for (long k = 0; k < count; ++k) {
    // Snapped so grid times print as short decimals.
    const double t = std::round((s.t_start + double(k) * s.meas_dt) * 1e9) / 1e9;
    // Noise is drawn at every sample so the stream does not depend on the window.
    Vector y = truth_phys.Cf * sim.state();
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += s.noise_std * normal(rng);
    std::optional<Vector> obs;
    if (t <= s.meas_end + 1e-9) obs = y;

    if (k == 0) {
      if (obs) belief = infer::update(belief, meas, *obs).belief;
    } else {
      belief = infer::kf_step(belief, *dm, &c, meas, obs).filtered;
    }

    if (gain && t >= s.control_on - 1e-9) {
      c = -(gain->gain_at(t) * belief.mean);
    } else {
      c.setZero();
    }

    rec.times.push_back(t);
    rec.f_true.push_back(sim.state());
    rec.f_est.push_back(belief.mean.head(nf));
    rec.f_var.push_back(belief.cov.diagonal().head(nf));
    rec.u_true.push_back(sim.force_now());
    rec.u_est.push_back(cu * belief.mean.tail(nu));
    const Matrix cp = cu * belief.cov.bottomRightCorner(nu, nu);
    rec.u_var.push_back(cp.cwiseProduct(cu).rowwise().sum());
    rec.control.push_back(c);
    rec.measurements.push_back(std::move(obs));
    if (t >= s.control_on - 1e-9) {
      tracked_sum += std::abs(sim.state()(s.tracked_state));
      ++tracked_count;
      if (k + 1 < count) rec.control_energy += c.squaredNorm() * s.meas_dt;
    }

    if (k + 1 < count) {
      for (long j = 0; j < substeps; ++j) sim.step(c);
      if (!sim.state().allFinite()) {
        std::ostringstream os;
        os << "closed_loop_simulate: state diverged near t = " << t;
        throw IntegrationError(os.str());
      }
    }
  }
  rec.tracking_error = tracked_count > 0 ? tracked_sum / double(tracked_count) : 0.0;
  return rec;
}

}  // namespace lfm::control
