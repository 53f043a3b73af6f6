#include "lfm/experiments.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <sstream>

#include "lfm/errors.hpp"
#include "lfm/timeseries_io.hpp"

#ifndef LFM_VERSION
#define LFM_VERSION "0.0.0"
#endif

namespace lfm::app {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

// Lower bound on the measurement variance so noiseless runs stay well posed.
constexpr double kMinNoiseVariance = 1e-12;

infer::MeasurementModel noise_model(const Matrix& c, double noise_std) {
  const double var = std::max(noise_std * noise_std, kMinNoiseVariance);
  return {c, var * Matrix::Identity(c.rows(), c.rows())};
}

double rmse(const std::vector<double>& t, const std::vector<double>& a, const std::vector<double>& b,
            double lo, double hi, bool open_low = false) {
  double s = 0.0;
  long n = 0;
  for (size_t k = 0; k < t.size(); ++k) {
    const bool inside = (open_low ? t[k] > lo + 1e-9 : t[k] >= lo - 1e-9) && t[k] <= hi + 1e-9;
    if (!inside) continue;
    s += (a[k] - b[k]) * (a[k] - b[k]);
    ++n;
  }
  return n > 0 ? std::sqrt(s / double(n)) : 0.0;
}

infer::TimeSeriesData window(const infer::TimeSeriesData& d, double t_end) {
  infer::TimeSeriesData out;
  for (size_t k = 0; k < d.size() && d.times[k] <= t_end + 1e-9; ++k) {
    out.times.push_back(d.times[k]);
    out.observations.push_back(d.observations[k]);
    if (!d.controls.empty()) out.controls.push_back(d.controls[k]);
  }
  return out;
}

control::SimulationSchedule schedule_from(const ExperimentConfig& cfg) {
  control::SimulationSchedule s;
  s.t_start = 0.0;
  s.horizon = cfg.timing.horizon;
  s.meas_dt = cfg.timing.dt;
  s.sim_dt = cfg.timing.sim_dt;
  s.meas_end = cfg.timing.meas_end;
  s.control_on = cfg.timing.control_on;
  s.noise_std = cfg.timing.noise_std;
  s.seed = cfg.seed;
  return s;
}

struct SpringModel {
  model::AugmentedLfm aug;
  infer::GaussianBelief prior;
  infer::MeasurementModel meas;
};

SpringModel spring_model(const model::LtiPhysicalSystem& phys, const gpss::CovarianceSpec& spec,
                         const infer::MeasurementModel& meas) {
  const auto forces = model::replicate_force(phys, spec);
  SpringModel m;
  m.aug = model::augment(phys, forces);
  m.prior = infer::stationary_prior(m.aug, forces);
  m.meas = infer::lift_measurement(m.aug, meas);
  return m;
}

infer::FitResult fit_or_keep(const ExperimentConfig& cfg, const infer::TimeSeriesData& train,
                             const model::LtiPhysicalSystem& phys, const infer::MeasurementModel& meas) {
  const auto spec = cfg.gp.spec();
  if (cfg.gp.fit) return infer::fit_hyperparameters(train, spec, phys, meas);
  infer::FitResult r;
  r.spec = spec;
  r.loglik = infer::log_marginal_likelihood(train, spec, phys, meas);
  return r;
}

}  // namespace

model::LtiPhysicalSystem spring_system(const ExperimentConfig& cfg) {
  return model::build_spring(cfg.spring.lambda, cfg.spring.gamma);
}

control::ScenarioTruth spring_truth(const ExperimentConfig& cfg) {
  const double scale = cfg.spring.force_scale;
  control::ScenarioTruth t;
  t.force = [scale](double time) {
    Vector u(1);
    u(0) = scale * (std::sin(0.23 * time) + std::sin(0.13 * time));
    return u;
  };
  t.initial_state = Vector(2);
  t.initial_state << cfg.spring.initial_position, cfg.spring.initial_velocity;
  return t;
}

control::CostSpec spring_cost(const ExperimentConfig& cfg) {
  control::CostSpec c;
  c.X = Matrix::Zero(2, 2);
  c.X(0, 0) = cfg.cost.state_weight;
  c.X(1, 1) = cfg.cost.velocity_weight;
  c.U = Matrix::Constant(1, 1, cfg.cost.control_weight);
  c.Phi = Matrix::Zero(2, 2);
  return c;
}

infer::MeasurementModel spring_measurement(const ExperimentConfig& cfg) {
  return noise_model(spring_system(cfg).Cf, cfg.timing.noise_std);
}

SpringOpenLoopResult spring_open_loop(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto phys = spring_system(cfg);
  const auto meas = spring_measurement(cfg);
  auto sched = schedule_from(cfg);
  sched.control_on = cfg.timing.horizon + 1.0;

  const auto sim_model = spring_model(phys, cfg.gp.spec(), meas);
  SpringOpenLoopResult r;
  r.record = control::closed_loop_simulate(phys, spring_truth(cfg), sim_model.aug, sim_model.prior, nullptr,
                                           sim_model.meas, sched);
  const auto data = r.record.as_data();
  r.fit = fit_or_keep(cfg, window(data, cfg.timing.train_end), phys, meas);

  const auto fitted = spring_model(phys, r.fit.spec, meas);
  const auto run = infer::run_filter(fitted.aug, fitted.meas, data, fitted.prior, true);
  r.smoothed = infer::rts_smooth(run);
  r.latent_readout = fitted.aug.Cu;

  std::vector<double> f_true, f_est, u_true, u_est;
  for (size_t k = 0; k < r.record.times.size(); ++k) {
    f_true.push_back(r.record.f_true[k](0));
    u_true.push_back(r.record.u_true[k](0));
    f_est.push_back(r.smoothed[k].mean(0));
    u_est.push_back((fitted.aug.Cu * r.smoothed[k].mean.tail(fitted.aug.n_u))(0));
  }
  const auto& t = r.record.times;
  const double me = cfg.timing.meas_end, h = cfg.timing.horizon;
  r.rmse_u_measured = rmse(t, u_true, u_est, 0.0, me);
  r.rmse_u_extrapolated = rmse(t, u_true, u_est, me, h, true);
  r.rmse_u_interior = rmse(t, u_true, u_est, 10.0, 85.0);
  r.rmse_f_measured = rmse(t, f_true, f_est, 0.0, me);
  r.rmse_f_extrapolated = rmse(t, f_true, f_est, me, h, true);
  return r;
}

SpringControlResult spring_control(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto phys = spring_system(cfg);
  const auto meas = spring_measurement(cfg);
  const auto truth = spring_truth(cfg);
  auto sched = schedule_from(cfg);

  SpringControlResult r;
  // Training phase: the uncontrolled run up to train_end.
  {
    auto train_sched = sched;
    train_sched.horizon = cfg.timing.train_end;
    train_sched.control_on = cfg.timing.horizon + 1.0;
    const auto sim_model = spring_model(phys, cfg.gp.spec(), meas);
    const auto rec = control::closed_loop_simulate(phys, truth, sim_model.aug, sim_model.prior, nullptr,
                                                   sim_model.meas, train_sched);
    r.fit = fit_or_keep(cfg, rec.as_data(), phys, meas);
  }

  const auto fitted = spring_model(phys, r.fit.spec, meas);
  const auto cost = spring_cost(cfg);
  r.lfm_gain = control::solve_stationary(fitted.aug, cost);
  r.basic_gain = control::basic_lqr_gain(phys, cost, fitted.aug.n_u);
  // Both runs replay the same truth and noise stream from t = 0.
  r.basic = control::closed_loop_simulate(phys, truth, fitted.aug, fitted.prior, &r.basic_gain, fitted.meas, sched);
  r.lfm = control::closed_loop_simulate(phys, truth, fitted.aug, fitted.prior, &r.lfm_gain, fitted.meas, sched);
  return r;
}

model::HeatConfig heat_config(const ExperimentConfig& cfg) {
  model::HeatConfig h;
  h.D = cfg.heat.D;
  h.lambda = cfg.heat.lambda;
  h.modes_per_axis = cfg.heat.modes_per_axis;
  h.sensors = model::HeatConfig::uniform_sensor_grid(h.domain, cfg.heat.sensors_per_axis);
  h.space_ell = cfg.heat.space_ell;
  h.validate();
  return h;
}

namespace {

// Simpson weights and nodes on [a, b] with an even number of intervals.
struct Quadrature1d {
  std::vector<double> x, w;
  Quadrature1d(double a, double b, int intervals) {
    const double h = (b - a) / intervals;
    for (int i = 0; i <= intervals; ++i) {
      x.push_back(a + i * h);
      w.push_back(h / 3.0 * (i == 0 || i == intervals ? 1.0 : (i % 2 ? 4.0 : 2.0)));
    }
  }
};

// int exp(-(x - c)^2 / (2 s^2)) sin(j pi (x - a) / L) dx over [a, a + L], j = 1..m.
Vector gaussian_sine_moments(const Quadrature1d& q, double a, double len, double centre, double s, int m) {
  Vector out = Vector::Zero(m);
  for (size_t i = 0; i < q.x.size(); ++i) {
    const double g = q.w[i] * std::exp(-(q.x[i] - centre) * (q.x[i] - centre) / (2.0 * s * s));
    if (g == 0.0) continue;
    for (int j = 1; j <= m; ++j) out(j - 1) += g * std::sin(j * std::numbers::pi * (q.x[i] - a) / len);
  }
  return out;
}

}  // namespace

Vector heat_source_modes(const ExperimentConfig& cfg, const model::HeatConfig& heat, double t) {
  const int m = heat.modes_per_axis;
  Vector u = Vector::Zero(m * m);
  const auto& hs = cfg.heat;
  if (t < 0.0 || t >= hs.source_duration || hs.amplitude == 0.0) return u;
  const double frac = t / hs.source_duration;
  const double px = hs.start_x + frac * (hs.end_x - hs.start_x);
  const double py = hs.start_y + frac * (hs.end_y - hs.start_y);
  const auto& d = heat.domain;
  const double l1 = d.x1 - d.x0, l2 = d.y1 - d.y0;
  // Resolve the footprint with at least 20 nodes per standard deviation.
  const int nx = 2 * int(std::ceil(10.0 * l1 / hs.footprint)), ny = 2 * int(std::ceil(10.0 * l2 / hs.footprint));
  const Vector ix = gaussian_sine_moments(Quadrature1d(d.x0, d.x1, nx), d.x0, l1, px, hs.footprint, m);
  const Vector iy = gaussian_sine_moments(Quadrature1d(d.y0, d.y1, ny), d.y0, l2, py, hs.footprint, m);
  const double scale = hs.amplitude * 2.0 / std::sqrt(l1 * l2);
  for (int j = 0; j < m; ++j)
    for (int k = 0; k < m; ++k) u(j * m + k) = scale * ix(j) * iy(k);
  return u;
}

HeatControlResult heat_control(const ExperimentConfig& cfg, bool with_uncontrolled) {
  cfg.validate();
  const auto heat = heat_config(cfg);
  const auto phys = model::build_heat_fourier(heat);
  const auto forces = model::heat_latent_forces(heat, cfg.gp.spec());
  const auto aug = model::augment(phys, forces);
  const auto prior = infer::stationary_prior(aug, forces, 1.0);
  const auto meas = infer::lift_measurement(aug, noise_model(phys.Cf, cfg.timing.noise_std));

  control::CostSpec cost;
  const auto nf = phys.state_dim();
  cost.X = cfg.cost.state_weight * Matrix::Identity(nf, nf);
  cost.U = cfg.cost.control_weight * Matrix::Identity(nf, nf);
  cost.Phi = Matrix::Zero(nf, nf);
  const auto lfm_gain = control::solve_stationary(aug, cost);
  const auto basic_gain = control::basic_lqr_gain(phys, cost, aug.n_u);

  control::ScenarioTruth truth;
  truth.force = [cfg, heat](double t) { return heat_source_modes(cfg, heat, t); };
  truth.initial_state = Vector::Zero(nf);
  const auto sched = schedule_from(cfg);

  HeatControlResult r;
  r.field_points = model::HeatConfig::uniform_sensor_grid(heat.domain, cfg.heat.field_grid);
  r.field_basis = model::heat_basis_matrix(heat, r.field_points);
  r.basic = control::closed_loop_simulate(phys, truth, aug, prior, &basic_gain, meas, sched);
  r.lfm = control::closed_loop_simulate(phys, truth, aug, prior, &lfm_gain, meas, sched);
  if (with_uncontrolled) {
    r.uncontrolled = control::closed_loop_simulate(phys, truth, aug, prior, nullptr, meas, sched);
  }
  r.times = r.lfm.times;
  for (size_t k = 0; k < r.times.size(); ++k) {
    r.max_basic.push_back((r.field_basis * r.basic.f_true[k]).maxCoeff());
    r.max_lfm.push_back((r.field_basis * r.lfm.f_true[k]).maxCoeff());
    if (with_uncontrolled) r.max_uncontrolled.push_back((r.field_basis * r.uncontrolled.f_true[k]).maxCoeff());
  }
  return r;
}

std::vector<KernelRow> kernel_table(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto spec = cfg.gp.spec();
  const auto real = gpss::realize(spec);
  std::vector<KernelRow> rows;
  const double tmax = cfg.kernel.tau_max_ells * spec.ell;
  for (int i = 0; i < cfg.kernel.points; ++i) {
    const double tau = tmax * i / (cfg.kernel.points - 1);
    KernelRow row{tau, gpss::covariance_exact(spec, tau), gpss::kernel_value(real, tau), 0.0};
    row.error = std::abs(row.exact - row.state_space) / (spec.sigma * spec.sigma);
    rows.push_back(row);
  }
  return rows;
}

model::AugmentedLfm certify_model(const ExperimentConfig& cfg) {
  cfg.validate();
  model::LtiPhysicalSystem phys;
  std::vector<gpss::LtiGpRealization> forces;
  if (cfg.certify.system == "spring") {
    phys = spring_system(cfg);
    forces = model::replicate_force(phys, cfg.gp.spec());
  } else {
    const auto heat = heat_config(cfg);
    phys = model::build_heat_fourier(heat);
    forces = model::heat_latent_forces(heat, cfg.gp.spec());
  }
  phys.Bf *= cfg.certify.coupling;
  return model::augment(phys, forces);
}

namespace {

// Tracks files written by a run and deletes them unless the run completes.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;
  ~OutputSet() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& f : files_) fs::remove(f, ec);
  }

  fs::path add(const std::string& name) {
    files_.push_back(dir_ / name);
    return files_.back();
  }
  void commit() { committed_ = true; }
  const std::vector<fs::path>& files() const { return files_; }

 private:
  fs::path dir_;
  std::vector<fs::path> files_;
  bool committed_ = false;
};

void write_json(const fs::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw ArgumentError("write failed for " + path.string());
}

Json fit_json(const infer::FitResult& f) {
  Json j;
  j["kind"] = gpss::to_string(f.spec.kind);
  j["sigma"] = f.spec.sigma;
  j["ell"] = f.spec.ell;
  j["log_likelihood"] = f.loglik;
  j["iterations"] = f.iterations;
  j["evaluations"] = f.evaluations;
  return j;
}

std::optional<double> opt(double v) { return v; }

io::CsvTable trajectory_table(const control::TrajectoryRecord& rec) {
  io::CsvTable t;
  const auto nf = rec.f_true.front().size(), p = rec.u_true.front().size(), m = rec.control.front().size();
  t.header.push_back("t");
  for (Eigen::Index i = 0; i < nf; ++i) t.header.push_back("f_true_" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < nf; ++i) t.header.push_back("f_est_" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < nf; ++i) t.header.push_back("f_var_" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < p; ++i) t.header.push_back("u_true_" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < p; ++i) t.header.push_back("u_est_" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < p; ++i) t.header.push_back("u_var_" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < m; ++i) t.header.push_back("c_" + std::to_string(i + 1));
  for (size_t k = 0; k < rec.times.size(); ++k) {
    std::vector<std::optional<double>> row{rec.times[k]};
    for (const auto* v : {&rec.f_true[k], &rec.f_est[k], &rec.f_var[k], &rec.u_true[k], &rec.u_est[k],
                          &rec.u_var[k], &rec.control[k]}) {
      for (Eigen::Index i = 0; i < v->size(); ++i) row.push_back((*v)(i));
    }
    t.add_row(std::move(row));
  }
  return t;
}

double max_abs(const std::vector<Vector>& vs) {
  double m = 0.0;
  for (const auto& v : vs) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

void run_spring_open_loop(const ExperimentConfig& cfg, OutputSet& out) {
  const auto r = spring_open_loop(cfg);
  io::CsvTable t;
  t.header = {"t", "f_true", "f_est", "f_std", "u_true", "u_est", "u_std", "y"};
  const auto nf = r.record.f_true.front().size();
  for (size_t k = 0; k < r.record.times.size(); ++k) {
    const auto& b = r.smoothed[k];
    const Eigen::Index nu = b.mean.size() - nf;
    const Matrix& cu = r.latent_readout;
    const double u_var = (cu * b.cov.bottomRightCorner(nu, nu) * cu.transpose())(0, 0);
    const auto& y = r.record.measurements[k];
    t.add_row({r.record.times[k], r.record.f_true[k](0), b.mean(0), std::sqrt(std::max(b.cov(0, 0), 0.0)),
               r.record.u_true[k](0), (cu * b.mean.tail(nu))(0), std::sqrt(std::max(u_var, 0.0)),
               y ? opt((*y)(0)) : std::nullopt});
  }
  io::write_csv(out.add("trajectory.csv"), t);

  auto at = [&](double time) {
    size_t best = 0;
    for (size_t k = 0; k < r.record.times.size(); ++k)
      if (std::abs(r.record.times[k] - time) < std::abs(r.record.times[best] - time)) best = k;
    return best;
  };
  const size_t k_end = at(cfg.timing.meas_end), k_h = at(cfg.timing.horizon);
  Json j;
  j["experiment"] = to_string(cfg.kind);
  j["seed"] = cfg.seed;
  j["fit"] = fit_json(r.fit);
  j["rmse"]["u_measured"] = r.rmse_u_measured;
  j["rmse"]["u_extrapolated"] = r.rmse_u_extrapolated;
  j["rmse"]["u_interior_10_85"] = r.rmse_u_interior;
  j["rmse"]["f_measured"] = r.rmse_f_measured;
  j["rmse"]["f_extrapolated"] = r.rmse_f_extrapolated;
  j["reversion"]["u_est_at_meas_end"] = t.rows[k_end][5].value();
  j["reversion"]["u_est_at_horizon"] = t.rows[k_h][5].value();
  j["reversion"]["u_std_at_meas_end"] = t.rows[k_end][6].value();
  j["reversion"]["u_std_at_horizon"] = t.rows[k_h][6].value();
  write_json(out.add("summary.json"), j);
}

Json gain_json(const control::LqrSolution& s) {
  Json j;
  j["gain"] = std::vector<double>(s.gain.data(), s.gain.data() + s.gain.size());
  j["gain_norm"] = s.gain.norm();
  return j;
}

void run_spring_control(const ExperimentConfig& cfg, OutputSet& out) {
  const auto r = spring_control(cfg);
  io::write_csv(out.add("basic_lqr.csv"), trajectory_table(r.basic));
  io::write_csv(out.add("lfm_lqr.csv"), trajectory_table(r.lfm));
  Json j;
  j["experiment"] = to_string(cfg.kind);
  j["seed"] = cfg.seed;
  j["fit"] = fit_json(r.fit);
  j["control_on"] = cfg.timing.control_on;
  j["basic_lqr"] = gain_json(r.basic_gain);
  j["basic_lqr"]["tracking_error"] = r.basic.tracking_error;
  j["basic_lqr"]["control_energy"] = r.basic.control_energy;
  j["basic_lqr"]["max_abs_control"] = max_abs(r.basic.control);
  j["lfm_lqr"] = gain_json(r.lfm_gain);
  j["lfm_lqr"]["tracking_error"] = r.lfm.tracking_error;
  j["lfm_lqr"]["control_energy"] = r.lfm.control_energy;
  j["lfm_lqr"]["max_abs_control"] = max_abs(r.lfm.control);
  j["max_abs_force"] = max_abs(r.lfm.u_true);
  j["error_ratio"] = r.basic.tracking_error > 0.0 ? r.lfm.tracking_error / r.basic.tracking_error : 0.0;
  write_json(out.add("summary.json"), j);
}

void run_heat_control(const ExperimentConfig& cfg, OutputSet& out) {
  const auto r = heat_control(cfg, true);
  io::CsvTable mt;
  mt.header = {"t", "uncontrolled", "basic_lqr", "lfm_lqr"};
  bool ordered = true;
  double worst_gap = -std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < r.times.size(); ++k) {
    mt.add_row({r.times[k], r.max_uncontrolled[k], r.max_basic[k], r.max_lfm[k]});
    if (r.times[k] >= 2.0 - 1e-9) {
      worst_gap = std::max(worst_gap, r.max_lfm[k] - r.max_basic[k]);
      ordered = ordered && r.max_lfm[k] <= r.max_basic[k];
    }
  }
  io::write_csv(out.add("max_temperature.csv"), mt);

  io::CsvTable snap;
  snap.header = {"t", "x", "y", "f_uncontrolled", "f_basic", "f_lfm", "u_true", "u_est_lfm", "c_basic", "c_lfm"};
  Json snaps = Json::array();
  for (double ts : cfg.heat.snapshot_times) {
    size_t k = 0;
    for (size_t i = 0; i < r.times.size(); ++i)
      if (std::abs(r.times[i] - ts) < std::abs(r.times[k] - ts)) k = i;
    const Matrix& phi = r.field_basis;
    const Vector fu = phi * r.uncontrolled.f_true[k], fb = phi * r.basic.f_true[k], fl = phi * r.lfm.f_true[k];
    const Vector ut = phi * r.lfm.u_true[k], ue = phi * r.lfm.u_est[k];
    const Vector cb = phi * r.basic.control[k], cl = phi * r.lfm.control[k];
    for (size_t p = 0; p < r.field_points.size(); ++p) {
      const auto i = Eigen::Index(p);
      snap.add_row({r.times[k], r.field_points[p][0], r.field_points[p][1], fu(i), fb(i), fl(i), ut(i), ue(i),
                    cb(i), cl(i)});
    }
    Json s;
    s["t"] = r.times[k];
    // Orthonormal modes: the L2 inner product is the modal dot product.
    s["lfm_control_dot_estimated_source"] = r.lfm.control[k].dot(r.lfm.u_est[k]);
    s["max_temperature"] = {{"uncontrolled", r.max_uncontrolled[k]}, {"basic_lqr", r.max_basic[k]},
                            {"lfm_lqr", r.max_lfm[k]}};
    snaps.push_back(s);
  }
  io::write_csv(out.add("snapshots.csv"), snap);

  auto peak = [](const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); };
  Json j;
  j["experiment"] = to_string(cfg.kind);
  j["seed"] = cfg.seed;
  j["modes_per_axis"] = cfg.heat.modes_per_axis;
  j["physical_dimension"] = r.lfm.f_true.front().size();
  j["peak_max_temperature"] = {{"uncontrolled", peak(r.max_uncontrolled)}, {"basic_lqr", peak(r.max_basic)},
                               {"lfm_lqr", peak(r.max_lfm)}};
  j["lfm_below_basic_after_2s"] = ordered;
  j["worst_lfm_minus_basic_after_2s"] = worst_gap;
  j["control_energy"] = {{"basic_lqr", r.basic.control_energy}, {"lfm_lqr", r.lfm.control_energy}};
  j["snapshots"] = snaps;
  write_json(out.add("summary.json"), j);
}

void run_kernel_check(const ExperimentConfig& cfg, OutputSet& out) {
  const auto rows = kernel_table(cfg);
  io::CsvTable t;
  t.header = {"tau", "k_exact", "k_statespace", "error"};
  double worst = 0.0;
  for (const auto& r : rows) {
    t.add_row({r.tau, r.exact, r.state_space, r.error});
    worst = std::max(worst, r.error);
  }
  io::write_csv(out.add("kernel.csv"), t);
  const auto spec = cfg.gp.spec();
  const auto real = gpss::realize(spec);
  Json j;
  j["experiment"] = to_string(cfg.kind);
  j["kind"] = gpss::to_string(spec.kind);
  j["sigma"] = spec.sigma;
  j["ell"] = spec.ell;
  j["pade"] = {spec.se_order.numerator, spec.se_order.denominator};
  j["state_dimension"] = real.dim();
  j["max_relative_error"] = worst;
  write_json(out.add("summary.json"), j);
}

Json rank_json(const systheory::RankWitness& w) {
  return {{"verdict", w.verdict}, {"rank", w.rank}, {"required", w.required}};
}

Json pbh_json(const systheory::PbhVerdict& v) {
  Json failing = Json::array();
  for (const auto& [ev, rank] : v.failing) failing.push_back({{"re", ev.real()}, {"im", ev.imag()}, {"rank", rank}});
  return {{"holds", v.holds}, {"eigenvalues_tested", v.tested.size()}, {"failing", failing}};
}

void run_certify(const ExperimentConfig& cfg, OutputSet& out) {
  const auto aug = certify_model(cfg);
  const auto rep = systheory::certify(aug, cfg.timing.dt);
  Json j;
  j["experiment"] = to_string(cfg.kind);
  j["system"] = cfg.certify.system;
  j["coupling"] = cfg.certify.coupling;
  j["n_f"] = aug.n_f;
  j["n_u"] = aug.n_u;
  j["rank_tolerance"] = rep.rank_tolerance;
  j["sampling_dt"] = rep.sampling_dt;
  j["observable"] = rank_json(rep.observable);
  j["physical_observable"] = rank_json(rep.physical_observable);
  j["controllable"] = rank_json(rep.controllable);
  j["physical_controllable"] = rank_json(rep.physical_controllable);
  j["output_controllable"] = rank_json(rep.output_controllable);
  j["non_controllability"] = {{"rank", rep.non_controllability.rank},
                              {"n_f", rep.non_controllability.n_f},
                              {"latent_rows_zero", rep.non_controllability.latent_rows_zero}};
  j["stabilizable"] = pbh_json(rep.stabilizable);
  j["detectable"] = pbh_json(rep.detectable);
  Json offending = Json::array();
  for (const auto& [a, b] : rep.sampling.offending) {
    offending.push_back({{"a_re", a.real()}, {"a_im", a.imag()}, {"b_re", b.real()}, {"b_im", b.imag()}});
  }
  j["critical_sampling"] = {{"critical", rep.sampling.critical}, {"offending", offending}};
  j["discrete_observable"] = rank_json(rep.discrete_observable);
  write_json(out.add("report.json"), j);
}

}  // namespace

std::vector<fs::path> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  OutputSet out(cfg.out_dir);
  switch (cfg.kind) {
    case ExperimentKind::SpringOpenLoop: run_spring_open_loop(cfg, out); break;
    case ExperimentKind::SpringControl: run_spring_control(cfg, out); break;
    case ExperimentKind::HeatControl: run_heat_control(cfg, out); break;
    case ExperimentKind::KernelCheck: run_kernel_check(cfg, out); break;
    case ExperimentKind::Certify: run_certify(cfg, out); break;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::vector<fs::path> written = out.files();

  std::ofstream manifest(out.add("manifest.txt"), std::ios::binary);
  manifest << "experiment = " << to_string(cfg.kind) << "\n"
           << "library_version = " << LFM_VERSION << "\n"
           << "seed = " << cfg.seed << "\n"
           << "wall_time_seconds = " << io::format_double(wall) << "\n"
           << "outputs =";
  for (const auto& f : written) manifest << " " << f.filename().string();
  manifest << "\n\n" << cfg.to_ini();
  manifest.close();
  if (!manifest) throw ArgumentError("write failed for manifest.txt");
  out.commit();
  written.push_back(cfg.out_dir / "manifest.txt");
  return written;
}

}  // namespace lfm::app
