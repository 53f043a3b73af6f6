#include "lfm/infer.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "lfm/errors.hpp"

namespace lfm::infer {

void MeasurementModel::validate() const {
  if (R.rows() != C.rows() || R.cols() != C.rows()) {
    throw ArgumentError("MeasurementModel: R must be d x d with d = rows(C)");
  }
  if (!numlin::is_symmetric(R) || !numlin::is_psd(R) || (R.diagonal().array() <= 0.0).any()) {
    throw ArgumentError("MeasurementModel: R must be symmetric PSD with positive diagonal");
  }
}

void GaussianBelief::validate() const {
  if (cov.rows() != mean.size() || cov.cols() != mean.size()) {
    throw InvariantError("GaussianBelief: dimension mismatch");
  }
  if (!numlin::is_symmetric(cov) || !numlin::is_psd(cov)) {
    throw InvariantError("GaussianBelief: covariance is not symmetric PSD");
  }
}

void TimeSeriesData::validate() const {
  if (observations.size() != times.size()) {
    throw ArgumentError("TimeSeriesData: times and observations differ in length");
  }
  if (!controls.empty() && controls.size() != times.size()) {
    throw ArgumentError("TimeSeriesData: controls must be empty or one per time");
  }
  for (size_t k = 1; k < times.size(); ++k) {
    if (!(times[k] > times[k - 1])) throw ArgumentError("TimeSeriesData: times must be strictly increasing");
  }
}

namespace {

Eigen::SparseMatrix<double> to_sparse(const Matrix& m) {
  return m.sparseView(0.0, 0.0);
}

void discretize_block(const Matrix& a, const Matrix& b, const Matrix& q, const Matrix& m, double dt,
                      Matrix& ad, Matrix& qd, Matrix& md) {
  auto vl = numlin::van_loan_discretize(a, b, q, dt);
  ad = std::move(vl.transition);
  qd = vl.noise_cov.matrix();
  const auto n = a.rows(), k = m.cols();
  Matrix block = Matrix::Zero(n + k, n + k);
  block.topLeftCorner(n, n) = a;
  block.topRightCorner(n, k) = m;
  md = numlin::expm(block * dt).topRightCorner(n, k);
}

}  // namespace

DiscreteModel discretize(const model::AugmentedLfm& aug, double dt) {
  if (!(dt > 0.0)) throw ArgumentError("discretize: dt must be positive");
  DiscreteModel dm;
  dm.dt = dt;
  const auto n = aug.dim();
  if (!aug.block_structure) {
    discretize_block(aug.A, aug.B, aug.noise_density, aug.M, dt, dm.Ad, dm.Qd, dm.Md);
    return dm;
  }
  dm.Ad = Matrix::Zero(n, n);
  dm.Qd = Matrix::Zero(n, n);
  dm.Md = Matrix::Zero(n, aug.M.cols());
  for (const auto& idx : *aug.block_structure) {
    const auto nb = Eigen::Index(idx.size());
    Matrix a(nb, nb), b(nb, aug.B.cols()), m(nb, aug.M.cols());
    for (Eigen::Index i = 0; i < nb; ++i) {
      for (Eigen::Index j = 0; j < nb; ++j) a(i, j) = aug.A(idx[i], idx[j]);
      b.row(i) = aug.B.row(idx[i]);
      m.row(i) = aug.M.row(idx[i]);
    }
    Matrix ad, qd, md;
    discretize_block(a, b, aug.noise_density, m, dt, ad, qd, md);
    for (Eigen::Index i = 0; i < nb; ++i) {
      for (Eigen::Index j = 0; j < nb; ++j) {
        dm.Ad(idx[i], idx[j]) = ad(i, j);
        dm.Qd(idx[i], idx[j]) = qd(i, j);
      }
      dm.Md.row(idx[i]) = md.row(i);
    }
  }
  dm.Ad_sparse = to_sparse(dm.Ad);
  return dm;
}

std::shared_ptr<const DiscreteModel> DiscretizationCache::get(double dt) {
  const long long key = std::llround(dt * 1e9);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  auto dm = std::make_shared<const DiscreteModel>(discretize(aug_, dt));
  cache_.emplace(key, dm);
  return dm;
}

GaussianBelief predict(const GaussianBelief& b, const DiscreteModel& dm, const Vector* control) {
  GaussianBelief out;
  if (dm.Ad_sparse) {
    const auto& ad = *dm.Ad_sparse;
    out.mean = ad * b.mean;
    const Matrix tmp = ad * b.cov;                               // Ad P
    out.cov = Matrix(ad * Matrix(tmp.transpose())).transpose();  // (Ad (Ad P)^T)^T
  } else {
    out.mean = dm.Ad * b.mean;
    out.cov = dm.Ad * b.cov * dm.Ad.transpose();
  }
  if (control && control->size() > 0) out.mean += dm.Md * (*control);
  out.cov += dm.Qd;
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

UpdateResult update(const GaussianBelief& b, const MeasurementModel& meas, const Vector& y) {
  const Matrix& c = meas.C;
  const Matrix cp = c * b.cov;  // d x N
  Matrix s = cp * c.transpose() + meas.R;
  s = 0.5 * (s + s.transpose());
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) {
    throw ConditioningError("update: innovation covariance is not positive definite");
  }
  const Vector v = y - c * b.mean;
  const Matrix k = llt.solve(cp).transpose();  // P C^T S^{-1}

  UpdateResult r;
  r.belief.mean = b.mean + k * v;
  // Joseph form (I - K C) P (I - K C)^T + K R K^T, without forming I - K C.
  const Matrix left = b.cov - k * cp;
  Matrix cov = left - (left * c.transpose()) * k.transpose() + k * meas.R * k.transpose();
  r.belief.cov = 0.5 * (cov + cov.transpose());

  const Vector alpha = llt.solve(v);
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  r.loglik = -0.5 * (v.dot(alpha) + logdet + double(y.size()) * std::log(2.0 * std::numbers::pi));
  return r;
}

StepResult kf_step(const GaussianBelief& b, const DiscreteModel& dm, const Vector* control,
                   const MeasurementModel& meas, const std::optional<Vector>& y) {
  StepResult r;
  r.predicted = predict(b, dm, control);
  if (y) {
    auto u = update(r.predicted, meas, *y);
    r.filtered = std::move(u.belief);
    r.loglik = u.loglik;
  } else {
    r.filtered = r.predicted;
  }
  return r;
}

FilterRun run_filter(const model::AugmentedLfm& aug, const MeasurementModel& meas,
                     const TimeSeriesData& data, const GaussianBelief& prior, bool keep_history) {
  data.validate();
  if (meas.C.cols() != aug.dim()) throw ArgumentError("run_filter: measurement matrix has wrong width");
  FilterRun run;
  if (data.size() == 0) return run;
  DiscretizationCache cache(aug);

  GaussianBelief current = prior;
  if (data.observations[0]) {
    auto u = update(current, meas, *data.observations[0]);
    run.loglik += u.loglik;
    if (keep_history) run.predicted.push_back(current);
    current = std::move(u.belief);
  } else if (keep_history) {
    run.predicted.push_back(current);
  }
  if (keep_history) run.filtered.push_back(current);

  for (size_t k = 1; k < data.size(); ++k) {
    auto dm = cache.get(data.times[k] - data.times[k - 1]);
    const Vector* control = data.controls.empty() ? nullptr : &data.controls[k - 1];
    auto step = kf_step(current, *dm, control, meas, data.observations[k]);
    run.loglik += step.loglik;
    current = std::move(step.filtered);
    if (keep_history) {
      run.transitions.push_back(dm);
      run.predicted.push_back(std::move(step.predicted));
      run.filtered.push_back(current);
    }
  }
  if (!keep_history) run.filtered.push_back(std::move(current));
  return run;
}

std::vector<GaussianBelief> rts_smooth(const std::vector<GaussianBelief>& filtered,
                                       const std::vector<GaussianBelief>& predicted,
                                       const std::vector<const Matrix*>& transitions) {
  const size_t n = filtered.size();
  if (predicted.size() != n || (n > 0 && transitions.size() != n - 1)) {
    throw ArgumentError("rts_smooth: sequences are not aligned");
  }
  std::vector<GaussianBelief> out(filtered);
  if (n < 2) return out;
  for (size_t k = n - 1; k-- > 0;) {
    const Matrix& ad = *transitions[k];
    const GaussianBelief& pred = predicted[k + 1];
    Eigen::LDLT<Matrix> ldlt(pred.cov);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        (ldlt.vectorD().array() <= 0.0).any()) {
      throw ConditioningError("rts_smooth: predicted covariance is singular");
    }
    // G = P_f Ad^T P_pred^{-1}
    const Matrix gain = ldlt.solve(ad * filtered[k].cov).transpose();
    out[k].mean = filtered[k].mean + gain * (out[k + 1].mean - pred.mean);
    Matrix cov = filtered[k].cov + gain * (out[k + 1].cov - pred.cov) * gain.transpose();
    out[k].cov = 0.5 * (cov + cov.transpose());
  }
  return out;
}

std::vector<GaussianBelief> rts_smooth(const FilterRun& run) {
  std::vector<const Matrix*> ads;
  ads.reserve(run.transitions.size());
  for (const auto& t : run.transitions) ads.push_back(&t->Ad);
  return rts_smooth(run.filtered, run.predicted, ads);
}

GaussianBelief stationary_prior(const model::AugmentedLfm& aug,
                                const std::vector<gpss::LtiGpRealization>& forces,
                                double physical_prior_var) {
  GaussianBelief b;
  b.mean = Vector::Zero(aug.dim());
  std::vector<Matrix> blocks;
  blocks.push_back(physical_prior_var * Matrix::Identity(aug.n_f, aug.n_f));
  for (const auto& f : forces) blocks.push_back(f.Pinf);
  b.cov = numlin::block_diagonal(blocks);
  return b;
}

MeasurementModel lift_measurement(const model::AugmentedLfm& aug, const MeasurementModel& meas) {
  if (meas.C.cols() == aug.dim()) return meas;
  if (meas.C.cols() == aug.n_f) {
    MeasurementModel out{Matrix::Zero(meas.C.rows(), aug.dim()), meas.R};
    out.C.leftCols(aug.n_f) = meas.C;
    return out;
  }
  std::ostringstream os;
  os << "lift_measurement: C has " << meas.C.cols() << " columns, expected " << aug.n_f << " or "
     << aug.dim();
  throw ArgumentError(os.str());
}

double log_marginal_likelihood(const TimeSeriesData& data, const gpss::CovarianceSpec& spec,
                               const model::LtiPhysicalSystem& phys, const MeasurementModel& meas) {
  if (data.size() == 0) return 0.0;
  meas.validate();
  const auto forces = model::replicate_force(phys, spec);
  const auto aug = model::augment(phys, forces);
  const auto lifted = lift_measurement(aug, meas);
  return run_filter(aug, lifted, data, stationary_prior(aug, forces), false).loglik;
}

}  // namespace lfm::infer
