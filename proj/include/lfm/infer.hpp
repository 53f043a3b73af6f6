#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Sparse>

#include "lfm/gpss.hpp"
#include "lfm/model.hpp"
#include "lfm/numlin.hpp"

namespace lfm::infer {

using numlin::Matrix;
using numlin::Vector;

struct MeasurementModel {
  Matrix C;  // d x N
  Matrix R;  // d x d
  void validate() const;
};

struct GaussianBelief {
  Vector mean;
  Matrix cov;
  // Throws InvariantError unless cov is symmetric PSD and sized like mean.
  void validate() const;
};

// observations[k] may be empty (missing); controls[k] is held on (t_k, t_{k+1}].
struct TimeSeriesData {
  std::vector<double> times;
  std::vector<std::optional<Vector>> observations;
  std::vector<Vector> controls;  // empty, or one per time

  std::size_t size() const { return times.size(); }
  void validate() const;
};

struct DiscreteModel {
  double dt = 0.0;
  Matrix Ad;
  Matrix Qd;
  Matrix Md;
  // Present when the model is block-decoupled; used for cheaper prediction.
  std::optional<Eigen::SparseMatrix<double>> Ad_sparse;
};

// Ad = e^{A dt}, Qd by Van Loan, Md = int_0^dt e^{As} ds M.
DiscreteModel discretize(const model::AugmentedLfm& aug, double dt);

// Caches discretizations by step length (nanosecond resolution).
class DiscretizationCache {
 public:
  explicit DiscretizationCache(const model::AugmentedLfm& aug) : aug_(aug) {}
  std::shared_ptr<const DiscreteModel> get(double dt);

 private:
  model::AugmentedLfm aug_;
  std::map<long long, std::shared_ptr<const DiscreteModel>> cache_;
};

GaussianBelief predict(const GaussianBelief& b, const DiscreteModel& dm, const Vector* control);

struct UpdateResult {
  GaussianBelief belief;
  double loglik = 0.0;
};

// Joseph-form measurement update; loglik = log N(v; 0, S).
UpdateResult update(const GaussianBelief& b, const MeasurementModel& meas, const Vector& y);

struct StepResult {
  GaussianBelief predicted;
  GaussianBelief filtered;
  double loglik = 0.0;
};

StepResult kf_step(const GaussianBelief& b, const DiscreteModel& dm, const Vector* control,
                   const MeasurementModel& meas, const std::optional<Vector>& y);

struct FilterRun {
  std::vector<GaussianBelief> predicted;  // predicted[0] is the prior
  std::vector<GaussianBelief> filtered;
  std::vector<std::shared_ptr<const DiscreteModel>> transitions;  // k -> k+1
  double loglik = 0.0;
};

// The prior is the belief at times[0]; no prediction precedes the first update.
FilterRun run_filter(const model::AugmentedLfm& aug, const MeasurementModel& meas,
                     const TimeSeriesData& data, const GaussianBelief& prior,
                     bool keep_history = true);

std::vector<GaussianBelief> rts_smooth(const std::vector<GaussianBelief>& filtered,
                                       const std::vector<GaussianBelief>& predicted,
                                       const std::vector<const Matrix*>& transitions);
std::vector<GaussianBelief> rts_smooth(const FilterRun& run);

// Zero mean, blockdiag(physical_prior_var * I, Pinf_1, ..., Pinf_p).
GaussianBelief stationary_prior(const model::AugmentedLfm& aug,
                                const std::vector<gpss::LtiGpRealization>& forces,
                                double physical_prior_var = 100.0);

// Measurement matrices with n_f columns are padded with zeros over the
// latent block; matrices with N columns are used as given.
MeasurementModel lift_measurement(const model::AugmentedLfm& aug, const MeasurementModel& meas);

double log_marginal_likelihood(const TimeSeriesData& data, const gpss::CovarianceSpec& spec,
                               const model::LtiPhysicalSystem& phys, const MeasurementModel& meas);

struct FitOptions {
  int max_iterations = 400;
  double simplex_tolerance = 1e-4;  // diameter in log space
};

struct FitResult {
  gpss::CovarianceSpec spec;
  double loglik = 0.0;
  int iterations = 0;
  int evaluations = 0;
  std::vector<gpss::CovarianceSpec> starts;
  std::vector<double> start_logliks;
};

FitResult fit_hyperparameters(const TimeSeriesData& data, const gpss::CovarianceSpec& spec_template,
                              const model::LtiPhysicalSystem& phys, const MeasurementModel& meas,
                              const FitOptions& opts = {});

}  // namespace lfm::infer
