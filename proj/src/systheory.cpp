#include "lfm/systheory.hpp"

#include <cmath>
#include <numbers>

#include "lfm/errors.hpp"

namespace lfm::systheory {

Matrix observability_matrix(const Matrix& a, const Matrix& c, int depth) {
  numlin::require_square(a, "observability_matrix");
  if (c.cols() != a.rows()) throw ArgumentError("observability_matrix: C columns != state dim");
  const auto n = a.rows(), p = c.rows();
  if (depth < 0) depth = int(n);
  Matrix out(p * depth, n);
  Matrix block = c;
  for (int k = 0; k < depth; ++k) {
    out.middleRows(k * p, p) = block;
    block = block * a;
  }
  return out;
}

Matrix controllability_matrix(const Matrix& a, const Matrix& m, int depth) {
  numlin::require_square(a, "controllability_matrix");
  if (m.rows() != a.rows()) throw ArgumentError("controllability_matrix: M rows != state dim");
  const auto n = a.rows(), k = m.cols();
  if (depth < 0) depth = int(n);
  Matrix out(n, k * depth);
  Matrix block = m;
  for (int i = 0; i < depth; ++i) {
    out.middleCols(i * k, k) = block;
    block = a * block;
  }
  return out;
}

int observability_rank(const Matrix& a, const Matrix& c, double rel_tol) {
  return numlin::numerical_rank(observability_matrix(a, c), rel_tol);
}

int controllability_rank(const Matrix& a, const Matrix& m, double rel_tol) {
  return numlin::numerical_rank(controllability_matrix(a, m), rel_tol);
}

int output_controllability_rank(const Matrix& a, const Matrix& m, const Matrix& cout,
                                double rel_tol) {
  if (cout.cols() != a.rows()) throw ArgumentError("output_controllability_rank: Cout columns != state dim");
  return numlin::numerical_rank(Matrix(cout * controllability_matrix(a, m)), rel_tol);
}

NonControllabilityWitness assert_not_controllable(const model::AugmentedLfm& aug, double rel_tol) {
  if (aug.n_u < 1) throw ArgumentError("assert_not_controllable: model has no latent states");
  const Matrix ctrb = controllability_matrix(aug.A, aug.M);
  NonControllabilityWitness w;
  w.n_f = aug.n_f;
  w.latent_rows_zero = (ctrb.bottomRows(aug.n_u).array() == 0.0).all();
  w.rank = numlin::numerical_rank(ctrb, rel_tol);
  if (!w.latent_rows_zero) {
    throw InvariantError("assert_not_controllable: latent rows of the controllability matrix are nonzero");
  }
  if (w.rank > aug.n_f) {
    throw InvariantError("assert_not_controllable: controllability rank exceeds physical dimension");
  }
  return w;
}

namespace {

PbhVerdict to_verdict(const numlin::PbhOutcome& o) {
  return {o.passed, o.tested, o.failing};
}

}  // namespace

PbhVerdict pbh_stabilizability(const Matrix& a, const Matrix& m, double rel_tol) {
  return to_verdict(numlin::pbh_test(a, m, true, rel_tol));
}

PbhVerdict pbh_detectability(const Matrix& a, const Matrix& c, double rel_tol) {
  return to_verdict(numlin::pbh_test(a, c, false, rel_tol));
}

SamplingVerdict critical_sampling_check(const Matrix& a, double dt) {
  if (!(dt > 0.0)) throw ArgumentError("critical_sampling_check: dt must be positive");
  SamplingVerdict v;
  v.eigenvalues = numlin::eigenvalues(a);
  const double period = 2.0 * std::numbers::pi / dt;
  const auto& ev = v.eigenvalues;
  for (size_t i = 0; i < ev.size(); ++i) {
    for (size_t j = i + 1; j < ev.size(); ++j) {
      if (std::abs(ev[i].real() - ev[j].real()) > 1e-9) continue;
      const double gap = ev[i].imag() - ev[j].imag();
      const double k = std::round(gap / period);
      if (k != 0.0 && std::abs(gap - k * period) <= 1e-9) {
        v.critical = true;
        v.offending.emplace_back(ev[i], ev[j]);
      }
    }
  }
  return v;
}

CertificationReport certify(const model::AugmentedLfm& aug, double dt, double rel_tol) {
  CertificationReport r;
  r.rank_tolerance = rel_tol;
  r.sampling_dt = dt;
  const int n = int(aug.dim()), nf = int(aug.n_f);
  const Matrix af = aug.Af(), mf = aug.Mf();
  const Matrix cf = aug.C.leftCols(aug.n_f);

  r.observable.rank = observability_rank(aug.A, aug.C, rel_tol);
  r.observable.required = n;
  r.observable.verdict = r.observable.rank == n;

  r.physical_observable.rank = observability_rank(af, cf, rel_tol);
  r.physical_observable.required = nf;
  r.physical_observable.verdict = r.physical_observable.rank == nf;

  r.controllable.rank = controllability_rank(aug.A, aug.M, rel_tol);
  r.controllable.required = n;
  r.controllable.verdict = r.controllable.rank == n;

  r.physical_controllable.rank = controllability_rank(af, mf, rel_tol);
  r.physical_controllable.required = nf;
  r.physical_controllable.verdict = r.physical_controllable.rank == nf;

  Matrix selector = Matrix::Zero(aug.n_f, aug.dim());
  selector.leftCols(aug.n_f).setIdentity();
  r.output_controllable.rank = output_controllability_rank(aug.A, aug.M, selector, rel_tol);
  r.output_controllable.required = nf;
  r.output_controllable.verdict = r.output_controllable.rank == nf;

  if (aug.n_u > 0) r.non_controllability = assert_not_controllable(aug, rel_tol);
  r.stabilizable = pbh_stabilizability(aug.A, aug.M, rel_tol);
  r.detectable = pbh_detectability(aug.A, aug.C, rel_tol);
  r.sampling = critical_sampling_check(aug.A, dt);

  const Matrix ad = numlin::expm(aug.A * dt);
  r.discrete_observable.rank = observability_rank(ad, aug.C, rel_tol);
  r.discrete_observable.required = n;
  r.discrete_observable.verdict = r.discrete_observable.rank == n;
  return r;
}

}  // namespace lfm::systheory
