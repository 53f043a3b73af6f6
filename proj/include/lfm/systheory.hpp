#pragma once

#include <complex>
#include <utility>
#include <vector>

#include "lfm/model.hpp"
#include "lfm/numlin.hpp"

namespace lfm::systheory {

using numlin::Matrix;
using Complex = std::complex<double>;

// [C; CA; ...; CA^{depth-1}], depth defaults to the state dimension.
Matrix observability_matrix(const Matrix& a, const Matrix& c, int depth = -1);
// [M, AM, ..., A^{depth-1} M].
Matrix controllability_matrix(const Matrix& a, const Matrix& m, int depth = -1);

int observability_rank(const Matrix& a, const Matrix& c, double rel_tol = 1e-9);
int controllability_rank(const Matrix& a, const Matrix& m, double rel_tol = 1e-9);
// rank [Cout M, Cout A M, ..., Cout A^{N-1} M].
int output_controllability_rank(const Matrix& a, const Matrix& m, const Matrix& cout,
                                double rel_tol = 1e-9);

struct NonControllabilityWitness {
  int rank = 0;        // controllability rank of (A, M)
  Eigen::Index n_f = 0;  // bound the rank may not exceed
  bool latent_rows_zero = false;
};

// Throws InvariantError if the latent rows of the controllability matrix are
// not exactly zero or the rank exceeds n_f.
NonControllabilityWitness assert_not_controllable(const model::AugmentedLfm& aug,
                                                  double rel_tol = 1e-9);

struct PbhVerdict {
  bool holds = true;
  std::vector<Complex> tested;
  std::vector<std::pair<Complex, int>> failing;  // eigenvalue, rank achieved
};

PbhVerdict pbh_stabilizability(const Matrix& a, const Matrix& m, double rel_tol = 1e-9);
PbhVerdict pbh_detectability(const Matrix& a, const Matrix& c, double rel_tol = 1e-9);

struct SamplingVerdict {
  bool critical = false;
  std::vector<Complex> eigenvalues;
  std::vector<std::pair<Complex, Complex>> offending;
};

// Critical iff two distinct eigenvalues share a real part and their imaginary
// parts differ by a nonzero multiple of 2 pi / dt (both within 1e-9).
SamplingVerdict critical_sampling_check(const Matrix& a, double dt);

struct RankWitness {
  bool verdict = false;
  int rank = 0;
  int required = 0;
};

struct CertificationReport {
  double rank_tolerance = 1e-9;
  double sampling_dt = 0.0;
  RankWitness observable;
  RankWitness physical_observable;
  RankWitness controllable;
  RankWitness physical_controllable;
  RankWitness output_controllable;  // w.r.t. the physical block
  NonControllabilityWitness non_controllability;
  PbhVerdict stabilizable;
  PbhVerdict detectable;
  SamplingVerdict sampling;
  RankWitness discrete_observable;  // rank of the observability matrix of expm(A dt)
};

CertificationReport certify(const model::AugmentedLfm& aug, double dt, double rel_tol = 1e-9);

}  // namespace lfm::systheory
