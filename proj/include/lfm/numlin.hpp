#pragma once

#include <complex>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace lfm::numlin {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;

// Throws ArgumentError if any entry is NaN or Inf.
void require_finite(const Matrix& a, std::string_view what);
void require_square(const Matrix& a, std::string_view what);

// Square matrix that is symmetric and positive semidefinite up to
//   max|P_ij - P_ji| <= 1e-10 (1 + max|P_ij|)
//   min eig >= -1e-9 * max |eig|
class SymmetricPsdMatrix {
 public:
  // Validates both invariants on `m` as given.
  static SymmetricPsdMatrix from(Matrix m);
  // Symmetrizes first, then checks semidefiniteness.
  static SymmetricPsdMatrix symmetrized(const Matrix& m);

  const Matrix& matrix() const { return value_; }
  operator const Matrix&() const { return value_; }
  Eigen::Index rows() const { return value_.rows(); }

 private:
  explicit SymmetricPsdMatrix(Matrix m) : value_(std::move(m)) {}
  Matrix value_;
};

bool is_symmetric(const Matrix& m, double rel_tol = 1e-10);
bool is_psd(const Matrix& m, double rel_tol = 1e-9);

// Matrix exponential by scaling and squaring with a diagonal [8/8] Pade
// approximant; the scaled 1-norm is at most 0.5.
Matrix expm(const Matrix& a);

struct Discretization {
  Matrix transition;           // e^{A dt}
  SymmetricPsdMatrix noise_cov;  // int_0^dt e^{As} L q L^T e^{A^T s} ds
};

// Exact discretization of dx = A x dt + L dw, E[dw dw^T] = q dt, using one
// exponential of [[A, L q L^T], [0, -A^T]] dt.
Discretization van_loan_discretize(const Matrix& a, const Matrix& l, const Matrix& q, double dt);

// Solves F P + P F^T + Q = 0 for Hurwitz F.
SymmetricPsdMatrix solve_lyapunov(const Matrix& f, const Matrix& q);

// Solves A X - X B = C via complex Schur forms of A and B.
Matrix solve_sylvester(const Matrix& a, const Matrix& b, const Matrix& c);

struct CareOptions {
  double ode_tolerance = 1e-6;      // on ||dP/dt||_F / (1 + ||P||_F) before polishing
  double handoff_tolerance = 1e-3;  // earlier handoff once A - G P is Hurwitz
  long max_ode_steps = 5'000'000;
  double residual_tolerance = 1e-8;  // relative to 1 + ||Xg||_F
  int max_newton_steps = 60;
};

// Stabilizing solution of -A^T P - P A + P M Uinv M^T P - Xg = 0.
SymmetricPsdMatrix solve_care(const Matrix& a, const Matrix& m, const Matrix& uinv,
                              const Matrix& xg, const CareOptions& opts = {});

// Residual -A^T P - P A + P G P - Xg with G = M Uinv M^T.
Matrix care_residual(const Matrix& a, const Matrix& m, const Matrix& uinv, const Matrix& xg,
                     const Matrix& p);

// Singular values above rel_tol * sigma_max; zero for the zero matrix.
int numerical_rank(const Matrix& a, double rel_tol = 1e-9);
int numerical_rank(const ComplexMatrix& a, double rel_tol = 1e-9);

std::vector<std::complex<double>> eigenvalues(const Matrix& a);
double spectral_abscissa(const Matrix& a);
bool is_hurwitz(const Matrix& a, double margin = 1e-12);

struct PbhOutcome {
  bool passed = true;
  std::vector<std::complex<double>> tested;             // eigenvalues with Re >= -1e-12
  std::vector<std::pair<std::complex<double>, int>> failing;  // eigenvalue, achieved rank
};

// PBH rank test at every eigenvalue of A with Re >= -1e-12. With
// `stack_columns` the test matrix is [A - lambda I, B] (stabilizability),
// otherwise [A - lambda I; B] (detectability).
PbhOutcome pbh_test(const Matrix& a, const Matrix& b, bool stack_columns, double rel_tol = 1e-9);

Matrix block_diagonal(const std::vector<Matrix>& blocks);

}  // namespace lfm::numlin
