#include "lfm/numlin.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "lfm/errors.hpp"

namespace lfm::numlin {

void require_finite(const Matrix& a, std::string_view what) {
  if (!a.allFinite()) {
    throw ArgumentError(std::string(what) + ": non-finite entry");
  }
}

void require_square(const Matrix& a, std::string_view what) {
  if (a.rows() != a.cols()) {
    std::ostringstream os;
    os << what << ": expected square matrix, got " << a.rows() << "x" << a.cols();
    throw ArgumentError(os.str());
  }
}

bool is_symmetric(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  if (m.size() == 0) return true;
  const double scale = m.cwiseAbs().maxCoeff();
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * (1.0 + scale);
}

bool is_psd(const Matrix& m, double rel_tol) {
  if (m.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double big = ev.cwiseAbs().maxCoeff();
  return ev.minCoeff() >= -rel_tol * big;
}

SymmetricPsdMatrix SymmetricPsdMatrix::from(Matrix m) {
  require_square(m, "SymmetricPsdMatrix");
  require_finite(m, "SymmetricPsdMatrix");
  if (!is_symmetric(m)) throw InvariantError("SymmetricPsdMatrix: matrix is not symmetric");
  if (!is_psd(m)) throw InvariantError("SymmetricPsdMatrix: matrix is not positive semidefinite");
  return SymmetricPsdMatrix(std::move(m));
}

SymmetricPsdMatrix SymmetricPsdMatrix::symmetrized(const Matrix& m) {
  require_square(m, "SymmetricPsdMatrix");
  Matrix s = 0.5 * (m + m.transpose());
  return from(std::move(s));
}

Matrix expm(const Matrix& a) {
  require_square(a, "expm");
  require_finite(a, "expm");
  const Eigen::Index n = a.rows();
  if (n == 0) return a;

  // [8/8] Pade coefficients c_k = (2q-k)! q! / ((2q)! k! (q-k)!)
  constexpr int q = 8;
  double c[q + 1];
  c[0] = 1.0;
  for (int k = 1; k <= q; ++k) {
    c[k] = c[k - 1] * double(q - k + 1) / double(k * (2 * q - k + 1));
  }

  const double norm = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm > 0.5) squarings = std::max(0, int(std::ceil(std::log2(norm / 0.5))));
  const Matrix x = a / std::ldexp(1.0, squarings);

  const Matrix ident = Matrix::Identity(n, n);
  Matrix even = c[0] * ident;
  Matrix odd = Matrix::Zero(n, n);
  Matrix power = ident;
  for (int k = 1; k <= q; ++k) {
    power = power * x;
    if (k % 2 == 0)
      even += c[k] * power;
    else
      odd += c[k] * power;
  }
  // N = even + odd, D = even - odd
  Matrix result = (even - odd).partialPivLu().solve(even + odd);
  for (int i = 0; i < squarings; ++i) result = result * result;
  if (!result.allFinite()) throw ArgumentError("expm: overflow");
  return result;
}

Discretization van_loan_discretize(const Matrix& a, const Matrix& l, const Matrix& q, double dt) {
  require_square(a, "van_loan_discretize(A)");
  require_square(q, "van_loan_discretize(q)");
  if (!(dt > 0.0)) throw ArgumentError("van_loan_discretize: dt must be positive");
  if (l.rows() != a.rows() || l.cols() != q.rows()) {
    throw ArgumentError("van_loan_discretize: dimension mismatch between A, L and q");
  }
  const Eigen::Index n = a.rows();
  Matrix block = Matrix::Zero(2 * n, 2 * n);
  block.topLeftCorner(n, n) = a;
  block.topRightCorner(n, n) = l * q * l.transpose();
  block.bottomRightCorner(n, n) = -a.transpose();
  const Matrix e = expm(block * dt);
  Matrix ad = e.topLeftCorner(n, n);
  Matrix qd = e.topRightCorner(n, n) * ad.transpose();
  return {std::move(ad), SymmetricPsdMatrix::symmetrized(qd)};
}

namespace {

// Upper-triangular solve of (T - shift I) y = rhs.
void back_substitute(const Eigen::MatrixXcd& t, std::complex<double> shift,
                     Eigen::VectorXcd& rhs) {
  const Eigen::Index n = t.rows();
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    std::complex<double> acc = rhs(i);
    for (Eigen::Index k = i + 1; k < n; ++k) acc -= t(i, k) * rhs(k);
    rhs(i) = acc / (t(i, i) - shift);
  }
}

}  // namespace

Matrix solve_sylvester(const Matrix& a, const Matrix& b, const Matrix& c) {
  require_square(a, "solve_sylvester(A)");
  require_square(b, "solve_sylvester(B)");
  require_finite(a, "solve_sylvester(A)");
  require_finite(b, "solve_sylvester(B)");
  require_finite(c, "solve_sylvester(C)");
  if (c.rows() != a.rows() || c.cols() != b.rows()) {
    throw ArgumentError("solve_sylvester: C must be rows(A) x rows(B)");
  }
  const Eigen::Index n = a.rows(), m = b.rows();
  if (n == 0 || m == 0) return Matrix::Zero(n, m);

  Eigen::ComplexSchur<Matrix> sa(a), sb(b);
  const Eigen::MatrixXcd& t = sa.matrixT();
  const Eigen::MatrixXcd& u = sa.matrixU();
  const Eigen::MatrixXcd& s = sb.matrixT();
  const Eigen::MatrixXcd& v = sb.matrixU();

  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto lambda = t(i, i), mu = s(j, j);
      const double tol = 1e-10 * std::max({1.0, std::abs(lambda), std::abs(mu)});
      if (std::abs(lambda - mu) <= tol) {
        std::ostringstream os;
        os << "solve_sylvester: spectra overlap, eigenvalue " << lambda << " of A collides with "
           << mu << " of B";
        throw SingularityError(os.str());
      }
    }
  }

  const Eigen::MatrixXcd d = u.adjoint() * c.cast<std::complex<double>>() * v;
  Eigen::MatrixXcd y(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::VectorXcd rhs = d.col(j);
    for (Eigen::Index k = 0; k < j; ++k) rhs += s(k, j) * y.col(k);
    back_substitute(t, s(j, j), rhs);
    y.col(j) = rhs;
  }
  return (u * y * v.adjoint()).real();
}

SymmetricPsdMatrix solve_lyapunov(const Matrix& f, const Matrix& q) {
  require_square(f, "solve_lyapunov(F)");
  require_square(q, "solve_lyapunov(Q)");
  if (q.rows() != f.rows()) throw ArgumentError("solve_lyapunov: F and Q differ in size");
  if (!is_hurwitz(f, 1e-12)) {
    std::ostringstream os;
    os << "solve_lyapunov: F is not Hurwitz (spectral abscissa " << spectral_abscissa(f) << ")";
    throw StabilityError(os.str());
  }
  const Matrix p = solve_sylvester(f, -f.transpose(), -q);
  return SymmetricPsdMatrix::symmetrized(p);
}

std::vector<std::complex<double>> eigenvalues(const Matrix& a) {
  require_square(a, "eigenvalues");
  if (a.rows() == 0) return {};
  Eigen::EigenSolver<Matrix> es(a, false);
  const auto& ev = es.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

double spectral_abscissa(const Matrix& a) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& l : eigenvalues(a)) best = std::max(best, l.real());
  return best;
}

bool is_hurwitz(const Matrix& a, double margin) {
  return a.rows() == 0 || spectral_abscissa(a) < -margin;
}

namespace {

double spectral_radius(const Matrix& a) {
  double r = 0.0;
  for (const auto& l : eigenvalues(a)) r = std::max(r, std::abs(l));
  return r;
}

Matrix riccati_rhs(const Matrix& a, const Matrix& g, const Matrix& xg, const Matrix& p) {
  // Reverse-time form of the backward Riccati ODE.
  Matrix ap = a.transpose() * p;
  return ap + ap.transpose() - p * g * p + xg;
}

}  // namespace

Matrix care_residual(const Matrix& a, const Matrix& m, const Matrix& uinv, const Matrix& xg,
                     const Matrix& p) {
  const Matrix g = m * uinv * m.transpose();
  return -a.transpose() * p - p * a + p * g * p - xg;
}

SymmetricPsdMatrix solve_care(const Matrix& a, const Matrix& m, const Matrix& uinv,
                              const Matrix& xg, const CareOptions& opts) {
  require_square(a, "solve_care(A)");
  require_square(uinv, "solve_care(Uinv)");
  require_square(xg, "solve_care(Xg)");
  if (m.rows() != a.rows() || m.cols() != uinv.rows() || xg.rows() != a.rows()) {
    throw ArgumentError("solve_care: dimension mismatch");
  }
  require_finite(a, "solve_care(A)");
  require_finite(m, "solve_care(M)");
  if (!is_symmetric(uinv) || (uinv.rows() > 0 && uinv.llt().info() != Eigen::Success)) {
    throw ArgumentError("solve_care: Uinv must be symmetric positive definite");
  }
  const Matrix xsym = SymmetricPsdMatrix::from(xg).matrix();
  const Eigen::Index n = a.rows();
  if (n == 0) return SymmetricPsdMatrix::from(Matrix::Zero(0, 0));

  const auto pbh = pbh_test(a, m, true);
  if (!pbh.passed) {
    std::ostringstream os;
    os << "solve_care: (A, M) is not stabilizable; uncontrollable eigenvalue "
       << pbh.failing.front().first;
    throw StabilizabilityError(os.str());
  }

  const Matrix g = m * uinv * m.transpose();
  const double rho_a = spectral_radius(a);

  // Stage 1: integrate the Riccati ODE from P = Xg until it settles.
  Matrix p = xsym;
  double rate = riccati_rhs(a, g, xsym, p).norm();
  double h = 0.01;
  long step = 0;
  // Relative to ||P||: badly scaled realizations never reach an absolute bound.
  auto settled = [&] { return rate <= opts.ode_tolerance * (1.0 + p.norm()); };
  while (!settled()) {
    if (step % 50 == 0) {
      const double stiff = rho_a + (g * p).norm();
      h = stiff > 0.0 ? std::min(0.01, 0.1 / stiff) : 0.01;
      // Newton-Kleinman converges from any stabilizing guess.
      if (step > 0 && rate <= opts.handoff_tolerance * (1.0 + p.norm()) && is_hurwitz(a - g * p)) break;
    }
    if (++step > opts.max_ode_steps) {
      throw ConvergenceError("solve_care: Riccati ODE did not settle", rate);
    }
    const Matrix k1 = riccati_rhs(a, g, xsym, p);
    const Matrix k2 = riccati_rhs(a, g, xsym, p + 0.5 * h * k1);
    const Matrix k3 = riccati_rhs(a, g, xsym, p + 0.5 * h * k2);
    const Matrix k4 = riccati_rhs(a, g, xsym, p + h * k3);
    p += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    p = 0.5 * (p + p.transpose());
    if (!p.allFinite()) throw ConvergenceError("solve_care: Riccati ODE diverged", INFINITY);
    rate = riccati_rhs(a, g, xsym, p).norm();
  }

  // Stage 2: Newton-Kleinman polishing.
  const double target = opts.residual_tolerance * (1.0 + xsym.norm());
  double residual = care_residual(a, m, uinv, xsym, p).norm();
  for (int it = 0; it < opts.max_newton_steps && residual > target; ++it) {
    const Matrix closed = a - g * p;
    if (!is_hurwitz(closed)) {
      throw ConvergenceError("solve_care: iterate is not stabilizing", residual);
    }
    Matrix next = solve_lyapunov(closed.transpose(), p * g * p + xsym).matrix();
    const double next_residual = care_residual(a, m, uinv, xsym, next).norm();
    p = std::move(next);
    if (next_residual >= residual && residual < 1e3 * target) {
      residual = next_residual;
      break;  // stagnated at rounding level
    }
    residual = next_residual;
  }
  if (residual > target) {
    throw ConvergenceError("solve_care: residual above tolerance", residual);
  }
  if (!is_hurwitz(a - g * p)) {
    throw ConvergenceError("solve_care: solution is not stabilizing", residual);
  }
  return SymmetricPsdMatrix::symmetrized(p);
}

int numerical_rank(const Matrix& a, double rel_tol) {
  if (a.size() == 0) return 0;
  Vector sv;
  if (std::min(a.rows(), a.cols()) <= 64) {
    sv = Eigen::JacobiSVD<Matrix>(a).singularValues();
  } else {
    sv = Eigen::BDCSVD<Matrix>(a).singularValues();
  }
  const double top = sv.size() ? sv(0) : 0.0;
  if (top == 0.0) return 0;
  return int((sv.array() > rel_tol * top).count());
}

int numerical_rank(const ComplexMatrix& a, double rel_tol) {
  if (a.size() == 0) return 0;
  const Vector sv = Eigen::JacobiSVD<ComplexMatrix>(a).singularValues();
  const double top = sv(0);
  if (top == 0.0) return 0;
  return int((sv.array() > rel_tol * top).count());
}

PbhOutcome pbh_test(const Matrix& a, const Matrix& b, bool stack_columns, double rel_tol) {
  require_square(a, "pbh_test");
  const Eigen::Index n = a.rows();
  if (stack_columns ? b.rows() != n : b.cols() != n) {
    throw ArgumentError("pbh_test: dimension mismatch");
  }
  PbhOutcome out;
  const ComplexMatrix ac = a.cast<std::complex<double>>();
  const ComplexMatrix bc = b.cast<std::complex<double>>();
  for (const auto& lambda : eigenvalues(a)) {
    if (lambda.real() < -1e-12) continue;
    out.tested.push_back(lambda);
    const ComplexMatrix shifted = ac - lambda * ComplexMatrix::Identity(n, n);
    ComplexMatrix test;
    if (stack_columns) {
      test.resize(n, n + b.cols());
      test << shifted, bc;
    } else {
      test.resize(n + b.rows(), n);
      test << shifted, bc;
    }
    const int r = numerical_rank(test, rel_tol);
    if (r < n) {
      out.passed = false;
      out.failing.emplace_back(lambda, r);
    }
  }
  return out;
}

Matrix block_diagonal(const std::vector<Matrix>& blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

}  // namespace lfm::numlin
