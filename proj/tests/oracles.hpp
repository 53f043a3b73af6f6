#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the solvers under test.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

namespace lfm::testing {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline VectorXd vec(const MatrixXd& m) { return Eigen::Map<const VectorXd>(m.data(), m.size()); }

inline MatrixXd unvec(const VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const MatrixXd>(v.data(), rows, cols);
}

// F P + P F^T + Q = 0 as (I (x) F + F (x) I) vec(P) = -vec(Q).
inline MatrixXd lyapunov_by_kron(const MatrixXd& f, const MatrixXd& q) {
  const auto n = f.rows();
  const MatrixXd id = MatrixXd::Identity(n, n);
  const MatrixXd op = Eigen::kroneckerProduct(id, f).eval() + Eigen::kroneckerProduct(f, id).eval();
  return unvec(op.fullPivLu().solve(-vec(q)), n, n);
}

// A X - X B = C as (I (x) A - B^T (x) I) vec(X) = vec(C).
inline MatrixXd sylvester_by_kron(const MatrixXd& a, const MatrixXd& b, const MatrixXd& c) {
  const MatrixXd ia = MatrixXd::Identity(b.rows(), b.rows());
  const MatrixXd ib = MatrixXd::Identity(a.rows(), a.rows());
  const MatrixXd op = Eigen::kroneckerProduct(ia, a).eval() -
                      Eigen::kroneckerProduct(b.transpose(), ib).eval();
  return unvec(op.fullPivLu().solve(vec(c)), a.rows(), b.rows());
}

inline MatrixXd reference_expm(const MatrixXd& a) { return a.exp(); }

// Composite Simpson rule for int_0^dt e^{As} L q L^T e^{A^T s} ds.
inline MatrixXd van_loan_by_simpson(const MatrixXd& a, const MatrixXd& l, const MatrixXd& q, double dt,
                                    int intervals = 400) {
  if (intervals % 2) ++intervals;
  const double h = dt / intervals;
  const MatrixXd lql = l * q * l.transpose();
  const MatrixXd step = reference_expm(a * h);
  MatrixXd e = MatrixXd::Identity(a.rows(), a.cols());
  MatrixXd sum = MatrixXd::Zero(a.rows(), a.cols());
  for (int i = 0; i <= intervals; ++i) {
    const double w = (i == 0 || i == intervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    sum += w * e * lql * e.transpose();
    e = step * e;
  }
  return sum * h / 3.0;
}

// Composite Simpson rule for a scalar integrand.
inline double simpson(const std::function<double(double)>& g, double a, double b, int intervals) {
  if (intervals % 2) ++intervals;
  const double h = (b - a) / intervals;
  double sum = g(a) + g(b);
  for (int i = 1; i < intervals; ++i) sum += (i % 2 ? 4.0 : 2.0) * g(a + i * h);
  return sum * h / 3.0;
}

struct BatchPosterior {
  VectorXd mean;
  VectorXd var;
  double log_marginal = 0.0;
};

// Closed-form GP regression at the training inputs with iid noise variance r.
inline BatchPosterior batch_gp(const std::function<double(double)>& kernel, const std::vector<double>& t,
                               const VectorXd& y, double r) {
  const auto n = Eigen::Index(t.size());
  MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) k(i, j) = kernel(t[size_t(i)] - t[size_t(j)]);
  const MatrixXd ky = k + r * MatrixXd::Identity(n, n);
  const Eigen::LLT<MatrixXd> llt(ky);
  BatchPosterior out;
  const VectorXd alpha = llt.solve(y);
  out.mean = k * alpha;
  out.var = (k - k * llt.solve(k)).diagonal();
  const MatrixXd lower = llt.matrixL();
  out.log_marginal = -0.5 * y.dot(alpha) - lower.diagonal().array().log().sum() -
                     0.5 * double(n) * std::log(2.0 * M_PI);
  return out;
}

inline double matern_closed_form(int twice_nu, double sigma, double ell, double tau) {
  const double r = std::abs(tau);
  const double s2 = sigma * sigma;
  switch (twice_nu) {
    case 1: return s2 * std::exp(-r / ell);
    case 3: {
      const double a = std::sqrt(3.0) * r / ell;
      return s2 * (1.0 + a) * std::exp(-a);
    }
    default: {
      const double a = std::sqrt(5.0) * r / ell;
      return s2 * (1.0 + a + a * a / 3.0) * std::exp(-a);
    }
  }
}

class Random {
 public:
  explicit Random(std::uint64_t seed) : gen_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen_); }

  MatrixXd matrix(Eigen::Index rows, Eigen::Index cols) {
    MatrixXd m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
    return m;
  }

  // Random matrix shifted so every eigenvalue has real part <= -margin.
  MatrixXd stable(Eigen::Index n, double margin = 0.5) {
    MatrixXd m = matrix(n, n);
    const double abscissa = m.eigenvalues().real().maxCoeff();
    return m - (abscissa + margin) * MatrixXd::Identity(n, n);
  }

  MatrixXd spd(Eigen::Index n) {
    const MatrixXd g = matrix(n, n);
    return g * g.transpose() + 0.1 * MatrixXd::Identity(n, n);
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

inline double max_abs_diff(const MatrixXd& a, const MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

}  // namespace lfm::testing
