#include "lfm/gpss.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include <Eigen/Eigenvalues>

#include "lfm/errors.hpp"

namespace lfm::gpss {

using numlin::Vector;
using Complex = std::complex<double>;

std::string to_string(CovarianceKind kind) {
  switch (kind) {
    case CovarianceKind::SquaredExponential: return "se";
    case CovarianceKind::MaternHalf: return "matern12";
    case CovarianceKind::Matern32: return "matern32";
    case CovarianceKind::Matern52: return "matern52";
  }
  return "unknown";
}

CovarianceKind parse_kind(const std::string& text) {
  std::string t;
  for (char ch : text) {
    if (ch != '-' && ch != '_' && ch != ' ') t.push_back(char(std::tolower(ch)));
  }
  if (t == "se" || t == "squaredexponential" || t == "rbf") return CovarianceKind::SquaredExponential;
  if (t == "matern12" || t == "maternhalf" || t == "exponential") return CovarianceKind::MaternHalf;
  if (t == "matern32") return CovarianceKind::Matern32;
  if (t == "matern52") return CovarianceKind::Matern52;
  throw ArgumentError("unknown covariance kind '" + text + "'");
}

void CovarianceSpec::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ArgumentError("CovarianceSpec: sigma must be positive");
  if (!(ell > 0.0) || !std::isfinite(ell)) throw ArgumentError("CovarianceSpec: ell must be positive");
  if (kind == CovarianceKind::SquaredExponential) {
    if (se_order.numerator < 0 || se_order.denominator <= se_order.numerator) {
      throw ArgumentError("CovarianceSpec: SE order needs denominator degree > numerator degree >= 0");
    }
  }
}

void LtiGpRealization::validate(double variance_tolerance) const {
  const auto s = F.rows();
  if (F.cols() != s || noise_gain.rows() != s || noise_gain.cols() != 1 || H.rows() != 1 ||
      H.cols() != s || Pinf.rows() != s || Pinf.cols() != s) {
    throw InvariantError("LtiGpRealization: inconsistent dimensions");
  }
  if (!numlin::is_hurwitz(F, 1e-12)) throw InvariantError("LtiGpRealization: F is not Hurwitz");
  const Matrix res = F * Pinf + Pinf * F.transpose() +
                     noise_gain * spectral_density * noise_gain.transpose();
  if (res.norm() > variance_tolerance * (1.0 + spectral_density) * std::max(1.0, Pinf.norm())) {
    throw InvariantError("LtiGpRealization: Lyapunov residual too large");
  }
}

namespace {

LtiGpRealization finish(Matrix f, Matrix h, double q, double gain = 1.0) {
  LtiGpRealization r;
  const auto s = f.rows();
  r.noise_gain = Matrix::Zero(s, 1);
  r.noise_gain(s - 1, 0) = gain;
  r.F = std::move(f);
  r.H = std::move(h);
  r.spectral_density = q;
  r.Pinf = numlin::solve_lyapunov(r.F, r.noise_gain * q * r.noise_gain.transpose()).matrix();
  return r;
}

// Parlett-Reinsch balancing with radix 2: overwrites f with D^-1 f D and
// returns the diagonal of D.
Vector balance(Matrix& f) {
  const Eigen::Index n = f.rows();
  Vector d = Vector::Ones(n);
  constexpr double radix = 2.0, radix2 = radix * radix;
  bool converged = false;
  while (!converged) {
    converged = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      double c = f.col(i).cwiseAbs().sum() - std::abs(f(i, i));
      double r = f.row(i).cwiseAbs().sum() - std::abs(f(i, i));
      if (c == 0.0 || r == 0.0) continue;
      const double total = c + r;
      double scale = 1.0;
      while (c < r / radix) {
        c *= radix2;
        scale *= radix;
      }
      while (c >= r * radix) {
        c /= radix2;
        scale /= radix;
      }
      if ((c + r) / scale < 0.95 * total) {
        converged = false;
        d(i) *= scale;
        f.row(i) /= scale;
        f.col(i) *= scale;
      }
    }
  }
  return d;
}

// Companion matrix with last row -a_0 ... -a_{n-1} for monic a.
Matrix companion(const std::vector<double>& monic_low_to_high) {
  const int n = int(monic_low_to_high.size()) - 1;
  Matrix f = Matrix::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) f(i, i + 1) = 1.0;
  for (int j = 0; j < n; ++j) f(n - 1, j) = -monic_low_to_high[j];
  return f;
}

std::vector<Complex> polynomial_roots(const std::vector<double>& low_to_high) {
  const int deg = int(low_to_high.size()) - 1;
  if (deg < 1) return {};
  const double lead = low_to_high.back();
  Matrix c = Matrix::Zero(deg, deg);
  for (int i = 0; i + 1 < deg; ++i) c(i + 1, i) = 1.0;
  for (int i = 0; i < deg; ++i) c(i, deg - 1) = -low_to_high[i] / lead;
  Eigen::EigenSolver<Matrix> es(c, false);
  std::vector<Complex> roots(es.eigenvalues().data(), es.eigenvalues().data() + deg);
  // Newton polish against the original polynomial.
  for (auto& z : roots) {
    for (int it = 0; it < 3; ++it) {
      Complex p = 0.0, dp = 0.0;
      for (int k = deg; k >= 0; --k) {
        dp = dp * z + p;
        p = p * z + low_to_high[k];
      }
      if (std::abs(dp) == 0.0) break;
      z -= p / dp;
    }
  }
  return roots;
}

// Monic real polynomial (low to high) with the given roots.
std::vector<double> from_roots(const std::vector<Complex>& roots) {
  std::vector<Complex> c{1.0};
  for (const auto& r : roots) {
    std::vector<Complex> next(c.size() + 1, 0.0);
    for (size_t k = 0; k < c.size(); ++k) {
      next[k + 1] += c[k];
      next[k] -= r * c[k];
    }
    c = std::move(next);
  }
  std::vector<double> out(c.size());
  for (size_t k = 0; k < c.size(); ++k) out[k] = c[k].real();
  return out;
}

// Roots in s of P(-ell^2 s^2 / 4) with Re(s) < 0, for P given in x.
std::vector<Complex> stable_factor_roots(const std::vector<double>& poly_in_x, double ell,
                                         const char* which) {
  const double scale = ell * ell / 4.0;
  std::vector<Complex> out;
  for (const auto& x : polynomial_roots(poly_in_x)) {
    // x = scale * omega^2 and s^2 = -omega^2
    Complex s = std::sqrt(-x / scale);
    if (s.real() > 0.0) s = -s;
    if (s.real() >= -1e-12) {
      std::ostringstream os;
      os << "realize: " << which << " root " << s << " is not strictly stable";
      throw FactorizationError(os.str());
    }
    out.push_back(s);
  }
  return out;
}

double factorial(int n) {
  double f = 1.0;
  for (int k = 2; k <= n; ++k) f *= k;
  return f;
}

LtiGpRealization realize_se(const CovarianceSpec& spec) {
  const int l = spec.se_order.numerator, m = spec.se_order.denominator;
  // Pade approximant of exp(z): P(z)/Q(z); exp(-x) = P(-x)/Q(-x).
  std::vector<double> num(l + 1), den(m + 1);
  for (int k = 0; k <= l; ++k) {
    const double pk = factorial(l + m - k) * factorial(l) /
                      (factorial(l + m) * factorial(k) * factorial(l - k));
    num[k] = (k % 2 ? -pk : pk);
  }
  for (int k = 0; k <= m; ++k) {
    den[k] = factorial(l + m - k) * factorial(m) /
             (factorial(l + m) * factorial(k) * factorial(m - k));
  }
  const auto poles = stable_factor_roots(den, spec.ell, "denominator");
  const auto zeros = stable_factor_roots(num, spec.ell, "numerator");
  const auto a = from_roots(poles);
  const auto b = from_roots(zeros);

  Matrix h = Matrix::Zero(1, m);
  for (size_t k = 0; k < b.size(); ++k) h(0, Eigen::Index(k)) = b[k];

  // Companion entries span many decades for short length-scales; a diagonal
  // change of state basis brings row and column norms together.
  Matrix f = companion(a);
  const Vector d = balance(f);
  h = h * d.asDiagonal();
  // Unit-intensity realization first, then scale q to hit sigma^2.
  auto r = finish(std::move(f), std::move(h), 1.0, 1.0 / d(m - 1));
  const double variance = (r.H * r.Pinf * r.H.transpose())(0, 0);
  const double q = spec.sigma * spec.sigma / variance;
  r.spectral_density = q;
  r.Pinf *= q;
  return r;
}

}  // namespace

LtiGpRealization realize(const CovarianceSpec& spec) {
  spec.validate();
  const double s2 = spec.sigma * spec.sigma;
  switch (spec.kind) {
    case CovarianceKind::MaternHalf: {
      const double lam = 1.0 / spec.ell;
      return finish(Matrix::Constant(1, 1, -lam), Matrix::Ones(1, 1), 2.0 * s2 * lam);
    }
    case CovarianceKind::Matern32: {
      const double lam = std::sqrt(3.0) / spec.ell;
      Matrix h = Matrix::Zero(1, 2);
      h(0, 0) = 1.0;
      return finish(companion({lam * lam, 2.0 * lam, 1.0}), std::move(h),
                    4.0 * lam * lam * lam * s2);
    }
    case CovarianceKind::Matern52: {
      const double lam = std::sqrt(5.0) / spec.ell;
      Matrix h = Matrix::Zero(1, 3);
      h(0, 0) = 1.0;
      return finish(companion({lam * lam * lam, 3.0 * lam * lam, 3.0 * lam, 1.0}), std::move(h),
                    16.0 / 3.0 * std::pow(lam, 5) * s2);
    }
    case CovarianceKind::SquaredExponential:
      return realize_se(spec);
  }
  throw ArgumentError("realize: unsupported kind");
}

double kernel_value(const LtiGpRealization& r, double tau) {
  const Matrix e = numlin::expm(r.F * std::abs(tau));
  return (r.H * e * r.Pinf * r.H.transpose())(0, 0);
}

double covariance_exact(const CovarianceSpec& spec, double tau) {
  const double s2 = spec.sigma * spec.sigma;
  const double r = std::abs(tau) / spec.ell;
  switch (spec.kind) {
    case CovarianceKind::MaternHalf: return s2 * std::exp(-r);
    case CovarianceKind::Matern32: {
      const double a = std::sqrt(3.0) * r;
      return s2 * (1.0 + a) * std::exp(-a);
    }
    case CovarianceKind::Matern52: {
      const double a = std::sqrt(5.0) * r;
      return s2 * (1.0 + a + a * a / 3.0) * std::exp(-a);
    }
    case CovarianceKind::SquaredExponential: return s2 * std::exp(-r * r);
  }
  return 0.0;
}

}  // namespace lfm::gpss
