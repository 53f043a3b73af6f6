#pragma once

#include <string>

#include "lfm/numlin.hpp"

namespace lfm::gpss {

using numlin::Matrix;

enum class CovarianceKind { SquaredExponential, MaternHalf, Matern32, Matern52 };

std::string to_string(CovarianceKind kind);
// Accepts "se", "matern12", "matern32", "matern52" and the enum spellings.
CovarianceKind parse_kind(const std::string& text);

// Numerator and denominator degree of the rational approximation of exp(-x)
// used for the squared-exponential spectral density.
struct PadeOrder {
  int numerator = 4;
  int denominator = 8;
};

struct CovarianceSpec {
  CovarianceKind kind = CovarianceKind::SquaredExponential;
  double sigma = 1.0;  // amplitude
  double ell = 1.0;    // length-scale, seconds
  PadeOrder se_order{};

  void validate() const;
};

// dz = F z dt + L dw, u = H z, E[dw dw^T] = q dt, stationary covariance Pinf.
struct LtiGpRealization {
  Matrix F;
  Matrix noise_gain;  // s x 1
  double spectral_density = 1.0;
  Matrix H;  // 1 x s
  Matrix Pinf;

  Eigen::Index dim() const { return F.rows(); }
  // Throws InvariantError if any realization invariant fails.
  void validate(double variance_tolerance = 1e-9) const;
};

LtiGpRealization realize(const CovarianceSpec& spec);

// H expm(F |tau|) Pinf H^T.
double kernel_value(const LtiGpRealization& r, double tau);

// Closed-form covariance of the target kernel (SE: sigma^2 exp(-tau^2/ell^2)).
double covariance_exact(const CovarianceSpec& spec, double tau);

}  // namespace lfm::gpss
