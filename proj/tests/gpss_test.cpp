#include "lfm/gpss.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "lfm/errors.hpp"
#include "oracles.hpp"

namespace lfm::gpss {
namespace {

CovarianceSpec make(CovarianceKind kind, double sigma, double ell, PadeOrder order = {}) {
  CovarianceSpec s;
  s.kind = kind;
  s.sigma = sigma;
  s.ell = ell;
  s.se_order = order;
  return s;
}

double max_se_error(const CovarianceSpec& spec, int points = 301) {
  const auto r = realize(spec);
  double worst = 0.0;
  for (int i = 0; i < points; ++i) {
    const double tau = 3.0 * spec.ell * i / (points - 1);
    worst = std::max(worst, std::abs(kernel_value(r, tau) - covariance_exact(spec, tau)));
  }
  return worst / (spec.sigma * spec.sigma);
}

TEST(Realize, MaternHalfClosedForm) {
  const auto r = realize(make(CovarianceKind::MaternHalf, 1.0, 2.0));
  ASSERT_EQ(r.dim(), 1);
  EXPECT_NEAR(r.F(0, 0), -0.5, 1e-15);
  EXPECT_NEAR(r.spectral_density * r.noise_gain(0, 0) * r.noise_gain(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(r.H(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(r.Pinf(0, 0), 1.0, 1e-14);
  EXPECT_NEAR(kernel_value(r, 2.0), std::exp(-1.0), 1e-14);
}

TEST(Realize, Matern32Companion) {
  const auto r = realize(make(CovarianceKind::Matern32, 1.0, 1.0));
  ASSERT_EQ(r.dim(), 2);
  EXPECT_NEAR(r.F(0, 0), 0.0, 0.0);
  EXPECT_NEAR(r.F(0, 1), 1.0, 1e-15);
  EXPECT_NEAR(r.F(1, 0), -3.0, 1e-14);
  EXPECT_NEAR(r.F(1, 1), -2.0 * std::sqrt(3.0), 1e-14);
  const Matrix pinf = numlin::solve_lyapunov(r.F, r.spectral_density * r.noise_gain * r.noise_gain.transpose());
  EXPECT_NEAR((r.H * pinf * r.H.transpose())(0, 0), 1.0, 1e-12);
}

TEST(Realize, MaternDimensions) {
  EXPECT_EQ(realize(make(CovarianceKind::MaternHalf, 1, 1)).dim(), 1);
  EXPECT_EQ(realize(make(CovarianceKind::Matern32, 1, 1)).dim(), 2);
  EXPECT_EQ(realize(make(CovarianceKind::Matern52, 1, 1)).dim(), 3);
}

TEST(Realize, MaternKernelsMatchClosedForm) {
  const std::pair<CovarianceKind, int> kinds[] = {
      {CovarianceKind::MaternHalf, 1}, {CovarianceKind::Matern32, 3}, {CovarianceKind::Matern52, 5}};
  for (const auto& [kind, twice_nu] : kinds) {
    for (double ell : {0.3, 1.0, 4.0}) {
      const double sigma = 1.7;
      const auto r = realize(make(kind, sigma, ell));
      for (int i = 0; i <= 100; ++i) {
        const double tau = 5.0 * ell * i / 100.0;
        EXPECT_NEAR(kernel_value(r, tau), testing::matern_closed_form(twice_nu, sigma, ell, tau), 1e-10)
            << to_string(kind) << " ell=" << ell << " tau=" << tau;
      }
    }
  }
}

TEST(Realize, SquaredExponentialDefaultOrder) {
  const auto spec = make(CovarianceKind::SquaredExponential, 1.0, 1.0);
  const auto r = realize(spec);
  EXPECT_EQ(r.dim(), 8);
  EXPECT_LE(max_se_error(spec), 0.01);
  EXPECT_LE(std::abs(kernel_value(r, 10.0)), 0.02);
}

TEST(Realize, SquaredExponentialErrorShrinksWithDenominatorDegree) {
  for (double ell : {0.5, 1.0, 3.0}) {
    const double e6 = max_se_error(make(CovarianceKind::SquaredExponential, 1.0, ell, {4, 6}));
    const double e8 = max_se_error(make(CovarianceKind::SquaredExponential, 1.0, ell, {4, 8}));
    const double e10 = max_se_error(make(CovarianceKind::SquaredExponential, 1.0, ell, {4, 10}));
    EXPECT_GT(e6, e8) << "ell=" << ell;
    EXPECT_GT(e8, e10) << "ell=" << ell;
  }
}

TEST(Realize, SquaredExponentialVarianceIsExact) {
  for (double sigma : {0.2, 1.0, 3.0}) {
    const auto r = realize(make(CovarianceKind::SquaredExponential, sigma, 2.0));
    EXPECT_NEAR(kernel_value(r, 0.0), sigma * sigma, 1e-9 * sigma * sigma);
  }
}

TEST(Realize, EveryRealizationPassesInvariants) {
  for (auto kind : {CovarianceKind::SquaredExponential, CovarianceKind::MaternHalf, CovarianceKind::Matern32,
                    CovarianceKind::Matern52}) {
    for (double ell : {0.25, 1.0, 20.0}) {
      const auto r = realize(make(kind, 0.7, ell));
      EXPECT_NO_THROW(r.validate()) << to_string(kind) << " ell=" << ell;
      EXPECT_TRUE(numlin::is_hurwitz(r.F, 1e-12));
      const Matrix res = r.F * r.Pinf + r.Pinf * r.F.transpose() +
                         r.spectral_density * r.noise_gain * r.noise_gain.transpose();
      EXPECT_LE(res.norm(), 1e-9 * (1.0 + r.spectral_density));
    }
  }
}

TEST(Realize, AmplitudeScalesKernelQuadratically) {
  for (auto kind : {CovarianceKind::SquaredExponential, CovarianceKind::MaternHalf, CovarianceKind::Matern52}) {
    const auto base = realize(make(kind, 1.0, 1.5));
    const auto scaled = realize(make(kind, 2.5, 1.5));
    for (double tau : {0.0, 0.3, 1.0, 4.0}) {
      EXPECT_NEAR(kernel_value(scaled, tau), 6.25 * kernel_value(base, tau), 1e-12 * 6.25 + 1e-12);
    }
  }
}

TEST(Realize, KernelIsEven) {
  const auto r = realize(make(CovarianceKind::Matern32, 1.0, 1.0));
  EXPECT_EQ(kernel_value(r, 0.7), kernel_value(r, -0.7));
}

TEST(CovarianceSpec, RejectsInvalid) {
  EXPECT_THROW(realize(make(CovarianceKind::MaternHalf, 0.0, 1.0)), ArgumentError);
  EXPECT_THROW(realize(make(CovarianceKind::MaternHalf, 1.0, -1.0)), ArgumentError);
  EXPECT_THROW(realize(make(CovarianceKind::SquaredExponential, 1.0, 1.0, {4, 4})), ArgumentError);
  EXPECT_THROW(realize(make(CovarianceKind::SquaredExponential, 1.0, 1.0, {6, 4})), ArgumentError);
}

TEST(CovarianceSpec, KindNames) {
  EXPECT_EQ(parse_kind("se"), CovarianceKind::SquaredExponential);
  EXPECT_EQ(parse_kind("matern12"), CovarianceKind::MaternHalf);
  EXPECT_EQ(parse_kind("matern32"), CovarianceKind::Matern32);
  EXPECT_EQ(parse_kind(to_string(CovarianceKind::Matern52)), CovarianceKind::Matern52);
  EXPECT_THROW(parse_kind("periodic"), ArgumentError);
}

}  // namespace
}  // namespace lfm::gpss
