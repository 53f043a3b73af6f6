#include "lfm/numlin.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "lfm/errors.hpp"
#include "lfm/model.hpp"
#include "oracles.hpp"

namespace lfm::numlin {
namespace {

using testing::max_abs_diff;
using testing::Random;

Matrix m2(double a, double b, double c, double d) {
  Matrix m(2, 2);
  m << a, b, c, d;
  return m;
}

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

TEST(Expm, ClosedForms) {
  EXPECT_LT(max_abs_diff(expm(Matrix::Zero(2, 2)), Matrix::Identity(2, 2)), 1e-15);
  EXPECT_LT(max_abs_diff(expm(m2(0, 1, 0, 0)), m2(1, 1, 0, 1)), 1e-15);
  EXPECT_LT(max_abs_diff(expm(m2(-1, 0, 0, 2)), m2(std::exp(-1.0), 0, 0, std::exp(2.0))), 1e-13);
}

TEST(Expm, RejectsNonSquare) { EXPECT_THROW(expm(Matrix::Zero(2, 3)), ArgumentError); }

TEST(Expm, RejectsNonFinite) {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 1) = NAN;
  EXPECT_THROW(expm(a), ArgumentError);
}

TEST(Expm, InverseAndSemigroup) {
  Random rng(11);
  for (int trial = 0; trial < 25; ++trial) {
    const auto n = Eigen::Index(rng.integer(1, 6));
    Matrix a = rng.matrix(n, n);
    a *= rng.uniform(0.1, 5.0) / a.norm();
    EXPECT_LT(max_abs_diff(expm(a) * expm(-a), Matrix::Identity(n, n)), 1e-10);
    const double s = rng.uniform(-1, 1), t = rng.uniform(-1, 1);
    EXPECT_LT(max_abs_diff(expm((s + t) * a), expm(s * a) * expm(t * a)), 1e-10);
  }
}

TEST(Expm, MatchesReferenceImplementation) {
  Random rng(12);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix a = 3.0 * rng.matrix(5, 5);
    const Matrix ref = testing::reference_expm(a);
    EXPECT_LT(max_abs_diff(expm(a), ref) / (1.0 + ref.norm()), 1e-12);
  }
}

TEST(Expm, KeepsBlockTriangularStructure) {
  Random rng(13);
  Matrix a = rng.matrix(5, 5);
  a.bottomLeftCorner(2, 3).setZero();
  EXPECT_EQ(expm(a).bottomLeftCorner(2, 3).cwiseAbs().maxCoeff(), 0.0);
}

TEST(VanLoan, ScalarClosedForms) {
  auto d = van_loan_discretize(scalar(0), scalar(1), scalar(2), 0.5);
  EXPECT_NEAR(d.transition(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(d.noise_cov.matrix()(0, 0), 1.0, 1e-14);

  d = van_loan_discretize(scalar(-1), scalar(1), scalar(2), 1.0);
  EXPECT_NEAR(d.transition(0, 0), std::exp(-1.0), 1e-14);
  EXPECT_NEAR(d.noise_cov.matrix()(0, 0), 1.0 - std::exp(-2.0), 1e-14);
}

TEST(VanLoan, RejectsBadStep) {
  EXPECT_THROW(van_loan_discretize(scalar(-1), scalar(1), scalar(1), 0.0), ArgumentError);
  EXPECT_THROW(van_loan_discretize(scalar(-1), scalar(1), scalar(1), -0.1), ArgumentError);
}

TEST(VanLoan, MatchesSimpsonQuadrature) {
  Random rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix a = rng.stable(3);
    const Matrix l = rng.matrix(3, 2);
    const Matrix q = rng.spd(2);
    const double dt = rng.uniform(0.1, 1.0);
    const auto d = van_loan_discretize(a, l, q, dt);
    const Matrix ref = testing::van_loan_by_simpson(a, l, q, dt);
    EXPECT_LT(max_abs_diff(d.noise_cov.matrix(), ref), 1e-8);
    EXPECT_LT(max_abs_diff(d.transition, testing::reference_expm(a * dt)), 1e-12);
  }
}

TEST(VanLoan, CovarianceIsPsdForStableAndUnstableDrift) {
  Random rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = Eigen::Index(rng.integer(1, 5));
    const Matrix a = rng.matrix(n, n);  // generic, often unstable
    const Matrix l = rng.matrix(n, 1);
    const auto d = van_loan_discretize(a, l, scalar(rng.uniform(0.1, 3)), rng.uniform(0.01, 1.0));
    EXPECT_TRUE(is_symmetric(d.noise_cov.matrix()));
    EXPECT_TRUE(is_psd(d.noise_cov.matrix()));
  }
}

TEST(Lyapunov, SmallCases) {
  EXPECT_NEAR(solve_lyapunov(scalar(-1), scalar(2)).matrix()(0, 0), 1.0, 1e-14);
  EXPECT_LT(max_abs_diff(solve_lyapunov(-Matrix::Identity(3, 3), Matrix::Identity(3, 3)).matrix(),
                         0.5 * Matrix::Identity(3, 3)),
            1e-14);
}

TEST(Lyapunov, RejectsNonHurwitz) {
  EXPECT_THROW(solve_lyapunov(scalar(0.0), scalar(1)), StabilityError);
  EXPECT_THROW(solve_lyapunov(m2(-1, 0, 0, 0.5), Matrix::Identity(2, 2)), StabilityError);
}

TEST(Lyapunov, MatchesKroneckerOracle) {
  Random rng(31);
  for (int n = 1; n <= 10; ++n) {
    const Matrix f = rng.stable(n, 0.2);
    const Matrix q = rng.spd(n);
    const Matrix p = solve_lyapunov(f, q).matrix();
    const Matrix ref = testing::lyapunov_by_kron(f, q);
    EXPECT_LT(max_abs_diff(p, ref) / (1.0 + ref.norm()), 1e-10) << "n = " << n;
    EXPECT_LE((f * p + p * f.transpose() + q).norm(), 1e-10 * (1.0 + q.norm()));
  }
}

TEST(Sylvester, SmallCases) {
  EXPECT_NEAR(solve_sylvester(scalar(2), scalar(1), scalar(3))(0, 0), 3.0, 1e-14);
  EXPECT_EQ(solve_sylvester(Matrix::Identity(2, 2), -Matrix::Identity(2, 2), Matrix::Zero(2, 2)).norm(), 0.0);
}

TEST(Sylvester, ReportsOverlappingSpectra) {
  try {
    solve_sylvester(m2(1, 0, 0, 2), m2(2, 0, 0, 3), Matrix::Ones(2, 2));
    FAIL() << "expected SingularityError";
  } catch (const SingularityError& e) {
    EXPECT_NE(std::string(e.what()).find("2"), std::string::npos);
  }
}

TEST(Sylvester, MatchesKroneckerOracle) {
  Random rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    const auto n = Eigen::Index(rng.integer(1, 10));
    const auto m = Eigen::Index(rng.integer(1, 100 / int(n)));
    const Matrix a = rng.matrix(n, n) + 8.0 * Matrix::Identity(n, n);
    const Matrix b = rng.matrix(m, m) - 8.0 * Matrix::Identity(m, m);
    const Matrix c = rng.matrix(n, m);
    const Matrix x = solve_sylvester(a, b, c);
    EXPECT_LT(max_abs_diff(x, testing::sylvester_by_kron(a, b, c)), 1e-10);
    EXPECT_LE((a * x - x * b - c).norm(), 1e-9 * (1.0 + c.norm()));
  }
}

TEST(Sylvester, DisjointButInterleavedSpectra) {
  Random rng(42);
  const Matrix a = rng.matrix(3, 3);
  const Matrix b = rng.matrix(2, 2) + 0.37 * Matrix::Identity(2, 2);
  const Matrix c = rng.matrix(3, 2);
  EXPECT_LT(max_abs_diff(solve_sylvester(a, b, c), testing::sylvester_by_kron(a, b, c)), 1e-8);
}

void expect_care_solution(const Matrix& a, const Matrix& m, const Matrix& uinv, const Matrix& xg) {
  const Matrix p = solve_care(a, m, uinv, xg).matrix();
  EXPECT_TRUE(is_symmetric(p));
  EXPECT_TRUE(is_psd(p));
  EXPECT_LE(care_residual(a, m, uinv, xg, p).norm(), 1e-8 * (1.0 + xg.norm()));
  EXPECT_TRUE(is_hurwitz(a - m * uinv * m.transpose() * p));
}

TEST(Care, ScalarRoots) {
  EXPECT_NEAR(solve_care(scalar(0), scalar(1), scalar(1), scalar(1)).matrix()(0, 0), 1.0, 1e-10);
  EXPECT_NEAR(solve_care(scalar(1), scalar(1), scalar(1), scalar(1)).matrix()(0, 0), 1.0 + std::sqrt(2.0),
              1e-10);
}

TEST(Care, SpringPositionPenalty) {
  const auto spring = model::build_spring(0.1, 1.0);
  Matrix x = Matrix::Zero(2, 2);
  x(0, 0) = 1.0;
  expect_care_solution(spring.Af, spring.Mf, scalar(1), x);
}

TEST(Care, RandomStabilizableInstances) {
  Random rng(51);
  for (int trial = 0; trial < 15; ++trial) {
    const auto n = Eigen::Index(rng.integer(1, 6));
    const auto m = Eigen::Index(rng.integer(1, 3));
    const Matrix a = rng.matrix(n, n);
    const Matrix b = rng.matrix(n, m);
    const Matrix r = rng.spd(m);
    const Matrix g = rng.matrix(n, n);
    expect_care_solution(a, b, r.inverse(), g * g.transpose());
  }
}

TEST(Care, MatchesDoubleIntegratorClosedForm) {
  // P = [[sqrt(3), 1], [1, sqrt(3)]] for X = I, U = 1.
  const Matrix p = solve_care(m2(0, 1, 0, 0), (Matrix(2, 1) << 0, 1).finished(), scalar(1),
                              Matrix::Identity(2, 2))
                       .matrix();
  EXPECT_LT(max_abs_diff(p, m2(std::sqrt(3.0), 1, 1, std::sqrt(3.0))), 1e-9);
}

TEST(Care, RejectsUnstabilizablePair) {
  EXPECT_THROW(solve_care(m2(1, 0, 0, -1), (Matrix(2, 1) << 0, 1).finished(), scalar(1), Matrix::Identity(2, 2)),
               StabilizabilityError);
}

TEST(Care, RejectsIndefiniteControlWeight) {
  EXPECT_THROW(solve_care(scalar(-1), scalar(1), scalar(-1), scalar(1)), ArgumentError);
}

TEST(Rank, ConstructedMatrices) {
  EXPECT_EQ(numerical_rank(Matrix(Matrix::Identity(3, 3))), 3);
  EXPECT_EQ(numerical_rank(Matrix(Matrix::Ones(2, 2))), 1);
  EXPECT_EQ(numerical_rank(Matrix(Matrix::Zero(3, 4))), 0);
  Random rng(61);
  for (int r = 0; r <= 5; ++r) {
    const Matrix a = rng.matrix(7, r) * rng.matrix(r, 6);
    EXPECT_EQ(numerical_rank(a), r);
  }
  // Singular value far below the relative threshold counts as zero.
  Matrix d = Matrix::Zero(3, 3);
  d.diagonal() << 1.0, 1e-6, 1e-12;
  EXPECT_EQ(numerical_rank(d), 2);
  EXPECT_EQ(numerical_rank(d, 1e-13), 3);
}

TEST(Pbh, StabilizabilityWitnesses) {
  const Matrix b = (Matrix(2, 1) << 0, 1).finished();
  EXPECT_TRUE(pbh_test(m2(0, 1, 0, 0), b, true).passed);
  const auto bad = pbh_test(m2(1, 0, 0, -1), b, true);
  EXPECT_FALSE(bad.passed);
  ASSERT_EQ(bad.failing.size(), 1u);
  EXPECT_NEAR(bad.failing[0].first.real(), 1.0, 1e-12);
  EXPECT_EQ(bad.failing[0].second, 1);
  EXPECT_TRUE(pbh_test(m2(-1, 0, 0, -2), Matrix::Zero(2, 1), true).tested.empty());
}

TEST(SymmetricPsd, EnforcesInvariants) {
  EXPECT_NO_THROW(SymmetricPsdMatrix::from(Matrix::Identity(2, 2)));
  EXPECT_THROW(SymmetricPsdMatrix::from(m2(1, 1, 0, 1)), InvariantError);
  EXPECT_THROW(SymmetricPsdMatrix::from(m2(1, 0, 0, -1)), InvariantError);
  EXPECT_NO_THROW(SymmetricPsdMatrix::symmetrized(m2(1, 1e-3, 0, 1)));
}

TEST(BlockDiagonal, Assembles) {
  const Matrix bd = block_diagonal({scalar(1), m2(2, 3, 4, 5)});
  EXPECT_EQ(bd.rows(), 3);
  EXPECT_EQ(bd(0, 0), 1.0);
  EXPECT_EQ(bd(2, 1), 4.0);
  EXPECT_EQ(bd(0, 2), 0.0);
}

}  // namespace
}  // namespace lfm::numlin
