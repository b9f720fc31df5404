#include "bintopo/error.hpp"
#include "bintopo/sparse_linalg.hpp"

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include <random>
#include <vector>

using namespace bintopo;

namespace {

// Random sparse SPD matrix: banded random symmetric part plus a dominant diagonal.
SparseSymmetric random_spd(int n, std::mt19937& rng, double shift = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseMatrix a = DenseMatrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = std::max(0, i - 3); j < i; ++j) {
      const double v = u(rng);
      a(i, j) = v;
      a(j, i) = v;
    }
  }
  for (int i = 0; i < n; ++i) a(i, i) = a.row(i).cwiseAbs().sum() + shift + u(rng) * 0.1 + 0.2;
  SparseMatrix s = a.sparseView();
  return SparseSymmetric(s);
}

DenseMatrix dense(const SparseSymmetric& k) { return DenseMatrix(k.matrix()); }

}  // namespace

TEST(SparseLinalg, RejectsAsymmetricPattern) {
  SparseMatrix m(2, 2);
  m.insert(0, 0) = 1.0;
  m.insert(1, 1) = 1.0;
  m.insert(0, 1) = 0.5;
  EXPECT_THROW(SparseSymmetric{m}, Error);
}

TEST(SparseLinalg, FindAndCoeff) {
  std::mt19937 rng(1);
  auto k = random_spd(10, rng);
  const auto d = dense(k);
  for (int r = 0; r < 10; ++r) {
    for (int c = 0; c < 10; ++c) {
      EXPECT_EQ(k.coeff(r, c), d(r, c));
      EXPECT_EQ(k.find(r, c).has_value(), std::abs(r - c) <= 3);
    }
  }
}

TEST(SparseLinalg, SolveMatchesDense) {
  std::mt19937 rng(2);
  auto k = random_spd(40, rng);
  Vector f = Vector::LinSpaced(40, -1.0, 2.0);
  Factorization fac(k);
  const Vector u = fac.solve(f);
  const Vector ref = dense(k).ldlt().solve(f);
  EXPECT_LT((u - ref).norm(), 1e-12 * ref.norm());
  EXPECT_EQ(fac.solve_count(), 1u);
}

TEST(SparseLinalg, RefactorTracksValues) {
  std::mt19937 rng(3);
  auto k = random_spd(20, rng);
  Factorization fac(k);
  for (Index p = 0; p < k.nonzeros(); ++p) k.values()[p] *= 2.0;
  fac.refactor(k);
  Vector f = Vector::Ones(20);
  const Vector ref = dense(k).ldlt().solve(f);
  EXPECT_LT((fac.solve(f) - ref).norm(), 1e-12 * ref.norm());
}

TEST(SparseLinalg, IndefiniteRejected) {
  SparseMatrix m(2, 2);
  m.insert(0, 0) = 1.0;
  m.insert(1, 1) = 1.0;
  m.insert(0, 1) = 2.0;
  m.insert(1, 0) = 2.0;
  try {
    Factorization fac{SparseSymmetric(m)};
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::not_positive_definite);
  }
}

TEST(SparseLinalg, SingularRejected) {
  SparseMatrix m(2, 2);
  m.insert(0, 0) = 1.0;
  m.insert(1, 1) = 1.0;
  m.insert(0, 1) = 1.0;
  m.insert(1, 0) = 1.0;
  try {
    Factorization fac{SparseSymmetric(m)};
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::singular);
  }
}

TEST(SparseLinalg, PcgExactAfterNSteps) {
  std::mt19937 rng(4);
  const int n = 12;
  auto k = random_spd(n, rng);
  Vector f = Vector::LinSpaced(n, 1.0, 3.0);
  MatrixOperator a(k);
  IdentityPreconditioner m;
  const Vector u0 = Vector::Zero(n);
  const auto res = pcg(a, f, u0, f, m, n);
  const Vector ref = dense(k).ldlt().solve(f);
  EXPECT_LT((res.u - ref).norm(), 1e-9 * ref.norm());
}

TEST(SparseLinalg, PcgDirectionsConjugateAndEnergyDecreasing) {
  std::mt19937 rng(5);
  const int n = 30;
  auto k = random_spd(n, rng, 0.1);
  Vector f = Vector::Ones(n);
  MatrixOperator a(k);
  auto jac = jacobi_preconditioner(k);
  const Vector u0 = Vector::Zero(n);
  Vector d0;
  jac.apply_inverse(f, d0);
  std::vector<Vector> dirs;
  std::vector<double> energy;
  const DenseMatrix kd = dense(k);
  pcg(a, f, u0, d0, jac, 10, 0.0, [&](const CgmState& s) {
    dirs.push_back(s.d);
    energy.push_back(0.5 * s.u.dot(kd * s.u) - f.dot(s.u));
  });
  ASSERT_GE(dirs.size(), 5u);
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double c = dirs[i].dot(kd * dirs[j]);
      const double scale = std::sqrt(dirs[i].dot(kd * dirs[i]) * dirs[j].dot(kd * dirs[j]));
      EXPECT_LT(std::abs(c), 1e-8 * scale) << i << "," << j;
    }
  }
  for (std::size_t i = 1; i < energy.size(); ++i) EXPECT_LE(energy[i], energy[i - 1] + 1e-14);
}

TEST(SparseLinalg, PcgResumableMatchesSingleRun) {
  std::mt19937 rng(6);
  const int n = 15;
  auto k = random_spd(n, rng);
  Vector f = Vector::LinSpaced(n, -1.0, 1.0);
  MatrixOperator a(k);
  IdentityPreconditioner m;
  const Vector u0 = Vector::Zero(n);
  const auto full = pcg(a, f, u0, f, m, 6);
  auto st = pcg_start(a, f, u0, f);
  pcg_advance(a, m, st, 2);
  pcg_advance(a, m, st, 4);
  EXPECT_LT((st.u - full.u).norm(), 1e-13 * full.u.norm());
  EXPECT_EQ(st.k, 6);
}

TEST(SparseLinalg, PcgStopsOnTolerance) {
  std::mt19937 rng(7);
  const int n = 20;
  auto k = random_spd(n, rng);
  Vector f = Vector::Ones(n);
  MatrixOperator a(k);
  IdentityPreconditioner m;
  const Vector u0 = Vector::Zero(n);
  const auto res = pcg(a, f, u0, f, m, 1000, 1e-10);
  EXPECT_LE(res.steps, n + 2);
  EXPECT_LT((dense(k) * res.u - f).norm(), 1e-9);
}

TEST(SparseLinalg, OverlayOperatorAddsBlock) {
  std::mt19937 rng(8);
  auto k = random_spd(6, rng);
  std::vector<int> dofs{1, 4};
  DenseMatrix dk(2, 2);
  dk << 2.0, -1.0, -1.0, 3.0;
  OverlayOperator op(k, dofs, dk, -1.0);
  DenseMatrix ref = dense(k);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) ref(dofs[a], dofs[b]) -= dk(a, b);
  Vector v = Vector::LinSpaced(6, 1.0, 6.0), out;
  op.apply(v, out);
  EXPECT_LT((out - ref * v).norm(), 1e-13 * out.norm());
}

TEST(SparseLinalg, JacobiRejectsNonPositive) {
  Vector d(2);
  d << 1.0, 0.0;
  EXPECT_THROW(JacobiPreconditioner{d}, Error);
}
