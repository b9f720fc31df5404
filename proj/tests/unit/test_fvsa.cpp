#include "fixtures.hpp"

#include "bintopo/fvsa.hpp"
#include "bintopo/error.hpp"
#include "bintopo/selective_inverse.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace bintopo;
using bintopo::testing::random_instance;

namespace {

struct Solved {
  Equilibrium eq;
  SelectiveInverse s;
};

Solved solve_all(const FemProblem& p, const DensityVector& x) {
  Equilibrium eq = solve_equilibrium(p, x);
  SelectiveInverse s = selective_inverse_full(eq.factor, p.pattern());
  return {std::move(eq), std::move(s)};
}

bool close(double a, double b, double rel, double abs_floor = 0.0) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

}  // namespace

TEST(Fvsa, NaiveMatchesTwoSolveDifference) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    auto inst = random_instance(rng, 4, 3);
    const auto eq = solve_equilibrium(inst.problem, inst.x);
    const auto naive = sensitivity_naive(inst.problem, eq);
    for (std::size_t e = 0; e < naive.size(); ++e) {
      if (naive.status[e] != SensitivityStatus::computed) continue;
      const double brute = bintopo::testing::brute_force_alpha(inst.problem, eq, e);
      EXPECT_TRUE(close(naive.alpha[e], brute, 1e-9)) << e << ": " << naive.alpha[e] << " vs " << brute;
    }
  }
}

TEST(Fvsa, WoodburyMatchesNaive) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = random_instance(rng);
    const auto [eq, s] = solve_all(inst.problem, inst.x);
    const auto naive = sensitivity_naive(inst.problem, eq);
    const auto wb = sensitivity_woodbury(inst.problem, eq, s);
    for (std::size_t e = 0; e < wb.size(); ++e) {
      EXPECT_EQ(naive.status[e], wb.status[e]);
      EXPECT_TRUE(close(wb.alpha[e], naive.alpha[e], 1e-8))
          << "trial " << trial << " element " << e << ": " << wb.alpha[e] << " vs "
          << naive.alpha[e];
    }
  }
}

TEST(Fvsa, FociWithUnitPenaltyBracketsExact) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto inst = random_instance(rng);
    const auto [eq, s] = solve_all(inst.problem, inst.x);
    const auto exact = sensitivity_woodbury(inst.problem, eq, s);
    const auto foci = sensitivity_foci(inst.problem, eq, 1.0);
    for (std::size_t e = 0; e < exact.size(); ++e) {
      if (exact.status[e] != SensitivityStatus::computed) continue;
      const double slack = 1e-10 * std::abs(exact.alpha[e]);
      if (inst.x.solid(e)) {
        EXPECT_LE(std::abs(foci.alpha[e]), std::abs(exact.alpha[e]) + slack);
      } else {
        EXPECT_GE(std::abs(foci.alpha[e]), std::abs(exact.alpha[e]) - slack);
      }
    }
  }
}

TEST(Fvsa, FociZeroPenaltyVanishesOnVoids) {
  std::mt19937 rng(8);
  auto inst = random_instance(rng);
  const auto eq = solve_equilibrium(inst.problem, inst.x);
  const auto foci = sensitivity_foci(inst.problem, eq, 0.0);
  for (std::size_t e = 0; e < foci.size(); ++e) {
    if (!inst.x.solid(e)) EXPECT_EQ(foci.alpha[e], 0.0);
  }
}

TEST(Fvsa, ErrorBoundsHold) {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = random_instance(rng);
    const auto [eq, s] = solve_all(inst.problem, inst.x);
    const auto exact = sensitivity_woodbury(inst.problem, eq, s);
    const auto foci = sensitivity_foci(inst.problem, eq, 1.0);
    for (int q : {1, 2, 5}) {
      const auto hoci = sensitivity_hoci(inst.problem, eq, s, q, VoidMode::compute);
      for (std::size_t e = 0; e < exact.size(); ++e) {
        if (exact.status[e] != SensitivityStatus::computed) continue;
        const auto op = element_operator(inst.problem, eq, s, e);
        if (!op.solid && op.norm() >= 1.0) continue;
        const auto b = error_bounds(op, q);
        const double tol = 1e-9 * std::abs(exact.alpha[e]) + 1e-14;
        EXPECT_LE(std::abs(foci.alpha[e] - exact.alpha[e]), error_bounds(op, 1).foci + tol);
        EXPECT_LE(std::abs(hoci.alpha[e] - exact.alpha[e]), b.hoci + tol);
      }
    }
  }
}

TEST(Fvsa, HociSeriesMonotoneOnSolids) {
  std::mt19937 rng(9);
  auto inst = random_instance(rng);
  const auto [eq, s] = solve_all(inst.problem, inst.x);
  const auto exact = sensitivity_woodbury(inst.problem, eq, s);
  for (std::size_t e = 0; e < exact.size(); ++e) {
    if (!inst.x.solid(e) || exact.status[e] != SensitivityStatus::computed) continue;
    const auto op = element_operator(inst.problem, eq, s, e);
    ASSERT_LT(op.norm(), 1.0);
    const auto sums = hoci_partial_sums(op, 400);
    // Solid terms all share one sign, so |error| shrinks at every step.
    double prev = std::abs(exact.alpha[e]);
    for (double v : sums) {
      const double err = std::abs(v - exact.alpha[e]);
      EXPECT_LE(err, prev * (1 + 1e-12) + 1e-15);
      prev = err;
    }
  }
}

TEST(Fvsa, FociMatchesFirstHociTerm) {
  std::mt19937 rng(4);
  auto inst = random_instance(rng);
  const auto [eq, s] = solve_all(inst.problem, inst.x);
  const auto foci = sensitivity_foci(inst.problem, eq, 1.0);
  const auto hoci = sensitivity_hoci(inst.problem, eq, s, 1, VoidMode::compute);
  for (std::size_t e = 0; e < foci.size(); ++e) {
    EXPECT_TRUE(close(foci.alpha[e], hoci.alpha[e], 1e-10, 1e-15)) << e;
  }
}

TEST(Fvsa, HociZeroModeZeroesVoids) {
  std::mt19937 rng(6);
  auto inst = random_instance(rng);
  const auto [eq, s] = solve_all(inst.problem, inst.x);
  const auto hoci = sensitivity_hoci(inst.problem, eq, s, 3, VoidMode::zero);
  for (std::size_t e = 0; e < hoci.size(); ++e) {
    if (!inst.x.solid(e)) {
      EXPECT_EQ(hoci.alpha[e], 0.0);
      EXPECT_EQ(hoci.status[e], SensitivityStatus::zeroed_void);
    }
  }
}

TEST(Fvsa, ElementOperatorSpectrumBelowOneForSolids) {
  std::mt19937 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    auto inst = random_instance(rng);
    const auto [eq, s] = solve_all(inst.problem, inst.x);
    for (std::size_t e = 0; e < inst.problem.element_count(); ++e) {
      if (!inst.x.solid(e)) continue;
      const auto op = element_operator(inst.problem, eq, s, e);
      EXPECT_LT(op.norm(), 1.0);
      EXPECT_GE(op.lambda.minCoeff(), -1e-12);
    }
  }
}

TEST(Fvsa, ComplementEigenvaluesFollowShermanMorrison) {
  // With L an eigenvalue of A, B has L / (1 - L) for solids, L / (1 + L) for voids.
  std::mt19937 rng(17);
  auto inst = random_instance(rng, 4, 3);
  const auto [eq, s] = solve_all(inst.problem, inst.x);
  for (std::size_t e = 0; e < inst.problem.element_count(); ++e) {
    const auto op = element_operator(inst.problem, eq, s, e);
    const auto comp = complement_operator(inst.problem, eq, e);
    const double l = op.norm();
    const double expect = inst.x.solid(e) ? l / (1 - l) : l / (1 + l);
    EXPECT_NEAR(comp.norm(), expect, 1e-8 * std::max(1.0, expect)) << e;
  }
}

TEST(Fvsa, CgmClosedFormMatchesIteration) {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 4; ++trial) {
    auto inst = random_instance(rng, 5, 4);
    const auto eq = solve_equilibrium(inst.problem, inst.x);
    for (int id : {1, 2, 3}) {
      for (auto pre : {CgmPreconditioner::none, CgmPreconditioner::jacobi}) {
        for (int steps : {1, 2}) {
          CgmCase c;
          c.id = id;
          c.preconditioner = pre;
          c.steps = steps;
          const auto generic = sensitivity_cgm(inst.problem, eq, c);
          const auto closed = cgm_closed_form(inst.problem, eq, c);
          const double scale = bintopo::testing::max_abs(generic.alpha);
          for (std::size_t e = 0; e < generic.size(); ++e) {
            EXPECT_TRUE(close(closed.alpha[e], generic.alpha[e], 1e-10, 1e-13 * scale))
                << "case " << id << " steps " << steps << " element " << e << ": "
                << closed.alpha[e] << " vs " << generic.alpha[e];
          }
        }
      }
    }
  }
}

TEST(Fvsa, CgmExactPreconditionerCollapsesToScaledEnergy) {
  std::mt19937 rng(29);
  auto inst = random_instance(rng, 4, 3);
  const auto [eq, s] = solve_all(inst.problem, inst.x);
  const double cbar = eq.compliance;
  CgmCase case1{1, CgmPreconditioner::exact, 1, CgmEstimator::automatic, 0.0};
  CgmCase case3{3, CgmPreconditioner::none, 1, CgmEstimator::automatic, 0.0};
  const auto a1 = sensitivity_cgm(inst.problem, eq, case1);
  const auto a3 = cgm_closed_form(inst.problem, eq, case3);
  for (std::size_t e = 0; e < a1.size(); ++e) {
    if (a1.status[e] != SensitivityStatus::computed) continue;
    const double ci = element_operator(inst.problem, eq, s, e).energy();
    // C_T = 1/2 u^T K_T u for the switched stiffness.
    const double ct = inst.x.solid(e) ? cbar - ci : cbar + ci;
    const double expect = -(cbar / ct) * ci;
    EXPECT_TRUE(close(a1.alpha[e], expect, 1e-8, 1e-14)) << e;
    EXPECT_TRUE(close(a3.alpha[e], expect, 1e-8, 1e-14)) << e;
  }
}

TEST(Fvsa, MaskedConnectiveOnSoleLoadCarrier) {
  // 2 x 1 strip loaded at the free tip: the tip element alone carries the load.
  GridLayout layout{2, 1, 1.0, 1.0, {}};
  std::vector<NodeDof> fixed{{0, 0, Component::x}, {0, 0, Component::y},
                             {0, 1, Component::x}, {0, 1, Component::y}};
  Mesh mesh(layout, fixed);
  Vector f = Vector::Zero(mesh.dof_count());
  add_nodal_load(mesh, f, 2, 1, 0.0, -1.0);
  FemProblem p(std::move(mesh), Material{1.0, 0.3, 1.0}, 1e-9, std::move(f));
  DensityVector x(2, true);
  const auto eq = solve_equilibrium(p, x);
  const auto a = sensitivity_foci(p, eq, 1e-6);
  const auto tip = static_cast<std::size_t>(p.mesh().element_at(1, 0));
  EXPECT_EQ(a.status[tip], SensitivityStatus::masked_connective);
  EXPECT_EQ(a.status[1 - tip], SensitivityStatus::computed);
}

TEST(Fvsa, DisconnectedVoidDetection) {
  GridLayout layout{4, 1, 1.0, 1.0, {}};
  std::vector<NodeDof> fixed{{0, 0, Component::x}, {0, 0, Component::y},
                             {0, 1, Component::x}, {0, 1, Component::y}};
  Mesh mesh(layout, fixed);
  DensityVector x(4, true);
  const int e2 = mesh.element_at(2, 0), e3 = mesh.element_at(3, 0);
  x.set(static_cast<std::size_t>(e2), false);
  x.set(static_cast<std::size_t>(e3), false);
  EXPECT_FALSE(is_disconnected(mesh, x, static_cast<std::size_t>(e2)));
  EXPECT_TRUE(is_disconnected(mesh, x, static_cast<std::size_t>(e3)));
}

TEST(Fvsa, SizeGuard) {
  EXPECT_THROW(check_size_guard(kLargeProblemElements + 1, false, "naive"), Error);
  EXPECT_NO_THROW(check_size_guard(kLargeProblemElements + 1, true, "naive"));
  EXPECT_NO_THROW(check_size_guard(kLargeProblemElements, false, "naive"));
}
