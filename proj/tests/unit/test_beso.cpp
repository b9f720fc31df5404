#include "fixtures.hpp"

#include "bintopo/beso.hpp"
#include "bintopo/error.hpp"

#include <gtest/gtest.h>

#include <limits>
#include <random>

using namespace bintopo;

namespace {

// Exhaustive minimum of sum alpha_i y_i over y_i in {0, -1 for solids, +1 for
// voids}, sum y = vv, sum |y| <= tv; `locked` elements keep y = 0.
double brute_force_optimum(const std::vector<double>& alpha, const DensityVector& x,
                           const std::vector<bool>& locked, int vv, int tv) {
  const std::size_t n = alpha.size();
  double best = std::numeric_limits<double>::infinity();
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    int vol = 0, top = 0;
    double obj = 0.0;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      if (!(mask >> i & 1u)) continue;
      if (locked[i]) ok = false;
      const int y = x.solid(i) ? -1 : 1;
      vol += y;
      ++top;
      obj += alpha[i] * y;
    }
    if (ok && vol == vv && top <= tv) best = std::min(best, obj);
  }
  return best;
}

double objective(const std::vector<double>& alpha, const VariationVector& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) s += alpha[i] * y[i];
  return s;
}

FemProblem small_cantilever(int nx, int ny) {
  GridLayout layout{nx, ny, 1.0, 1.0, {}};
  std::vector<NodeDof> fixed;
  for (int j = 0; j <= ny; ++j) {
    fixed.push_back({0, j, Component::x});
    fixed.push_back({0, j, Component::y});
  }
  Mesh mesh(layout, fixed);
  Vector f = Vector::Zero(mesh.dof_count());
  add_nodal_load(mesh, f, nx, ny / 2, 0.0, -1.0);
  return FemProblem(std::move(mesh), Material{1.0, 0.3, 1.0}, 1e-9, std::move(f));
}

}  // namespace

TEST(Beso, ScheduleFollowsRates) {
  OptimizerConfig c;
  c.er = 0.01;
  c.ar_max = 0.02;
  c.vf_target = 0.5;
  auto mc = schedule(30000, c, 30000);
  EXPECT_EQ(mc.vv, -300);
  EXPECT_EQ(mc.tv_max, 1500);
  mc = schedule(30000, c, 15000);
  EXPECT_EQ(mc.vv, 0);
  EXPECT_EQ(mc.tv_max, 1200);
  mc = schedule(30000, c, 15100);
  EXPECT_EQ(mc.vv, -100);
  EXPECT_EQ(mc.tv_max, 1300);
  mc = schedule(30000, c, 14000);
  EXPECT_EQ(mc.vv, 300);
  c.tv_max = 30000;
  mc = schedule(30000, c, 30000);
  EXPECT_EQ(mc.tv_max, 30000);
  c.tv_max = 1;
  c.er = 0.0001;
  mc = schedule(100, c, 100);
  EXPECT_EQ(mc.vv, -1);  // at least one element per step
  EXPECT_EQ(mc.tv_max, 1);
}

TEST(Beso, SubproblemMatchesEnumeration) {
  std::mt19937 rng(51);
  std::uniform_int_distribution<int> dn(2, 12);
  std::normal_distribution<double> da(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = static_cast<std::size_t>(dn(rng));
    DensityVector x(n, true);
    SensitivityVector a(n);
    std::vector<bool> locked(n, false);
    int solids = 0;
    for (std::size_t i = 0; i < n; ++i) {
      x.set(i, rng() % 3 != 0);
      a.alpha[i] = da(rng);
      if (x.solid(i)) {
        a.alpha[i] = -std::abs(a.alpha[i]);
        if (rng() % 6 == 0) {
          a.status[i] = SensitivityStatus::masked_connective;
          locked[i] = true;
        } else {
          ++solids;
        }
      } else if (rng() % 2) {
        a.alpha[i] = -std::abs(a.alpha[i]);
      }
    }
    const int voids = static_cast<int>(n) - x.volume();
    std::uniform_int_distribution<int> dv(-solids, voids);
    const int vv = dv(rng);
    std::uniform_int_distribution<int> dt(std::abs(vv), static_cast<int>(n));
    const int tv = dt(rng);
    const auto y = solve_subproblem(a, x, {vv, tv});
    EXPECT_EQ(y.volume_variation(), vv);
    EXPECT_LE(y.topological_variation(), tv);
    for (std::size_t i = 0; i < n; ++i) {
      if (locked[i]) EXPECT_EQ(y[i], 0);
    }
    const double best = brute_force_optimum(a.alpha, x, locked, vv, tv);
    EXPECT_NEAR(objective(a.alpha, y), best, 1e-12) << "trial " << trial;
  }
}

TEST(Beso, SubproblemRejectsInfeasibleMoves) {
  DensityVector x(4, true);
  SensitivityVector a(4);
  EXPECT_THROW(solve_subproblem(a, x, {-3, 2}), Error);
  EXPECT_THROW(solve_subproblem(a, x, {1, 4}), Error);  // no voids to add
}

TEST(Beso, FilterPreservesUniformField) {
  GridLayout layout{8, 5, 1.0, 1.0, {}};
  Mesh mesh(layout, {});
  SensitivityVector a(mesh.element_count());
  for (auto& v : a.alpha) v = -2.5;
  const auto f = conic_filter(mesh, a, 2.5);
  for (double v : f.alpha) EXPECT_NEAR(v, -2.5, 1e-14);
}

TEST(Beso, FilterSmallRadiusIsIdentity) {
  GridLayout layout{4, 3, 1.0, 1.0, {}};
  Mesh mesh(layout, {});
  SensitivityVector a(mesh.element_count());
  for (std::size_t i = 0; i < a.size(); ++i) a.alpha[i] = static_cast<double>(i);
  const auto f = conic_filter(mesh, a, 0.5);
  EXPECT_EQ(f.alpha, a.alpha);
}

TEST(Beso, FilterWeightsByDistance) {
  // Row of three unit elements, radius 1.5: neighbours at distance 1 get weight
  // 0.5 against 1.5 for the centre.
  GridLayout layout{3, 1, 1.0, 1.0, {}};
  Mesh mesh(layout, {});
  SensitivityVector a(3);
  a.alpha = {3.0, 0.0, 6.0};
  const auto f = conic_filter(mesh, a, 1.5);
  const std::size_t mid = static_cast<std::size_t>(mesh.element_at(1, 0));
  const double expect = (0.5 * 3.0 + 1.5 * 0.0 + 0.5 * 6.0) / 2.5;
  EXPECT_NEAR(f.alpha[mid], expect, 1e-14);
}

TEST(Beso, FilterSkipsMaskedElements) {
  GridLayout layout{3, 1, 1.0, 1.0, {}};
  Mesh mesh(layout, {});
  SensitivityVector a(3);
  a.alpha = {1.0, 1.0, 1e9};
  a.status[2] = SensitivityStatus::masked_connective;
  const auto f = conic_filter(mesh, a, 1.5);
  EXPECT_NEAR(f.alpha[1], 1.0, 1e-14);
  EXPECT_EQ(f.status[2], SensitivityStatus::masked_connective);
}

TEST(Beso, MomentumAveragesWithHistory) {
  Momentum m;
  SensitivityVector a(2);
  a.alpha = {2.0, -4.0};
  auto r = m.blend(a);
  EXPECT_EQ(r.alpha, a.alpha);
  a.alpha = {4.0, 0.0};
  r = m.blend(a);
  EXPECT_DOUBLE_EQ(r.alpha[0], 3.0);
  EXPECT_DOUBLE_EQ(r.alpha[1], -2.0);
  a.status[0] = SensitivityStatus::masked_connective;
  r = m.blend(a);
  EXPECT_EQ(m.buffer()[0], 0.0);
}

TEST(Beso, OptimizerReachesTargetAndTracksBest) {
  const auto p = small_cantilever(10, 5);
  OptimizerConfig c;
  c.er = 0.04;
  c.ar_max = 0.02;
  c.vf_target = 0.6;
  c.filter_radius = 1.5;
  c.max_iterations = 80;
  c.sensitivity.method = SensitivityMethod::woodbury;
  const auto st = optimize(p, c, DensityVector(p.element_count(), true));
  ASSERT_TRUE(st.best_x.has_value());
  EXPECT_EQ(st.best_x->volume(), c.target_volume(p.element_count()));
  EXPECT_TRUE(load_path_connected(p, *st.best_x));
  EXPECT_NEAR(solve_equilibrium(p, *st.best_x).compliance, st.best_compliance,
              1e-10 * st.best_compliance);
  const int target = c.target_volume(p.element_count());
  for (const auto& h : st.history) {
    if (std::lround(h.volume_fraction * p.element_count()) == target) {
      EXPECT_GE(h.compliance, st.best_compliance * (1 - 1e-12));
    }
  }
  // Volume falls monotonically until the target.
  for (std::size_t k = 1; k < st.history.size(); ++k) {
    EXPECT_LE(st.history[k].volume_fraction, st.history[k - 1].volume_fraction + 1e-12);
  }
}

TEST(Beso, OptimizerIsDeterministic) {
  const auto p = small_cantilever(8, 4);
  OptimizerConfig c;
  c.er = 0.05;
  c.vf_target = 0.5;
  c.filter_radius = 1.5;
  c.max_iterations = 40;
  c.sensitivity.method = SensitivityMethod::cgm;
  const auto a = optimize(p, c, DensityVector(p.element_count(), true));
  const auto b = optimize(p, c, DensityVector(p.element_count(), true));
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t k = 0; k < a.history.size(); ++k) {
    EXPECT_EQ(a.history[k].compliance, b.history[k].compliance);
  }
  EXPECT_EQ(*a.best_x, *b.best_x);
}

TEST(Beso, PatienceStopsStalledRuns) {
  const auto p = small_cantilever(6, 3);
  OptimizerConfig c;
  c.er = 0.0;
  c.ar_max = 0.0;
  c.tv_max = 0;
  c.vf_target = 1.0;
  c.patience = 3;
  c.max_iterations = 50;
  c.sensitivity.method = SensitivityMethod::foci;
  const auto st = optimize(p, c, DensityVector(p.element_count(), true));
  EXPECT_EQ(st.stop_reason, "patience");
  EXPECT_EQ(st.best_iteration, 0);
  EXPECT_LE(st.history.size(), 5u);
}

TEST(Beso, LoadPathConnectivity) {
  const auto p = small_cantilever(3, 2);
  DensityVector x(p.element_count(), true);
  EXPECT_TRUE(load_path_connected(p, x));
  // Cut the middle column.
  for (int ey = 0; ey < 2; ++ey) x.set(static_cast<std::size_t>(p.mesh().element_at(1, ey)), false);
  EXPECT_FALSE(load_path_connected(p, x));
}

TEST(Beso, ConfigValidation) {
  OptimizerConfig c;
  c.vf_target = 1.5;
  EXPECT_THROW(c.validate(), Error);
  c = OptimizerConfig{};
  c.er = -0.1;
  EXPECT_THROW(c.validate(), Error);
  c = OptimizerConfig{};
  EXPECT_NO_THROW(c.validate());
}
