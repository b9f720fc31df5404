#pragma once

#include "bintopo/fvsa.hpp"
#include "bintopo/mesh_fem.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace bintopo::testing {

struct RandomInstance {
  FemProblem problem;
  DensityVector x;
};

// Every solid is reachable from the clamped column through shared edges, which
// keeps the solid part rigid.
inline bool edge_connected_to_support(const Mesh& mesh, const DensityVector& x) {
  std::vector<char> seen(x.size(), 0);
  std::vector<int> stack;
  for (std::size_t e = 0; e < x.size(); ++e) {
    if (x.solid(e) && mesh.element(e).ex == 0) {
      seen[e] = 1;
      stack.push_back(static_cast<int>(e));
    }
  }
  while (!stack.empty()) {
    const auto& el = mesh.element(static_cast<std::size_t>(stack.back()));
    stack.pop_back();
    const int nb[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (const auto& d : nb) {
      const int o = mesh.element_at(el.ex + d[0], el.ey + d[1]);
      if (o >= 0 && x.solid(static_cast<std::size_t>(o)) && !seen[static_cast<std::size_t>(o)]) {
        seen[static_cast<std::size_t>(o)] = 1;
        stack.push_back(o);
      }
    }
  }
  for (std::size_t e = 0; e < x.size(); ++e) {
    if (x.solid(e) && !seen[e]) return false;
  }
  return true;
}

// Cantilever-like grid clamped on the left with a point load on the right
// edge and a random topology whose solids form one rigid piece holding the
// load. eps_k is milder than in production runs so that two-solve
// differences stay well conditioned.
inline RandomInstance random_instance(std::mt19937& rng, int max_nx = 6, int max_ny = 5,
                                      double eps_k = 1e-4, double solid_fraction = 0.7) {
  std::uniform_int_distribution<int> dx(2, max_nx), dy(2, max_ny);
  const int nx = dx(rng), ny = dy(rng);
  GridLayout layout{nx, ny, 1.0, 1.0, {}};
  std::vector<NodeDof> fixed;
  for (int j = 0; j <= ny; ++j) {
    fixed.push_back({0, j, Component::x});
    fixed.push_back({0, j, Component::y});
  }
  Mesh mesh(layout, fixed);
  Vector f = Vector::Zero(mesh.dof_count());
  std::uniform_int_distribution<int> dj(0, ny);
  std::uniform_real_distribution<double> angle(0.0, 6.283185307179586);
  const int jl = dj(rng);
  const double t = angle(rng);
  add_nodal_load(mesh, f, nx, jl, std::cos(t), std::sin(t) - 0.5);
  FemProblem problem(std::move(mesh), Material{1.0, 0.3, 1.0}, eps_k, std::move(f));

  std::bernoulli_distribution solid(solid_fraction);
  const auto& m = problem.mesh();
  const int tip = m.element_at(nx - 1, std::min(jl, ny - 1));
  DensityVector x(problem.element_count(), true);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    for (std::size_t e = 0; e < x.size(); ++e) x.set(e, solid(rng));
    x.set(static_cast<std::size_t>(tip), true);
    if (edge_connected_to_support(m, x)) break;
    x = DensityVector(problem.element_count(), true);
  }
  return {std::move(problem), std::move(x)};
}

// Compliance after switching element e, by direct re-solve.
inline double switched_compliance(const FemProblem& problem, const DensityVector& x,
                                  std::size_t e) {
  DensityVector y = x;
  y.flip(e);
  return solve_equilibrium(problem, y).compliance;
}

// alpha_i = C(x_i = 1) - C(x_i = 0) from two re-solves.
inline double brute_force_alpha(const FemProblem& problem, const Equilibrium& eq,
                                std::size_t e) {
  const double other = switched_compliance(problem, eq.x, e);
  return eq.x.solid(e) ? eq.compliance - other : other - eq.compliance;
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double a : v) m = std::max(m, std::abs(a));
  return m;
}

}  // namespace bintopo::testing
