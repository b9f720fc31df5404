#include "bintopo/bench/problems.hpp"

#include "bintopo/error.hpp"

namespace bintopo::bench {

namespace {

Material material_of(const ProblemOptions& opt, double e, double nu, double t = 1.0) {
  Material m;
  m.youngs_modulus = opt.youngs_modulus.value_or(e);
  m.poissons_ratio = opt.poissons_ratio.value_or(nu);
  m.thickness = opt.thickness.value_or(t);
  return m;
}

}  // namespace

Benchmark tie_beam(int scale, const ProblemOptions& opt) {
  require(scale >= 1, "tie-beam scale must be at least 1");
  const int s = scale;
  GridLayout g;
  g.nx = 32 * s;
  g.ny = 7 * s;
  g.elem_w = g.elem_h = 1.0 / s;
  g.active.assign(static_cast<std::size_t>(g.nx) * g.ny, 0);
  for (int ey = 0; ey < g.ny; ++ey) {
    for (int ex = 0; ex < g.nx; ++ex) {
      const bool beam = ey < 3 * s;
      const bool tie = ex >= 16 * s && ex < 17 * s;
      g.active[static_cast<std::size_t>(ey) * g.nx + ex] = (beam || tie) ? 1 : 0;
    }
  }
  std::vector<NodeDof> fixed;
  for (int j = 0; j <= 3 * s; ++j) {
    fixed.push_back({0, j, Component::x});
    fixed.push_back({0, j, Component::y});
  }
  for (int i = 16 * s; i <= 17 * s; ++i) fixed.push_back({i, 7 * s, Component::y});
  Mesh mesh(g, fixed);

  const double p = opt.load.value_or(1.0);
  Vector f = Vector::Zero(mesh.dof_count());
  add_edge_load(mesh, f, 32 * s, 0, 32 * s, 3 * s, -2.0 * p, 0.0);
  add_edge_load(mesh, f, 16 * s, 0, 17 * s, 0, 0.0, -1.0 * p);

  FemProblem problem(std::move(mesh), material_of(opt, 1.0, 0.0), opt.eps_k.value_or(1e-9),
                     std::move(f));
  DensityVector x(problem.element_count(), true);
  return {s == 1 ? "tie_beam_coarse" : "tie_beam_refined", std::move(problem), std::move(x)};
}

Benchmark cantilever_32x20(const ProblemOptions& opt) {
  GridLayout g;
  g.nx = 32;
  g.ny = 20;
  g.elem_w = g.elem_h = 2.5;
  std::vector<NodeDof> fixed;
  for (int j = 0; j <= g.ny; ++j) {
    fixed.push_back({0, j, Component::x});
    fixed.push_back({0, j, Component::y});
  }
  Mesh mesh(g, fixed);
  Vector f = Vector::Zero(mesh.dof_count());
  add_nodal_load(mesh, f, 32, 10, 0.0, -opt.load.value_or(1000.0));
  FemProblem problem(std::move(mesh), material_of(opt, 210000.0, 0.3), opt.eps_k.value_or(1e-9),
                     std::move(f));
  DensityVector x(problem.element_count(), false);
  for (std::size_t e = 0; e < problem.element_count(); ++e) {
    const int ey = problem.mesh().element(e).ey;
    if (ey >= 5 && ey < 15) x.set(e, true);
  }
  return {"cantilever_32x20", std::move(problem), std::move(x)};
}

Benchmark mbb(int nx, int ny, const ProblemOptions& opt) {
  require(nx >= 2 && ny >= 1, "mbb needs at least 2 x 1 elements");
  GridLayout g;
  g.nx = nx;
  g.ny = ny;
  g.elem_w = g.elem_h = 4.0 * 300.0 / nx;
  std::vector<NodeDof> fixed;
  for (int j = 0; j <= ny; ++j) fixed.push_back({0, j, Component::x});
  fixed.push_back({nx, 0, Component::y});
  Mesh mesh(g, fixed);
  Vector f = Vector::Zero(mesh.dof_count());
  add_nodal_load(mesh, f, 0, ny, 0.0, -opt.load.value_or(1000.0));
  // 10 mm plate, N and mm throughout, so compliance comes out in mJ.
  FemProblem problem(std::move(mesh), material_of(opt, 210000.0, 0.3, 10.0),
                     opt.eps_k.value_or(1e-9), std::move(f));
  DensityVector x(problem.element_count(), true);
  return {"mbb", std::move(problem), std::move(x)};
}

std::vector<int> appendix_b_voids(int topology) {
  switch (topology) {
    case 1: return {3};
    case 2: return {3, 7};
    case 3: return {3, 7, 2};
    case 4: return {3, 7, 2, 6};
    default: fail(ErrorCode::invalid_argument, "appendix_b topology must be 1 to 4");
  }
}

Benchmark appendix_b_4x4(int topology, const ProblemOptions& opt) {
  const auto voids = appendix_b_voids(topology);
  GridLayout g;
  g.nx = 4;
  g.ny = 4;
  g.elem_w = 20.0;
  g.elem_h = 12.5;
  std::vector<NodeDof> fixed;
  for (int j = 0; j <= 4; ++j) {
    fixed.push_back({0, j, Component::x});
    fixed.push_back({0, j, Component::y});
  }
  Mesh mesh(g, fixed);
  Vector f = Vector::Zero(mesh.dof_count());
  add_nodal_load(mesh, f, 4, 0, 0.0, -opt.load.value_or(1.0));
  FemProblem problem(std::move(mesh), material_of(opt, 210000.0, 0.3), opt.eps_k.value_or(0.1),
                     std::move(f));
  DensityVector x(problem.element_count(), true);
  // Element numbering of this mesh already runs column-major from the top.
  for (int k : voids) x.set(static_cast<std::size_t>(k - 1), false);
  return {"appendix_b_4x4", std::move(problem), std::move(x)};
}

}  // namespace bintopo::bench
