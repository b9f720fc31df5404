#include "bintopo/mesh_fem.hpp"

#include "bintopo/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

namespace bintopo {

void Material::validate() const {
  require(youngs_modulus > 0.0, "youngs_modulus must be positive");
  require(poissons_ratio >= 0.0 && poissons_ratio < 0.5, "poissons_ratio must lie in [0, 0.5)");
  require(thickness > 0.0, "thickness must be positive");
}

Matrix8 element_stiffness_q4(const Material& material, double elem_w, double elem_h) {
  material.validate();
  require(elem_w > 0.0 && elem_h > 0.0, "element dimensions must be positive");
  const double e = material.youngs_modulus;
  const double nu = material.poissons_ratio;
  Eigen::Matrix3d d;
  d << 1.0, nu, 0.0, nu, 1.0, 0.0, 0.0, 0.0, (1.0 - nu) / 2.0;
  d *= e / (1.0 - nu * nu);

  static constexpr double xi_n[4] = {-1.0, 1.0, 1.0, -1.0};
  static constexpr double eta_n[4] = {-1.0, -1.0, 1.0, 1.0};
  const double gp = 1.0 / std::sqrt(3.0);
  const double det_j = elem_w * elem_h / 4.0;

  Matrix8 k = Matrix8::Zero();
  for (double xi : {-gp, gp}) {
    for (double eta : {-gp, gp}) {
      Eigen::Matrix<double, 3, 8> b = Eigen::Matrix<double, 3, 8>::Zero();
      for (int a = 0; a < 4; ++a) {
        const double dn_dx = xi_n[a] * (1.0 + eta_n[a] * eta) / 4.0 * (2.0 / elem_w);
        const double dn_dy = eta_n[a] * (1.0 + xi_n[a] * xi) / 4.0 * (2.0 / elem_h);
        b(0, 2 * a) = dn_dx;
        b(1, 2 * a + 1) = dn_dy;
        b(2, 2 * a) = dn_dy;
        b(2, 2 * a + 1) = dn_dx;
      }
      k.noalias() += b.transpose() * d * b * det_j;
    }
  }
  k *= material.thickness;
  return 0.5 * (k + k.transpose());
}

ElementMatrix element_sqrt(const ElementMatrix& k) {
  require(k.rows() == k.cols(), "element_sqrt: matrix must be square");
  if (k.rows() == 0) return k;
  const double scale = k.cwiseAbs().maxCoeff();
  require((k - k.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(scale, 1e-300),
          "element_sqrt: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(k);
  Vector lambda = es.eigenvalues();
  const double lmax = std::max(lambda.maxCoeff(), 0.0);
  require(lambda.minCoeff() >= -1e-9 * lmax, "element_sqrt: matrix is not positive semidefinite");
  for (Index a = 0; a < lambda.size(); ++a) {
    lambda[a] = lambda[a] <= 1e-12 * lmax ? 0.0 : std::sqrt(lambda[a]);
  }
  DenseMatrix s = es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (s + s.transpose());
}

bool GridLayout::is_active(int ex, int ey) const {
  if (ex < 0 || ey < 0 || ex >= nx || ey >= ny) return false;
  return active.empty() || active[static_cast<std::size_t>(ey) * nx + ex] != 0;
}

Mesh::Mesh(GridLayout layout, const std::vector<NodeDof>& fixed) : layout_(std::move(layout)) {
  const int nx = layout_.nx;
  const int ny = layout_.ny;
  require(nx > 0 && ny > 0, "mesh needs at least one element in each direction");
  require(layout_.elem_w > 0.0 && layout_.elem_h > 0.0, "element dimensions must be positive");
  require(layout_.active.empty() ||
              layout_.active.size() == static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny),
          "element mask has the wrong size");

  element_index_.assign(static_cast<std::size_t>(nx) * ny, -1);
  node_index_.assign(static_cast<std::size_t>(nx + 1) * (ny + 1), -1);
  auto node_slot = [&](int i, int j) { return static_cast<std::size_t>(j) * (nx + 1) + i; };

  for (int i = 0; i <= nx; ++i) {
    for (int j = ny; j >= 0; --j) {
      const bool used = layout_.is_active(i - 1, j - 1) || layout_.is_active(i, j - 1) ||
                        layout_.is_active(i - 1, j) || layout_.is_active(i, j);
      if (!used) continue;
      node_index_[node_slot(i, j)] = static_cast<int>(node_grid_.size());
      node_grid_.push_back({i, j});
    }
  }
  require(!node_grid_.empty(), "mesh has no active elements");

  std::set<std::pair<int, int>> fixed_set;
  for (const auto& nd : fixed) {
    const int n = node_at(nd.i, nd.j);
    require(n >= 0, "fixed DOF at node (" + std::to_string(nd.i) + ", " + std::to_string(nd.j) +
                        ") which is not part of the mesh");
    fixed_set.insert({n, static_cast<int>(nd.component)});
  }

  node_dofs_.assign(node_grid_.size(), {-1, -1});
  int next = 0;
  for (int n = 0; n < node_count(); ++n) {
    for (int c = 0; c < 2; ++c) {
      if (!fixed_set.count({n, c})) node_dofs_[n][c] = next++;
    }
  }
  dof_count_ = next;
  require(dof_count_ > 0, "mesh has no free DOFs");

  node_elements_.assign(node_grid_.size(), {});
  for (int ex = 0; ex < nx; ++ex) {
    for (int ey = ny - 1; ey >= 0; --ey) {
      if (!layout_.is_active(ex, ey)) continue;
      Element el;
      el.ex = ex;
      el.ey = ey;
      el.nodes = {node_at(ex, ey), node_at(ex + 1, ey), node_at(ex + 1, ey + 1), node_at(ex, ey + 1)};
      for (int a = 0; a < 4; ++a) {
        for (int c = 0; c < 2; ++c) {
          const int d = node_dofs_[el.nodes[a]][c];
          el.dofs[2 * a + c] = d;
          if (d >= 0) {
            el.free_dofs.push_back(d);
            el.free_local.push_back(2 * a + c);
            el.free_mask |= 1u << (2 * a + c);
          }
        }
      }
      const int id = static_cast<int>(elements_.size());
      element_index_[static_cast<std::size_t>(ey) * nx + ex] = id;
      for (int n : el.nodes) node_elements_[n].push_back(id);
      elements_.push_back(std::move(el));
    }
  }

  neighbors_.assign(elements_.size(), {});
  for (std::size_t e = 0; e < elements_.size(); ++e) {
    std::set<int> adj;
    for (int n : elements_[e].nodes) {
      for (int other : node_elements_[n]) {
        if (other != static_cast<int>(e)) adj.insert(other);
      }
    }
    neighbors_[e].assign(adj.begin(), adj.end());
  }
}

int Mesh::element_at(int ex, int ey) const {
  if (ex < 0 || ey < 0 || ex >= nx() || ey >= ny()) return -1;
  return element_index_[static_cast<std::size_t>(ey) * nx() + ex];
}

int Mesh::node_at(int i, int j) const {
  if (i < 0 || j < 0 || i > nx() || j > ny()) return -1;
  return node_index_[static_cast<std::size_t>(j) * (nx() + 1) + i];
}

Eigen::Vector2d Mesh::node_position(int node) const {
  return {node_grid_[node][0] * elem_w(), node_grid_[node][1] * elem_h()};
}

Eigen::Vector2d Mesh::centroid(std::size_t e) const {
  return {(elements_[e].ex + 0.5) * elem_w(), (elements_[e].ey + 0.5) * elem_h()};
}

void add_nodal_load(const Mesh& mesh, Vector& f, int i, int j, double fx, double fy) {
  require(f.size() == mesh.dof_count(), "load vector has the wrong length");
  const int n = mesh.node_at(i, j);
  require(n >= 0, "load applied at node (" + std::to_string(i) + ", " + std::to_string(j) +
                      ") which is not part of the mesh");
  const int dx = mesh.dof(n, Component::x);
  const int dy = mesh.dof(n, Component::y);
  if (dx >= 0) f[dx] += fx;
  if (dy >= 0) f[dy] += fy;
}

void add_edge_load(const Mesh& mesh, Vector& f, int i0, int j0, int i1, int j1, double tx,
                   double ty) {
  require(i0 == i1 || j0 == j1, "edge loads must follow a grid line");
  if (i0 == i1) {
    const int lo = std::min(j0, j1), hi = std::max(j0, j1);
    const double len = mesh.elem_h();
    for (int j = lo; j < hi; ++j) {
      add_nodal_load(mesh, f, i0, j, 0.5 * len * tx, 0.5 * len * ty);
      add_nodal_load(mesh, f, i0, j + 1, 0.5 * len * tx, 0.5 * len * ty);
    }
  } else {
    const int lo = std::min(i0, i1), hi = std::max(i0, i1);
    const double len = mesh.elem_w();
    for (int i = lo; i < hi; ++i) {
      add_nodal_load(mesh, f, i, j0, 0.5 * len * tx, 0.5 * len * ty);
      add_nodal_load(mesh, f, i + 1, j0, 0.5 * len * tx, 0.5 * len * ty);
    }
  }
}

FemProblem::FemProblem(Mesh mesh, Material material, double eps_k, Vector load)
    : mesh_(std::move(mesh)), material_(material), eps_k_(eps_k), load_(std::move(load)) {
  material_.validate();
  require(eps_k_ > 0.0 && eps_k_ < 1.0, "eps_k must lie in (0, 1)");
  require(load_.size() == mesh_.dof_count(), "load vector has the wrong length");
  require(load_.cwiseAbs().maxCoeff() > 0.0, "load vector is zero");

  k0_full_ = element_stiffness_q4(material_, mesh_.elem_w(), mesh_.elem_h());

  std::map<unsigned, int> by_mask;
  block_of_.resize(mesh_.element_count());
  for (std::size_t e = 0; e < mesh_.element_count(); ++e) {
    const Element& el = mesh_.element(e);
    auto [it, fresh] = by_mask.try_emplace(el.free_mask, static_cast<int>(blocks_.size()));
    if (fresh) {
      const Index g = static_cast<Index>(el.free_local.size());
      Block b;
      b.k0.resize(g, g);
      for (Index a = 0; a < g; ++a) {
        for (Index c = 0; c < g; ++c) b.k0(a, c) = k0_full_(el.free_local[a], el.free_local[c]);
      }
      b.ki = (1.0 - eps_k_) * b.k0;
      b.ki_sqrt = element_sqrt(b.ki);
      blocks_.push_back(std::move(b));
    }
    block_of_[e] = it->second;
  }

  std::vector<Eigen::Triplet<double, int>> trips;
  for (const auto& el : mesh_.elements()) {
    for (int r : el.free_dofs) {
      for (int c : el.free_dofs) trips.emplace_back(r, c, 1.0);
    }
  }
  SparseMatrix pat(mesh_.dof_count(), mesh_.dof_count());
  pat.setFromTriplets(trips.begin(), trips.end());
  pat.makeCompressed();
  pattern_ = SparseSymmetric(std::move(pat));

  value_offset_.resize(mesh_.element_count() + 1, 0);
  for (std::size_t e = 0; e < mesh_.element_count(); ++e) {
    const auto& dofs = mesh_.element(e).free_dofs;
    for (int c : dofs) {
      for (int r : dofs) value_pos_.push_back(static_cast<int>(*pattern_.find(r, c)));
    }
    value_offset_[e + 1] = value_pos_.size();
  }
}

std::span<const int> FemProblem::element_value_positions(std::size_t e) const {
  return {value_pos_.data() + value_offset_[e], value_offset_[e + 1] - value_offset_[e]};
}

SparseSymmetric FemProblem::assemble(const DensityVector& x) const {
  require(x.size() == element_count(), "density vector has the wrong length");
  SparseSymmetric k = pattern_;
  double* v = k.values();
  std::fill(v, v + k.nonzeros(), 0.0);
  for (std::size_t e = 0; e < element_count(); ++e) {
    const double coef = eps_k_ + (x.solid(e) ? 1.0 - eps_k_ : 0.0);
    const ElementMatrix& k0 = element_k0(e);
    const auto pos = element_value_positions(e);
    const double* src = k0.data();
    for (std::size_t p = 0; p < pos.size(); ++p) v[pos[p]] += coef * src[p];
  }
  return k;
}

SparseSymmetric assemble_global(const FemProblem& problem, const DensityVector& x) {
  return problem.assemble(x);
}

double compliance(const Vector& u, const Vector& f) {
  require(u.size() == f.size(), "compliance: dimension mismatch");
  return 0.5 * f.dot(u);
}

int volume(const DensityVector& x) { return x.volume(); }

Equilibrium solve_equilibrium(const FemProblem& problem, const DensityVector& x) {
  SparseSymmetric k = problem.assemble(x);
  Factorization fact(k);
  Vector u = fact.solve(problem.load());
  const double c = compliance(u, problem.load());
  return Equilibrium{x, std::move(k), std::move(fact), std::move(u), c};
}

}  // namespace bintopo
