#pragma once

#include "bintopo/sparse_linalg.hpp"
#include "bintopo/types.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace bintopo {

struct Material {
  double youngs_modulus = 1.0;
  double poissons_ratio = 0.0;
  double thickness = 1.0;

  void validate() const;
};

using ElementMatrix = DenseMatrix;
using Matrix8 = Eigen::Matrix<double, 8, 8>;

// Bilinear plane-stress quadrilateral, 2x2 Gauss rule. Nodes run
// counterclockwise from the lower-left corner; DOFs are (u, v) per node.
Matrix8 element_stiffness_q4(const Material& material, double elem_w, double elem_h);

// Symmetric PSD square root by eigendecomposition.
ElementMatrix element_sqrt(const ElementMatrix& k);

enum class Component : int { x = 0, y = 1 };

// Grid node (i, j); i counts columns from the left, j rows from the bottom.
struct NodeDof {
  int i = 0;
  int j = 0;
  Component component = Component::x;
};

struct GridLayout {
  int nx = 0;
  int ny = 0;
  double elem_w = 1.0;
  double elem_h = 1.0;
  // Indexed ey * nx + ex with ey from the bottom. Empty means all active.
  std::vector<std::uint8_t> active;

  bool is_active(int ex, int ey) const;
};

struct Element {
  int ex = 0;
  int ey = 0;
  std::array<int, 4> nodes{};
  std::array<int, 8> dofs{};  // -1 where fixed
  std::vector<int> free_dofs;
  std::vector<int> free_local;
  unsigned free_mask = 0;
};

// Structured, optionally masked, quadrilateral mesh. Elements are numbered
// column by column from the left, top to bottom within a column.
class Mesh {
 public:
  Mesh(GridLayout layout, const std::vector<NodeDof>& fixed);

  const GridLayout& layout() const { return layout_; }
  int nx() const { return layout_.nx; }
  int ny() const { return layout_.ny; }
  double elem_w() const { return layout_.elem_w; }
  double elem_h() const { return layout_.elem_h; }

  std::size_t element_count() const { return elements_.size(); }
  int node_count() const { return static_cast<int>(node_grid_.size()); }
  Index dof_count() const { return dof_count_; }

  const Element& element(std::size_t e) const { return elements_[e]; }
  const std::vector<Element>& elements() const { return elements_; }

  int element_at(int ex, int ey) const;  // -1 when outside or inactive
  int node_at(int i, int j) const;       // -1 when unused
  int dof(int node, Component c) const { return node_dofs_[node][static_cast<int>(c)]; }
  Eigen::Vector2d node_position(int node) const;
  std::array<int, 2> node_grid(int node) const { return node_grid_[node]; }
  Eigen::Vector2d centroid(std::size_t e) const;

  // Elements sharing at least one node with e, e excluded.
  const std::vector<int>& neighbors(std::size_t e) const { return neighbors_[e]; }
  // Elements attached to a node.
  const std::vector<int>& node_elements(int node) const { return node_elements_[node]; }

 private:
  GridLayout layout_;
  std::vector<Element> elements_;
  std::vector<int> element_index_;        // grid cell -> element
  std::vector<int> node_index_;           // grid node -> node
  std::vector<std::array<int, 2>> node_grid_;
  std::vector<std::array<int, 2>> node_dofs_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<std::vector<int>> node_elements_;
  Index dof_count_ = 0;
};

// Lumped loads. Components on fixed DOFs are dropped.
void add_nodal_load(const Mesh& mesh, Vector& f, int i, int j, double fx, double fy);
// Traction (per unit length) along the axis-aligned grid segment between two
// nodes, lumped half to each end of every element edge.
void add_edge_load(const Mesh& mesh, Vector& f, int i0, int j0, int i1, int j1,
                   double tx, double ty);

class FemProblem {
 public:
  FemProblem(Mesh mesh, Material material, double eps_k, Vector load);

  const Mesh& mesh() const { return mesh_; }
  const Material& material() const { return material_; }
  double eps_k() const { return eps_k_; }
  const Vector& load() const { return load_; }
  std::size_t element_count() const { return mesh_.element_count(); }
  Index dof_count() const { return mesh_.dof_count(); }

  const Matrix8& element_base() const { return k0_full_; }
  std::span<const int> element_dofs(std::size_t e) const { return mesh_.element(e).free_dofs; }
  // Constrained K_i^0.
  const ElementMatrix& element_k0(std::size_t e) const { return blocks_[block_of_[e]].k0; }
  // K_i = (1 - eps_k) K_i^0.
  const ElementMatrix& element_variation(std::size_t e) const { return blocks_[block_of_[e]].ki; }
  const ElementMatrix& element_variation_sqrt(std::size_t e) const {
    return blocks_[block_of_[e]].ki_sqrt;
  }

  SparseSymmetric assemble(const DensityVector& x) const;
  // Positions of element e's g_i x g_i block (column-major) in the value array.
  std::span<const int> element_value_positions(std::size_t e) const;
  const SparseSymmetric& pattern() const { return pattern_; }

 private:
  struct Block {
    ElementMatrix k0;
    ElementMatrix ki;
    ElementMatrix ki_sqrt;
  };

  Mesh mesh_;
  Material material_;
  double eps_k_;
  Vector load_;
  Matrix8 k0_full_;
  std::vector<Block> blocks_;
  std::vector<int> block_of_;
  SparseSymmetric pattern_;
  std::vector<int> value_pos_;
  std::vector<std::size_t> value_offset_;
};

SparseSymmetric assemble_global(const FemProblem& problem, const DensityVector& x);

double compliance(const Vector& u, const Vector& f);
int volume(const DensityVector& x);

// Everything known about a topology once K(x) u = f has been solved.
struct Equilibrium {
  DensityVector x;
  SparseSymmetric k;
  Factorization factor;
  Vector u;
  double compliance = 0.0;
};

Equilibrium solve_equilibrium(const FemProblem& problem, const DensityVector& x);

}  // namespace bintopo
