#pragma once

#include "bintopo/mesh_fem.hpp"
#include "bintopo/sparse_linalg.hpp"

#include <span>
#include <vector>

namespace bintopo {

// Entries of K^{-1} on the sparsity pattern of K.
class SelectiveInverse {
 public:
  SelectiveInverse() = default;
  explicit SelectiveInverse(const SparseSymmetric& pattern);

  Index dimension() const { return values_.rows(); }
  double at(Index r, Index c) const;
  DenseMatrix block(std::span<const int> dofs) const;
  // Block of element e of `problem`, whose pattern this inverse must share.
  DenseMatrix element_block(const FemProblem& problem, std::size_t e) const;

  const SparseMatrix& values() const { return values_; }
  SparseMatrix& values() { return values_; }

 private:
  SparseMatrix values_;
};

// One column solve per pattern column.
SelectiveInverse selective_inverse_full(const Factorization& factor, const SparseSymmetric& pattern);

// Symmetric change of K confined to a few DOFs.
struct LowRankChange {
  std::vector<int> dofs;
  DenseMatrix dk;

  // Sum of sign_e * K_e over the listed elements (+1 adds, -1 removes).
  static LowRankChange from_elements(const FemProblem& problem,
                                     const std::vector<std::pair<std::size_t, int>>& switches);
  bool empty() const { return dofs.empty(); }
};

// Inverse of K + dK from the inverse of K using g_Delta solves with the
// factorization of K. Throws singular_core when I + K^{-1}_{DD} dK is
// numerically singular.
SelectiveInverse selective_inverse_update(const SelectiveInverse& s, const Factorization& factor,
                                          const LowRankChange& change);

}  // namespace bintopo
