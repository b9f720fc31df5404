#include "bintopo/selective_inverse.hpp"

#include "bintopo/error.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <map>

namespace bintopo {

SelectiveInverse::SelectiveInverse(const SparseSymmetric& pattern) : values_(pattern.matrix()) {
  values_.makeCompressed();
  std::fill(values_.valuePtr(), values_.valuePtr() + values_.nonZeros(), 0.0);
}

double SelectiveInverse::at(Index r, Index c) const {
  const int* outer = values_.outerIndexPtr();
  const int* inner = values_.innerIndexPtr();
  const int* begin = inner + outer[c];
  const int* end = inner + outer[c + 1];
  const int* it = std::lower_bound(begin, end, static_cast<int>(r));
  require(it != end && *it == r, "selective inverse queried outside its pattern");
  return values_.valuePtr()[it - inner];
}

DenseMatrix SelectiveInverse::block(std::span<const int> dofs) const {
  const Index g = static_cast<Index>(dofs.size());
  DenseMatrix b(g, g);
  for (Index c = 0; c < g; ++c) {
    for (Index r = 0; r < g; ++r) b(r, c) = at(dofs[r], dofs[c]);
  }
  return b;
}

DenseMatrix SelectiveInverse::element_block(const FemProblem& problem, std::size_t e) const {
  const auto pos = problem.element_value_positions(e);
  const Index g = static_cast<Index>(problem.element_dofs(e).size());
  require(values_.nonZeros() == problem.pattern().nonzeros(),
          "selective inverse does not share the problem pattern");
  DenseMatrix b(g, g);
  const double* v = values_.valuePtr();
  for (Index p = 0; p < g * g; ++p) b.data()[p] = v[pos[p]];
  return b;
}

SelectiveInverse selective_inverse_full(const Factorization& factor,
                                        const SparseSymmetric& pattern) {
  require(factor.dimension() == pattern.dimension(), "pattern/factorization size mismatch");
  SelectiveInverse s(pattern);
  SparseMatrix& m = s.values();
  UnitColumnSolver solver(factor);
  const int* outer = m.outerIndexPtr();
  for (Index c = 0; c < m.outerSize(); ++c) {
    const std::span<const int> rows(m.innerIndexPtr() + outer[c],
                                    static_cast<std::size_t>(outer[c + 1] - outer[c]));
    solver.solve(c, rows, m.valuePtr() + outer[c]);
  }
  return s;
}

LowRankChange LowRankChange::from_elements(
    const FemProblem& problem, const std::vector<std::pair<std::size_t, int>>& switches) {
  std::map<int, int> slot;
  for (const auto& [e, sign] : switches) {
    require(e < problem.element_count(), "element index out of range");
    require(sign == 1 || sign == -1, "switch sign must be +1 or -1");
    for (int d : problem.element_dofs(e)) slot.emplace(d, 0);
  }
  LowRankChange ch;
  for (auto& [d, k] : slot) {
    k = static_cast<int>(ch.dofs.size());
    ch.dofs.push_back(d);
  }
  const Index g = static_cast<Index>(ch.dofs.size());
  ch.dk = DenseMatrix::Zero(g, g);
  for (const auto& [e, sign] : switches) {
    const auto dofs = problem.element_dofs(e);
    const ElementMatrix& ki = problem.element_variation(e);
    for (std::size_t a = 0; a < dofs.size(); ++a) {
      for (std::size_t b = 0; b < dofs.size(); ++b) {
        ch.dk(slot[dofs[a]], slot[dofs[b]]) += sign * ki(a, b);
      }
    }
  }
  return ch;
}

SelectiveInverse selective_inverse_update(const SelectiveInverse& s, const Factorization& factor,
                                          const LowRankChange& change) {
  require(factor.dimension() == s.dimension(), "selective inverse/factorization size mismatch");
  if (change.empty()) return s;
  const Index n = s.dimension();
  const Index g = static_cast<Index>(change.dofs.size());

  using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  // Rows of K^{-1} on the changed DOFs, kept as columns of z.
  RowMatrix z(n, g);
  Vector col(n);
  for (Index a = 0; a < g; ++a) {
    col.setZero();
    col[change.dofs[a]] = 1.0;
    factor.solve_in_place(col);
    z.col(a) = col;
  }

  DenseMatrix kinv_dd(g, g);
  for (Index a = 0; a < g; ++a) {
    for (Index b = 0; b < g; ++b) kinv_dd(a, b) = z(change.dofs[a], b);
  }
  const DenseMatrix core = DenseMatrix::Identity(g, g) + kinv_dd * change.dk;
  // Factor core^T so that q = dK core^{-1} comes from one solve.
  Eigen::FullPivLU<DenseMatrix> lu(core.transpose());
  const double rcond = lu.rcond();
  // rcond alone is blind to a core made purely of roundoff.
  const double scale = std::max(1.0, (kinv_dd * change.dk).cwiseAbs().maxCoeff());
  const double pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (!lu.isInvertible() || rcond < 1e-13 || pivot < 1e-13 * scale) {
    fail(ErrorCode::singular_core, "selective inverse update: core matrix is singular (rcond " +
                                       std::to_string(rcond) + ")");
  }
  // q = dK core^{-1}; every patterned entry loses t_r^T q t_c.
  const DenseMatrix q = lu.solve(change.dk.transpose()).transpose();
  const RowMatrix zq = z * q;

  SelectiveInverse out = s;
  SparseMatrix& m = out.values();
  for (Index c = 0; c < m.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(m, c); it; ++it) {
      it.valueRef() -= zq.row(it.row()).dot(z.row(c));
    }
  }
  return out;
}

}  // namespace bintopo
