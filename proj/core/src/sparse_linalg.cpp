#include "bintopo/sparse_linalg.hpp"

#include "bintopo/error.hpp"

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace bintopo {

SparseSymmetric::SparseSymmetric(SparseMatrix m) : m_(std::move(m)) {
  require(m_.rows() == m_.cols(), "sparse matrix must be square");
  m_.makeCompressed();
  for (Index c = 0; c < m_.outerSize(); ++c) {
    bool has_diag = false;
    for (SparseMatrix::InnerIterator it(m_, c); it; ++it) {
      require(std::isfinite(it.value()), "non-finite stiffness entry");
      if (it.row() == c) {
        has_diag = true;
        require(it.value() > 0.0, "diagonal entry must be positive");
      } else {
        require(find(c, it.row()).has_value(), "sparsity pattern is not symmetric");
      }
    }
    require(has_diag, "missing diagonal entry");
  }
}

std::optional<Index> SparseSymmetric::find(Index r, Index c) const {
  const int* outer = m_.outerIndexPtr();
  const int* inner = m_.innerIndexPtr();
  const int* begin = inner + outer[c];
  const int* end = inner + outer[c + 1];
  const int* it = std::lower_bound(begin, end, static_cast<int>(r));
  if (it == end || *it != r) return std::nullopt;
  return static_cast<Index>(it - inner);
}

double SparseSymmetric::coeff(Index r, Index c) const {
  auto pos = find(r, c);
  return pos ? m_.valuePtr()[*pos] : 0.0;
}

Vector SparseSymmetric::diagonal() const { return m_.diagonal(); }

struct Factorization::Impl {
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt;
};

namespace {

void check_pivots(const Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower,
                                              Eigen::AMDOrdering<int>>& ldlt) {
  if (ldlt.info() != Eigen::Success) fail(ErrorCode::singular, "zero pivot in factorization");
  const Vector d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  const double dmin = d.minCoeff();
  if (dmin <= 0.0) {
    if (-dmin <= 1e-12 * dmax) fail(ErrorCode::singular, "numerically zero pivot in factorization");
    fail(ErrorCode::not_positive_definite,
         "negative pivot " + std::to_string(dmin) + " in factorization");
  }
  if (dmin <= 1e-14 * dmax) fail(ErrorCode::singular, "numerically zero pivot in factorization");
}

}  // namespace

Factorization::Factorization(const SparseSymmetric& k)
    : impl_(std::make_unique<Impl>()),
      n_(k.dimension()),
      solves_(std::make_unique<std::atomic<std::size_t>>(0)) {
  impl_->ldlt.analyzePattern(k.matrix());
  impl_->ldlt.factorize(k.matrix());
  check_pivots(impl_->ldlt);
}

Factorization::~Factorization() = default;
Factorization::Factorization(Factorization&&) noexcept = default;
Factorization& Factorization::operator=(Factorization&&) noexcept = default;

void Factorization::refactor(const SparseSymmetric& k) {
  require(k.dimension() == n_, "refactor: dimension changed");
  impl_->ldlt.factorize(k.matrix());
  check_pivots(impl_->ldlt);
}

Vector Factorization::solve(const Vector& f) const {
  Vector u = f;
  solve_in_place(u);
  return u;
}

void Factorization::solve_in_place(Vector& rhs) const {
  require(rhs.size() == n_, "solve: dimension mismatch");
  rhs = impl_->ldlt.solve(rhs);
  solves_->fetch_add(1);
}

Factorization factorize_spd(const SparseSymmetric& k) { return Factorization(k); }

UnitColumnSolver::UnitColumnSolver(const Factorization& factor)
    : factor_(factor),
      parent_(static_cast<std::size_t>(factor.n_), -1),
      perm_(static_cast<std::size_t>(factor.n_)),
      stamp_(static_cast<std::size_t>(factor.n_), 0),
      work_(Vector::Zero(factor.n_)) {
  const auto& ldlt = factor.impl_->ldlt;
  const SparseMatrix& l = ldlt.matrixL().nestedExpression();
  // Rows in each column ascend, so the first one is the etree parent.
  for (Index j = 0; j < l.outerSize(); ++j) {
    SparseMatrix::InnerIterator it(l, j);
    if (it) parent_[static_cast<std::size_t>(j)] = static_cast<int>(it.row());
  }
  const auto& idx = ldlt.permutationP().indices();
  for (Index i = 0; i < idx.size(); ++i) perm_[static_cast<std::size_t>(i)] = idx[i];
}

void UnitColumnSolver::solve(Index c, std::span<const int> rows, double* out) {
  const auto& ldlt = factor_.impl_->ldlt;
  const SparseMatrix& l = ldlt.matrixL().nestedExpression();
  const auto& d = ldlt.vectorD();
  if (++generation_ == std::numeric_limits<int>::max()) {
    std::fill(stamp_.begin(), stamp_.end(), 0);
    generation_ = 1;
  }
  const int gen = generation_;

  // Forward sweep L y = e_p touches only the path from p to the root.
  const int p = perm_[static_cast<std::size_t>(c)];
  path_.clear();
  for (int j = p; j >= 0 && stamp_[static_cast<std::size_t>(j)] != gen;
       j = parent_[static_cast<std::size_t>(j)]) {
    stamp_[static_cast<std::size_t>(j)] = gen;
    path_.push_back(j);
  }
  work_[p] = 1.0;
  for (int j : path_) {
    const double yj = work_[j];
    if (yj == 0.0) continue;
    for (SparseMatrix::InnerIterator it(l, j); it; ++it) work_[it.row()] -= it.value() * yj;
  }
  for (int j : path_) work_[j] /= d[j];

  // Backward sweep needs every ancestor of the requested rows.
  reach_ = path_;
  for (int r : rows) {
    for (int j = perm_[static_cast<std::size_t>(r)]; j >= 0 && stamp_[static_cast<std::size_t>(j)] != gen;
         j = parent_[static_cast<std::size_t>(j)]) {
      stamp_[static_cast<std::size_t>(j)] = gen;
      work_[j] = 0.0;
      reach_.push_back(j);
    }
  }
  std::sort(reach_.begin(), reach_.end(), std::greater<>());
  for (int j : reach_) {
    double xj = work_[j];
    for (SparseMatrix::InnerIterator it(l, j); it; ++it) xj -= it.value() * work_[it.row()];
    work_[j] = xj;
  }
  for (std::size_t a = 0; a < rows.size(); ++a) out[a] = work_[perm_[static_cast<std::size_t>(rows[a])]];
  for (int j : reach_) work_[j] = 0.0;
  factor_.solves_->fetch_add(1);
}

void MatrixOperator::apply(const Vector& in, Vector& out) const {
  out.noalias() = k_.matrix() * in;
}

OverlayOperator::OverlayOperator(const SparseSymmetric& k, std::span<const int> dofs,
                                 const DenseMatrix& dk, double sign)
    : k_(k), dofs_(dofs), dk_(dk), sign_(sign) {
  require(dk.rows() == static_cast<Index>(dofs.size()) && dk.cols() == dk.rows(),
          "overlay block does not match its DOF list");
}

void OverlayOperator::apply(const Vector& in, Vector& out) const {
  out.noalias() = k_.matrix() * in;
  const Index g = static_cast<Index>(dofs_.size());
  Vector local(g);
  for (Index a = 0; a < g; ++a) local[a] = in[dofs_[a]];
  const Vector add = dk_ * local;
  for (Index a = 0; a < g; ++a) out[dofs_[a]] += sign_ * add[a];
}

JacobiPreconditioner::JacobiPreconditioner(const Vector& diagonal) {
  for (Index i = 0; i < diagonal.size(); ++i) {
    require(diagonal[i] > 0.0, "Jacobi preconditioner needs a positive diagonal");
  }
  inv_diag_ = diagonal.cwiseInverse();
}

void JacobiPreconditioner::apply_inverse(const Vector& in, Vector& out) const {
  out = in.cwiseProduct(inv_diag_);
}

JacobiPreconditioner jacobi_preconditioner(const SparseSymmetric& k) {
  return JacobiPreconditioner(k.diagonal());
}

void FactorPreconditioner::apply_inverse(const Vector& in, Vector& out) const {
  out = in;
  f_.solve_in_place(out);
}

CgmState pcg_start(const LinearOperator& a, const Vector& f, const Vector& u0,
                   const Vector& d0) {
  require(f.size() == a.size() && u0.size() == a.size() && d0.size() == a.size(),
          "pcg: dimension mismatch");
  CgmState s;
  s.u = u0;
  s.d = d0;
  a.apply(u0, s.g);
  s.g -= f;
  return s;
}

int pcg_advance(const LinearOperator& a, const Preconditioner& m, CgmState& s,
                int steps, double tau) {
  Vector e(a.size());
  Vector q(a.size());
  int taken = 0;
  for (; taken < steps; ++taken) {
    const double gnorm = s.g.norm();
    // An exactly vanishing residual leaves no direction to follow, so it ends
    // the run even when tau = 0.
    if (gnorm < tau || gnorm == 0.0) break;
    a.apply(s.d, e);
    const double de = s.d.dot(e);
    if (!(de > 0.0)) {
      fail(ErrorCode::breakdown,
           "pcg breakdown at step " + std::to_string(s.k) + ": d^T K d = " + std::to_string(de));
    }
    const double mu = -s.d.dot(s.g) / de;
    s.u += mu * s.d;
    s.g += mu * e;
    m.apply_inverse(s.g, q);
    const double beta = e.dot(q) / de;
    s.d = -q + beta * s.d;
    ++s.k;
  }
  return taken;
}

PcgResult pcg(const LinearOperator& a, const Vector& f, const Vector& u0, const Vector& d0,
              const Preconditioner& m, int max_steps, double tau,
              const PcgObserver& observer) {
  require(max_steps >= 0, "pcg: negative step count");
  CgmState s = pcg_start(a, f, u0, d0);
  if (observer) observer(s);
  for (int i = 0; i < max_steps; ++i) {
    if (pcg_advance(a, m, s, 1, tau) == 0) break;
    if (observer) observer(s);
  }
  return {std::move(s.u), std::move(s.d), s.k};
}

}  // namespace bintopo
