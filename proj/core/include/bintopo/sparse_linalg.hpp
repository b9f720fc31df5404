#pragma once

#include "bintopo/types.hpp"

#include <Eigen/SparseCore>

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace bintopo {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

// Symmetric matrix stored with both triangles so that columns double as rows.
class SparseSymmetric {
 public:
  SparseSymmetric() = default;
  explicit SparseSymmetric(SparseMatrix m);

  Index dimension() const { return m_.rows(); }
  const SparseMatrix& matrix() const { return m_; }

  // Position of (r, c) in the value array, if stored.
  std::optional<Index> find(Index r, Index c) const;
  double coeff(Index r, Index c) const;

  Vector diagonal() const;
  Vector apply(const Vector& v) const { return m_ * v; }

  // Values may change, the pattern may not.
  double* values() { return m_.valuePtr(); }
  const double* values() const { return m_.valuePtr(); }
  Index nonzeros() const { return m_.nonZeros(); }

 private:
  SparseMatrix m_;
};

// Sparse LDL^T of an SPD matrix with fill-reducing ordering.
class Factorization {
 public:
  // Throws not_positive_definite on a negative pivot, singular on a zero one.
  explicit Factorization(const SparseSymmetric& k);
  ~Factorization();
  Factorization(Factorization&&) noexcept;
  Factorization& operator=(Factorization&&) noexcept;

  // Numeric refactorization on the same pattern.
  void refactor(const SparseSymmetric& k);

  Index dimension() const { return n_; }
  Vector solve(const Vector& f) const;
  void solve_in_place(Vector& rhs) const;

  std::size_t solve_count() const { return solves_->load(); }

 private:
  friend class UnitColumnSolver;
  struct Impl;
  std::unique_ptr<Impl> impl_;
  Index n_ = 0;
  std::unique_ptr<std::atomic<std::size_t>> solves_;
};

Factorization factorize_spd(const SparseSymmetric& k);

// Solves K t = e_c for a unit right-hand side and returns t only at requested
// rows. The triangular sweeps follow the elimination-tree paths of c and of
// the requested rows, so the cost tracks the factor's path lengths instead of
// its total size. Holds scratch space; one instance per thread.
class UnitColumnSolver {
 public:
  explicit UnitColumnSolver(const Factorization& factor);
  void solve(Index c, std::span<const int> rows, double* out);

 private:
  const Factorization& factor_;
  std::vector<int> parent_;
  std::vector<int> perm_;
  std::vector<int> stamp_;
  std::vector<int> path_;
  std::vector<int> reach_;
  Vector work_;
  int generation_ = 0;
};

class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual Index size() const = 0;
  virtual void apply(const Vector& in, Vector& out) const = 0;
};

class MatrixOperator final : public LinearOperator {
 public:
  explicit MatrixOperator(const SparseSymmetric& k) : k_(k) {}
  Index size() const override { return k_.dimension(); }
  void apply(const Vector& in, Vector& out) const override;

 private:
  const SparseSymmetric& k_;
};

// K + sign * scatter(dk * gather(v)) on a small DOF subset.
class OverlayOperator final : public LinearOperator {
 public:
  OverlayOperator(const SparseSymmetric& k, std::span<const int> dofs,
                  const DenseMatrix& dk, double sign);
  Index size() const override { return k_.dimension(); }
  void apply(const Vector& in, Vector& out) const override;

 private:
  const SparseSymmetric& k_;
  std::span<const int> dofs_;
  const DenseMatrix& dk_;
  double sign_;
};

class Preconditioner {
 public:
  virtual ~Preconditioner() = default;
  // out = M^{-1} in
  virtual void apply_inverse(const Vector& in, Vector& out) const = 0;
};

class IdentityPreconditioner final : public Preconditioner {
 public:
  void apply_inverse(const Vector& in, Vector& out) const override { out = in; }
};

class JacobiPreconditioner final : public Preconditioner {
 public:
  explicit JacobiPreconditioner(const Vector& diagonal);
  void apply_inverse(const Vector& in, Vector& out) const override;
  const Vector& inverse_diagonal() const { return inv_diag_; }

 private:
  Vector inv_diag_;
};

JacobiPreconditioner jacobi_preconditioner(const SparseSymmetric& k);

class FactorPreconditioner final : public Preconditioner {
 public:
  explicit FactorPreconditioner(const Factorization& f) : f_(f) {}
  void apply_inverse(const Vector& in, Vector& out) const override;

 private:
  const Factorization& f_;
};

struct CgmState {
  Vector u;
  Vector d;
  Vector g;
  int k = 0;
};

struct PcgResult {
  Vector u;
  Vector d;
  int steps = 0;
};

using PcgObserver = std::function<void(const CgmState&)>;

// Preconditioned CG with caller-chosen starting point and first direction.
// Throws breakdown when d_k^T K d_k <= 0.
PcgResult pcg(const LinearOperator& a, const Vector& f, const Vector& u0,
              const Vector& d0, const Preconditioner& m, int max_steps,
              double tau = 0.0, const PcgObserver& observer = {});

// Resumable form; advances `state` by up to `steps` iterations and returns
// how many were taken.
int pcg_advance(const LinearOperator& a, const Preconditioner& m,
                CgmState& state, int steps, double tau = 0.0);

CgmState pcg_start(const LinearOperator& a, const Vector& f, const Vector& u0,
                   const Vector& d0);

}  // namespace bintopo
