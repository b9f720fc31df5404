#include "bintopo/fvsa.hpp"

#include "bintopo/error.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>
#include <optional>

namespace bintopo {

const char* to_string(SensitivityStatus s) {
  switch (s) {
    case SensitivityStatus::computed: return "computed";
    case SensitivityStatus::forced_zero_disconnected: return "forced_zero_disconnected";
    case SensitivityStatus::masked_connective: return "masked_connective";
    case SensitivityStatus::zeroed_void: return "zeroed_void";
  }
  return "unknown";
}

namespace {

Vector gather(const Vector& u, std::span<const int> dofs) {
  Vector out(static_cast<Index>(dofs.size()));
  for (std::size_t a = 0; a < dofs.size(); ++a) out[static_cast<Index>(a)] = u[dofs[a]];
  return out;
}

double element_sign(const DensityVector& x, std::size_t e) { return x.solid(e) ? -1.0 : 1.0; }

void check_equilibrium(const FemProblem& problem, const Equilibrium& eq) {
  require(eq.x.size() == problem.element_count(), "topology does not match the problem");
  require(eq.u.size() == problem.dof_count(), "displacements do not match the problem");
}

// Adds sign * K_e into the values of k, in place.
void overlay_element(const FemProblem& problem, SparseSymmetric& k, std::size_t e, double sign) {
  const auto pos = problem.element_value_positions(e);
  const double* src = problem.element_variation(e).data();
  double* v = k.values();
  for (std::size_t p = 0; p < pos.size(); ++p) v[pos[p]] += sign * src[p];
}

}  // namespace

void CgmCase::validate() const {
  require(id >= 1 && id <= 3, "cgm case must be 1, 2 or 3");
  require(steps >= 1, "cgm needs at least one step");
  require(tau >= 0.0, "cgm tolerance must be nonnegative");
  require(!(id == 1 && estimator == CgmEstimator::displacement),
          "cgm case 1 uses the load estimator");
  require(!(id == 2 && estimator == CgmEstimator::load),
          "cgm case 2 uses the displacement estimator");
}

CgmEstimator CgmCase::resolved_estimator() const {
  if (estimator != CgmEstimator::automatic) return estimator;
  return id == 2 ? CgmEstimator::displacement : CgmEstimator::load;
}

void check_size_guard(std::size_t elements, bool allow_large, const std::string& what) {
  if (elements > kLargeProblemElements && !allow_large) {
    fail(ErrorCode::guard_violation,
         what + " on " + std::to_string(elements) + " elements exceeds the limit of " +
             std::to_string(kLargeProblemElements) + " (pass --allow-large to override)");
  }
}

ElementOperator element_operator(const FemProblem& problem, const Equilibrium& eq,
                                 const SelectiveInverse& s, std::size_t e) {
  check_equilibrium(problem, eq);
  ElementOperator op;
  op.element = e;
  op.solid = eq.x.solid(e);
  const ElementMatrix& sq = problem.element_variation_sqrt(e);
  const DenseMatrix block = s.element_block(problem, e);
  op.a = sq * block * sq;
  op.a = 0.5 * (op.a + op.a.transpose()).eval();
  op.v = sq * gather(eq.u, problem.element_dofs(e));
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(op.a);
  op.lambda = es.eigenvalues();
  op.phi = es.eigenvectors();
  op.w = op.phi.transpose() * op.v;
  return op;
}

ComplementOperator complement_operator(const FemProblem& problem, const Equilibrium& eq,
                                       std::size_t e) {
  check_equilibrium(problem, eq);
  SparseSymmetric r = eq.k;
  overlay_element(problem, r, e, element_sign(eq.x, e));
  Factorization fr(r);
  const auto dofs = problem.element_dofs(e);
  const Index g = static_cast<Index>(dofs.size());
  DenseMatrix block(g, g);
  Vector col(problem.dof_count());
  for (Index c = 0; c < g; ++c) {
    col.setZero();
    col[dofs[c]] = 1.0;
    fr.solve_in_place(col);
    for (Index a = 0; a < g; ++a) block(a, c) = col[dofs[a]];
  }
  const ElementMatrix& sq = problem.element_variation_sqrt(e);
  ComplementOperator out;
  out.b = sq * block * sq;
  out.b = 0.5 * (out.b + out.b.transpose()).eval();
  out.lambda = Eigen::SelfAdjointEigenSolver<DenseMatrix>(out.b, Eigen::EigenvaluesOnly).eigenvalues();
  return out;
}

std::vector<double> hoci_partial_sums(const ElementOperator& op, int q) {
  require(q >= 1, "series order must be at least 1");
  const double sign = op.solid ? 1.0 : -1.0;
  std::vector<double> sums;
  sums.reserve(static_cast<std::size_t>(q));
  Vector s = op.v;
  double acc = 0.0;
  for (int a = 1; a <= q; ++a) {
    acc += -0.5 * op.v.dot(s);
    sums.push_back(acc);
    if (a < q) s = sign * (op.a * s);
  }
  return sums;
}

SensitivityVector sensitivity_naive(const FemProblem& problem, const Equilibrium& eq) {
  check_equilibrium(problem, eq);
  const std::size_t n = problem.element_count();
  SensitivityVector out(n);
  SparseSymmetric k = eq.k;
  std::optional<Factorization> fact;
  const Vector& f = problem.load();
  for (std::size_t e = 0; e < n; ++e) {
    const double sign = element_sign(eq.x, e);
    overlay_element(problem, k, e, sign);
    try {
      if (fact) {
        fact->refactor(k);
      } else {
        fact.emplace(k);
      }
      // C' - C = -1/2 u'^T dK u, formed locally so small changes keep their digits.
      const auto dofs = problem.element_dofs(e);
      const Vector un = gather(fact->solve(f), dofs);
      out.alpha[e] = -0.5 * un.dot(problem.element_variation(e) * gather(eq.u, dofs));
    } catch (const Error& err) {
      if (err.code() != ErrorCode::singular && err.code() != ErrorCode::not_positive_definite) throw;
      out.alpha[e] = std::numeric_limits<double>::quiet_NaN();
      out.flags[e] |= flag_singular;
      fact.reset();
    }
    overlay_element(problem, k, e, -sign);
  }
  mask_loaded_connectives(problem, eq.x, out);
  return out;
}

SensitivityVector sensitivity_foci(const FemProblem& problem, const Equilibrium& eq, double eps_v) {
  check_equilibrium(problem, eq);
  require(eps_v >= 0.0 && eps_v <= 1.0, "eps_v must lie in [0, 1]");
  const std::size_t n = problem.element_count();
  SensitivityVector out(n);
  for (std::size_t e = 0; e < n; ++e) {
    const Vector ue = gather(eq.u, problem.element_dofs(e));
    const double ci = 0.5 * ue.dot(problem.element_variation(e) * ue);
    out.alpha[e] = eq.x.solid(e) ? -ci : -eps_v * ci;
  }
  mask_loaded_connectives(problem, eq.x, out);
  return out;
}

SensitivityVector sensitivity_hoci(const FemProblem& problem, const Equilibrium& eq,
                                   const SelectiveInverse& s, int q, VoidMode void_mode) {
  require(q >= 1, "series order must be at least 1");
  const std::size_t n = problem.element_count();
  SensitivityVector out(n);
  for (std::size_t e = 0; e < n; ++e) {
    if (!eq.x.solid(e) && void_mode == VoidMode::zero) {
      out.force(e, SensitivityStatus::zeroed_void);
      continue;
    }
    const ElementOperator op = element_operator(problem, eq, s, e);
    out.alpha[e] = hoci_partial_sums(op, q).back();
    if (!op.solid && op.norm() >= 1.0) out.flags[e] |= flag_diverged;
    if (op.solid && 1.0 - op.norm() < kConnectiveThreshold) {
      out.status[e] = SensitivityStatus::masked_connective;
    }
  }
  mask_loaded_connectives(problem, eq.x, out);
  return out;
}

SensitivityVector sensitivity_woodbury(const FemProblem& problem, const Equilibrium& eq,
                                       const SelectiveInverse& s) {
  const std::size_t n = problem.element_count();
  SensitivityVector out(n);
  for (std::size_t e = 0; e < n; ++e) {
    const ElementOperator op = element_operator(problem, eq, s, e);
    const Index g = op.a.rows();
    const double sign = op.solid ? -1.0 : 1.0;
    const DenseMatrix m = DenseMatrix::Identity(g, g) + sign * op.a;
    const Vector z = m.ldlt().solve(op.v);
    out.alpha[e] = -0.5 * op.v.dot(z);
    if (op.solid) {
      const double gap = 1.0 - op.norm();
      if (gap < 1e-12) out.flags[e] |= flag_near_singular;
      if (gap < kConnectiveThreshold) out.status[e] = SensitivityStatus::masked_connective;
    }
  }
  mask_loaded_connectives(problem, eq.x, out);
  return out;
}

namespace {

struct CgmSetup {
  IdentityPreconditioner identity;
  std::optional<JacobiPreconditioner> jacobi;
  std::optional<FactorPreconditioner> exact;
  const Preconditioner* m = nullptr;

  CgmSetup(const Equilibrium& eq, CgmPreconditioner kind) {
    switch (kind) {
      case CgmPreconditioner::none: m = &identity; break;
      case CgmPreconditioner::jacobi: m = &jacobi.emplace(eq.k.diagonal()); break;
      case CgmPreconditioner::exact: m = &exact.emplace(eq.factor); break;
    }
  }
};

double estimate_from_state(const FemProblem& problem, const Equilibrium& eq, std::size_t e,
                           const Vector& um, CgmEstimator est) {
  double dc = 0.0;
  if (est == CgmEstimator::load) {
    dc = 0.5 * problem.load().dot(um - eq.u);
  } else {
    const auto dofs = problem.element_dofs(e);
    const Vector ue = gather(eq.u, dofs);
    const Vector ume = gather(um, dofs);
    dc = -0.5 * element_sign(eq.x, e) * ue.dot(problem.element_variation(e) * ume);
  }
  return eq.x.solid(e) ? -dc : dc;
}

}  // namespace

SensitivityVector sensitivity_cgm(const FemProblem& problem, const Equilibrium& eq,
                                  const CgmCase& c) {
  check_equilibrium(problem, eq);
  c.validate();
  const std::size_t n = problem.element_count();
  const Index dim = problem.dof_count();
  const Vector& f = problem.load();
  CgmSetup setup(eq, c.preconditioner);
  const CgmEstimator est = c.resolved_estimator();

  Vector mf;
  if (c.id == 1) setup.m->apply_inverse(f, mf);
  const Vector zero = Vector::Zero(dim);

  SensitivityVector out(n);
  Vector tmp(dim);
  for (std::size_t e = 0; e < n; ++e) {
    const double sign = element_sign(eq.x, e);
    const auto dofs = problem.element_dofs(e);
    OverlayOperator op(eq.k, dofs, problem.element_variation(e), sign);

    Vector u0, d0;
    if (c.id == 1) {
      u0 = zero;
      d0 = mf;
    } else if (c.id == 2) {
      u0 = eq.u;
      // -M^{-1} dK u
      tmp.setZero();
      const Vector ke = problem.element_variation(e) * gather(eq.u, dofs);
      for (std::size_t a = 0; a < dofs.size(); ++a) tmp[dofs[a]] = -sign * ke[static_cast<Index>(a)];
      setup.m->apply_inverse(tmp, d0);
    } else {
      u0 = zero;
      d0 = eq.u;
    }

    CgmState state = pcg_start(op, f, u0, d0);
    try {
      pcg_advance(op, *setup.m, state, c.steps, c.tau);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::breakdown) throw;
      out.flags[e] |= flag_breakdown;
    }
    out.alpha[e] = estimate_from_state(problem, eq, e, state.u, est);
  }
  mask_loaded_connectives(problem, eq.x, out);
  return out;
}

namespace {

// One- and two-step energy gains for a Krylov sequence with moments
// c0 = r^T M^-1 r, c1, c2, c3 (see cgm_closed_form).
struct KrylovGain {
  double value = 0.0;
  bool degenerate = false;
};

KrylovGain krylov_gain(int steps, double c0, double c1, double c2, double c3) {
  KrylovGain g;
  if (!(c1 > 0.0)) {
    g.degenerate = true;
    return g;
  }
  const double one = c0 * c0 / (2.0 * c1);
  if (steps == 1) {
    g.value = one;
    return g;
  }
  const double den = c1 * c3 - c2 * c2;
  if (!(den > 1e-14 * std::abs(c1 * c3))) {
    g.value = one;
    g.degenerate = true;
    return g;
  }
  g.value = (c0 * c0 * c3 - 2.0 * c0 * c1 * c2 + c1 * c1 * c1) / (2.0 * den);
  return g;
}

// Case 2 with a diagonal preconditioner touches only the element and its ring
// of neighbouring DOFs, so it runs on scratch vectors without full-length work.
class LocalCase2 {
 public:
  LocalCase2(const FemProblem& problem, const Equilibrium& eq, const Vector* inv_diag)
      : problem_(problem), eq_(eq), inv_diag_(inv_diag) {
    const Index dim = problem.dof_count();
    vk_ = Vector::Zero(dim);
    vl_ = Vector::Zero(dim);
    mark_.assign(static_cast<std::size_t>(dim), 0);
  }

  struct Moments {
    double ci, b0, b1, b2, b3;
  };

  Moments run(std::size_t e) {
    const SparseMatrix& k = eq_.k.matrix();
    const auto dofs = problem_.element_dofs(e);
    const Index g = static_cast<Index>(dofs.size());
    const ElementMatrix& ki = problem_.element_variation(e);
    const double sign = element_sign(eq_.x, e);
    const Vector ue = gather(eq_.u, dofs);
    const Vector kue = ki * ue;
    Moments mo{};
    mo.ci = 0.5 * ue.dot(kue);
    const Vector b = -sign * kue;
    Vector vm(g);
    for (Index a = 0; a < g; ++a) vm[a] = b[a] * inv(dofs[a]);
    mo.b0 = b.dot(vm);

    touched_.clear();
    for (Index a = 0; a < g; ++a) {
      const int col = dofs[a];
      for (SparseMatrix::InnerIterator it(k, col); it; ++it) {
        touch(static_cast<int>(it.row()));
        vk_[it.row()] += it.value() * vm[a];
      }
    }
    const Vector kvm = ki * vm;
    for (Index a = 0; a < g; ++a) vk_[dofs[a]] += sign * kvm[a];
    mo.b1 = 0.0;
    for (Index a = 0; a < g; ++a) mo.b1 += vk_[dofs[a]] * vm[a];

    mo.b2 = 0.0;
    for (int p : touched_) {
      vl_[p] = vk_[p] * inv(p);
      mo.b2 += vk_[p] * vl_[p];
    }
    mo.b3 = 0.0;
    for (int p : touched_) {
      double acc = 0.0;
      for (SparseMatrix::InnerIterator it(k, p); it; ++it) acc += it.value() * vl_[it.row()];
      mo.b3 += vl_[p] * acc;
    }
    const Vector vle = gather(vl_, dofs);
    mo.b3 += sign * vle.dot(ki * vle);

    for (int p : touched_) {
      vk_[p] = 0.0;
      vl_[p] = 0.0;
      mark_[static_cast<std::size_t>(p)] = 0;
    }
    return mo;
  }

 private:
  double inv(int d) const { return inv_diag_ ? (*inv_diag_)[d] : 1.0; }
  void touch(int p) {
    if (!mark_[static_cast<std::size_t>(p)]) {
      mark_[static_cast<std::size_t>(p)] = 1;
      touched_.push_back(p);
    }
  }

  const FemProblem& problem_;
  const Equilibrium& eq_;
  const Vector* inv_diag_;
  Vector vk_, vl_;
  std::vector<char> mark_;
  std::vector<int> touched_;
};

}  // namespace

SensitivityVector cgm_closed_form(const FemProblem& problem, const Equilibrium& eq,
                                  const CgmCase& c) {
  check_equilibrium(problem, eq);
  c.validate();
  require(c.steps == 1 || c.steps == 2, "closed forms exist for one and two steps only");
  require(c.tau == 0.0, "closed forms assume a fixed step count (tau = 0)");
  require(!(c.id == 3 && c.resolved_estimator() != CgmEstimator::load),
          "the case 3 closed form uses the load estimator");

  const std::size_t n = problem.element_count();
  const Index dim = problem.dof_count();
  const Vector& f = problem.load();
  const double cbar = eq.compliance;
  SensitivityVector out(n);

  if (c.id == 2 && c.preconditioner != CgmPreconditioner::exact) {
    std::optional<Vector> inv_diag;
    if (c.preconditioner == CgmPreconditioner::jacobi) {
      inv_diag = jacobi_preconditioner(eq.k).inverse_diagonal();
    }
    LocalCase2 local(problem, eq, inv_diag ? &*inv_diag : nullptr);
    for (std::size_t e = 0; e < n; ++e) {
      const auto mo = local.run(e);
      const KrylovGain gain = krylov_gain(c.steps, mo.b0, mo.b1, mo.b2, mo.b3);
      if (gain.degenerate) out.flags[e] |= flag_degenerate;
      out.alpha[e] = eq.x.solid(e) ? -(mo.ci + gain.value) : -(mo.ci - gain.value);
    }
    mask_loaded_connectives(problem, eq.x, out);
    return out;
  }

  CgmSetup setup(eq, c.preconditioner);
  const Preconditioner& m = *setup.m;
  Vector vm_f;
  if (c.id == 1) m.apply_inverse(f, vm_f);

  Vector vm(dim), vk(dim), vl(dim), vr(dim), b(dim);
  for (std::size_t e = 0; e < n; ++e) {
    const double sign = element_sign(eq.x, e);
    const auto dofs = problem.element_dofs(e);
    const ElementMatrix& ki = problem.element_variation(e);
    OverlayOperator op(eq.k, dofs, ki, sign);
    const Vector ue = gather(eq.u, dofs);
    const Vector kue = ki * ue;
    const double ci = 0.5 * ue.dot(kue);
    const bool solid = eq.x.solid(e);

    if (c.id == 1 || c.id == 2) {
      // Moments of the Krylov sequence started from r = f (case 1) or r = b.
      double c0 = 0.0;
      if (c.id == 1) {
        vm = vm_f;
        c0 = f.dot(vm);
      } else {
        b.setZero();
        for (std::size_t a = 0; a < dofs.size(); ++a) {
          b[dofs[a]] = -sign * kue[static_cast<Index>(a)];
        }
        m.apply_inverse(b, vm);
        c0 = b.dot(vm);
      }
      op.apply(vm, vk);
      const double c1 = vk.dot(vm);
      double c2 = 0.0, c3 = 0.0;
      if (c.steps == 2) {
        m.apply_inverse(vk, vl);
        op.apply(vl, vr);
        c2 = vk.dot(vl);
        c3 = vr.dot(vl);
      }
      const KrylovGain gain = krylov_gain(c.steps, c0, c1, c2, c3);
      if (gain.degenerate) out.flags[e] |= flag_degenerate;
      if (c.id == 1) {
        out.alpha[e] = solid ? -(gain.value - cbar) : -(cbar - gain.value);
      } else {
        out.alpha[e] = solid ? -(ci + gain.value) : -(ci - gain.value);
      }
    } else {
      const double c_delta = sign * ci;
      const double c_total = cbar + c_delta;
      double alpha = -(cbar / c_total) * ci;
      if (c.steps == 2) {
        Vector z(dim);
        op.apply(eq.u, z);
        const Vector g = (cbar / c_total) * z - f;
        m.apply_inverse(g, vm);
        op.apply(vm, vk);
        const double zg = vm.dot(z);
        const double g0 = vm.dot(g);
        const double g1 = vm.dot(vk);
        const double den = 2.0 * c_total * g1 - zg * zg;
        if (!(den > 1e-14 * std::abs(2.0 * c_total * g1))) {
          out.flags[e] |= flag_degenerate;
        } else {
          const double gain = c_total * g0 * g0 / den;
          alpha += solid ? -gain : gain;
        }
      }
      out.alpha[e] = alpha;
    }
  }
  mask_loaded_connectives(problem, eq.x, out);
  return out;
}

ErrorBounds error_bounds(const ElementOperator& op, int q) {
  require(q >= 1, "series order must be at least 1");
  const double nrm = op.norm();
  const double ci = op.energy();
  ErrorBounds b;
  if (op.solid) {
    if (nrm >= 1.0) {
      fail(ErrorCode::internal_consistency,
           "solid element " + std::to_string(op.element) + " has operator norm " +
               std::to_string(nrm) + " >= 1");
    }
    b.foci = ci * nrm / (1.0 - nrm);
    b.hoci = ci * std::pow(nrm, q) / (1.0 - nrm);
  } else {
    b.foci = ci * nrm / (1.0 + nrm);
    b.hoci = ci * std::pow(nrm, q) / (1.0 + nrm);
  }
  return b;
}

std::vector<double> norm_map(const FemProblem& problem, const Equilibrium& eq,
                             const SelectiveInverse& s) {
  check_equilibrium(problem, eq);
  std::vector<double> out(problem.element_count());
  for (std::size_t e = 0; e < out.size(); ++e) {
    const ElementMatrix& sq = problem.element_variation_sqrt(e);
    DenseMatrix a = sq * s.element_block(problem, e) * sq;
    a = 0.5 * (a + a.transpose()).eval();
    const Vector lambda =
        Eigen::SelfAdjointEigenSolver<DenseMatrix>(a, Eigen::EigenvaluesOnly).eigenvalues();
    out[e] = std::max(lambda.maxCoeff(), 0.0);
  }
  return out;
}

bool is_disconnected(const Mesh& mesh, const DensityVector& x, std::size_t e) {
  if (x.solid(e)) return false;
  for (int other : mesh.neighbors(e)) {
    if (x.solid(static_cast<std::size_t>(other))) return false;
  }
  return true;
}

void zero_disconnected_voids(const Mesh& mesh, const DensityVector& x, SensitivityVector& s) {
  for (std::size_t e = 0; e < s.size(); ++e) {
    if (s.status[e] == SensitivityStatus::computed && is_disconnected(mesh, x, e)) {
      s.force(e, SensitivityStatus::forced_zero_disconnected);
    }
  }
}

void zero_voids(const DensityVector& x, SensitivityVector& s) {
  for (std::size_t e = 0; e < s.size(); ++e) {
    if (!x.solid(e)) s.force(e, SensitivityStatus::zeroed_void);
  }
}

bool is_loaded_connective(const FemProblem& problem, const DensityVector& x, std::size_t e) {
  if (!x.solid(e)) return false;
  const Mesh& mesh = problem.mesh();
  const Vector& f = problem.load();
  for (int node : mesh.element(e).nodes) {
    bool loaded = false;
    for (Component c : {Component::x, Component::y}) {
      const int d = mesh.dof(node, c);
      if (d >= 0 && f[d] != 0.0) loaded = true;
    }
    if (!loaded) continue;
    bool alone = true;
    for (int other : mesh.node_elements(node)) {
      if (other != static_cast<int>(e) && x.solid(static_cast<std::size_t>(other))) alone = false;
    }
    if (alone) return true;
  }
  return false;
}

void mask_loaded_connectives(const FemProblem& problem, const DensityVector& x,
                             SensitivityVector& s) {
  for (std::size_t e = 0; e < s.size(); ++e) {
    if (s.status[e] == SensitivityStatus::computed && is_loaded_connective(problem, x, e)) {
      s.status[e] = SensitivityStatus::masked_connective;
    }
  }
}

}  // namespace bintopo
