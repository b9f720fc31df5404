#pragma once

#include "bintopo/mesh_fem.hpp"
#include "bintopo/selective_inverse.hpp"
#include "bintopo/sparse_linalg.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace bintopo {

enum class SensitivityStatus : std::uint8_t {
  computed,
  forced_zero_disconnected,
  masked_connective,
  zeroed_void,
};

const char* to_string(SensitivityStatus s);

// Diagnostic bits attached to individual elements; they never abort a run.
enum SensitivityFlag : std::uint8_t {
  flag_none = 0,
  flag_diverged = 1,       // void series with norm >= 1
  flag_breakdown = 2,      // pcg stopped early on a degenerate direction
  flag_near_singular = 4,  // I - A within 1e-12 of singular
  flag_singular = 8,       // perturbed system could not be factorized
  flag_degenerate = 16,    // zero denominator in a closed form
};

// alpha_i = C(x, x_i = 1) - C(x, x_i = 0).
struct SensitivityVector {
  std::vector<double> alpha;
  std::vector<SensitivityStatus> status;
  std::vector<std::uint8_t> flags;

  SensitivityVector() = default;
  explicit SensitivityVector(std::size_t n)
      : alpha(n, 0.0), status(n, SensitivityStatus::computed), flags(n, flag_none) {}

  std::size_t size() const { return alpha.size(); }
  void force(std::size_t i, SensitivityStatus s) {
    alpha[i] = 0.0;
    status[i] = s;
  }
};

// A = sqrt(K_i) Kbar^{-1} sqrt(K_i), v = sqrt(K_i) u, with A = Phi Lambda Phi^T
// and w = Phi^T v.
struct ElementOperator {
  std::size_t element = 0;
  bool solid = true;
  DenseMatrix a;
  Vector v;
  Vector lambda;
  DenseMatrix phi;
  Vector w;

  double norm() const { return lambda.size() ? std::max(lambda.maxCoeff(), 0.0) : 0.0; }
  // C_i = 1/2 u^T K_i u
  double energy() const { return 0.5 * v.squaredNorm(); }
};

ElementOperator element_operator(const FemProblem& problem, const Equilibrium& eq,
                                 const SelectiveInverse& s, std::size_t e);

// B = sqrt(K_i) R^{-1} sqrt(K_i) with R = Kbar + K_i for a void element and
// Kbar - K_i for a solid one; uses its own factorization of R.
struct ComplementOperator {
  DenseMatrix b;
  Vector lambda;
  double norm() const { return lambda.size() ? std::max(lambda.maxCoeff(), 0.0) : 0.0; }
};

ComplementOperator complement_operator(const FemProblem& problem, const Equilibrium& eq,
                                       std::size_t e);

// Sum of the first q series terms, -1/2 sum_{a=1..q} v^T (+-A)^{a-1} v.
std::vector<double> hoci_partial_sums(const ElementOperator& op, int q);

// Guard for methods that are quadratic in the element count.
inline constexpr std::size_t kLargeProblemElements = 10000;
void check_size_guard(std::size_t elements, bool allow_large, const std::string& what);

SensitivityVector sensitivity_naive(const FemProblem& problem, const Equilibrium& eq);
SensitivityVector sensitivity_foci(const FemProblem& problem, const Equilibrium& eq, double eps_v);

enum class VoidMode { zero, compute };
SensitivityVector sensitivity_hoci(const FemProblem& problem, const Equilibrium& eq,
                                   const SelectiveInverse& s, int q, VoidMode void_mode);
SensitivityVector sensitivity_woodbury(const FemProblem& problem, const Equilibrium& eq,
                                       const SelectiveInverse& s);

enum class CgmPreconditioner { none, jacobi, exact };
enum class CgmEstimator { automatic, load, displacement };

struct CgmCase {
  int id = 2;  // 1: u0 = 0, d0 = M^-1 f; 2: u0 = u, d0 = -M^-1 dK u; 3: u0 = 0, d0 = u
  CgmPreconditioner preconditioner = CgmPreconditioner::jacobi;
  int steps = 2;
  // automatic picks the load form for cases 1 and 3 and the displacement
  // form for case 2.
  CgmEstimator estimator = CgmEstimator::automatic;
  double tau = 0.0;

  void validate() const;
  CgmEstimator resolved_estimator() const;
};

SensitivityVector sensitivity_cgm(const FemProblem& problem, const Equilibrium& eq,
                                  const CgmCase& c);
// Unrolled one- and two-step forms of sensitivity_cgm.
SensitivityVector cgm_closed_form(const FemProblem& problem, const Equilibrium& eq,
                                  const CgmCase& c);

struct ErrorBounds {
  double foci = 0.0;  // linear interpolation with eps_v = 1, i.e. q = 1
  double hoci = 0.0;  // truncation after q terms
};

// Void: C_i n^q / (1 + n). Solid: C_i n^q / (1 - n), which requires n < 1.
ErrorBounds error_bounds(const ElementOperator& op, int q);

std::vector<double> norm_map(const FemProblem& problem, const Equilibrium& eq,
                             const SelectiveInverse& s);

// Void element with no solid element among its node neighbours.
bool is_disconnected(const Mesh& mesh, const DensityVector& x, std::size_t e);
void zero_disconnected_voids(const Mesh& mesh, const DensityVector& x, SensitivityVector& s);
void zero_voids(const DensityVector& x, SensitivityVector& s);

// Solid element that alone holds a loaded node.
bool is_loaded_connective(const FemProblem& problem, const DensityVector& x, std::size_t e);
void mask_loaded_connectives(const FemProblem& problem, const DensityVector& x,
                             SensitivityVector& s);

inline constexpr double kConnectiveThreshold = 1e-9;

}  // namespace bintopo
