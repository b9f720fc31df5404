#pragma once

#include "bintopo/bench/run_config.hpp"

#include <string>
#include <vector>

namespace bintopo::bench {

// Exact sensitivities through the selected exact method ("woodbury" or "naive").
SensitivityVector exact_sensitivities(const FemProblem& problem, const Equilibrium& eq,
                                      const std::string& method);

// ||est - exact|| / ||exact|| over solid elements that are not masked in `exact`.
double relative_l2_error(const SensitivityVector& estimate, const SensitivityVector& exact,
                         const DensityVector& x);

struct OptimizeReport {
  std::string problem;
  OptimizerState state;
  double reported_best = 0.0;  // doubled for the full MBB beam when requested
};

// Writes history.csv, topology.csv, topology.pgm and summary.txt unless
// out_dir is empty.
OptimizeReport run_optimize(const RunConfig& config, const std::string& out_dir);

struct CompareReport {
  DensityVector x;
  SensitivityVector exact;
  std::vector<std::string> labels;
  std::vector<SensitivityVector> estimates;
  std::vector<double> l2_error;
};

// Writes compare.csv and compare_summary.csv.
CompareReport run_sensitivity_compare(const RunConfig& config, const std::string& out_dir);

struct StepsRow {
  int iteration = 0;
  int cgm_case = 2;
  CgmPreconditioner preconditioner = CgmPreconditioner::none;
  // Smallest step count meeting each criterion, -1 when never met.
  int m_l2_below_50 = -1;
  int m_l2_below_10 = -1;
  int m_lowest_classified = -1;
};

// Exact-sensitivity optimization of the configured problem; every visited
// topology is re-analysed with cases 2 and 3, with and without Jacobi.
// Writes steps.csv.
std::vector<StepsRow> run_cgm_steps_study(const RunConfig& config, const std::string& out_dir);

// Steps needed on one topology.
std::vector<StepsRow> cgm_steps_for_topology(const FemProblem& problem, const Equilibrium& eq,
                                             const SensitivityVector& exact, int max_steps);

struct NormReport {
  DensityVector x;
  std::vector<double> norm_a;
  std::vector<double> norm_b;  // voids of appendix_b_4x4 only, NaN elsewhere
  double mean_a = 0.0;
};

// Writes norms.csv and norms_summary.csv.
NormReport run_norm_study(const RunConfig& config, const std::string& out_dir);

}  // namespace bintopo::bench
