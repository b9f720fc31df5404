#pragma once

#include "bintopo/fvsa.hpp"
#include "bintopo/mesh_fem.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace bintopo {

struct MoveConstraints {
  int vv = 0;      // required volume change
  int tv_max = 0;  // switched-element budget
};

enum class SensitivityMethod { naive, foci, foci_s, hoci, woodbury, cgm };

const char* to_string(SensitivityMethod m);

struct SensitivityConfig {
  SensitivityMethod method = SensitivityMethod::cgm;
  double eps_v = 1e-6;             // foci
  int hoci_order = 3;              // hoci
  CgmCase cgm;                     // cgm
  VoidMode void_mode = VoidMode::zero;  // hoci and cgm

  bool needs_selective_inverse() const {
    return method == SensitivityMethod::hoci || method == SensitivityMethod::woodbury;
  }
  // Short label such as "cgm-2J-s".
  std::string label() const;
};

// Raw sensitivities of one topology. `s` is required for hoci and woodbury.
SensitivityVector evaluate_sensitivities(const FemProblem& problem, const Equilibrium& eq,
                                         const SensitivityConfig& config,
                                         const SelectiveInverse* s = nullptr);

struct OptimizerConfig {
  double er = 0.01;
  double ar_max = 0.02;
  double vf_target = 0.5;
  std::optional<int> tv_max;  // replaces the rate-derived budget when set
  double filter_radius = 0.0;
  bool momentum = true;
  int patience = 10;
  int max_iterations = 1000;
  bool zero_disconnected = true;
  int refresh_interval = 50;  // full selective inverse every this many updates
  SensitivityConfig sensitivity;

  void validate() const;
  int target_volume(std::size_t n) const;
};

MoveConstraints schedule(std::size_t n, const OptimizerConfig& config, int volume);

// Minimizes sum alpha_i y_i under the move constraints by ranking.
VariationVector solve_subproblem(const SensitivityVector& alpha, const DensityVector& x,
                                 const MoveConstraints& mc);

class ConicFilter {
 public:
  ConicFilter(const Mesh& mesh, double radius);
  SensitivityVector apply(const SensitivityVector& alpha) const;

 private:
  struct Weight {
    int j;
    double w;
  };
  std::vector<std::vector<Weight>> weights_;
};

SensitivityVector conic_filter(const Mesh& mesh, const SensitivityVector& alpha, double radius);

// Equal-weight running average of filtered sensitivities.
class Momentum {
 public:
  SensitivityVector blend(const SensitivityVector& filtered);
  bool empty() const { return buffer_.empty(); }
  const std::vector<double>& buffer() const { return buffer_; }

 private:
  std::vector<double> buffer_;
};

SensitivityVector momentum_blend(const SensitivityVector& filtered, std::vector<double>& buffer);

struct HistoryRow {
  int iteration = 0;
  double volume_fraction = 0.0;
  double compliance = 0.0;
};

struct OptimizerState {
  DensityVector x;
  double compliance = 0.0;
  std::optional<DensityVector> best_x;
  double best_compliance = 0.0;
  int best_iteration = -1;
  std::vector<double> momentum_buffer;
  int stale_iterations = 0;
  std::vector<HistoryRow> history;
  std::vector<MoveConstraints> moves;
  std::string stop_reason;
};

struct IterationView {
  int iteration;
  const Equilibrium& eq;
  const SensitivityVector& raw;
  const SensitivityVector& final;
  const MoveConstraints& moves;
};

using IterationObserver = std::function<void(const IterationView&)>;

OptimizerState optimize(const FemProblem& problem, const OptimizerConfig& config,
                        const DensityVector& x_initial, const IterationObserver& observer = {});

// True when every loaded node reaches a supported node through solid elements.
bool load_path_connected(const FemProblem& problem, const DensityVector& x);

}  // namespace bintopo
