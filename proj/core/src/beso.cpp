#include "bintopo/beso.hpp"

#include "bintopo/error.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace bintopo {

const char* to_string(SensitivityMethod m) {
  switch (m) {
    case SensitivityMethod::naive: return "naive";
    case SensitivityMethod::foci: return "foci";
    case SensitivityMethod::foci_s: return "foci_s";
    case SensitivityMethod::hoci: return "hoci";
    case SensitivityMethod::woodbury: return "woodbury";
    case SensitivityMethod::cgm: return "cgm";
  }
  return "unknown";
}

std::string SensitivityConfig::label() const {
  switch (method) {
    case SensitivityMethod::hoci:
      return "hoci-" + std::to_string(hoci_order) + (void_mode == VoidMode::zero ? "-s" : "");
    case SensitivityMethod::cgm: {
      std::string s = "cgm" + std::to_string(cgm.id) + "-" + std::to_string(cgm.steps);
      if (cgm.preconditioner == CgmPreconditioner::jacobi) s += "J";
      if (cgm.preconditioner == CgmPreconditioner::exact) s += "K";
      if (void_mode == VoidMode::zero) s += "-s";
      return s;
    }
    default:
      return to_string(method);
  }
}

SensitivityVector evaluate_sensitivities(const FemProblem& problem, const Equilibrium& eq,
                                         const SensitivityConfig& config,
                                         const SelectiveInverse* s) {
  if (config.needs_selective_inverse()) {
    require(s != nullptr, std::string(to_string(config.method)) + " needs a selective inverse");
  }
  switch (config.method) {
    case SensitivityMethod::naive:
      return sensitivity_naive(problem, eq);
    case SensitivityMethod::foci:
      return sensitivity_foci(problem, eq, config.eps_v);
    case SensitivityMethod::foci_s: {
      auto out = sensitivity_foci(problem, eq, 0.0);
      zero_voids(eq.x, out);
      return out;
    }
    case SensitivityMethod::hoci:
      return sensitivity_hoci(problem, eq, *s, config.hoci_order, config.void_mode);
    case SensitivityMethod::woodbury:
      return sensitivity_woodbury(problem, eq, *s);
    case SensitivityMethod::cgm: {
      const CgmCase& c = config.cgm;
      const bool closed = (c.steps == 1 || c.steps == 2) && c.tau == 0.0 &&
                          !(c.id == 3 && c.resolved_estimator() != CgmEstimator::load);
      auto out = closed ? cgm_closed_form(problem, eq, c) : sensitivity_cgm(problem, eq, c);
      if (config.void_mode == VoidMode::zero) zero_voids(eq.x, out);
      return out;
    }
  }
  fail(ErrorCode::invalid_argument, "unknown sensitivity method");
}

void OptimizerConfig::validate() const {
  require(er >= 0.0 && er <= 1.0, "er must lie in [0, 1]");
  require(ar_max >= 0.0 && ar_max <= 1.0, "ar_max must lie in [0, 1]");
  require(vf_target > 0.0 && vf_target <= 1.0, "vf_target must lie in (0, 1]");
  require(!tv_max || *tv_max >= 0, "tv_max must be nonnegative");
  require(filter_radius >= 0.0, "filter_radius must be nonnegative");
  require(patience >= 1, "patience must be at least 1");
  require(max_iterations >= 0, "max_iterations must be nonnegative");
  require(refresh_interval >= 1, "refresh_interval must be at least 1");
  require(sensitivity.eps_v >= 0.0 && sensitivity.eps_v <= 1.0, "eps_v must lie in [0, 1]");
  require(sensitivity.hoci_order >= 1, "hoci_order must be at least 1");
  if (sensitivity.method == SensitivityMethod::cgm) sensitivity.cgm.validate();
}

int OptimizerConfig::target_volume(std::size_t n) const {
  return static_cast<int>(std::lround(vf_target * static_cast<double>(n)));
}

MoveConstraints schedule(std::size_t n, const OptimizerConfig& config, int volume) {
  const int target = config.target_volume(n);
  const double nn = static_cast<double>(n);
  int step = static_cast<int>(std::lround(nn * config.er));
  if (config.er > 0.0) step = std::max(step, 1);
  MoveConstraints mc;
  if (volume > target) mc.vv = -std::min(step, volume - target);
  if (volume < target) mc.vv = std::min(step, target - volume);
  const int budget = static_cast<int>(std::lround(std::abs(mc.vv) + nn * 2.0 * config.ar_max));
  mc.tv_max = config.tv_max ? *config.tv_max : budget;
  mc.tv_max = std::min<int>(std::max(mc.tv_max, std::abs(mc.vv)), static_cast<int>(n));
  return mc;
}

VariationVector solve_subproblem(const SensitivityVector& alpha, const DensityVector& x,
                                 const MoveConstraints& mc) {
  const std::size_t n = x.size();
  require(alpha.size() == n, "sensitivity vector has the wrong length");
  require(mc.tv_max >= 0, "tv_max must be nonnegative");
  if (std::abs(mc.vv) > mc.tv_max) {
    fail(ErrorCode::infeasible_move, "|VV| = " + std::to_string(std::abs(mc.vv)) +
                                         " exceeds TV_max = " + std::to_string(mc.tv_max));
  }

  std::vector<int> solids, voids;
  for (std::size_t i = 0; i < n; ++i) {
    if (x.solid(i)) {
      if (alpha.status[i] == SensitivityStatus::masked_connective) continue;
      solids.push_back(static_cast<int>(i));
    } else {
      voids.push_back(static_cast<int>(i));
    }
  }
  for (int i : solids) require(std::isfinite(alpha.alpha[i]), "non-finite sensitivity on a solid");
  for (int i : voids) require(std::isfinite(alpha.alpha[i]), "non-finite sensitivity on a void");

  const int removals = std::max(0, -mc.vv);
  const int additions = std::max(0, mc.vv);
  if (removals > static_cast<int>(solids.size())) {
    fail(ErrorCode::infeasible_move, "VV = " + std::to_string(mc.vv) + " but only " +
                                         std::to_string(solids.size()) + " removable solids");
  }
  if (additions > static_cast<int>(voids.size())) {
    fail(ErrorCode::infeasible_move,
         "VV = " + std::to_string(mc.vv) + " but only " + std::to_string(voids.size()) + " voids");
  }

  const auto& a = alpha.alpha;
  std::stable_sort(solids.begin(), solids.end(), [&](int l, int r) {
    return a[l] != a[r] ? a[l] > a[r] : l < r;
  });
  std::stable_sort(voids.begin(), voids.end(), [&](int l, int r) {
    return a[l] != a[r] ? a[l] < a[r] : l < r;
  });

  std::size_t r = static_cast<std::size_t>(removals);
  std::size_t ad = static_cast<std::size_t>(additions);
  while (static_cast<int>(r + ad) + 2 <= mc.tv_max && r < solids.size() && ad < voids.size() &&
         a[voids[ad]] < a[solids[r]]) {
    ++r;
    ++ad;
  }

  VariationVector y(n);
  for (std::size_t k = 0; k < r; ++k) y.set(solids[k], -1, x);
  for (std::size_t k = 0; k < ad; ++k) y.set(voids[k], 1, x);
  return y;
}

ConicFilter::ConicFilter(const Mesh& mesh, double radius) {
  require(radius >= 0.0, "filter radius must be nonnegative");
  const std::size_t n = mesh.element_count();
  weights_.resize(n);
  const int rx = static_cast<int>(std::ceil(radius / mesh.elem_w()));
  const int ry = static_cast<int>(std::ceil(radius / mesh.elem_h()));
  for (std::size_t i = 0; i < n; ++i) {
    const Element& el = mesh.element(i);
    const Eigen::Vector2d ci = mesh.centroid(i);
    for (int dx = -rx; dx <= rx; ++dx) {
      for (int dy = -ry; dy <= ry; ++dy) {
        const int j = mesh.element_at(el.ex + dx, el.ey + dy);
        if (j < 0) continue;
        const double w = radius - (mesh.centroid(static_cast<std::size_t>(j)) - ci).norm();
        if (w > 0.0) weights_[i].push_back({j, w});
      }
    }
  }
}

SensitivityVector ConicFilter::apply(const SensitivityVector& alpha) const {
  require(alpha.size() == weights_.size(), "sensitivity vector has the wrong length");
  SensitivityVector out = alpha;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    if (alpha.status[i] == SensitivityStatus::masked_connective) continue;
    double num = 0.0, den = 0.0;
    for (const auto& [j, w] : weights_[i]) {
      if (alpha.status[j] == SensitivityStatus::masked_connective) continue;
      num += w * alpha.alpha[j];
      den += w;
    }
    if (den > 0.0) out.alpha[i] = num / den;
    if (out.alpha[i] != 0.0) out.status[i] = SensitivityStatus::computed;
  }
  return out;
}

SensitivityVector conic_filter(const Mesh& mesh, const SensitivityVector& alpha, double radius) {
  return ConicFilter(mesh, radius).apply(alpha);
}

SensitivityVector momentum_blend(const SensitivityVector& filtered, std::vector<double>& buffer) {
  const std::size_t n = filtered.size();
  SensitivityVector out = filtered;
  const bool first = buffer.empty();
  require(first || buffer.size() == n, "momentum buffer has the wrong length");
  if (first) buffer.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (filtered.status[i] == SensitivityStatus::masked_connective) {
      buffer[i] = 0.0;
      continue;
    }
    if (!first) out.alpha[i] = 0.5 * (filtered.alpha[i] + buffer[i]);
    buffer[i] = out.alpha[i];
    if (out.alpha[i] != 0.0) out.status[i] = SensitivityStatus::computed;
  }
  return out;
}

SensitivityVector Momentum::blend(const SensitivityVector& filtered) {
  return momentum_blend(filtered, buffer_);
}

bool load_path_connected(const FemProblem& problem, const DensityVector& x) {
  const Mesh& mesh = problem.mesh();
  const int nodes = mesh.node_count();
  std::vector<char> seen(static_cast<std::size_t>(nodes), 0);
  std::deque<int> queue;
  auto fixed = [&](int node) {
    return mesh.dof(node, Component::x) < 0 || mesh.dof(node, Component::y) < 0;
  };
  for (int nd = 0; nd < nodes; ++nd) {
    if (fixed(nd)) {
      seen[nd] = 1;
      queue.push_back(nd);
    }
  }
  while (!queue.empty()) {
    const int nd = queue.front();
    queue.pop_front();
    for (int e : mesh.node_elements(nd)) {
      if (!x.solid(static_cast<std::size_t>(e))) continue;
      for (int other : mesh.element(e).nodes) {
        if (!seen[other]) {
          seen[other] = 1;
          queue.push_back(other);
        }
      }
    }
  }
  const Vector& f = problem.load();
  for (int nd = 0; nd < nodes; ++nd) {
    for (Component c : {Component::x, Component::y}) {
      const int d = mesh.dof(nd, c);
      if (d >= 0 && f[d] != 0.0 && !seen[nd]) return false;
    }
  }
  return true;
}

OptimizerState optimize(const FemProblem& problem, const OptimizerConfig& config,
                        const DensityVector& x_initial, const IterationObserver& observer) {
  config.validate();
  const std::size_t n = problem.element_count();
  require(x_initial.size() == n, "initial topology has the wrong length");
  const int target = config.target_volume(n);
  const SensitivityConfig& sc = config.sensitivity;

  ConicFilter filter(problem.mesh(), config.filter_radius);
  OptimizerState st;
  st.x = x_initial;
  std::optional<SelectiveInverse> sinv;
  int updates_since_refresh = 0;

  for (int it = 0;; ++it) {
    auto context = [&](const Error& err) {
      return Error(err.code(), "iteration " + std::to_string(it) + ": " + err.what());
    };
    try {
      Equilibrium eq = solve_equilibrium(problem, st.x);
      st.compliance = eq.compliance;
      st.history.push_back({it, st.x.volume_fraction(), eq.compliance});

      const int vol = st.x.volume();
      if (vol == target) {
        if (!st.best_x || eq.compliance < st.best_compliance * (1.0 - 1e-12)) {
          st.best_x = st.x;
          st.best_compliance = eq.compliance;
          st.best_iteration = it;
          st.stale_iterations = 0;
        } else if (++st.stale_iterations >= config.patience) {
          st.stop_reason = "patience";
          break;
        }
      }
      if (it >= config.max_iterations) {
        st.stop_reason = "max_iterations";
        break;
      }

      if (sc.needs_selective_inverse() &&
          (!sinv || updates_since_refresh >= config.refresh_interval)) {
        sinv = selective_inverse_full(eq.factor, eq.k);
        updates_since_refresh = 0;
      }
      SensitivityVector raw =
          evaluate_sensitivities(problem, eq, sc, sinv ? &*sinv : nullptr);
      SensitivityVector work = raw;
      if (config.zero_disconnected) zero_disconnected_voids(problem.mesh(), st.x, work);
      work = filter.apply(work);
      if (config.momentum) work = momentum_blend(work, st.momentum_buffer);

      const MoveConstraints mc = schedule(n, config, vol);
      st.moves.push_back(mc);
      if (observer) observer({it, eq, raw, work, mc});
      const VariationVector y = solve_subproblem(work, st.x, mc);

      if (sinv && !y.is_zero()) {
        std::vector<std::pair<std::size_t, int>> switches;
        for (std::size_t i = 0; i < n; ++i) {
          if (y[i] != 0) switches.emplace_back(i, y[i]);
        }
        try {
          *sinv = selective_inverse_update(*sinv, eq.factor,
                                           LowRankChange::from_elements(problem, switches));
          ++updates_since_refresh;
        } catch (const Error& err) {
          if (err.code() != ErrorCode::singular_core) throw;
          sinv.reset();
        }
      }
      st.x = y.apply(st.x);
    } catch (const Error& err) {
      throw context(err);
    }
  }
  if (!st.best_x) {
    st.best_x = st.x;
    st.best_compliance = st.compliance;
    st.best_iteration = static_cast<int>(st.history.size()) - 1;
  }
  return st;
}

}  // namespace bintopo
