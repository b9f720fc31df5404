#include "bintopo/bench/studies.hpp"

#include "bintopo/bench/io.hpp"
#include "bintopo/error.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

namespace bintopo::bench {

namespace {

std::string join(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

const char* precond_name(CgmPreconditioner p) {
  switch (p) {
    case CgmPreconditioner::none: return "none";
    case CgmPreconditioner::jacobi: return "jacobi";
    case CgmPreconditioner::exact: return "exact";
  }
  return "?";
}

bool counts(const SensitivityVector& exact, const DensityVector& x, std::size_t e) {
  return x.solid(e) && exact.status[e] != SensitivityStatus::masked_connective;
}

}  // namespace

SensitivityVector exact_sensitivities(const FemProblem& problem, const Equilibrium& eq,
                                      const std::string& method) {
  if (method == "naive") return sensitivity_naive(problem, eq);
  require(method == "woodbury", "exact method must be woodbury or naive");
  const SelectiveInverse s = selective_inverse_full(eq.factor, eq.k);
  return sensitivity_woodbury(problem, eq, s);
}

double relative_l2_error(const SensitivityVector& estimate, const SensitivityVector& exact,
                         const DensityVector& x) {
  double num = 0.0, den = 0.0;
  for (std::size_t e = 0; e < x.size(); ++e) {
    if (!counts(exact, x, e)) continue;
    const double d = estimate.alpha[e] - exact.alpha[e];
    num += d * d;
    den += exact.alpha[e] * exact.alpha[e];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

OptimizeReport run_optimize(const RunConfig& config, const std::string& out_dir) {
  Benchmark b = make_benchmark(config);
  const auto m = config.optimizer.sensitivity.method;
  if (m == SensitivityMethod::naive || m == SensitivityMethod::woodbury ||
      m == SensitivityMethod::hoci) {
    check_size_guard(b.problem.element_count(), config.allow_large,
                     std::string("optimization with ") + to_string(m));
  }
  const DensityVector x0 = initial_topology(config, b);

  OptimizeReport rep;
  rep.problem = b.name;
  rep.state = optimize(b.problem, config.optimizer, x0);
  const bool doubled = config.full_beam && config.problem == "mbb";
  rep.reported_best = (doubled ? 2.0 : 1.0) * rep.state.best_compliance;
  if (out_dir.empty()) return rep;

  ensure_directory(out_dir);
  {
    CsvWriter w(join(out_dir, "history.csv"), "bintopo history v1",
                {"iteration", "volume_fraction", "compliance"});
    for (const auto& h : rep.state.history) {
      w.cell(h.iteration).cell(h.volume_fraction).cell(h.compliance);
      w.end_row();
    }
    w.close();
  }
  write_topology_csv(join(out_dir, "topology.csv"), b.problem.mesh(), *rep.state.best_x);
  write_pgm(join(out_dir, "topology.pgm"), b.problem.mesh(), *rep.state.best_x);

  std::ostringstream s;
  s << "problem: " << b.name << '\n';
  s << "elements: " << b.problem.element_count() << '\n';
  s << "method: " << config.optimizer.sensitivity.label() << '\n';
  s << "best_compliance: " << format_number(rep.state.best_compliance) << '\n';
  if (doubled) s << "best_compliance_full_beam: " << format_number(rep.reported_best) << '\n';
  s << "best_iteration: " << rep.state.best_iteration << '\n';
  s << "iterations: " << rep.state.history.size() << '\n';
  s << "stop_reason: " << rep.state.stop_reason << '\n';
  s << "best_volume_fraction: " << format_number(rep.state.best_x->volume_fraction()) << '\n';
  if (!rep.state.moves.empty()) {
    const auto& first = rep.state.moves.front();
    const auto& last = rep.state.moves.back();
    s << "constraints VV|TV_max: " << first.vv << '|' << last.vv << "  " << first.tv_max << '|'
      << last.tv_max << '\n';
  }
  write_text(join(out_dir, "summary.txt"), s.str());
  return rep;
}

CompareReport run_sensitivity_compare(const RunConfig& config, const std::string& out_dir) {
  Benchmark b = make_benchmark(config);
  check_size_guard(b.problem.element_count(), config.allow_large, "exact sensitivities");
  CompareReport rep;
  rep.x = initial_topology(config, b);
  const Equilibrium eq = solve_equilibrium(b.problem, rep.x);
  rep.exact = exact_sensitivities(b.problem, eq, config.exact_method);

  std::optional<SelectiveInverse> s;
  for (const auto& m : config.compare_methods) {
    if (m.needs_selective_inverse() && !s) s = selective_inverse_full(eq.factor, eq.k);
    rep.labels.push_back(m.label());
    rep.estimates.push_back(evaluate_sensitivities(b.problem, eq, m, s ? &*s : nullptr));
    rep.l2_error.push_back(relative_l2_error(rep.estimates.back(), rep.exact, rep.x));
  }
  if (out_dir.empty()) return rep;

  ensure_directory(out_dir);
  std::vector<std::string> cols = {"element", "x", "status", "exact"};
  for (const auto& l : rep.labels) {
    cols.push_back(l);
    cols.push_back(l + "_rel_error");
  }
  {
    CsvWriter w(join(out_dir, "compare.csv"), "bintopo compare v1", cols);
    for (std::size_t e = 0; e < rep.x.size(); ++e) {
      w.cell(e).cell(rep.x.solid(e) ? 1 : 0).cell(to_string(rep.exact.status[e]));
      w.cell(rep.exact.alpha[e]);
      for (const auto& est : rep.estimates) {
        w.cell(est.alpha[e]);
        if (rep.exact.alpha[e] != 0.0) {
          w.cell(std::abs(est.alpha[e] - rep.exact.alpha[e]) / std::abs(rep.exact.alpha[e]));
        } else {
          w.empty();
        }
      }
      w.end_row();
    }
    w.close();
  }
  {
    CsvWriter w(join(out_dir, "compare_summary.csv"), "bintopo compare-summary v1",
                {"method", "relative_l2_error_solids"});
    for (std::size_t k = 0; k < rep.labels.size(); ++k) {
      w.cell(rep.labels[k]).cell(rep.l2_error[k]);
      w.end_row();
    }
    w.close();
  }
  return rep;
}

std::vector<StepsRow> cgm_steps_for_topology(const FemProblem& problem, const Equilibrium& eq,
                                             const SensitivityVector& exact, int max_steps) {
  const std::size_t n = problem.element_count();
  const DensityVector& x = eq.x;
  std::vector<std::size_t> solids;
  for (std::size_t e = 0; e < n; ++e) {
    if (counts(exact, x, e)) solids.push_back(e);
  }
  std::size_t lowest = n;
  for (std::size_t e : solids) {
    if (lowest == n || std::abs(exact.alpha[e]) < std::abs(exact.alpha[lowest])) lowest = e;
  }
  const Vector& f = problem.load();
  const Index dim = problem.dof_count();
  const IdentityPreconditioner identity;
  const JacobiPreconditioner jacobi = jacobi_preconditioner(eq.k);

  std::vector<StepsRow> rows;
  for (int cgm_case : {2, 3}) {
    for (CgmPreconditioner pk : {CgmPreconditioner::none, CgmPreconditioner::jacobi}) {
      const Preconditioner& m =
          pk == CgmPreconditioner::jacobi ? static_cast<const Preconditioner&>(jacobi) : identity;
      StepsRow row;
      row.cgm_case = cgm_case;
      row.preconditioner = pk;

      std::vector<CgmState> states;
      std::vector<char> live(solids.size(), 1);
      states.reserve(solids.size());
      for (std::size_t e : solids) {
        const auto dofs = problem.element_dofs(e);
        OverlayOperator op(eq.k, dofs, problem.element_variation(e), -1.0);
        Vector d0;
        if (cgm_case == 2) {
          // -dK u with dK = -K_e for a solid
          Vector b = Vector::Zero(dim);
          Vector ue(static_cast<Index>(dofs.size()));
          for (std::size_t a = 0; a < dofs.size(); ++a) ue[static_cast<Index>(a)] = eq.u[dofs[a]];
          const Vector ke = problem.element_variation(e) * ue;
          for (std::size_t a = 0; a < dofs.size(); ++a) b[dofs[a]] = ke[static_cast<Index>(a)];
          m.apply_inverse(b, d0);
          states.push_back(pcg_start(op, f, eq.u, d0));
        } else {
          states.push_back(pcg_start(op, f, Vector::Zero(dim), eq.u));
        }
      }

      SensitivityVector est(n);
      const int cap = max_steps > 0 ? max_steps : static_cast<int>(dim);
      for (int step = 0; step <= cap; ++step) {
        if (step > 0) {
          for (std::size_t k = 0; k < solids.size(); ++k) {
            if (!live[k]) continue;
            const std::size_t e = solids[k];
            OverlayOperator op(eq.k, problem.element_dofs(e), problem.element_variation(e), -1.0);
            try {
              if (pcg_advance(op, m, states[k], 1) == 0) live[k] = 0;
            } catch (const Error& err) {
              if (err.code() != ErrorCode::breakdown) throw;
              live[k] = 0;
            }
          }
        }
        for (std::size_t k = 0; k < solids.size(); ++k) {
          const std::size_t e = solids[k];
          const Vector& um = states[k].u;
          double dc = 0.0;
          if (cgm_case == 2) {
            const auto dofs = problem.element_dofs(e);
            Vector ue(static_cast<Index>(dofs.size())), ume(static_cast<Index>(dofs.size()));
            for (std::size_t a = 0; a < dofs.size(); ++a) {
              ue[static_cast<Index>(a)] = eq.u[dofs[a]];
              ume[static_cast<Index>(a)] = um[dofs[a]];
            }
            dc = 0.5 * ue.dot(problem.element_variation(e) * ume);
          } else {
            dc = 0.5 * f.dot(um - eq.u);
          }
          est.alpha[e] = -dc;
        }
        const double err = relative_l2_error(est, exact, x);
        if (row.m_l2_below_50 < 0 && err < 0.5) row.m_l2_below_50 = step;
        if (row.m_l2_below_10 < 0 && err < 0.1) row.m_l2_below_10 = step;
        if (row.m_lowest_classified < 0 && lowest < n) {
          std::size_t guess = n;
          for (std::size_t e : solids) {
            if (guess == n || std::abs(est.alpha[e]) < std::abs(est.alpha[guess])) guess = e;
          }
          if (guess == lowest) row.m_lowest_classified = step;
        }
        if (row.m_l2_below_50 >= 0 && row.m_l2_below_10 >= 0 && row.m_lowest_classified >= 0) break;
        bool any = false;
        for (char l : live) any = any || l;
        if (!any) break;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<StepsRow> run_cgm_steps_study(const RunConfig& config, const std::string& out_dir) {
  Benchmark b = make_benchmark(config);
  check_size_guard(b.problem.element_count(), config.allow_large, "exact sensitivities");
  OptimizerConfig oc = config.optimizer;
  oc.sensitivity.method = SensitivityMethod::woodbury;

  std::vector<std::pair<int, DensityVector>> visited;
  std::vector<SensitivityVector> exact;
  optimize(b.problem, oc, initial_topology(config, b), [&](const IterationView& v) {
    visited.emplace_back(v.iteration, v.eq.x);
    exact.push_back(v.raw);
  });

  std::vector<StepsRow> rows;
  for (std::size_t k = 0; k < visited.size(); ++k) {
    const Equilibrium eq = solve_equilibrium(b.problem, visited[k].second);
    for (StepsRow r : cgm_steps_for_topology(b.problem, eq, exact[k], config.max_cgm_steps)) {
      r.iteration = visited[k].first;
      rows.push_back(r);
    }
  }
  if (out_dir.empty()) return rows;

  ensure_directory(out_dir);
  // Step 0 is the starting point itself; for case 2 that is the first-order
  // estimate. -1 means the criterion was not met within max_cgm_steps.
  CsvWriter w(join(out_dir, "steps.csv"), "bintopo cgm-steps v1 (m=0 is the starting estimate; -1 = not reached)",
              {"iteration", "case", "preconditioner", "m_l2_below_50", "m_l2_below_10",
               "m_lowest_classified"});
  for (const auto& r : rows) {
    w.cell(r.iteration).cell(r.cgm_case).cell(precond_name(r.preconditioner));
    w.cell(r.m_l2_below_50).cell(r.m_l2_below_10).cell(r.m_lowest_classified);
    w.end_row();
  }
  w.close();
  return rows;
}

NormReport run_norm_study(const RunConfig& config, const std::string& out_dir) {
  Benchmark b = make_benchmark(config);
  check_size_guard(b.problem.element_count(), config.allow_large, "selective inverse");
  NormReport rep;
  rep.x = initial_topology(config, b);
  const Equilibrium eq = solve_equilibrium(b.problem, rep.x);
  const SelectiveInverse s = selective_inverse_full(eq.factor, eq.k);
  rep.norm_a = norm_map(b.problem, eq, s);
  rep.norm_b.assign(rep.norm_a.size(), std::numeric_limits<double>::quiet_NaN());
  if (config.problem == "appendix_b_4x4") {
    for (std::size_t e = 0; e < rep.x.size(); ++e) {
      if (!rep.x.solid(e)) rep.norm_b[e] = complement_operator(b.problem, eq, e).norm();
    }
  }
  double sum = 0.0;
  for (double v : rep.norm_a) sum += v;
  rep.mean_a = sum / static_cast<double>(rep.norm_a.size());
  if (out_dir.empty()) return rep;

  ensure_directory(out_dir);
  {
    CsvWriter w(join(out_dir, "norms.csv"), "bintopo norms v1",
                {"element", "ex", "ey", "x", "norm_a", "norm_b"});
    for (std::size_t e = 0; e < rep.x.size(); ++e) {
      const Element& el = b.problem.mesh().element(e);
      w.cell(e).cell(el.ex).cell(el.ey).cell(rep.x.solid(e) ? 1 : 0).cell(rep.norm_a[e]);
      if (std::isnan(rep.norm_b[e])) {
        w.empty();
      } else {
        w.cell(rep.norm_b[e]);
      }
      w.end_row();
    }
    w.close();
  }
  {
    CsvWriter w(join(out_dir, "norms_summary.csv"), "bintopo norms-summary v1",
                {"elements", "mean_norm_a"});
    w.cell(rep.x.size()).cell(rep.mean_a);
    w.end_row();
    w.close();
  }
  return rep;
}

}  // namespace bintopo::bench
