// Timings on the fully solid tie-beam; the argument is the mesh scale
// (100 * scale^2 elements).
#include "bintopo/bench/problems.hpp"
#include "bintopo/fvsa.hpp"
#include "bintopo/selective_inverse.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace bintopo;

struct Setup {
  bench::Benchmark b;
  Equilibrium eq;
  explicit Setup(int scale)
      : b(bench::tie_beam(scale)), eq(solve_equilibrium(b.problem, b.initial)) {}
};

void BM_Equilibrium(benchmark::State& st) {
  const auto b = bench::tie_beam(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(solve_equilibrium(b.problem, b.initial).compliance);
}

void BM_Foci(benchmark::State& st) {
  Setup s(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(sensitivity_foci(s.b.problem, s.eq, 1.0));
}

void BM_SelectiveInverse(benchmark::State& st) {
  Setup s(static_cast<int>(st.range(0)));
  for (auto _ : st) {
    benchmark::DoNotOptimize(selective_inverse_full(s.eq.factor, s.b.problem.pattern()));
  }
}

void BM_Woodbury(benchmark::State& st) {
  Setup s(static_cast<int>(st.range(0)));
  const auto inv = selective_inverse_full(s.eq.factor, s.b.problem.pattern());
  for (auto _ : st) benchmark::DoNotOptimize(sensitivity_woodbury(s.b.problem, s.eq, inv));
}

void BM_Hoci5(benchmark::State& st) {
  Setup s(static_cast<int>(st.range(0)));
  const auto inv = selective_inverse_full(s.eq.factor, s.b.problem.pattern());
  for (auto _ : st) {
    benchmark::DoNotOptimize(sensitivity_hoci(s.b.problem, s.eq, inv, 5, VoidMode::zero));
  }
}

void BM_Cgm(benchmark::State& st) {
  Setup s(static_cast<int>(st.range(0)));
  const CgmCase c{2, CgmPreconditioner::jacobi, 2};
  for (auto _ : st) benchmark::DoNotOptimize(sensitivity_cgm(s.b.problem, s.eq, c));
}

void BM_CgmClosedForm(benchmark::State& st) {
  Setup s(static_cast<int>(st.range(0)));
  const CgmCase c{2, CgmPreconditioner::jacobi, 2};
  for (auto _ : st) benchmark::DoNotOptimize(cgm_closed_form(s.b.problem, s.eq, c));
}

void BM_SelectiveUpdate(benchmark::State& st) {
  Setup s(static_cast<int>(st.range(0)));
  const auto inv = selective_inverse_full(s.eq.factor, s.b.problem.pattern());
  const auto change = LowRankChange::from_elements(s.b.problem, {{s.b.problem.element_count() / 2, -1}});
  for (auto _ : st) benchmark::DoNotOptimize(selective_inverse_update(inv, s.eq.factor, change));
}

void BM_Naive(benchmark::State& st) {
  Setup s(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(sensitivity_naive(s.b.problem, s.eq));
}

}  // namespace

BENCHMARK(BM_Equilibrium)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Foci)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SelectiveInverse)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Woodbury)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Hoci5)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Cgm)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CgmClosedForm)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SelectiveUpdate)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Naive)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
