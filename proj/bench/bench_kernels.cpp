#include "hmflow/flow.hpp"
#include "hmflow/kernels.hpp"
#include "hmflow/scenarios.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace hmf;

namespace {

SphereMap input(int level) {
  ScenarioSpec s;
  s.kind = ScenarioKind::PerturbedMobius;
  s.level = level;
  s.eps = 0.1;
  s.seed = 1;
  return generate(s);
}

template <auto Kernel>
void bm_field(benchmark::State& st) {
  const auto u = input(static_cast<int>(st.range(0)));
  std::vector<Vec3> out(u.size());
  for (auto _ : st) {
    Kernel(u.mesh(), u.values(), out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(u.size()));
}

template <auto Kernel>
void bm_reduce(benchmark::State& st) {
  const auto u = input(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(Kernel(u.mesh(), u.values()));
  st.SetItemsProcessed(st.iterations() * static_cast<long>(u.size()));
}

template <auto Kernel>
void bm_update(benchmark::State& st) {
  const auto u = input(static_cast<int>(st.range(0)));
  std::vector<Vec3> tau(u.size()), out(u.size());
  kernels::serial::tension(u.mesh(), u.values(), tau);
  for (auto _ : st) benchmark::DoNotOptimize(Kernel(u.values(), tau, 1e-4, out));
  st.SetItemsProcessed(st.iterations() * static_cast<long>(u.size()));
}

void bm_step(benchmark::State& st, Scheme scheme) {
  const auto u = input(static_cast<int>(st.range(0)));
  FlowConfig cfg;
  cfg.scheme = scheme;
  Stepper stepper(u.mesh_ptr(), scheme, cfg.resolved_dt(u.mesh()));
  const auto tau = tension(u).values;
  for (auto _ : st) benchmark::DoNotOptimize(stepper.step(u, tau));
}

}  // namespace

#define LEVELS ->DenseRange(4, 7)->Unit(benchmark::kMicrosecond)

BENCHMARK(bm_field<kernels::serial::laplacian>)->Name("laplacian/serial") LEVELS;
BENCHMARK(bm_field<kernels::omp::laplacian>)->Name("laplacian/omp") LEVELS;
BENCHMARK(bm_field<kernels::serial::tension>)->Name("tension/serial") LEVELS;
BENCHMARK(bm_field<kernels::omp::tension>)->Name("tension/omp") LEVELS;
BENCHMARK(bm_reduce<kernels::serial::edge_form>)->Name("energy/serial") LEVELS;
BENCHMARK(bm_reduce<kernels::omp::edge_form>)->Name("energy/omp") LEVELS;
BENCHMARK(bm_reduce<kernels::serial::solid_angle_sum>)->Name("degree/serial") LEVELS;
BENCHMARK(bm_reduce<kernels::omp::solid_angle_sum>)->Name("degree/omp") LEVELS;
BENCHMARK(bm_update<kernels::serial::explicit_update>)->Name("explicit_update/serial") LEVELS;
BENCHMARK(bm_update<kernels::omp::explicit_update>)->Name("explicit_update/omp") LEVELS;
BENCHMARK_CAPTURE(bm_step, explicit, Scheme::Explicit) LEVELS;
BENCHMARK_CAPTURE(bm_step, semi_implicit, Scheme::SemiImplicit) LEVELS;

BENCHMARK_MAIN();
