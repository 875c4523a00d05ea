#include "vaxho/iotable.hpp"
#include "vaxho/synth.hpp"

#include <benchmark/benchmark.h>

namespace {

void BM_LeontiefFactorSolve(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto sys = vaxho::synth::tech_system_from(vaxho::synth::random_coefficients(n, 0.6, 0.1, 3));
  const Eigen::MatrixXd F = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(n), 43).cwiseAbs();
  for (auto _ : state) {
    benchmark::DoNotOptimize(vaxho::io::leontief_solve(sys, F));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_LeontiefFactorSolve)->Arg(240)->Arg(1200)->Arg(2408)->Unit(benchmark::kMillisecond);

// Full decomposition of one synthetic year at 43 countries x 56 industries.
void BM_ComputeVax(benchmark::State& state) {
  vaxho::synth::WorldParams p;
  p.countries = 43;
  p.industries = static_cast<std::size_t>(state.range(0));
  p.years = 1;
  const auto year = vaxho::synth::generate_year(vaxho::synth::complete(p), 0);
  for (auto _ : state) {
    const auto sys = vaxho::io::build_tech_system(year.table);
    benchmark::DoNotOptimize(vaxho::io::compute_vax(sys, year.table));
  }
}
BENCHMARK(BM_ComputeVax)->Arg(14)->Arg(56)->Unit(benchmark::kMillisecond);

}  // namespace
