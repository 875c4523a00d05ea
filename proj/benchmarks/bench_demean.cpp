#include "vaxho/hdfe.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

// Two crossed dimensions shaped like d*i*t and o*t: `n` rows spread over
// n/40 and n/2000 groups.
vaxho::hdfe::FEGroups crossed_groups(std::size_t n) {
  std::mt19937_64 rng(5);
  vaxho::hdfe::FEGroups g;
  const auto g1 = static_cast<std::uint32_t>(std::max<std::size_t>(1, n / 40));
  const auto g2 = static_cast<std::uint32_t>(std::max<std::size_t>(1, n / 2000));
  g.counts = {g1, g2};
  g.ids.assign(2, std::vector<std::uint32_t>(n));
  for (std::size_t k = 0; k < n; ++k) {
    g.ids[0][k] = static_cast<std::uint32_t>(k % g1);
    g.ids[1][k] = static_cast<std::uint32_t>(rng() % g2);
  }
  return g;
}

void BM_WithinDemean(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto groups = crossed_groups(n);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Random(static_cast<Eigen::Index>(n), 3);
  std::size_t iterations = 0;
  for (auto _ : state) {
    auto r = vaxho::hdfe::within_demean(X, groups);
    iterations = r.iterations;
    benchmark::DoNotOptimize(r.values.data());
  }
  state.counters["sweeps"] = static_cast<double>(iterations);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_WithinDemean)->Arg(10'000)->Arg(100'000)->Arg(1'500'000)->Unit(benchmark::kMillisecond);

}  // namespace
