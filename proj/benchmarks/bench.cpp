#include <benchmark/benchmark.h>

#include "nvsense/experiment.hpp"

namespace {

using namespace nvsense;

void BM_eigendecompose(benchmark::State& state) {
  const Constants constants;
  const HamiltonianMatrix h = build_hamiltonian_planar(constants, 0.0, 60.0, 0.3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(eigendecompose(h));
  }
}
BENCHMARK(BM_eigendecompose);

void BM_build_and_transitions(benchmark::State& state) {
  const Constants constants;
  double theta = 0.0;
  for (auto _ : state) {
    theta += 1e-6;
    const HamiltonianMatrix h = build_hamiltonian_planar(constants, 0.0, 60.0, theta);
    benchmark::DoNotOptimize(transition_frequencies(eigendecompose(h)));
  }
}
BENCHMARK(BM_build_and_transitions);

void BM_synthesize(benchmark::State& state) {
  const Constants constants;
  const LineShape line;
  const HamiltonianMatrix h = build_hamiltonian_planar(constants, 0.0, 20.0, 0.15);
  const DipSet dips = dip_set(eigendecompose(h), line);
  const int n = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(synthesize(dips, line, 2.0, 3.7, n));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_synthesize)->Arg(512)->Arg(2048);

void BM_fit_lorentzian(benchmark::State& state) {
  const LineShape line;
  DipSet dips;
  dips.push_back({2.31, 0.12, -1});
  Spectrum spectrum = synthesize(dips, line, 2.21, 2.41, 801);
  spectrum = add_noise(spectrum, 0.005, 42);
  const DipGuess guess{2.3115, 0.11, 0.012};
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_lorentzian(spectrum, guess));
  }
}
BENCHMARK(BM_fit_lorentzian);

void BM_probe_direction(benchmark::State& state) {
  VirtualSample sample;
  sample.seed = 7;
  const SphericalDirection dir{0.22, 1.1};
  std::uint64_t salt = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(probe_direction(sample, 20.0, dir, ++salt));
  }
}
BENCHMARK(BM_probe_direction);

void BM_run_angle_sweep(benchmark::State& state) {
  VirtualSample sample;
  sample.seed = 7;
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(run_angle_sweep(sample, 20.0, 13, 24, threads));
  }
  state.SetItemsProcessed(state.iterations() * 13 * 24);
}
BENCHMARK(BM_run_angle_sweep)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_numerical_curvature(benchmark::State& state) {
  const Constants constants;
  const auto f = [&](double theta) {
    const HamiltonianMatrix h = build_hamiltonian_planar(constants, 0.0, 60.0, theta);
    return eigendecompose(h).value(-1);
  };
  for (auto _ : state) {
    benchmark::DoNotOptimize(numerical_curvature(f, 0.0, 8e-3, 3));
  }
}
BENCHMARK(BM_numerical_curvature);

}  // namespace

BENCHMARK_MAIN();
