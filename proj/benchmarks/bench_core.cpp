#include <cmath>
#include <numbers>

#include <benchmark/benchmark.h>

#include "finsler/data.hpp"
#include "finsler/geodesic.hpp"
#include "finsler/heat.hpp"
#include "finsler/legendre.hpp"
#include "finsler/sampling.hpp"
#include "finsler/tensor.hpp"
#include "finsler/verification.hpp"

using namespace finsler;

namespace {

constexpr double kL = 2.0 * std::numbers::pi;

FinslerStructure quartic_torus() { return quartic_minkowski(2, 0.1, Vec::Constant(2, kL)); }

FinslerStructure randers_torus() {
  return randers(identity_metric(2), constant_one_form(make_vec({0.3, 0.1})), Vec::Constant(2, kL));
}

void BM_TensorPack(benchmark::State& state) {
  const auto fs = randers_torus();
  const Vec x = make_vec({0.3, 1.1}), v = make_vec({0.7, -0.4});
  for (auto _ : state) benchmark::DoNotOptimize(tensor_pack(fs, x, v));
}
BENCHMARK(BM_TensorPack);

void BM_Ricci(benchmark::State& state) {
  const auto fs = randers_torus();
  const Vec x = make_vec({0.3, 1.1}), v = make_vec({0.7, -0.4});
  for (auto _ : state) benchmark::DoNotOptimize(ricci(fs, x, v));
}
BENCHMARK(BM_Ricci);

void BM_LegendreDual(benchmark::State& state) {
  const auto fs = quartic_torus();
  const Vec x = make_vec({0.3, 1.1}), a = make_vec({0.7, -0.4});
  for (auto _ : state) benchmark::DoNotOptimize(legendre_dual(fs, x, a));
}
BENCHMARK(BM_LegendreDual);

void BM_GradientField(benchmark::State& state) {
  const auto fs = quartic_torus();
  const WeightedGrid wg(fs, Grid::periodic_cell(fs, static_cast<int>(state.range(0))));
  const GridField u = random_smooth(fs, wg.grid(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(gradient_field(wg, u));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(wg.grid().size()));
}
BENCHMARK(BM_GradientField)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_NonlinearLaplacian(benchmark::State& state) {
  const auto fs = quartic_torus();
  const WeightedGrid wg(fs, Grid::periodic_cell(fs, static_cast<int>(state.range(0))));
  const GridField u = random_smooth(fs, wg.grid(), 1);
  for (auto _ : state) benchmark::DoNotOptimize(nonlinear_laplacian(wg, u));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(wg.grid().size()));
}
BENCHMARK(BM_NonlinearLaplacian)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_HeatSolve(benchmark::State& state) {
  const auto fs = quartic_torus();
  const WeightedGrid wg(fs, Grid::periodic_cell(fs, 64));
  const GridField u0 = gaussian_bump(fs, wg.grid(), Vec::Constant(2, 0.5 * kL), 0.8, 1.0, 0.1);
  HeatOptions ho;
  ho.T = 0.01;
  ho.scheme = static_cast<Scheme>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(heat_solve(wg, u0, ho));
  state.SetLabel(to_string(ho.scheme));
}
BENCHMARK(BM_HeatSolve)
    ->Arg(static_cast<int>(Scheme::explicit_euler))
    ->Arg(static_cast<int>(Scheme::rk4))
    ->Unit(benchmark::kMillisecond);

void BM_BochnerTerms(benchmark::State& state) {
  const auto fs = quartic_torus();
  const WeightedGrid wg(fs, Grid::periodic_cell(fs, 64));
  const GridField u = random_smooth(fs, wg.grid(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(bochner_terms(wg, u, 2.0));
}
BENCHMARK(BM_BochnerTerms)->Unit(benchmark::kMillisecond);

void BM_DistanceTable(benchmark::State& state) {
  const auto fs = randers_torus();
  const Grid g = Grid::periodic_cell(fs, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(DistanceTable::build(fs, g));
}
BENCHMARK(BM_DistanceTable)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_Distance(benchmark::State& state) {
  const auto fs = randers(identity_metric(2), constant_one_form(make_vec({0.3, 0.1})), Vec::Constant(2, INFINITY));
  const Vec x = make_vec({0.0, 0.0}), y = make_vec({1.0, 0.5});
  for (auto _ : state) benchmark::DoNotOptimize(distance(fs, x, y));
}
BENCHMARK(BM_Distance);

}  // namespace

BENCHMARK_MAIN();
