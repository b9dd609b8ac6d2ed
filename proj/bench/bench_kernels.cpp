// Serial vs OpenMP kernels on a mid-sized delayed problem.

#include <benchmark/benchmark.h>

#include <random>

#include "tdelay/kernels.hpp"
#include "tdelay/variational.hpp"

namespace {

using namespace tdelay;

struct Fixture {
  VariationalProblem prob;
  Trajectory traj;
};

Fixture make_fixture(int n, int per_unit) {
  const DelayGrid grid = DelayGrid::build(Rational(4), Rational(1, 2), Rational(1, 4), Rational(1, per_unit));
  AnharmonicParams params;
  params.forcing = 0.5;
  VariationalProblem prob{grid, anharmonic_lagrangian(n, params),
                          HistorySpec::constant(Eigen::VectorXd::Ones(n), 0.5, 0.25), Eigen::VectorXd::Zero(n)};
  Trajectory traj = prob.initial(InitMode::linear);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0.0, 0.1);
  Eigen::VectorXd z = traj.free_values();
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) += nd(rng);
  traj.set_free_values(z);
  return {prob, traj};
}

kernels::Exec exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? kernels::Exec::serial : kernels::Exec::parallel;
}

void BM_Gradient(benchmark::State& state) {
  const Fixture f = make_fixture(3, 2000);
  const auto exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(gradient(f.prob, f.traj, exec));
  state.SetItemsProcessed(state.iterations() * f.prob.grid.n_main());
}
BENCHMARK(BM_Gradient)->Arg(0)->Arg(1)->ArgNames({"parallel"});

void BM_FunctionalValue(benchmark::State& state) {
  const Fixture f = make_fixture(3, 2000);
  const auto exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(functional_value(f.prob, f.traj, exec));
  state.SetItemsProcessed(state.iterations() * f.prob.grid.n_main());
}
BENCHMARK(BM_FunctionalValue)->Arg(0)->Arg(1)->ArgNames({"parallel"});

void BM_FdGradient(benchmark::State& state) {
  const Fixture f = make_fixture(2, 50);
  // The objective itself runs serially so only the outer loop is parallel.
  const Objective obj = variational_objective(f.prob, f.traj, kernels::Exec::serial);
  const Eigen::VectorXd z = f.traj.free_values();
  const auto exec = exec_of(state);
  for (auto _ : state) benchmark::DoNotOptimize(kernels::fd_gradient(obj.value, z, 1e-6, exec));
  state.SetItemsProcessed(state.iterations() * z.size());
}
BENCHMARK(BM_FdGradient)->Arg(0)->Arg(1)->ArgNames({"parallel"});

}  // namespace

BENCHMARK_MAIN();
