#include <benchmark/benchmark.h>

#include <random>

#include "sweep/pmp.hpp"
#include "sweepcli/problem_io.hpp"
#include "sweepcli/registry.hpp"

using namespace sweep;

namespace {

const sweepcli::BuiltProblem& three_state() {
  static const sweepcli::BuiltProblem b =
      sweepcli::build_problem(sweepcli::find_example("paper-6-1").file);
  return b;
}

void BM_SmoothMax(benchmark::State& state) {
  const SweepingSet& S = three_state().problem.spec.set();
  const Vec x = (Vec(3) << 0.2, 0.9, -1.1).finished();
  for (auto _ : state) benchmark::DoNotOptimize(psi_gamma(S, 400.0, x));
}
BENCHMARK(BM_SmoothMax);

void BM_Projection(benchmark::State& state) {
  const SweepingSet& S = three_state().problem.spec.set();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-0.2, 0.2);
  for (auto _ : state) {
    const Vec y = (Vec(3) << d(rng), 1.0 + d(rng), -0.9 + d(rng)).finished();
    benchmark::DoNotOptimize(project_onto_C(S, y));
  }
}
BENCHMARK(BM_Projection);

void BM_CatchingUp(benchmark::State& state) {
  const SweepingProblem& prob = three_state().problem;
  const Grid grid{0.5, static_cast<int>(state.range(0))};
  const ControlSignal u = ControlSignal::constant(grid, Vec::Ones(1));
  for (auto _ : state) benchmark::DoNotOptimize(integrate_catching_up(prob.spec, prob.C0.point, u));
}
BENCHMARK(BM_CatchingUp)->Arg(500)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_Penalized(benchmark::State& state) {
  const SweepingProblem& prob = three_state().problem;
  const double g = static_cast<double>(state.range(0));
  const Grid grid{0.5, 2000};
  const ControlSignal u = ControlSignal::constant(grid, Vec::Ones(1));
  const PenaltySchedule sched({g}, prob.spec.Mbar(), prob.spec.set());
  const Vec x0 = initial_state(prob, sched, 0);
  for (auto _ : state) benchmark::DoNotOptimize(integrate_penalized(prob.spec, g, x0, u));
}
BENCHMARK(BM_Penalized)->Arg(100)->Arg(1600)->Unit(benchmark::kMillisecond);

void BM_TranscriptionGradient(benchmark::State& state) {
  const auto& b = three_state();
  const SolveConfig cfg = sweepcli::make_config(b);
  const Grid grid{0.5, cfg.N};
  const double g = cfg.schedule.gamma(cfg.schedule.size() - 1);
  const Transcription tr(b.problem, cfg, g, grid);
  const Vec x0 = initial_state(b.problem, cfg.schedule, cfg.schedule.size() - 1);
  const ControlSignal u = ControlSignal::constant(grid, Vec::Constant(1, 0.5));
  for (auto _ : state) benchmark::DoNotOptimize(tr.evaluate(u, x0, true));
}
BENCHMARK(BM_TranscriptionGradient)->Unit(benchmark::kMillisecond);

void BM_Verify(benchmark::State& state) {
  const SweepingProblem& prob = three_state().problem;
  const PmpCertificate cert = sweepcli::closed_form::certificate(2000);
  VerifyOptions o;
  o.threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(verify(cert, prob, o));
}
BENCHMARK(BM_Verify)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
