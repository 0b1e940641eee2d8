// Serial vs OpenMP timings for the hot kernels: batch posterior evaluation,
// recourse application with grid search, and risk estimation.

#include <benchmark/benchmark.h>

#include "recsim/experiment.hpp"

using namespace recsim;

namespace {

Exec exec_of(const benchmark::State& state) {
  return state.range(0) == 0 ? Exec::serial : Exec::openmp;
}

void bm_moons_posterior_batch(benchmark::State& state) {
  const auto model = default_moons();
  RngStream rng(7, 0);
  const Dataset data = sample(*model, 4096, rng);
  std::vector<double> out(data.size());
  const Exec exec = exec_of(state);
  for (auto _ : state) {
    parallel_for(exec, data.size(), [&](std::size_t i) {
      out[i] = model->posterior(data[i].first);
    });
    benchmark::DoNotOptimize(out.data());
    benchmark::ClobberMemory();
  }
}

void bm_apply_recourse_grid(benchmark::State& state) {
  const auto model = default_moons();
  RngStream rng(7, 1);
  const Dataset train = sample(*model, 2000, rng.fork(0));
  const Dataset test = sample(*model, 2000, rng.fork(1));
  TrainConfig config;
  config.family = TrainConfig::Family::logistic_regression;
  const ClassifierPtr classifier = fit(config, train);
  RecoursePolicy policy;
  policy.searcher.kind = SearcherSpec::Kind::grid_brute_force;
  const Exec exec = exec_of(state);
  PreparedPolicy prepared(policy, classifier, train, exec);
  for (auto _ : state) {
    auto samples = apply_recourse(prepared, *model, ResponseModel::compliant(),
                                  test, rng.fork(2), exec);
    benchmark::DoNotOptimize(samples.data());
  }
}

void bm_estimate_risk(benchmark::State& state) {
  const auto model = default_two_gaussians();
  RngStream rng(7, 2);
  const Dataset data = sample(*model, 100000, rng);
  const ClassifierPtr bayes = bayes_classifier(model);
  const Loss loss = Loss::zero_one();
  const Exec exec = exec_of(state);
  for (auto _ : state) {
    auto est = estimate_risk(*bayes, loss, data, exec);
    benchmark::DoNotOptimize(est.value);
  }
}

}  // namespace

BENCHMARK(bm_moons_posterior_batch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_apply_recourse_grid)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(bm_estimate_risk)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
