#include <benchmark/benchmark.h>

#include "bisam/alasso.hpp"
#include "bisam/simulation.hpp"

using namespace bisam;

namespace {

StudyConfig study() {
  StudyConfig c;
  c.n_units = 6;
  c.n_times = 15;
  c.layouts = {Layout::parse("count:2")};
  c.sizes = {3.0};
  c.n_reps = 8;
  c.seed = 1;
  c.sampler.n_burn = 100;
  c.sampler.n_draw = 200;
  return c;
}

struct AlassoInput {
  SaturatedDesign design;
  Eigen::VectorXd y;
};

AlassoInput alasso_input() {
  SimDesign d;
  d.layout = Layout::parse("sparse");
  d.break_size = 3.0;
  d.seed = 2;
  const auto data = generate(d, 0);
  return {build_design(data.panel), stack_response(data.panel)};
}

void BM_Study(benchmark::State& state, Execution exec) {
  const auto cfg = study();
  for (auto _ : state) benchmark::DoNotOptimize(run_study(cfg, exec));
}

void BM_Alasso(benchmark::State& state, Execution exec, LambdaSelection sel) {
  const auto in = alasso_input();
  auto cfg = AlassoConfig::defaults();
  cfg.selection = sel;
  for (auto _ : state) benchmark::DoNotOptimize(alasso_detect(in.design, in.y, cfg, exec));
}

}  // namespace

BENCHMARK_CAPTURE(BM_Study, serial, Execution::serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Study, parallel, Execution::parallel)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Alasso, bic_serial, Execution::serial, LambdaSelection::bic)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Alasso, bic_parallel, Execution::parallel, LambdaSelection::bic)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Alasso, cv_serial, Execution::serial, LambdaSelection::cv)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Alasso, cv_parallel, Execution::parallel, LambdaSelection::cv)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
