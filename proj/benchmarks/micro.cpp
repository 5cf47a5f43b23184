// Micro-benchmarks for the hot paths of one search epoch.

#include <benchmark/benchmark.h>

#include "netsr/bench.hpp"
#include "netsr/constopt.hpp"
#include "netsr/controller.hpp"
#include "netsr/expr.hpp"
#include "netsr/symnet.hpp"

namespace {

using namespace netsr;

ArchitectureDescriptor two_layer() { return {{{Op::Sin, Op::Mul, Op::Exp}, {Op::Cos, Op::Add}}}; }

Dataset nguyen1(std::size_t n) { return generate(find_problem("Nguyen-1"), 0, Split::Train, n); }

void forward_pass(benchmark::State& state) {
  const Dataset d = nguyen1(static_cast<std::size_t>(state.range(0)));
  const SymbolicNetwork net = instantiate(two_layer(), 1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(forward(net, d.x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(forward_pass)->Arg(20)->Arg(200);

void training_epochs(benchmark::State& state) {
  const Dataset d = nguyen1(20);
  const SymbolicNetwork net = instantiate(two_layer(), 1, 1);
  TrainConfig c;
  c.stage1_epochs = 50;
  c.stage2_epochs = 50;
  for (auto _ : state) benchmark::DoNotOptimize(train(net, d, c));
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(training_epochs);

void controller_sample(benchmark::State& state) {
  const ControllerParams p = init_controller({}, 3);
  Rng rng(5);
  for (auto _ : state) benchmark::DoNotOptimize(sample_architecture(p, rng));
}
BENCHMARK(controller_sample);

void controller_gradient(benchmark::State& state) {
  const ControllerParams p = init_controller({}, 3);
  Rng rng(5);
  const DecisionTrace trace = sample_architecture(p, rng).trace;
  for (auto _ : state) benchmark::DoNotOptimize(log_prob_and_entropy(p, trace, true));
}
BENCHMARK(controller_gradient);

void constant_refinement(benchmark::State& state) {
  const Dataset d = nguyen1(20);
  const Expression e = parse("0.9*x1^3 + 1.1*x1^2 + 0.95*x1");
  for (auto _ : state) benchmark::DoNotOptimize(refine(e, d));
}
BENCHMARK(constant_refinement);

void parse_and_simplify(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(simplify(parse("sin(x1^2)*cos(x1) - 1 + 2*(x1 + x1)/exp(0)")));
}
BENCHMARK(parse_and_simplify);

}  // namespace

BENCHMARK_MAIN();
