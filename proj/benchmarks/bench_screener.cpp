#include <benchmark/benchmark.h>

#include "screener/crlb_opt.hpp"
#include "screener/ppo.hpp"
#include "screener/protocol_env.hpp"
#include "screener/task_eval.hpp"

namespace screener {
namespace {

DistributionSet shipped() { return load_distributions(std::filesystem::path(SCREENER_DATA_DIR) / "tissue_distributions.json"); }

void BM_SegmentedFit(benchmark::State& state) {
  const auto protocol = AcquisitionProtocol::ad_hoc();
  const ScannerConfig scanner;
  Rng rng(1);
  const auto signals = simulate_acquisition(IvimParams::make(1.0, 0.12, 0.8e-3, 25e-3), protocol, scanner, rng);
  for (auto _ : state) benchmark::DoNotOptimize(segmented_fit(signals, protocol.b_values()));
}
BENCHMARK(BM_SegmentedFit);

void BM_EvaluateProtocolOneRepeat(benchmark::State& state) {
  TaskEnvironment env;
  env.distributions = shipped();
  const TaskSpec task{TaskKind::MultiClass};
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(evaluate_protocol(AcquisitionProtocol::ad_hoc(), task, env, EvalConfig{}, 1, seed++));
  }
}
BENCHMARK(BM_EvaluateProtocolOneRepeat)->Unit(benchmark::kMillisecond);

void BM_CrlbObjective(benchmark::State& state) {
  const DistributionSet dists = shipped();
  Rng rng(2);
  const auto samples = draw_tissue_samples(dists, kAllClasses, 100, rng);
  const ScannerConfig scanner;
  const CrlbConfig config;
  const auto protocol = AcquisitionProtocol::ad_hoc();
  for (auto _ : state) benchmark::DoNotOptimize(crlb_objective(protocol, samples, scanner, config));
}
BENCHMARK(BM_CrlbObjective)->Unit(benchmark::kMicrosecond);

void BM_PpoUpdate(benchmark::State& state) {
  rl::PpoConfig config;
  config.n_steps = static_cast<int>(state.range(0));
  Rng rng(3);
  rl::ActorCritic agent = rl::ActorCritic::create(rl::kObservationSize, rl::kActionCount, config, rng);
  std::normal_distribution<double> g(0.0, 1.0);
  rl::RolloutBuffer buffer;
  for (int i = 0; i < config.n_steps; ++i) {
    rl::Transition t;
    t.observation = Eigen::VectorXd::NullaryExpr(rl::kObservationSize, [&] { return g(rng); });
    const auto out = rl::policy_forward(agent, t.observation);
    t.action = rl::sample_action(out.probabilities, rng);
    t.log_prob = out.log_probabilities[t.action];
    t.value = out.value;
    t.done = i % 9 == 8;
    t.reward = t.done ? g(rng) : 0.0;
    buffer.steps.push_back(t);
  }
  for (auto _ : state) {
    state.PauseTiming();
    rl::ActorCritic copy = agent;
    rl::RolloutBuffer b = buffer;
    state.ResumeTiming();
    benchmark::DoNotOptimize(rl::ppo_update(copy, b, config, rng));
  }
}
BENCHMARK(BM_PpoUpdate)->Arg(256)->Arg(2048)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace screener

BENCHMARK_MAIN();
