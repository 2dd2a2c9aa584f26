#include <benchmark/benchmark.h>

#include "seqac/decoding.hpp"
#include "seqac/trainers.hpp"

namespace {

using namespace seqac;

constexpr std::size_t kVocab = 52;
constexpr int kEos = kVocab - 1;

Tokens random_tokens(Rng& rng, std::size_t len) {
  Tokens t(len);
  for (int& x : t) x = static_cast<int>(rng.index(kVocab - 1));
  return t;
}

struct Nets {
  EncoderDecoder actor, critic;
  ParamSet actor_params, critic_params;

  explicit Nets(std::size_t hidden) {
    actor = make_actor(kVocab, 32, hidden);
    critic = make_critic(kVocab, 32, hidden);
    actor.declare(actor_params);
    critic.declare(critic_params);
    Rng rng(7);
    init_uniform(actor_params, 0.1, rng);
    init_uniform(critic_params, 0.1, rng);
  }
};

void BM_Levenshtein(benchmark::State& state) {
  Rng rng(1);
  const auto a = random_tokens(rng, state.range(0)), b = random_tokens(rng, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(levenshtein(a, b));
}
BENCHMARK(BM_Levenshtein)->Arg(10)->Arg(100);

void BM_SmoothedBleu(benchmark::State& state) {
  Rng rng(2);
  const auto a = random_tokens(rng, state.range(0)), b = random_tokens(rng, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(smoothed_bleu(a, b));
}
BENCHMARK(BM_SmoothedBleu)->Arg(10)->Arg(100);

void BM_LlStep(benchmark::State& state) {
  Nets nets(state.range(0));
  AdamState adam(nets.actor_params, 1e-3);
  Rng rng(3);
  std::vector<SequencePair> batch;
  for (int i = 0; i < 32; ++i) batch.push_back({random_tokens(rng, 10), random_tokens(rng, 10)});
  for (auto _ : state) benchmark::DoNotOptimize(ll_step(nets.actor, nets.actor_params, adam, batch, kEos, 1.0));
  state.SetItemsProcessed(state.iterations() * batch.size());
}
BENCHMARK(BM_LlStep)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_SampleSequence(benchmark::State& state) {
  Nets nets(64);
  Rng rng(4);
  const Tokens source = random_tokens(rng, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_sequence(nets.actor, nets.actor_params, source, kEos, 30, rng));
  }
}
BENCHMARK(BM_SampleSequence)->Unit(benchmark::kMicrosecond);

void BM_CriticGradient(benchmark::State& state) {
  Nets nets(64);
  Rng rng(5);
  const Tokens reference = random_tokens(rng, 10);
  Tokens actions = random_tokens(rng, 10);
  actions.push_back(kEos);
  const std::vector<double> targets(actions.size(), -0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        critic_gradient(nets.critic, nets.critic_params, reference, actions, targets, 1e-3));
  }
}
BENCHMARK(BM_CriticGradient)->Unit(benchmark::kMicrosecond);

void BM_ActorCriticGradient(benchmark::State& state) {
  Nets nets(64);
  Rng rng(6);
  const Tokens source = random_tokens(rng, 10), target = random_tokens(rng, 10);
  Tokens actions = random_tokens(rng, 10);
  actions.push_back(kEos);
  const std::vector<std::vector<double>> qhat(actions.size(), std::vector<double>(kVocab, -0.1));
  for (auto _ : state) {
    benchmark::DoNotOptimize(ac_actor_gradient(nets.actor, nets.actor_params, source, actions, qhat,
                                               0.1, target, kEos));
  }
}
BENCHMARK(BM_ActorCriticGradient)->Unit(benchmark::kMicrosecond);

void BM_GreedyDecodeAll(benchmark::State& state) {
  Nets nets(64);
  Rng rng(8);
  std::vector<Tokens> sources;
  for (int i = 0; i < 64; ++i) sources.push_back(random_tokens(rng, 10));
  for (auto _ : state) benchmark::DoNotOptimize(greedy_decode_all(nets.actor, nets.actor_params, sources, kEos));
  state.SetItemsProcessed(state.iterations() * sources.size());
}
BENCHMARK(BM_GreedyDecodeAll)->Unit(benchmark::kMillisecond);

void BM_BeamDecode(benchmark::State& state) {
  Nets nets(64);
  Rng rng(9);
  const Tokens source = random_tokens(rng, 10);
  for (auto _ : state) {
    benchmark::DoNotOptimize(beam_decode(nets.actor, nets.actor_params, source, kEos, state.range(0), 30, 0.0));
  }
}
BENCHMARK(BM_BeamDecode)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
