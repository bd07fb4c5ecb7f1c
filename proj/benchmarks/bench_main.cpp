// Microbenchmarks for the inference and training hot paths.

#include <benchmark/benchmark.h>

#include "seqtag/encoder.hpp"
#include "seqtag/objectives.hpp"
#include "seqtag/rng.hpp"

using namespace seqtag;

namespace {

Lattice make_lattice(std::size_t n, std::size_t L, std::uint64_t seed) {
  Rng rng(seed);
  Lattice lat(n, L);
  auto draw = [&] { return rng.unit() * 4.0 - 2.0; };
  for (auto& v : lat.emit) v = draw();
  for (auto& v : lat.trans) v = draw();
  for (auto& v : lat.start) v = draw();
  for (auto& v : lat.stop) v = draw();
  return lat;
}

Sentence make_sentence(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Sentence s;
  for (std::size_t t = 0; t < n; ++t) {
    std::string tok;
    std::size_t len = 3 + rng.below(6);
    for (std::size_t i = 0; i < len; ++i) {
      tok.push_back(static_cast<char>('a' + rng.below(26)));
    }
    s.tokens.push_back(std::move(tok));
  }
  return s;
}

void bm_log_partition(benchmark::State& state) {
  std::size_t n = static_cast<std::size_t>(state.range(0));
  std::size_t L = static_cast<std::size_t>(state.range(1));
  Lattice lat = make_lattice(n, L, 1);
  AllowedMask mask = AllowedMask::full(n, L);
  for (auto _ : state) {
    benchmark::DoNotOptimize(log_partition(lat, mask));
  }
}
BENCHMARK(bm_log_partition)->Args({16, 5})->Args({64, 5})->Args({64, 9});

void bm_marginals(benchmark::State& state) {
  std::size_t n = static_cast<std::size_t>(state.range(0));
  std::size_t L = static_cast<std::size_t>(state.range(1));
  Lattice lat = make_lattice(n, L, 2);
  AllowedMask mask = AllowedMask::full(n, L);
  for (auto _ : state) {
    benchmark::DoNotOptimize(posterior_marginals(lat, mask));
  }
}
BENCHMARK(bm_marginals)->Args({16, 5})->Args({64, 5})->Args({64, 9});

void bm_viterbi(benchmark::State& state) {
  std::size_t n = static_cast<std::size_t>(state.range(0));
  std::size_t L = static_cast<std::size_t>(state.range(1));
  Lattice lat = make_lattice(n, L, 3);
  AllowedMask mask = AllowedMask::full(n, L);
  for (auto _ : state) {
    benchmark::DoNotOptimize(viterbi(lat, mask));
  }
}
BENCHMARK(bm_viterbi)->Args({16, 5})->Args({64, 5})->Args({64, 9});

void bm_kbest(benchmark::State& state) {
  std::size_t n = static_cast<std::size_t>(state.range(0));
  std::size_t L = static_cast<std::size_t>(state.range(1));
  std::size_t k = static_cast<std::size_t>(state.range(2));
  Lattice lat = make_lattice(n, L, 4);
  AllowedMask mask = AllowedMask::full(n, L);
  for (auto _ : state) {
    benchmark::DoNotOptimize(kbest_viterbi(lat, mask, k));
  }
}
BENCHMARK(bm_kbest)->Args({16, 5, 5})->Args({64, 5, 5})->Args({64, 5, 20});

void bm_feature_extraction(benchmark::State& state) {
  Sentence s = make_sentence(static_cast<std::size_t>(state.range(0)), 5);
  FeatureConfig fc;
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_features(s, fc));
  }
}
BENCHMARK(bm_feature_extraction)->Arg(16)->Arg(64);

void bm_training_step(benchmark::State& state) {
  LabelSet labels = LabelSet::build({{"PER"}, {"LOC"}});
  FeatureConfig fc;
  fc.hash_dim = 1 << 16;
  std::vector<TrainingInstance> data;
  for (int i = 0; i < 8; ++i) {
    TrainingInstance inst;
    Sentence s = make_sentence(12, 100 + i);
    inst.features = extract_features(s, fc);
    inst.mask = AllowedMask::full(12, labels.size());
    std::vector<int> gold(12, 0);
    gold[3] = 1;
    inst.gold = gold;
    data.push_back(std::move(inst));
  }
  LossConfig loss;
  loss.kind = LossKind::NLL;
  TrainConfig tc;
  tc.epochs = 1;
  ModelParams init = ModelParams::init(labels, fc, 1, 0.01);
  for (auto _ : state) {
    benchmark::DoNotOptimize(train(data, loss, tc, init));
  }
}
BENCHMARK(bm_training_step);

}  // namespace

BENCHMARK_MAIN();
