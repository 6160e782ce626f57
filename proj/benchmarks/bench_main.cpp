// Copyright 2026 The KAC Grounding Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include <unordered_set>

#include "kac/evaluation.hpp"
#include "kac/synthetic.hpp"
#include "kac/trainer.hpp"
#include "support/fixtures.hpp"

namespace {

using namespace kac;

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = test::random_tensor({n, n}, rng), b = test::random_tensor({n, n}, rng);
  for (auto _ : state) {
    Tape tape;
    benchmark::DoNotOptimize(matmul(tape.constant(a), tape.constant(b)).value()[0]);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128)->Arg(256);

void BM_LstmStepBackward(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  LstmCell cell("lstm", d, d, rng);
  const Tensor x = test::random_tensor({1, d}, rng);
  std::vector<Parameter*> params;
  cell.collect(params);
  for (auto _ : state) {
    Tape tape;
    Var h = tape.constant(Tensor({1, d}));
    Var c = h;
    for (int t = 0; t < 8; ++t) std::tie(h, c) = cell.step(tape.constant(x), h, c);
    tape.backward(sum(h));
  }
}
BENCHMARK(BM_LstmStepBackward)->Arg(32)->Arg(128);

struct TrainFixture {
  SyntheticData data;
  Vocabulary vocab;
  std::vector<TrainingSample> samples;
  KnowledgeConfig knowledge;

  TrainFixture() : data(generate_synthetic(make_spec())) {
    vocab = Vocabulary::from_queries(data.corpus.queries);
    knowledge.class_names = data.class_names;
    knowledge.embeddings = &data.embeddings;
    const std::unordered_set<std::string> lexicon(data.lexicon.begin(), data.lexicon.end());
    samples = prepare_samples(data.corpus, data.corpus.queries, vocab, knowledge, lexicon);
  }
  static SyntheticSpec make_spec() {
    SyntheticSpec spec;
    spec.images = 40;
    spec.corruption = 0.1;
    return spec;
  }
  ModelConfig model_config(std::size_t width) const {
    ModelConfig mc;
    mc.vocab_size = vocab.size();
    mc.feature_dim = data.corpus.feature_dim;
    mc.embed_dim = width / 2;
    mc.query_dim = width;
    mc.recon_dim = width;
    mc.multimodal_dim = width;
    return mc;
  }
};

// One optimizer step over a batch of 40 queries.
void BM_TrainStep(benchmark::State& state) {
  static const TrainFixture fixture;
  KacModel model(fixture.model_config(static_cast<std::size_t>(state.range(0))), 1);
  Adam adam;
  std::vector<const TrainingSample*> batch;
  for (const TrainingSample& s : fixture.samples) batch.push_back(&s);
  TrainConfig config;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_step(model, adam, batch, config).total);
  }
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_GroundAll(benchmark::State& state) {
  static const TrainFixture fixture;
  KacModel model(fixture.model_config(32), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ground_all(model, fixture.samples, GateMode::kSoft, 0.3).size());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(fixture.samples.size()));
}
BENCHMARK(BM_GroundAll)->Unit(benchmark::kMillisecond);

void BM_Iou(benchmark::State& state) {
  const Box a{10, 20, 110, 220}, b{60, 70, 160, 260};
  for (auto _ : state) benchmark::DoNotOptimize(iou(a, b));
}
BENCHMARK(BM_Iou);

}  // namespace

BENCHMARK_MAIN();
