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

#include "kac/trainer.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "kac/errors.hpp"

namespace kac {

std::vector<TrainingSample> prepare_samples(
    const Corpus& corpus, std::span<const Query> queries,
    const Vocabulary& vocabulary, const KnowledgeConfig& knowledge,
    const std::unordered_set<std::string>& lexicon) {
  std::vector<TrainingSample> samples;
  samples.reserve(queries.size());
  for (const Query& query : queries) {
    TrainingSample sample;
    sample.query_id = query.query_id;
    sample.tokens = vocabulary.encode(query.tokens);
    sample.proposals = &corpus.image(query.image_id);
    if (knowledge.mode == GateMode::kNone) {
      sample.knowledge.assign(sample.proposals->size(), 0.0);
    } else {
      sample.knowledge = compute_knowledge(query_nouns(query, lexicon),
                                           *sample.proposals, knowledge);
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

namespace {

struct Snapshot {
  std::vector<Tensor> values;
  Tensor running_mean, running_var;

  static Snapshot take(KacModel& model) {
    Snapshot s;
    for (Parameter* p : model.parameters()) s.values.push_back(p->value);
    s.running_mean = model.norm.running_mean;
    s.running_var = model.norm.running_var;
    return s;
  }

  void restore(KacModel& model) const {
    std::vector<Parameter*> params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = values[i];
    model.norm.running_mean = running_mean;
    model.norm.running_var = running_var;
  }
};

}  // namespace

std::size_t train(KacModel& model, std::span<const TrainingSample> samples,
                  const TrainOptions& options, const StepCallback& on_step,
                  const EpochCallback& on_epoch) {
  if (options.batch_size == 0) throw ConfigError("train: batch size must be >= 1");
  if (options.epochs > 0 && samples.empty()) {
    throw ContractError("train: no training samples");
  }
  Adam optimizer(options.adam);
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(samples.size());
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size();
         start += options.batch_size) {
      const std::size_t end = std::min(order.size(), start + options.batch_size);
      std::vector<const TrainingSample*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&samples[order[i]]);
      const Snapshot before = Snapshot::take(model);
      LossBreakdown loss;
      try {
        loss = train_step(model, optimizer, batch, options.train);
      } catch (const NumericError&) {
        before.restore(model);
        throw;
      }
      ++step;
      if (on_step) on_step(step, loss);
    }
    if (on_epoch) on_epoch(epoch);
  }
  model.set_training(false);
  return step;
}

std::vector<GroundedQuery> ground_all(KacModel& model,
                                      std::span<const TrainingSample> samples,
                                      GateMode mode, double threshold) {
  std::vector<GroundedQuery> out;
  out.reserve(samples.size());
  for (const TrainingSample& sample : samples) {
    out.push_back({sample.query_id,
                   ground(model, sample.tokens, *sample.proposals,
                          sample.knowledge, mode, threshold)});
  }
  return out;
}

std::vector<Prediction> to_predictions(std::span<const GroundedQuery> grounded) {
  std::vector<Prediction> out;
  out.reserve(grounded.size());
  for (const GroundedQuery& g : grounded) out.push_back({g.query_id, g.result.box});
  return out;
}

}  // namespace kac
