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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "kac/corpus.hpp"
#include "kac/evaluation.hpp"
#include "kac/knowledge.hpp"
#include "kac/layers.hpp"
#include "kac/model.hpp"
#include "kac/vocabulary.hpp"

namespace kac {

// Encodes every query and caches its raw knowledge scores. Samples point into
// `corpus`, which must outlive them. Ground-truth boxes are not copied.
std::vector<TrainingSample> prepare_samples(
    const Corpus& corpus, std::span<const Query> queries,
    const Vocabulary& vocabulary, const KnowledgeConfig& knowledge,
    const std::unordered_set<std::string>& lexicon);

struct TrainOptions {
  TrainConfig train;
  AdamConfig adam;
  std::size_t batch_size = 40;
  std::size_t epochs = 1;
  std::uint64_t seed = 1;  // shuffling order
};

// Called after every optimizer step with the 1-based step number.
using StepCallback = std::function<void(std::size_t, const LossBreakdown&)>;
// Called after every epoch with the 1-based epoch number.
using EpochCallback = std::function<void(std::size_t)>;

// Minibatch Adam over shuffled samples. Throws NumericError on a non-finite
// loss or gradient; the model then holds the weights of the last good step.
std::size_t train(KacModel& model, std::span<const TrainingSample> samples,
                  const TrainOptions& options, const StepCallback& on_step = {},
                  const EpochCallback& on_epoch = {});

struct GroundedQuery {
  std::string query_id;
  GroundingResult result;
};

std::vector<GroundedQuery> ground_all(KacModel& model,
                                      std::span<const TrainingSample> samples,
                                      GateMode mode, double threshold);

std::vector<Prediction> to_predictions(std::span<const GroundedQuery> grounded);

}  // namespace kac
