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
#include <map>
#include <string>
#include <vector>

#include "kac/corpus.hpp"
#include "kac/embeddings.hpp"

namespace kac {

// Parameters of the desk-scale synthetic grounding benchmark. Each image
// carries one query naming the class of exactly one target proposal; the
// other proposals show different classes.
struct SyntheticSpec {
  std::size_t classes = 10;      // C >= 2
  std::size_t proposals = 8;     // N >= 2 per image
  std::size_t feature_dim = 32;  // d_v
  std::size_t images = 600;      // one query per image
  // Std-dev of the Gaussian noise added to unit-variance class prototypes
  // and to the class logits.
  double noise = 0.5;
  // Probability that a distractor box is a near miss partially covering the
  // target (IoU with the target stays below 0.5).
  double overlap = 0.2;
  // Probability that a proposal's class distribution peaks on a wrong class.
  double corruption = 0.0;
  // Trailing feature channels that carry the proposal's normalized box
  // coordinates (plus a little noise), the way region features carry
  // geometry. The class prototype fills the remaining channels.
  std::size_t location_dim = 4;
  std::size_t embedding_dim = 16;
  std::uint64_t seed = 1;

  // Throws ConfigError when C < 2, N < 2, a probability is outside [0, 1]
  // or the location channels leave no room for the class prototype.
  void validate() const;
};

struct SyntheticData {
  Corpus corpus;  // one query per image, same order
  std::vector<std::string> class_names;
  EmbeddingTable embeddings;
  std::vector<std::string> lexicon;
  std::map<std::string, std::string> tags;  // query_id -> class name
  std::vector<std::size_t> target_index;    // per query
  std::vector<std::size_t> target_class;    // per query
};

// Deterministic for a given spec (including seed).
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace kac
