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
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "kac/corpus.hpp"
#include "kac/embeddings.hpp"

namespace kac {

// How knowledge scores weight proposals. kNone disables the gate (every
// proposal weighted 1).
enum class GateMode { kNone, kHard, kSoft };

// Where a gate is consumed. Only reconstruction gets the all-ones fallback
// when a hard gate rejects every proposal.
enum class GateContext { kConsistency, kReconstruction };

std::string_view to_string(GateMode mode);
GateMode parse_gate_mode(std::string_view text);

struct KnowledgeConfig {
  GateMode mode = GateMode::kSoft;
  double threshold = 0.3;
  std::vector<std::string> class_names;
  const EmbeddingTable* embeddings = nullptr;

  // Throws ConfigError unless K >= 1, an embedding table is attached and, in
  // hard mode, 0 <= threshold <= 1.
  void validate() const;
};

struct KnowledgeScores {
  std::vector<double> raw;
  std::vector<double> gate;
  bool fallback_applied = false;
};

// Cosine similarity of two words' embeddings. Multi-word names use the mean
// of their in-vocabulary word vectors; an out-of-vocabulary word scores 0.
double word_similarity(std::string_view a, std::string_view b,
                       const EmbeddingTable& embeddings);

// Index of the largest entry, lowest index on ties.
std::size_t argmax(std::span<const double> values);

// Per proposal: mean similarity between the name of its most probable class
// and each noun word. All zeros when there are no nouns.
std::vector<double> compute_knowledge(std::span<const std::string> nouns,
                                      const ProposalSet& proposals,
                                      const KnowledgeConfig& config);

// Gate actually applied to the proposals. Soft: sigmoid(raw). Hard:
// indicator(raw >= threshold), replaced by all ones when every indicator is
// zero and the context is reconstruction.
KnowledgeScores apply_gate(std::span<const double> raw, GateMode mode,
                           double threshold, GateContext context);

// Positions of tokens found in the lexicon. Throws ContractError on an empty
// token list.
std::vector<std::size_t> extract_nouns(
    std::span<const std::string> tokens,
    const std::unordered_set<std::string>& lexicon);

// Noun words of a query: its annotated positions, or lexicon hits when the
// record carries no annotation.
std::vector<std::string> query_nouns(
    const Query& query, const std::unordered_set<std::string>& lexicon);

}  // namespace kac
