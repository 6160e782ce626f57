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

#include "kac/knowledge.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "kac/errors.hpp"

namespace kac {

std::string_view to_string(GateMode mode) {
  switch (mode) {
    case GateMode::kNone:
      return "none";
    case GateMode::kHard:
      return "hard";
    case GateMode::kSoft:
      return "soft";
  }
  return "none";
}

GateMode parse_gate_mode(std::string_view text) {
  if (text == "none") return GateMode::kNone;
  if (text == "hard") return GateMode::kHard;
  if (text == "soft") return GateMode::kSoft;
  throw ConfigError("gate mode must be one of none|hard|soft, got '" +
                    std::string(text) + "'");
}

void KnowledgeConfig::validate() const {
  if (class_names.empty()) throw ConfigError("knowledge: no class names");
  if (embeddings == nullptr) throw ConfigError("knowledge: no embeddings");
  if (mode == GateMode::kHard && !(threshold >= 0.0 && threshold <= 1.0)) {
    throw ConfigError("knowledge: hard threshold must lie in [0, 1]");
  }
}

namespace {

// Mean of the in-vocabulary word vectors of a (possibly multi-word) name.
std::vector<double> phrase_vector(std::string_view phrase,
                                  const EmbeddingTable& embeddings) {
  std::vector<double> acc;
  std::size_t hits = 0;
  std::istringstream words{std::string(phrase)};
  std::string word;
  while (words >> word) {
    auto v = embeddings.find(word);
    if (!v) continue;
    if (acc.empty()) acc.assign(v->size(), 0.0);
    for (std::size_t i = 0; i < v->size(); ++i) acc[i] += (*v)[i];
    ++hits;
  }
  for (double& x : acc) x /= static_cast<double>(hits);
  return acc;
}

}  // namespace

double word_similarity(std::string_view a, std::string_view b,
                       const EmbeddingTable& embeddings) {
  const std::vector<double> va = phrase_vector(a, embeddings);
  const std::vector<double> vb = phrase_vector(b, embeddings);
  if (va.empty() || vb.empty()) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    dot += va[i] * vb[i];
    na += va[i] * va[i];
    nb += vb[i] * vb[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw NumericError("word_similarity: zero-norm vector for '" +
                       std::string(na > 0.0 ? b : a) + "'");
  }
  return dot / std::sqrt(na * nb);
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<double> compute_knowledge(std::span<const std::string> nouns,
                                      const ProposalSet& proposals,
                                      const KnowledgeConfig& config) {
  if (config.embeddings == nullptr) {
    throw ConfigError("compute_knowledge: no embeddings attached");
  }
  const std::size_t classes = config.class_names.size();
  std::vector<double> raw(proposals.size(), 0.0);
  std::unordered_map<std::size_t, double> by_class;
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const auto& probs = proposals.proposals[i].class_probs;
    if (probs.size() != classes) {
      throw FormatError("compute_knowledge: image " + proposals.image_id +
                        " proposal " + std::to_string(i) + " has " +
                        std::to_string(probs.size()) +
                        " class probabilities, expected " +
                        std::to_string(classes));
    }
    if (nouns.empty()) continue;
    const std::size_t best = argmax(probs);
    auto [it, inserted] = by_class.try_emplace(best, 0.0);
    if (inserted) {
      double total = 0.0;
      for (const std::string& noun : nouns) {
        total += word_similarity(config.class_names[best], noun,
                                 *config.embeddings);
      }
      it->second = total / static_cast<double>(nouns.size());
    }
    raw[i] = it->second;
  }
  return raw;
}

KnowledgeScores apply_gate(std::span<const double> raw, GateMode mode,
                           double threshold, GateContext context) {
  KnowledgeScores scores;
  scores.raw.assign(raw.begin(), raw.end());
  scores.gate.resize(raw.size());
  switch (mode) {
    case GateMode::kNone:
      std::fill(scores.gate.begin(), scores.gate.end(), 1.0);
      break;
    case GateMode::kSoft:
      for (std::size_t i = 0; i < raw.size(); ++i) {
        scores.gate[i] = 1.0 / (1.0 + std::exp(-raw[i]));
      }
      break;
    case GateMode::kHard: {
      bool any = false;
      for (std::size_t i = 0; i < raw.size(); ++i) {
        scores.gate[i] = raw[i] >= threshold ? 1.0 : 0.0;
        any = any || scores.gate[i] != 0.0;
      }
      if (!any && context == GateContext::kReconstruction) {
        std::fill(scores.gate.begin(), scores.gate.end(), 1.0);
        scores.fallback_applied = true;
      }
      break;
    }
  }
  return scores;
}

std::vector<std::size_t> extract_nouns(
    std::span<const std::string> tokens,
    const std::unordered_set<std::string>& lexicon) {
  if (tokens.empty()) throw ContractError("extract_nouns: empty token list");
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (lexicon.count(tokens[i])) positions.push_back(i);
  }
  return positions;
}

std::vector<std::string> query_nouns(
    const Query& query, const std::unordered_set<std::string>& lexicon) {
  const std::vector<std::size_t> positions =
      query.noun_positions ? *query.noun_positions
                           : extract_nouns(query.tokens, lexicon);
  std::vector<std::string> words;
  for (std::size_t p : positions) words.push_back(query.tokens.at(p));
  return words;
}

}  // namespace kac
