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

#include "kac/vocabulary.hpp"

#include "kac/errors.hpp"

namespace kac {

namespace {
const char* const kReserved[] = {"<pad>", "<bos>", "<unk>"};
}

Vocabulary::Vocabulary() {
  for (const char* w : kReserved) add(w);
}

Vocabulary Vocabulary::from_queries(std::span<const Query> queries) {
  Vocabulary vocab;
  for (const Query& q : queries)
    for (const std::string& t : q.tokens) vocab.add(t);
  return vocab;
}

Vocabulary Vocabulary::from_words(std::vector<std::string> words) {
  if (words.size() < 3 || words[0] != kReserved[0] ||
      words[1] != kReserved[1] || words[2] != kReserved[2]) {
    throw FormatError("vocabulary: missing reserved tokens");
  }
  Vocabulary vocab;
  for (std::size_t i = 3; i < words.size(); ++i) {
    if (vocab.contains(words[i])) {
      throw FormatError("vocabulary: duplicate word '" + words[i] + "'");
    }
    vocab.add(words[i]);
  }
  return vocab;
}

std::size_t Vocabulary::add(const std::string& word) {
  auto [it, inserted] = ids_.try_emplace(word, words_.size());
  if (inserted) words_.push_back(word);
  return it->second;
}

std::size_t Vocabulary::id(std::string_view word) const {
  auto it = ids_.find(std::string(word));
  return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view word) const {
  return ids_.count(std::string(word)) > 0;
}

const std::string& Vocabulary::word(std::size_t id) const {
  if (id >= words_.size()) {
    throw VocabularyError("vocabulary: id " + std::to_string(id) +
                          " out of range");
  }
  return words_[id];
}

std::vector<std::size_t> Vocabulary::encode(
    std::span<const std::string> tokens,
    std::vector<std::string>* unknown) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) {
    const std::size_t i = id(t);
    if (i == kUnk && unknown && t != kReserved[kUnk]) unknown->push_back(t);
    ids.push_back(i);
  }
  return ids;
}

}  // namespace kac
