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
#include <unordered_map>
#include <vector>

#include "kac/corpus.hpp"

namespace kac {

// Word <-> id map with reserved ids pad = 0, bos = 1, unk = 2. Other words
// get ids in order of first insertion.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kBos = 1;
  static constexpr std::size_t kUnk = 2;

  Vocabulary();

  // Builds from the tokens of the queries, in record order.
  static Vocabulary from_queries(std::span<const Query> queries);
  // Rebuilds from an id-ordered word list whose first three entries are the
  // reserved tokens.
  static Vocabulary from_words(std::vector<std::string> words);

  std::size_t add(const std::string& word);
  // Id of a word, or kUnk.
  std::size_t id(std::string_view word) const;
  bool contains(std::string_view word) const;
  const std::string& word(std::size_t id) const;
  std::size_t size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }

  // Maps tokens to ids. Unknown tokens become kUnk; `unknown` (optional)
  // collects them.
  std::vector<std::size_t> encode(std::span<const std::string> tokens,
                                  std::vector<std::string>* unknown = nullptr) const;

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::size_t> ids_;
};

}  // namespace kac
