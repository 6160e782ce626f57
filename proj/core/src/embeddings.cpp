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

#include "kac/embeddings.hpp"

#include <cmath>

#include "kac/errors.hpp"

namespace kac {

void EmbeddingTable::add(const std::string& word,
                         std::span<const double> vector) {
  if (word.empty()) throw FormatError("embedding: empty word");
  if (dim_ == 0) dim_ = vector.size();
  if (vector.size() != dim_ || dim_ == 0) {
    throw FormatError("embedding '" + word + "': dimension " +
                      std::to_string(vector.size()) + ", expected " +
                      std::to_string(dim_));
  }
  if (index_.count(word)) {
    throw FormatError("embedding: duplicate word '" + word + "'");
  }
  double norm = 0.0;
  for (double x : vector) norm += x * x;
  norm = std::sqrt(norm);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw NumericError("embedding '" + word + "': zero or non-finite norm");
  }
  index_.emplace(word, words_.size());
  words_.push_back(word);
  for (double x : vector) data_.push_back(x / norm);
}

std::optional<std::span<const double>> EmbeddingTable::find(
    std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return std::span<const double>(data_.data() + it->second * dim_, dim_);
}

}  // namespace kac
