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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace kac {

// Word -> unit-length vector table. Vectors are normalized on insertion.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dim) : dim_(dim) {}

  // Throws FormatError on duplicate words or a dimension mismatch, and
  // NumericError on a zero-norm vector.
  void add(const std::string& word, std::span<const double> vector);

  std::optional<std::span<const double>> find(std::string_view word) const;
  bool contains(std::string_view word) const { return find(word).has_value(); }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  // Words in insertion order.
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace kac
