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
#include <string>
#include <unordered_map>
#include <vector>

namespace kac {

// Axis-aligned pixel rectangle, x1 < x2 and y1 < y2.
struct Box {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool operator==(const Box&) const = default;
};

struct Proposal {
  Box box;
  std::vector<double> feature;      // v_i, length d_v
  std::vector<double> class_probs;  // p_i, length K
  bool operator==(const Proposal&) const = default;
};

// One image: global feature plus its region proposals.
struct ProposalSet {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  std::vector<double> global_feature;  // v, length d_v
  std::vector<Proposal> proposals;

  std::size_t size() const { return proposals.size(); }
  bool operator==(const ProposalSet&) const = default;
};

// A phrase to ground. The ground-truth box is only consumed by evaluation.
struct Query {
  std::string query_id;
  std::string image_id;
  std::vector<std::string> tokens;
  // Absent when the record carries no noun annotation; a lexicon lookup
  // fills in at knowledge time.
  std::optional<std::vector<std::size_t>> noun_positions;
  std::optional<Box> gt_box;
  bool operator==(const Query&) const = default;
};

// Throws FormatError describing the first violated invariant. `feature_dim`
// and `num_classes` of 0 skip the respective length checks.
void validate(const ProposalSet& set, std::size_t feature_dim,
              std::size_t num_classes);
void validate(const Query& query, std::size_t max_length = 0);
void validate_box(const Box& box, double width, double height,
                  const std::string& what);

struct Corpus {
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  std::vector<ProposalSet> images;
  std::vector<Query> queries;

  // Index of the image with this id; throws ReferenceError.
  const ProposalSet& image(const std::string& image_id) const;
  void reindex();

 private:
  std::unordered_map<std::string, std::size_t> by_id_;
};

}  // namespace kac
