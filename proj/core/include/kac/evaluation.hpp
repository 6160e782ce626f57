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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "kac/corpus.hpp"

namespace kac {

// Intersection over union of two closed rectangles, area (x2-x1)*(y2-y1).
// Throws ContractError for a zero-area box.
double iou(const Box& a, const Box& b);

struct Prediction {
  std::string query_id;
  Box box;
};

struct TagStats {
  std::size_t total = 0;
  std::size_t hits = 0;
  double accuracy = 0.0;
};

struct EvalReport {
  std::size_t total = 0;
  std::size_t hits = 0;
  double accuracy = 0.0;
  double threshold = 0.5;
  std::map<std::string, TagStats> by_tag;
};

struct QueryOutcome {
  std::string query_id;
  Box chosen;
  Box truth;
  double iou = 0.0;
  bool hit = false;
};

// A prediction is a hit iff iou(chosen, gt_box) > threshold. Every
// predicted query must exist in `queries` (ReferenceError) and carry a
// ground-truth box (ContractError listing the offenders). Queries without a
// tag are grouped under "untagged" when tags are given.
EvalReport accuracy_at_iou(std::span<const Prediction> predictions,
                           std::span<const Query> queries,
                           double threshold = 0.5,
                           const std::map<std::string, std::string>* tags =
                               nullptr,
                           std::vector<QueryOutcome>* outcomes = nullptr);

// Machine-readable report; `config` is echoed under "config".
std::string report_json(const EvalReport& report,
                        const std::map<std::string, std::string>& config);
// Aligned text table for humans.
std::string report_table(const EvalReport& report);
std::string outcomes_csv(std::span<const QueryOutcome> outcomes);

}  // namespace kac
