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

#include "kac/corpus.hpp"

#include <cmath>

#include "kac/errors.hpp"

namespace kac {

void validate_box(const Box& box, double width, double height,
                  const std::string& what) {
  const bool finite = std::isfinite(box.x1) && std::isfinite(box.y1) &&
                      std::isfinite(box.x2) && std::isfinite(box.y2);
  if (!finite || box.x1 < 0.0 || box.y1 < 0.0 || !(box.x1 < box.x2) ||
      !(box.y1 < box.y2) || box.x2 > width || box.y2 > height) {
    throw FormatError(what + ": box must satisfy 0 <= x1 < x2 <= w and "
                             "0 <= y1 < y2 <= h");
  }
}

void validate(const ProposalSet& set, std::size_t feature_dim,
              std::size_t num_classes) {
  const std::string where = "image " + set.image_id;
  if (set.image_id.empty()) throw FormatError("image record without image_id");
  if (!(set.width > 0.0) || !(set.height > 0.0)) {
    throw FormatError(where + ": width and height must be positive");
  }
  if (set.proposals.empty()) throw FormatError(where + ": no proposals");
  if (feature_dim && set.global_feature.size() != feature_dim) {
    throw FormatError(where + ": global feature has length " +
                      std::to_string(set.global_feature.size()) +
                      ", expected " + std::to_string(feature_dim));
  }
  for (std::size_t i = 0; i < set.proposals.size(); ++i) {
    const Proposal& p = set.proposals[i];
    const std::string pw = where + " proposal " + std::to_string(i);
    validate_box(p.box, set.width, set.height, pw);
    if (feature_dim && p.feature.size() != feature_dim) {
      throw FormatError(pw + ": feature has length " +
                        std::to_string(p.feature.size()) + ", expected " +
                        std::to_string(feature_dim));
    }
    if (num_classes && p.class_probs.size() != num_classes) {
      throw FormatError(pw + ": class distribution has length " +
                        std::to_string(p.class_probs.size()) + ", expected " +
                        std::to_string(num_classes));
    }
    double total = 0.0;
    for (double q : p.class_probs) {
      if (!(q >= 0.0)) {
        throw FormatError(pw + ": class probabilities must be >= 0");
      }
      total += q;
    }
    if (std::abs(total - 1.0) > 1e-6) {
      throw FormatError(pw + ": class probabilities sum to " +
                        std::to_string(total) + ", must sum to 1 within 1e-6");
    }
  }
}

void validate(const Query& query, std::size_t max_length) {
  const std::string where = "query " + query.query_id;
  if (query.query_id.empty()) throw FormatError("query record without query_id");
  if (query.tokens.empty()) throw FormatError(where + ": empty token list");
  if (max_length && query.tokens.size() > max_length) {
    throw FormatError(where + ": longer than " + std::to_string(max_length) +
                      " tokens");
  }
  if (!query.noun_positions) return;
  for (std::size_t pos : *query.noun_positions) {
    if (pos >= query.tokens.size()) {
      throw FormatError(where + ": noun position " + std::to_string(pos) +
                        " outside the token list");
    }
  }
}

const ProposalSet& Corpus::image(const std::string& image_id) const {
  auto it = by_id_.find(image_id);
  if (it == by_id_.end() || it->second >= images.size() ||
      images[it->second].image_id != image_id) {
    throw ReferenceError("unknown image_id '" + image_id + "'");
  }
  return images[it->second];
}

void Corpus::reindex() {
  by_id_.clear();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!by_id_.emplace(images[i].image_id, i).second) {
      throw FormatError("duplicate image_id '" + images[i].image_id + "'");
    }
  }
}

}  // namespace kac
