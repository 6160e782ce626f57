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

#include "kac/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "kac/errors.hpp"
#include "kac/evaluation.hpp"
#include "kac/model.hpp"

namespace kac {

namespace {

const char* const kClassWords[] = {
    "dog",   "cat",    "man",   "woman", "car",   "bike",  "tree",
    "horse", "boat",   "bird",  "child", "bus",   "chair", "table",
    "sheep", "bottle", "train", "cow",   "plane", "sofa"};

const char* const kFillers[] = {"on",   "the",   "left", "right", "near",
                                "small", "large", "in",   "front", "of",
                                "red",  "blue",  "standing"};

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t pick_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

std::vector<double> gaussian_vector(Rng& rng, std::size_t n, double scale) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = scale * normal(rng);
  return v;
}

Box random_box(Rng& rng, double w, double h, double min_frac,
               double max_frac) {
  const double bw = std::round(uniform(rng, min_frac, max_frac) * w);
  const double bh = std::round(uniform(rng, min_frac, max_frac) * h);
  const double x1 = std::round(uniform(rng, 0.0, w - bw));
  const double y1 = std::round(uniform(rng, 0.0, h - bh));
  return {x1, y1, x1 + bw, y1 + bh};
}

// A box shifted off the target so that it overlaps without matching.
Box near_miss(Rng& rng, const Box& target, double w, double h) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    const double dx = uniform(rng, 0.35, 0.7) * target.width() *
                      (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0);
    const double dy = uniform(rng, 0.0, 0.4) * target.height() *
                      (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0);
    Box b{std::round(std::clamp(target.x1 + dx, 0.0, w - 1.0)),
          std::round(std::clamp(target.y1 + dy, 0.0, h - 1.0)),
          std::round(std::clamp(target.x2 + dx, 1.0, w)),
          std::round(std::clamp(target.y2 + dy, 1.0, h))};
    if (b.x2 - b.x1 < 2.0 || b.y2 - b.y1 < 2.0) continue;
    const double o = iou(b, target);
    if (o > 0.1 && o < 0.45) return b;
  }
  return random_box(rng, w, h, 0.1, 0.3);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

}  // namespace

void SyntheticSpec::validate() const {
  if (classes < 2) throw ConfigError("synthetic: need at least 2 classes");
  if (proposals < 2) throw ConfigError("synthetic: need at least 2 proposals");
  if (feature_dim == 0 || embedding_dim == 0) {
    throw ConfigError("synthetic: dimensions must be positive");
  }
  if (location_dim >= feature_dim) {
    throw ConfigError("synthetic: location_dim must be below feature_dim");
  }
  if (!(noise >= 0.0)) throw ConfigError("synthetic: noise must be >= 0");
  for (double p : {overlap, corruption}) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError("synthetic: probabilities must lie in [0, 1]");
    }
  }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  SyntheticData data;
  data.corpus.feature_dim = spec.feature_dim;
  data.corpus.num_classes = spec.classes;

  constexpr std::size_t kNamed = std::size(kClassWords);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    data.class_names.push_back(c < kNamed ? std::string(kClassWords[c])
                                          : "object" + std::to_string(c));
  }
  data.lexicon = data.class_names;

  std::vector<std::string> vocabulary = data.class_names;
  vocabulary.push_back("a");
  for (const char* f : kFillers) vocabulary.push_back(f);
  data.embeddings = EmbeddingTable(spec.embedding_dim);
  for (const std::string& word : vocabulary) {
    data.embeddings.add(word, gaussian_vector(rng, spec.embedding_dim, 1.0));
  }

  const std::size_t proto_dim = spec.feature_dim - spec.location_dim;
  std::vector<std::vector<double>> prototypes;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    prototypes.push_back(gaussian_vector(rng, proto_dim, 1.0));
  }

  constexpr double kSharpness = 10.0;
  constexpr double kLocationNoise = 0.1;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t img = 0; img < spec.images; ++img) {
    ProposalSet set;
    set.image_id = "img" + std::to_string(img);
    set.width = std::round(uniform(rng, 320.0, 640.0));
    set.height = std::round(uniform(rng, 240.0, 480.0));

    const std::size_t target_class = pick_index(rng, spec.classes);
    const std::size_t target = pick_index(rng, spec.proposals);
    const Box target_box = random_box(rng, set.width, set.height, 0.25, 0.6);

    for (std::size_t i = 0; i < spec.proposals; ++i) {
      Proposal p;
      std::size_t cls = target_class;
      if (i == target) {
        p.box = target_box;
      } else {
        cls = (target_class + 1 + pick_index(rng, spec.classes - 1)) %
              spec.classes;
        if (uniform(rng, 0.0, 1.0) < spec.overlap) {
          p.box = near_miss(rng, target_box, set.width, set.height);
        } else {
          do {
            p.box = random_box(rng, set.width, set.height, 0.1, 0.5);
          } while (iou(p.box, target_box) >= 0.3);
        }
      }
      std::vector<double> appearance = prototypes[cls];
      for (double& x : appearance) x += spec.noise * normal(rng);

      std::vector<double> logits(spec.classes);
      for (std::size_t k = 0; k < spec.classes; ++k) {
        logits[k] = kSharpness * cosine(appearance, prototypes[k]) +
                    spec.noise * normal(rng);
      }
      p.feature = std::move(appearance);
      const auto where = box_to_location_params(p.box, set.width, set.height);
      for (std::size_t j = 0; j < spec.location_dim; ++j) {
        p.feature.push_back(where[j % 4] + kLocationNoise * spec.noise * normal(rng));
      }
      if (uniform(rng, 0.0, 1.0) < spec.corruption) {
        const std::size_t wrong =
            (cls + 1 + pick_index(rng, spec.classes - 1)) % spec.classes;
        logits[wrong] = *std::max_element(logits.begin(), logits.end()) + 1.0;
      }
      const double hi = *std::max_element(logits.begin(), logits.end());
      double total = 0.0;
      for (double& l : logits) total += (l = std::exp(l - hi));
      for (double& l : logits) l /= total;
      p.class_probs = std::move(logits);
      set.proposals.push_back(std::move(p));
    }
    set.global_feature.assign(spec.feature_dim, 0.0);
    for (const Proposal& p : set.proposals)
      for (std::size_t j = 0; j < spec.feature_dim; ++j)
        set.global_feature[j] += p.feature[j] / spec.proposals;

    Query q;
    q.query_id = "q" + std::to_string(img);
    q.image_id = set.image_id;
    q.tokens = {"a", data.class_names[target_class]};
    const std::size_t fillers = pick_index(rng, 3);
    for (std::size_t f = 0; f < fillers; ++f) {
      q.tokens.push_back(kFillers[pick_index(rng, std::size(kFillers))]);
    }
    q.noun_positions = std::vector<std::size_t>{1};
    q.gt_box = target_box;

    data.tags[q.query_id] = data.class_names[target_class];
    data.target_index.push_back(target);
    data.target_class.push_back(target_class);
    data.corpus.images.push_back(std::move(set));
    data.corpus.queries.push_back(std::move(q));
  }
  data.corpus.reindex();
  return data;
}

}  // namespace kac
