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
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kac/knowledge.hpp"
#include "kac/model.hpp"
#include "kac/synthetic.hpp"

namespace kac::cli {

// Every tunable of the four subcommands. Keys of the flat config file and
// the long flags share the field names.
struct RunConfig {
  // Paths.
  std::string images;
  std::string queries;
  std::string val_queries;  // optional validation split over `images`
  std::string embeddings;
  std::string classes;
  std::string lexicon;
  std::string tags;
  std::string checkpoint = "kac.ckpt";
  std::string best_checkpoint;  // defaults to <checkpoint>.best
  std::string metrics = "metrics.csv";
  std::string report;    // JSON report written by eval
  std::string outcomes;  // per-query CSV written by eval
  std::string out_dir = "synthetic";

  // Objective and gate.
  double lambda = 10.0;
  double mu = 0.005;
  double threshold = 0.3;
  std::string gate = "soft";
  bool lc = true;
  bool vc = true;

  // Architecture.
  std::size_t multimodal_dim = 128;
  std::size_t query_dim = 512;
  std::size_t recon_dim = 512;
  std::size_t embed_dim = 300;
  bool batch_norm = true;

  // Optimization.
  std::size_t batch_size = 40;
  double learning_rate = 1e-3;
  double clip_norm = 10.0;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  std::size_t max_proposals = 0;  // N cap, 0 keeps every proposal

  // Synthetic benchmark.
  std::size_t synth_classes = 10;
  std::size_t synth_proposals = 8;
  std::size_t synth_feature_dim = 32;
  std::size_t synth_location_dim = 4;
  std::size_t synth_images = 600;
  std::size_t synth_test = 100;
  std::size_t synth_embedding_dim = 16;
  double synth_noise = 0.5;
  double synth_overlap = 0.2;
  double synth_corruption = 0.1;

  // Throws ConfigError naming the first violated invariant.
  void validate() const;

  GateMode gate_mode() const;
  Branches branches() const;
  ModelConfig model_config(std::size_t vocab_size,
                           std::size_t feature_dim) const;
  SyntheticSpec synthetic_spec() const;

  // Effective settings as ordered key/value text.
  std::map<std::string, std::string> to_map() const;
};

// Applies one key=value assignment; throws ConfigError on an unknown key or
// an unparsable value.
void set_field(RunConfig& config, const std::string& key,
               const std::string& value);

// Reads a flat key=value file ('#' comments and blank lines ignored).
std::vector<std::pair<std::string, std::string>> read_config_file(
    const std::string& path);

// Names of every settable key, in declaration order.
const std::vector<std::string>& config_keys();

// "# key=value" lines.
std::string echo_config(const RunConfig& config);

}  // namespace kac::cli
