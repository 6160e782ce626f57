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

#include <map>
#include <string>

#include "kac/model.hpp"
#include "kac/vocabulary.hpp"

namespace kac {

// Binary checkpoint container:
//
//   "KACCKPT1"                    8-byte magic
//   uint64 little-endian          length L of the JSON header
//   L bytes                       header: model config, settings, vocabulary
//                                 and a tensor table {name, shape, offset}
//   8 * payload_doubles bytes     row-major IEEE-754 doubles, little-endian
//
// Doubles are stored bit-for-bit, so a reload reproduces the model exactly.
struct LoadedCheckpoint {
  KacModel model;
  Vocabulary vocabulary;
  std::map<std::string, std::string> settings;
};

void save_checkpoint(const std::string& path, KacModel& model,
                     const Vocabulary& vocabulary,
                     const std::map<std::string, std::string>& settings = {});

// Throws CheckpointError on a malformed or truncated file.
LoadedCheckpoint load_checkpoint(const std::string& path);

// Loads the tensors into an existing model. Throws CheckpointError naming
// the first tensor whose name or shape disagrees with the model; the model
// is left untouched in that case.
void load_checkpoint_into(const std::string& path, KacModel& model);

}  // namespace kac
