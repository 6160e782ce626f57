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

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

#include "kac/evaluation.hpp"
#include "kac/model.hpp"
#include "kac_cli/run_config.hpp"

namespace kac::cli {

enum ExitCode : int {
  kOk = 0,
  kUsageError = 1,
  kDataError = 2,
  kNumericError = 3,
};

int exit_code_for(const std::exception& error);

// Writes images.jsonl, queries.jsonl, train_queries.jsonl,
// test_queries.jsonl, embeddings.txt, classes.txt, lexicon.txt, tags.tsv and
// config.txt into config.out_dir.
void run_synth(const RunConfig& config, std::ostream& out);

struct TrainSummary {
  std::size_t steps = 0;
  double best_val_accuracy = -1.0;  // -1 without a validation split
};

// Trains, logging one metrics row per step. On a non-finite loss the
// last-good weights are saved to config.checkpoint and NumericError
// propagates.
TrainSummary run_train(const RunConfig& config, std::ostream& out);

EvalReport run_eval(const RunConfig& config, std::ostream& out);

GroundingResult run_ground(const RunConfig& config, const std::string& query,
                           const std::string& image_id, std::ostream& out,
                           std::ostream& err);

// Full command line (without the program name). Never throws.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace kac::cli
