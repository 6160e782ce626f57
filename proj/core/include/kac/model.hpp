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

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kac/autodiff.hpp"
#include "kac/corpus.hpp"
#include "kac/knowledge.hpp"
#include "kac/layers.hpp"

namespace kac {

struct ModelConfig {
  std::size_t vocab_size = 3;
  std::size_t feature_dim = 4096;  // d_v
  std::size_t embed_dim = 300;     // word embedding width fed to both LSTMs
  std::size_t query_dim = 512;     // d_q, encoder hidden size
  std::size_t recon_dim = 512;     // d_r, decoder hidden size
  std::size_t multimodal_dim = 128;  // m
  // Normalize the multimodal projection before the ReLU. When enabled the
  // normalization shift plays the role of the projection bias.
  bool batch_norm = true;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;

  bool operator==(const ModelConfig&) const = default;
};

// All learnable state of the grounding network.
class KacModel {
 public:
  KacModel(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  // Every learnable parameter, in a fixed order.
  std::vector<Parameter*> parameters();
  // Projections of the multimodal, attention and reconstruction maps; these
  // are the regularized weights.
  std::vector<FcLayer*> projection_layers();
  void set_training(bool training) { norm.training = training; }
  bool training() const { return norm.training; }

  Parameter embedding;  // [vocab x embed_dim]
  LstmCell encoder;     // embed_dim -> d_q
  FcLayer multimodal;   // W_m: [m x (d_q + 2 d_v)]
  BatchNorm norm;       // over the m multimodal channels
  FcLayer attention;    // W_s: [5 x m]
  FcLayer reconstruction;  // W_a: [d_r x d_v]
  LstmCell decoder;        // embed_dim -> d_r
  FcLayer vocab_out;       // [vocab x d_r]

 private:
  ModelConfig config_;
};

enum class Branches { kLanguage, kVisual, kBoth };
std::string_view to_string(Branches branches);
Branches parse_branches(std::string_view text);

struct ObjectiveConfig {
  double lambda = 10.0;  // weight of the visual consistency loss
  double mu = 0.005;     // weight of the regularizer
  Branches branches = Branches::kBoth;
};

struct LossBreakdown {
  double lc = 0.0;
  double vc = 0.0;
  double reg = 0.0;
  double total = 0.0;
  double lambda = 0.0;
  double mu = 0.0;
};

struct AttentionOutput {
  Var scores;      // s^p, [N x 5]: confidence then four location parameters
  Var confidence;  // softmax over proposals of scores[:, 0], [N]
};

struct GroundingResult {
  std::size_t chosen = 0;
  std::vector<double> confidence;  // softmaxed
  std::vector<double> gate;
  std::vector<double> scores;      // confidence * gate
  bool fallback_applied = false;
  Box box;
};

// Stacks the proposals' visual features into [N x d_v] and the global
// feature into [1 x d_v] as tape constants.
Var proposal_features(Tape& tape, const ProposalSet& proposals);
Var global_feature(Tape& tape, const ProposalSet& proposals);

// Final hidden state of the encoder run over the embedded tokens from a zero
// state, shape [1 x d_q].
Var encode_query(KacModel& model, Tape& tape,
                 std::span<const std::size_t> tokens);

// W_m (q || v || v_i) for every proposal, before normalization: [N x m].
Var multimodal_preactivation(KacModel& model, Var query, Var global,
                             Var features);

// Normalizes the stacked pre-activations of several samples jointly, applies
// the ReLU and splits them back per sample.
std::vector<Var> multimodal_activate(KacModel& model,
                                     std::span<const Var> preactivations);

// Single-sample form: ReLU(BatchNorm(W_m (q || v || v_i) + b_m)), [N x m].
Var multimodal_project(KacModel& model, Var query,
                       const ProposalSet& proposals);

AttentionOutput attention_predict(KacModel& model, Var multimodal);

// [x1/w, y1/h, x2/w, y2/h] - 0.5
std::array<double, 4> box_to_location_params(const Box& box, double width,
                                             double height);
Box location_params_to_box(const std::array<double, 4>& params, double width,
                           double height);
// [N x 4] location targets of every proposal.
Tensor location_targets(const ProposalSet& proposals);

double smooth_l1(double x);

// Sum_i gate_i * confidence_i * d_i with d_i the mean smooth-L1 distance
// between predicted and actual location parameters.
Var visual_consistency_loss(const AttentionOutput& att,
                            std::span<const double> gate,
                            const Tensor& targets);

// W_a (Sum_i gate_i * confidence_i * v_i) + b_a, shape [1 x d_r].
Var reconstruction_feature(KacModel& model, const AttentionOutput& att,
                           std::span<const double> gate, Var features);

// Teacher-forced decoder cross entropy averaged over the T query tokens. The
// decoder starts from h = v_att, c = 0 and reads <bos>, w_1 .. w_{T-1}.
Var language_consistency_loss(KacModel& model, Var v_att,
                              std::span<const std::size_t> tokens);

// lc + lambda * vc + mu * reg with the disabled branch contributing 0.
LossBreakdown total_objective(double lc, double vc, double reg,
                              const ObjectiveConfig& config);

// Selection: argmax_i confidence_i * gate_i, lowest index on
// ties. A hard gate that rejects every proposal falls back to all ones.
GroundingResult ground(KacModel& model, std::span<const std::size_t> tokens,
                       const ProposalSet& proposals,
                       std::span<const double> knowledge, GateMode mode,
                       double threshold);

// ---- Training -------------------------------------------------------------

// Everything a training step may see about one (query, image) pair. There
// is deliberately no ground-truth box here.
struct TrainingSample {
  std::string query_id;
  std::vector<std::size_t> tokens;
  const ProposalSet* proposals = nullptr;
  std::vector<double> knowledge;  // raw k_i^q, constant during training
};

struct TrainConfig {
  ObjectiveConfig objective;
  GateMode gate = GateMode::kSoft;
  double threshold = 0.3;
  double clip_norm = 10.0;
};

// Differentiable batch objective: mean over samples of (lc + lambda * vc)
// plus mu * reg.
struct BatchObjective {
  Var total;
  Var reg;
  std::vector<double> lc;  // per sample, 0 when the branch is off
  std::vector<double> vc;
};

BatchObjective batch_objective(KacModel& model, Tape& tape,
                               std::span<const TrainingSample* const> batch,
                               const TrainConfig& config);

// Builds the batch objective, backpropagates, clips and applies one Adam
// update. Returns the batch-averaged breakdown. Throws NumericError naming
// the offending query when a loss is non-finite.
LossBreakdown train_step(KacModel& model, Adam& optimizer,
                         std::span<const TrainingSample* const> batch,
                         const TrainConfig& config);

}  // namespace kac
