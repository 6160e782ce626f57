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

#include "kac/model.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "kac/errors.hpp"
#include "kac/vocabulary.hpp"

namespace kac {

namespace {

void require_positive(std::size_t value, const char* name) {
  if (value == 0) {
    throw ConfigError(std::string("model config: ") + name + " must be >= 1");
  }
}

Var zeros(Tape& tape, std::size_t rows, std::size_t cols) {
  return tape.constant(Tensor(Shape{rows, cols}));
}

void check_tokens(std::span<const std::size_t> tokens, std::size_t vocab,
                  const char* op) {
  if (tokens.empty()) {
    throw ContractError(std::string(op) + ": query has no tokens");
  }
  for (std::size_t t : tokens) {
    if (t >= vocab) {
      throw VocabularyError(std::string(op) + ": token id " +
                            std::to_string(t) + " outside vocabulary of " +
                            std::to_string(vocab));
    }
  }
}

class EvalModeGuard {
 public:
  explicit EvalModeGuard(KacModel& model)
      : model_(model), previous_(model.training()) {
    model_.set_training(false);
  }
  ~EvalModeGuard() { model_.set_training(previous_); }
  EvalModeGuard(const EvalModeGuard&) = delete;
  EvalModeGuard& operator=(const EvalModeGuard&) = delete;

 private:
  KacModel& model_;
  bool previous_;
};

}  // namespace

// ---- KacModel -------------------------------------------------------------

KacModel::KacModel(const ModelConfig& config, std::uint64_t seed)
    : config_(config) {
  require_positive(config.feature_dim, "feature_dim");
  require_positive(config.embed_dim, "embed_dim");
  require_positive(config.query_dim, "query_dim");
  require_positive(config.recon_dim, "recon_dim");
  require_positive(config.multimodal_dim, "multimodal_dim");
  if (config.vocab_size < 3) {
    throw ConfigError("model config: vocabulary must hold the reserved ids");
  }
  Rng rng(seed);
  const std::size_t joint = config.query_dim + 2 * config.feature_dim;
  embedding = Parameter("embedding",
                        xavier_uniform(config.vocab_size, config.embed_dim, rng));
  encoder = LstmCell("encoder", config.embed_dim, config.query_dim, rng);
  multimodal = FcLayer("multimodal", joint, config.multimodal_dim, rng,
                       !config.batch_norm);
  norm = BatchNorm("norm", config.multimodal_dim, config.bn_momentum,
                   config.bn_epsilon);
  attention = FcLayer("attention", config.multimodal_dim, 5, rng);
  reconstruction =
      FcLayer("reconstruction", config.feature_dim, config.recon_dim, rng);
  decoder = LstmCell("decoder", config.embed_dim, config.recon_dim, rng);
  vocab_out = FcLayer("vocab_out", config.recon_dim, config.vocab_size, rng);
}

std::vector<Parameter*> KacModel::parameters() {
  std::vector<Parameter*> out{&embedding};
  encoder.collect(out);
  multimodal.collect(out);
  if (config_.batch_norm) norm.collect(out);
  attention.collect(out);
  reconstruction.collect(out);
  decoder.collect(out);
  vocab_out.collect(out);
  return out;
}

std::vector<FcLayer*> KacModel::projection_layers() {
  return {&multimodal, &attention, &reconstruction};
}

std::string_view to_string(Branches branches) {
  switch (branches) {
    case Branches::kLanguage:
      return "lc";
    case Branches::kVisual:
      return "vc";
    case Branches::kBoth:
      return "both";
  }
  return "both";
}

Branches parse_branches(std::string_view text) {
  if (text == "lc") return Branches::kLanguage;
  if (text == "vc") return Branches::kVisual;
  if (text == "both" || text == "kac") return Branches::kBoth;
  throw ConfigError("branches must be one of lc|vc|both, got '" +
                    std::string(text) + "'");
}

// ---- Forward pieces -------------------------------------------------------

Var proposal_features(Tape& tape, const ProposalSet& proposals) {
  if (proposals.proposals.empty()) {
    throw ContractError("image " + proposals.image_id + " has no proposals");
  }
  const std::size_t n = proposals.size();
  const std::size_t d = proposals.proposals[0].feature.size();
  Tensor t(Shape{n, d});
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = proposals.proposals[i].feature;
    if (f.size() != d) {
      throw DimensionError("image " + proposals.image_id +
                           ": proposal features of unequal length");
    }
    std::copy(f.begin(), f.end(), t.data().begin() + i * d);
  }
  return tape.constant(std::move(t));
}

Var global_feature(Tape& tape, const ProposalSet& proposals) {
  const auto& g = proposals.global_feature;
  return tape.constant(Tensor(Shape{1, g.size()}, g));
}

Var encode_query(KacModel& model, Tape& tape,
                 std::span<const std::size_t> tokens) {
  check_tokens(tokens, model.config().vocab_size, "encode_query");
  Var embedded = gather_rows(tape.param(model.embedding), tokens);
  const std::size_t d = model.config().query_dim;
  Var h = zeros(tape, 1, d);
  Var c = zeros(tape, 1, d);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    std::tie(h, c) = model.encoder.step(slice_rows(embedded, t, t + 1), h, c);
  }
  return h;
}

Var multimodal_preactivation(KacModel& model, Var query, Var global,
                             Var features) {
  const std::size_t n = features.value().rows();
  const Var parts[] = {broadcast_rows(query, n), broadcast_rows(global, n),
                       features};
  return model.multimodal.forward(concat_cols(parts));
}

std::vector<Var> multimodal_activate(KacModel& model,
                                     std::span<const Var> preactivations) {
  std::vector<Var> out;
  if (preactivations.empty()) return out;
  if (!model.config().batch_norm) {
    for (const Var& p : preactivations) out.push_back(relu(p));
    return out;
  }
  Var stacked = preactivations.size() == 1 ? preactivations[0]
                                           : concat_rows(preactivations);
  Var activated = relu(model.norm.forward(stacked));
  if (preactivations.size() == 1) return {activated};
  std::size_t row = 0;
  for (const Var& p : preactivations) {
    const std::size_t n = p.value().rows();
    out.push_back(slice_rows(activated, row, row + n));
    row += n;
  }
  return out;
}

Var multimodal_project(KacModel& model, Var query,
                       const ProposalSet& proposals) {
  Tape& tape = query.tape();
  Var pre = multimodal_preactivation(model, query,
                                     global_feature(tape, proposals),
                                     proposal_features(tape, proposals));
  return multimodal_activate(model, std::span<const Var>(&pre, 1))[0];
}

AttentionOutput attention_predict(KacModel& model, Var multimodal) {
  Var scores = model.attention.forward(multimodal);
  const std::size_t n = scores.value().rows();
  Var confidence = reshape(softmax(slice_cols(scores, 0, 1), 0), Shape{n});
  return {scores, confidence};
}

std::array<double, 4> box_to_location_params(const Box& box, double width,
                                             double height) {
  if (!(width > 0.0) || !(height > 0.0)) {
    throw ContractError("box_to_location_params: image size must be positive");
  }
  return {box.x1 / width - 0.5, box.y1 / height - 0.5, box.x2 / width - 0.5,
          box.y2 / height - 0.5};
}

Box location_params_to_box(const std::array<double, 4>& params, double width,
                           double height) {
  if (!(width > 0.0) || !(height > 0.0)) {
    throw ContractError("location_params_to_box: image size must be positive");
  }
  // Integer coordinates come back exactly; the division above is not
  // always exactly invertible in floating point.
  auto back = [](double t, double size) {
    const double x = (t + 0.5) * size;
    const double nearest = std::round(x);
    return std::abs(x - nearest) <= 1e-9 * std::max(1.0, size) ? nearest : x;
  };
  return {back(params[0], width), back(params[1], height),
          back(params[2], width), back(params[3], height)};
}

Tensor location_targets(const ProposalSet& proposals) {
  Tensor t(Shape{proposals.size(), 4});
  for (std::size_t i = 0; i < proposals.size(); ++i) {
    const auto p = box_to_location_params(proposals.proposals[i].box,
                                          proposals.width, proposals.height);
    for (std::size_t j = 0; j < 4; ++j) t.at(i, j) = p[j];
  }
  return t;
}

double smooth_l1(double x) {
  const double ax = std::abs(x);
  return ax < 1.0 ? 0.5 * x * x : ax - 0.5;
}

Var visual_consistency_loss(const AttentionOutput& att,
                            std::span<const double> gate,
                            const Tensor& targets) {
  const std::size_t n = att.scores.value().rows();
  if (gate.size() != n || targets.rows() != n || targets.cols() != 4 ||
      targets.rank() != 2) {
    throw DimensionError("visual_consistency_loss: " + std::to_string(n) +
                         " proposals, gate of " + std::to_string(gate.size()) +
                         ", targets " + to_string(targets.shape()));
  }
  Tape& tape = att.scores.tape();
  Var predicted = slice_cols(att.scores, 1, 5);
  Var distance =
      mean(smooth_l1(abs(sub(predicted, tape.constant(targets)))), 1);
  Var weights = mul(tape.constant(Tensor(Shape{n}, {gate.begin(), gate.end()})),
                    att.confidence);
  return sum(mul(weights, reshape(distance, Shape{n})));
}

Var reconstruction_feature(KacModel& model, const AttentionOutput& att,
                           std::span<const double> gate, Var features) {
  const std::size_t n = att.scores.value().rows();
  if (gate.size() != n || features.value().rows() != n) {
    throw DimensionError("reconstruction_feature: " + std::to_string(n) +
                         " proposals, gate of " + std::to_string(gate.size()) +
                         ", features " + to_string(features.shape()));
  }
  Tape& tape = att.scores.tape();
  Var weights = mul(tape.constant(Tensor(Shape{n}, {gate.begin(), gate.end()})),
                    att.confidence);
  Var pooled = matmul(reshape(weights, Shape{1, n}), features);
  return model.reconstruction.forward(pooled);
}

Var language_consistency_loss(KacModel& model, Var v_att,
                              std::span<const std::size_t> tokens) {
  const std::size_t vocab = model.config().vocab_size;
  check_tokens(tokens, vocab, "language_consistency_loss");
  const Tensor& hv = v_att.value();
  if (hv.rank() != 2 || hv.rows() != 1 ||
      hv.cols() != model.decoder.hidden_size()) {
    throw DimensionError("language_consistency_loss: v_att " +
                         to_string(hv.shape()) + " for decoder hidden size " +
                         std::to_string(model.decoder.hidden_size()));
  }
  Tape& tape = v_att.tape();
  const std::size_t steps = tokens.size();
  std::vector<std::size_t> inputs{Vocabulary::kBos};
  inputs.insert(inputs.end(), tokens.begin(), tokens.end() - 1);
  Var embedded = gather_rows(tape.param(model.embedding), inputs);
  Var h = v_att;
  Var c = zeros(tape, 1, hv.cols());
  std::vector<Var> hidden;
  hidden.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    std::tie(h, c) = model.decoder.step(slice_rows(embedded, t, t + 1), h, c);
    hidden.push_back(h);
  }
  Var logits = model.vocab_out.forward(
      steps == 1 ? hidden[0] : concat_rows(hidden));
  Var log_probs = log_softmax(logits, 1);
  return scale(mean(pick(log_probs, tokens)), -1.0);
}

LossBreakdown total_objective(double lc, double vc, double reg,
                              const ObjectiveConfig& config) {
  if (!std::isfinite(lc) || !std::isfinite(vc) || !std::isfinite(reg)) {
    throw NumericError("total_objective: non-finite loss term");
  }
  LossBreakdown out;
  out.lambda = config.lambda;
  out.mu = config.mu;
  out.reg = reg;
  out.lc = config.branches == Branches::kVisual ? 0.0 : lc;
  out.vc = config.branches == Branches::kLanguage ? 0.0 : vc;
  out.total = out.lc + config.lambda * out.vc + config.mu * reg;
  return out;
}

GroundingResult ground(KacModel& model, std::span<const std::size_t> tokens,
                       const ProposalSet& proposals,
                       std::span<const double> knowledge, GateMode mode,
                       double threshold) {
  EvalModeGuard eval(model);
  const std::size_t n = proposals.size();
  std::vector<double> raw(knowledge.begin(), knowledge.end());
  if (raw.empty() && mode == GateMode::kNone) raw.assign(n, 0.0);
  if (raw.size() != n) {
    throw DimensionError("ground: " + std::to_string(raw.size()) +
                         " knowledge scores for " + std::to_string(n) +
                         " proposals");
  }
  Tape tape;
  Var q = encode_query(model, tape, tokens);
  AttentionOutput att =
      attention_predict(model, multimodal_project(model, q, proposals));
  const KnowledgeScores gate =
      apply_gate(raw, mode, threshold, GateContext::kReconstruction);
  GroundingResult result;
  result.confidence = att.confidence.value().values();
  result.gate = gate.gate;
  result.fallback_applied = gate.fallback_applied;
  result.scores.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    result.scores[i] = result.confidence[i] * result.gate[i];
  }
  result.chosen = argmax(result.scores);
  result.box = proposals.proposals[result.chosen].box;
  return result;
}

// ---- Training -------------------------------------------------------------

BatchObjective batch_objective(KacModel& model, Tape& tape,
                               std::span<const TrainingSample* const> batch,
                               const TrainConfig& config) {
  if (batch.empty()) throw ContractError("train_step: empty batch");
  const Branches branches = config.objective.branches;
  const bool language = branches != Branches::kVisual;
  const bool visual = branches != Branches::kLanguage;

  std::vector<Var> features, preactivations;
  for (const TrainingSample* sample : batch) {
    if (sample->proposals == nullptr) {
      throw ContractError("train_step: sample " + sample->query_id +
                          " has no proposals");
    }
    features.push_back(proposal_features(tape, *sample->proposals));
    Var q = encode_query(model, tape, sample->tokens);
    preactivations.push_back(multimodal_preactivation(
        model, q, global_feature(tape, *sample->proposals), features.back()));
  }
  const std::vector<Var> activated = multimodal_activate(model, preactivations);

  BatchObjective out;
  Var summed = tape.constant(Tensor::scalar(0.0));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const TrainingSample& sample = *batch[b];
    const std::size_t n = sample.proposals->size();
    std::vector<double> raw = sample.knowledge;
    if (raw.empty() && config.gate == GateMode::kNone) raw.assign(n, 0.0);
    if (raw.size() != n) {
      throw DimensionError("train_step: sample " + sample.query_id + " has " +
                           std::to_string(raw.size()) +
                           " knowledge scores for " + std::to_string(n) +
                           " proposals");
    }
    AttentionOutput att = attention_predict(model, activated[b]);
    double lc_value = 0.0, vc_value = 0.0;
    Var sample_total = tape.constant(Tensor::scalar(0.0));
    if (visual) {
      const KnowledgeScores gate = apply_gate(raw, config.gate, config.threshold,
                                              GateContext::kConsistency);
      Var vc = visual_consistency_loss(att, gate.gate,
                                       location_targets(*sample.proposals));
      vc_value = vc.value().item();
      sample_total = add(sample_total, scale(vc, config.objective.lambda));
    }
    if (language) {
      const KnowledgeScores gate = apply_gate(raw, config.gate, config.threshold,
                                              GateContext::kReconstruction);
      Var v_att = reconstruction_feature(model, att, gate.gate, features[b]);
      Var lc = language_consistency_loss(model, v_att, sample.tokens);
      lc_value = lc.value().item();
      sample_total = add(sample_total, lc);
    }
    if (!std::isfinite(lc_value) || !std::isfinite(vc_value)) {
      throw NumericError("train_step: non-finite loss for query " +
                         sample.query_id);
    }
    out.lc.push_back(lc_value);
    out.vc.push_back(vc_value);
    summed = add(summed, sample_total);
  }
  std::vector<FcLayer*> projections = model.projection_layers();
  out.reg = l2_regularizer(tape, projections);
  out.total = add(scale(summed, 1.0 / static_cast<double>(batch.size())),
                  scale(out.reg, config.objective.mu));
  return out;
}

LossBreakdown train_step(KacModel& model, Adam& optimizer,
                         std::span<const TrainingSample* const> batch,
                         const TrainConfig& config) {
  model.set_training(true);
  std::vector<Parameter*> params = model.parameters();
  for (Parameter* p : params) p->zero_grad();
  Tape tape;
  BatchObjective objective = batch_objective(model, tape, batch, config);
  double lc = 0.0, vc = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    lc += objective.lc[b];
    vc += objective.vc[b];
  }
  const double count = static_cast<double>(batch.size());
  const LossBreakdown breakdown = total_objective(
      lc / count, vc / count, objective.reg.value().item(), config.objective);
  if (!std::isfinite(objective.total.value().item())) {
    throw NumericError("train_step: non-finite total loss");
  }
  tape.backward(objective.total);
  if (config.clip_norm > 0.0) clip_grad_norm(params, config.clip_norm);
  optimizer.step(params);
  return breakdown;
}

}  // namespace kac
