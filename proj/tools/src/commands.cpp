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

#include "kac_cli/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <unordered_set>

#include "kac/checkpoint.hpp"
#include "kac/corpus_io.hpp"
#include "kac/errors.hpp"
#include "kac/synthetic.hpp"
#include "kac/trainer.hpp"
#include "kac/vocabulary.hpp"

namespace kac::cli {

namespace fs = std::filesystem;

namespace {

std::string number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string require_path(const std::string& value, const std::string& key) {
  if (value.empty()) throw ConfigError("config: " + key + " is required");
  return value;
}

void cap_proposals(Corpus& corpus, std::size_t cap) {
  if (cap == 0) return;
  for (ProposalSet& set : corpus.images) {
    if (set.proposals.size() > cap) set.proposals.resize(cap);
  }
}

struct Dataset {
  Corpus corpus;
  std::vector<Query> queries;
  std::vector<Query> validation;
};

Dataset load_dataset(const RunConfig& config, bool with_validation) {
  Dataset d;
  d.corpus = load_images(require_path(config.images, "images"));
  d.queries = load_queries(require_path(config.queries, "queries"), d.corpus);
  if (with_validation && !config.val_queries.empty()) {
    d.validation = load_queries(config.val_queries, d.corpus);
  }
  cap_proposals(d.corpus, config.max_proposals);
  return d;
}

// External knowledge; empty when the gate is off.
struct Knowledge {
  EmbeddingTable embeddings;
  std::vector<std::string> class_names;
  std::unordered_set<std::string> lexicon;
  GateMode mode = GateMode::kNone;
  double threshold = 0.3;

  KnowledgeConfig config() const {
    KnowledgeConfig c;
    c.mode = mode;
    c.threshold = threshold;
    c.class_names = class_names;
    c.embeddings = &embeddings;
    return c;
  }
};

void load_knowledge(const RunConfig& config, const Corpus& corpus,
                    Knowledge& k) {
  k.mode = config.gate_mode();
  k.threshold = config.threshold;
  if (k.mode == GateMode::kNone) return;
  k.embeddings = load_embeddings(require_path(config.embeddings, "embeddings"));
  k.class_names = load_lines(require_path(config.classes, "classes"));
  if (!config.lexicon.empty()) k.lexicon = load_lexicon(config.lexicon);
  if (k.class_names.size() != corpus.num_classes) {
    throw FormatError("classes file lists " +
                      std::to_string(k.class_names.size()) +
                      " names but the corpus declares " +
                      std::to_string(corpus.num_classes) + " classes");
  }
  k.config().validate();
}

std::vector<TrainingSample> samples_for(const Dataset& data,
                                        std::span<const Query> queries,
                                        const Vocabulary& vocabulary,
                                        const Knowledge& knowledge) {
  return prepare_samples(data.corpus, queries, vocabulary, knowledge.config(),
                         knowledge.lexicon);
}

std::string best_path(const RunConfig& config) {
  return config.best_checkpoint.empty() ? config.checkpoint + ".best"
                                        : config.best_checkpoint;
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const std::string& w : words) out += (out.empty() ? "" : " ") + w;
  return out;
}

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

}  // namespace

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const ConfigError*>(&error)) return kUsageError;
  if (dynamic_cast<const NumericError*>(&error)) return kNumericError;
  if (dynamic_cast<const DomainError*>(&error)) return kNumericError;
  return kDataError;
}

void run_synth(const RunConfig& config, std::ostream& out) {
  const SyntheticSpec spec = config.synthetic_spec();
  spec.validate();
  if (config.synth_test > spec.images) {
    throw ConfigError("config: synth_test exceeds synth_images");
  }
  const SyntheticData data = generate_synthetic(spec);
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) {
    throw IoError("cannot create '" + config.out_dir + "': " + ec.message());
  }
  const fs::path dir(config.out_dir);
  const std::vector<Query>& all = data.corpus.queries;
  const auto split = all.begin() + static_cast<std::ptrdiff_t>(
                                       all.size() - config.synth_test);
  write_images((dir / "images.jsonl").string(), data.corpus);
  write_queries((dir / "queries.jsonl").string(), all);
  write_queries((dir / "train_queries.jsonl").string(), {all.begin(), split});
  write_queries((dir / "test_queries.jsonl").string(), {split, all.end()});
  write_embeddings((dir / "embeddings.txt").string(), data.embeddings);
  write_lines((dir / "classes.txt").string(), data.class_names,
              "kac-classes 1");
  write_lines((dir / "lexicon.txt").string(), data.lexicon, "kac-lexicon 1");
  std::vector<std::string> tag_lines;
  for (const Query& q : all) tag_lines.push_back(q.query_id + "\t" + data.tags.at(q.query_id));
  write_lines((dir / "tags.tsv").string(), tag_lines, "kac-tags 1");
  std::ofstream echo(dir / "config.txt");
  echo << echo_config(config);
  if (!echo) throw IoError("failed writing config.txt in '" + config.out_dir + "'");

  out << "wrote " << data.corpus.images.size() << " images, " << all.size()
      << " queries (" << (all.size() - config.synth_test) << " train, "
      << config.synth_test << " test), " << data.class_names.size()
      << " classes, " << data.embeddings.size() << " embeddings to "
      << config.out_dir << "\n";
}

TrainSummary run_train(const RunConfig& config, std::ostream& out) {
  config.validate();
  const Dataset data = load_dataset(config, true);
  Knowledge knowledge;
  load_knowledge(config, data.corpus, knowledge);
  const Vocabulary vocabulary = Vocabulary::from_queries(data.queries);
  const std::vector<TrainingSample> samples =
      samples_for(data, data.queries, vocabulary, knowledge);
  const std::vector<TrainingSample> validation =
      samples_for(data, data.validation, vocabulary, knowledge);

  KacModel model(config.model_config(vocabulary.size(), data.corpus.feature_dim),
                 config.seed);
  const std::map<std::string, std::string> settings = config.to_map();

  std::ofstream metrics(config.metrics, std::ios::trunc);
  if (!metrics) throw IoError("cannot open '" + config.metrics + "' for writing");
  metrics << echo_config(config) << "step,lc,vc,reg,total\n" << std::flush;

  TrainOptions options;
  options.train.objective.lambda = config.lambda;
  options.train.objective.mu = config.mu;
  options.train.objective.branches = config.branches();
  options.train.gate = knowledge.mode;
  options.train.threshold = config.threshold;
  options.train.clip_norm = config.clip_norm;
  options.adam.learning_rate = config.learning_rate;
  options.batch_size = config.batch_size;
  options.epochs = config.epochs;
  options.seed = config.seed;

  TrainSummary summary;
  auto on_step = [&](std::size_t step, const LossBreakdown& loss) {
    metrics << step << ',' << number(loss.lc) << ',' << number(loss.vc) << ','
            << number(loss.reg) << ',' << number(loss.total) << '\n'
            << std::flush;
    summary.steps = step;
  };
  auto on_epoch = [&](std::size_t epoch) {
    out << "epoch " << epoch << " steps " << summary.steps;
    if (!validation.empty()) {
      const EvalReport report = accuracy_at_iou(
          to_predictions(ground_all(model, validation, knowledge.mode,
                                    knowledge.threshold)),
          data.validation);
      out << " val_accuracy " << std::fixed << std::setprecision(4)
          << report.accuracy << std::defaultfloat;
      if (report.accuracy > summary.best_val_accuracy) {
        summary.best_val_accuracy = report.accuracy;
        save_checkpoint(best_path(config), model, vocabulary, settings);
      }
    }
    out << "\n";
  };

  try {
    train(model, samples, options, on_step, on_epoch);
  } catch (const NumericError&) {
    save_checkpoint(config.checkpoint, model, vocabulary, settings);
    throw;
  }
  save_checkpoint(config.checkpoint, model, vocabulary, settings);
  out << "trained " << summary.steps << " steps; checkpoint "
      << config.checkpoint << "\n";
  return summary;
}

EvalReport run_eval(const RunConfig& config, std::ostream& out) {
  config.validate();
  LoadedCheckpoint loaded = load_checkpoint(config.checkpoint);
  const Dataset data = load_dataset(config, false);
  Knowledge knowledge;
  load_knowledge(config, data.corpus, knowledge);
  const std::vector<TrainingSample> samples =
      samples_for(data, data.queries, loaded.vocabulary, knowledge);
  std::optional<std::map<std::string, std::string>> tags;
  if (!config.tags.empty()) tags = load_tags(config.tags);

  const std::vector<GroundedQuery> grounded =
      ground_all(loaded.model, samples, knowledge.mode, knowledge.threshold);
  std::vector<QueryOutcome> outcomes;
  const std::vector<Prediction> predictions = to_predictions(grounded);
  const EvalReport report =
      accuracy_at_iou(predictions, data.queries, 0.5,
                      tags ? &*tags : nullptr, &outcomes);

  out << report_table(report);
  if (!config.report.empty()) {
    std::ofstream file(config.report, std::ios::trunc);
    file << report_json(report, config.to_map()) << "\n";
    if (!file) throw IoError("failed writing '" + config.report + "'");
  }
  if (!config.outcomes.empty()) {
    std::ofstream file(config.outcomes, std::ios::trunc);
    file << echo_config(config) << outcomes_csv(outcomes);
    if (!file) throw IoError("failed writing '" + config.outcomes + "'");
  }
  return report;
}

GroundingResult run_ground(const RunConfig& config, const std::string& query,
                           const std::string& image_id, std::ostream& out,
                           std::ostream& err) {
  config.validate();
  LoadedCheckpoint loaded = load_checkpoint(config.checkpoint);
  Corpus corpus = load_images(require_path(config.images, "images"));
  cap_proposals(corpus, config.max_proposals);
  const ProposalSet& image = corpus.image(image_id);
  Knowledge knowledge;
  load_knowledge(config, corpus, knowledge);

  Query q;
  q.query_id = "cli";
  q.image_id = image_id;
  q.tokens = split_words(query);
  validate(q);
  std::vector<std::string> unknown;
  const std::vector<std::size_t> tokens = loaded.vocabulary.encode(q.tokens, &unknown);
  for (const std::string& w : unknown) {
    err << "warning: '" << w << "' is not in the vocabulary; using <unk>\n";
  }
  std::vector<double> raw(image.size(), 0.0);
  if (knowledge.mode != GateMode::kNone) {
    raw = compute_knowledge(query_nouns(q, knowledge.lexicon), image,
                            knowledge.config());
  }
  const GroundingResult result = ground(loaded.model, tokens, image, raw,
                                        knowledge.mode, knowledge.threshold);

  out << echo_config(config);
  out << "query: " << join(q.tokens) << "\n";
  out << "image: " << image_id << "\n";
  out << "chosen: " << result.chosen << "\n";
  out << "box: " << number(result.box.x1) << ' ' << number(result.box.y1) << ' '
      << number(result.box.x2) << ' ' << number(result.box.y2) << "\n";
  out << "gate_fallback: " << (result.fallback_applied ? "yes" : "no") << "\n";
  out << std::setw(8) << "index" << std::setw(12) << "confidence"
      << std::setw(12) << "knowledge" << std::setw(12) << "gate"
      << std::setw(12) << "final" << "\n";
  out << std::fixed << std::setprecision(6);
  for (std::size_t i = 0; i < image.size(); ++i) {
    out << std::setw(8) << i << std::setw(12) << result.confidence[i]
        << std::setw(12) << raw[i] << std::setw(12) << result.gate[i]
        << std::setw(12) << result.scores[i] << "\n";
  }
  out << std::defaultfloat;
  return result;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Ground phrases in region proposals; trained without region "
               "labels"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "flat key=value config file");
  std::map<std::string, std::string> flags;
  for (const std::string& key : config_keys()) {
    app.add_option("--" + key, flags[key]);
  }
  CLI::App* synth = app.add_subcommand("synth", "write a synthetic corpus");
  CLI::App* train_cmd = app.add_subcommand("train", "train a model");
  CLI::App* eval = app.add_subcommand("eval", "score a checkpoint");
  CLI::App* ground_cmd =
      app.add_subcommand("ground", "ground one query in one image");
  std::string query, image_id;
  ground_cmd->add_option("--query", query, "query text")->required();
  ground_cmd->add_option("--image", image_id, "image id")->required();
  for (CLI::App* sub : {synth, train_cmd, eval, ground_cmd}) sub->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    RunConfig config;
    if (!config_path.empty()) {
      for (const auto& [key, value] : read_config_file(config_path)) {
        set_field(config, key, value);
      }
    }
    for (const std::string& key : config_keys()) {
      if (app.get_option("--" + key)->count() > 0) {
        set_field(config, key, flags[key]);
      }
    }
    if (synth->parsed()) {
      run_synth(config, out);
    } else if (train_cmd->parsed()) {
      run_train(config, out);
    } else if (eval->parsed()) {
      run_eval(config, out);
    } else {
      run_ground(config, query, image_id, out, err);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kOk;
}

}  // namespace kac::cli
