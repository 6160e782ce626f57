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

#include "kac_cli/run_config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <system_error>

#include "kac/errors.hpp"

namespace kac::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw ConfigError("config: bad value '" + text + "' for " + key);
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("config: bad boolean '" + text + "' for " + key);
}

std::string format(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string format(bool v) { return v ? "true" : "false"; }

template <typename T>
std::string format(T v) requires std::is_integral_v<T> {
  return std::to_string(v);
}

struct Field {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field field(std::string key, T RunConfig::*member) {
  Field f;
  f.key = key;
  f.get = [member](const RunConfig& c) {
    if constexpr (std::is_same_v<T, std::string>) {
      return c.*member;
    } else {
      return format(c.*member);
    }
  };
  f.set = [member, key](RunConfig& c, const std::string& text) {
    if constexpr (std::is_same_v<T, std::string>) {
      c.*member = text;
    } else if constexpr (std::is_same_v<T, bool>) {
      c.*member = parse_bool(key, text);
    } else {
      if constexpr (std::is_unsigned_v<T>) {
        if (!text.empty() && text[0] == '-') {
          throw ConfigError("config: " + key + " must be non-negative");
        }
      }
      c.*member = parse_number<T>(key, text);
    }
  };
  return f;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      field("images", &RunConfig::images),
      field("queries", &RunConfig::queries),
      field("val_queries", &RunConfig::val_queries),
      field("embeddings", &RunConfig::embeddings),
      field("classes", &RunConfig::classes),
      field("lexicon", &RunConfig::lexicon),
      field("tags", &RunConfig::tags),
      field("checkpoint", &RunConfig::checkpoint),
      field("best_checkpoint", &RunConfig::best_checkpoint),
      field("metrics", &RunConfig::metrics),
      field("report", &RunConfig::report),
      field("outcomes", &RunConfig::outcomes),
      field("out_dir", &RunConfig::out_dir),
      field("lambda", &RunConfig::lambda),
      field("mu", &RunConfig::mu),
      field("threshold", &RunConfig::threshold),
      field("gate", &RunConfig::gate),
      field("lc", &RunConfig::lc),
      field("vc", &RunConfig::vc),
      field("multimodal_dim", &RunConfig::multimodal_dim),
      field("query_dim", &RunConfig::query_dim),
      field("recon_dim", &RunConfig::recon_dim),
      field("embed_dim", &RunConfig::embed_dim),
      field("batch_norm", &RunConfig::batch_norm),
      field("batch_size", &RunConfig::batch_size),
      field("learning_rate", &RunConfig::learning_rate),
      field("clip_norm", &RunConfig::clip_norm),
      field("epochs", &RunConfig::epochs),
      field("seed", &RunConfig::seed),
      field("max_proposals", &RunConfig::max_proposals),
      field("synth_classes", &RunConfig::synth_classes),
      field("synth_proposals", &RunConfig::synth_proposals),
      field("synth_feature_dim", &RunConfig::synth_feature_dim),
      field("synth_location_dim", &RunConfig::synth_location_dim),
      field("synth_images", &RunConfig::synth_images),
      field("synth_test", &RunConfig::synth_test),
      field("synth_embedding_dim", &RunConfig::synth_embedding_dim),
      field("synth_noise", &RunConfig::synth_noise),
      field("synth_overlap", &RunConfig::synth_overlap),
      field("synth_corruption", &RunConfig::synth_corruption),
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("config: lambda must be >= 0");
  if (!(mu >= 0.0)) throw ConfigError("config: mu must be >= 0");
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (!lc && !vc) throw ConfigError("config: lc and vc cannot both be off");
  const GateMode mode = gate_mode();
  if (mode == GateMode::kHard && !(threshold >= 0.0 && threshold <= 1.0)) {
    throw ConfigError("config: threshold must lie in [0, 1]");
  }
  if (!(learning_rate > 0.0)) {
    throw ConfigError("config: learning_rate must be > 0");
  }
  if (!(clip_norm >= 0.0)) throw ConfigError("config: clip_norm must be >= 0");
  if (multimodal_dim == 0 || query_dim == 0 || recon_dim == 0 ||
      embed_dim == 0) {
    throw ConfigError("config: model dimensions must be positive");
  }
}

GateMode RunConfig::gate_mode() const {
  try {
    return parse_gate_mode(gate);
  } catch (const Error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

Branches RunConfig::branches() const {
  if (lc && vc) return Branches::kBoth;
  if (lc) return Branches::kLanguage;
  if (vc) return Branches::kVisual;
  throw ConfigError("config: lc and vc cannot both be off");
}

ModelConfig RunConfig::model_config(std::size_t vocab_size,
                                    std::size_t feature_dim) const {
  ModelConfig m;
  m.vocab_size = vocab_size;
  m.feature_dim = feature_dim;
  m.embed_dim = embed_dim;
  m.query_dim = query_dim;
  m.recon_dim = recon_dim;
  m.multimodal_dim = multimodal_dim;
  m.batch_norm = batch_norm;
  return m;
}

SyntheticSpec RunConfig::synthetic_spec() const {
  SyntheticSpec s;
  s.classes = synth_classes;
  s.proposals = synth_proposals;
  s.feature_dim = synth_feature_dim;
  s.location_dim = synth_location_dim;
  s.images = synth_images;
  s.noise = synth_noise;
  s.overlap = synth_overlap;
  s.corruption = synth_corruption;
  s.embedding_dim = synth_embedding_dim;
  s.seed = seed;
  return s;
}

std::map<std::string, std::string> RunConfig::to_map() const {
  std::map<std::string, std::string> out;
  for (const Field& f : fields()) out[f.key] = f.get(*this);
  return out;
}

void set_field(RunConfig& config, const std::string& key,
               const std::string& value) {
  for (const Field& f : fields()) {
    if (f.key == key) {
      f.set(config, value);
      return;
    }
  }
  throw ConfigError("config: unknown key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> read_config_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(number) +
                        ": expected key=value");
    }
    entries.emplace_back(trim(text.substr(0, eq)), trim(text.substr(eq + 1)));
  }
  return entries;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const Field& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

std::string echo_config(const RunConfig& config) {
  std::string out;
  for (const Field& f : fields()) {
    out += "# " + f.key + "=" + f.get(config) + "\n";
  }
  return out;
}

}  // namespace kac::cli
