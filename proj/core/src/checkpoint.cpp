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

#include "kac/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "json.hpp"
#include "kac/errors.hpp"

namespace kac {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'K', 'A', 'C', 'C', 'K', 'P', 'T', '1'};

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

struct NamedTensor {
  std::string name;
  Tensor* tensor;
};

std::vector<NamedTensor> state_of(KacModel& model) {
  std::vector<NamedTensor> out;
  for (Parameter* p : model.parameters()) out.push_back({p->name, &p->value});
  if (model.config().batch_norm) {
    out.push_back({"norm.running_mean", &model.norm.running_mean});
    out.push_back({"norm.running_var", &model.norm.running_var});
  }
  return out;
}

json config_to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"feature_dim", c.feature_dim},
          {"embed_dim", c.embed_dim},
          {"query_dim", c.query_dim},
          {"recon_dim", c.recon_dim},
          {"multimodal_dim", c.multimodal_dim},
          {"batch_norm", c.batch_norm},
          {"bn_momentum", c.bn_momentum},
          {"bn_epsilon", c.bn_epsilon}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.feature_dim = j.at("feature_dim").get<std::size_t>();
  c.embed_dim = j.at("embed_dim").get<std::size_t>();
  c.query_dim = j.at("query_dim").get<std::size_t>();
  c.recon_dim = j.at("recon_dim").get<std::size_t>();
  c.multimodal_dim = j.at("multimodal_dim").get<std::size_t>();
  c.batch_norm = j.at("batch_norm").get<bool>();
  c.bn_momentum = j.at("bn_momentum").get<double>();
  c.bn_epsilon = j.at("bn_epsilon").get<double>();
  return c;
}

struct RawCheckpoint {
  json header;
  std::vector<double> payload;
};

RawCheckpoint read_raw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  const std::string what = "checkpoint '" + path + "': ";
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw CheckpointError(what + "not a checkpoint file");
  }
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + 8, 8);
  if (header_len > bytes.size() - 16) {
    throw CheckpointError(what + "truncated header");
  }
  RawCheckpoint raw;
  try {
    raw.header = json::parse(bytes.begin() + 16,
                             bytes.begin() + 16 + static_cast<long>(header_len));
    if (raw.header.at("format") != "kac-checkpoint" ||
        raw.header.at("version") != 1) {
      throw CheckpointError(what + "unsupported format or version");
    }
  } catch (const json::exception& e) {
    throw CheckpointError(what + "malformed header: " + e.what());
  }
  const std::size_t count = raw.header.at("payload_doubles").get<std::size_t>();
  const std::size_t payload_bytes = bytes.size() - 16 - header_len;
  if (payload_bytes != count * sizeof(double)) {
    throw CheckpointError(what + "truncated payload (" +
                          std::to_string(payload_bytes) + " bytes, expected " +
                          std::to_string(count * sizeof(double)) + ")");
  }
  raw.payload.resize(count);
  std::memcpy(raw.payload.data(), bytes.data() + 16 + header_len,
              payload_bytes);
  return raw;
}

// Validates every tensor against the model before copying anything.
void apply_tensors(const RawCheckpoint& raw, KacModel& model,
                   const std::string& path) {
  const std::string what = "checkpoint '" + path + "': ";
  std::vector<NamedTensor> state = state_of(model);
  const json& table = raw.header.at("tensors");
  if (table.size() != state.size()) {
    throw CheckpointError(what + "holds " + std::to_string(table.size()) +
                          " tensors, model expects " +
                          std::to_string(state.size()));
  }
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < state.size(); ++i) {
    const json& entry = table[i];
    const std::string name = entry.at("name").get<std::string>();
    const Shape shape = entry.at("shape").get<Shape>();
    const std::size_t offset = entry.at("offset").get<std::size_t>();
    if (name != state[i].name) {
      throw CheckpointError(what + "tensor '" + name + "' where model expects '" +
                            state[i].name + "'");
    }
    if (shape != state[i].tensor->shape()) {
      throw CheckpointError(what + "tensor '" + name + "' has shape " +
                            to_string(shape) + ", model expects " +
                            to_string(state[i].tensor->shape()));
    }
    if (offset + shape_size(shape) > raw.payload.size()) {
      throw CheckpointError(what + "tensor '" + name + "' exceeds the payload");
    }
    offsets.push_back(offset);
  }
  for (std::size_t i = 0; i < state.size(); ++i) {
    Tensor& t = *state[i].tensor;
    std::copy(raw.payload.begin() + offsets[i],
              raw.payload.begin() + offsets[i] + t.size(), t.data().begin());
  }
}

}  // namespace

void save_checkpoint(const std::string& path, KacModel& model,
                     const Vocabulary& vocabulary,
                     const std::map<std::string, std::string>& settings) {
  json tensors = json::array();
  std::vector<double> payload;
  for (const NamedTensor& nt : state_of(model)) {
    tensors.push_back({{"name", nt.name},
                       {"shape", nt.tensor->shape()},
                       {"offset", payload.size()}});
    payload.insert(payload.end(), nt.tensor->data().begin(),
                   nt.tensor->data().end());
  }
  const json header{{"format", "kac-checkpoint"},
                    {"version", 1},
                    {"model_config", config_to_json(model.config())},
                    {"settings", settings},
                    {"vocabulary", vocabulary.words()},
                    {"tensors", std::move(tensors)},
                    {"payload_doubles", payload.size()}};
  const std::string text = header.dump();
  const std::uint64_t header_len = text.size();

  // Write to a sibling file first so a failed write never clobbers the
  // previous checkpoint.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp + "' for writing");
    out.write(kMagic, 8);
    out.write(reinterpret_cast<const char*>(&header_len), 8);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.write(reinterpret_cast<const char*>(payload.data()),
              static_cast<std::streamsize>(payload.size() * sizeof(double)));
    if (!out) throw IoError("failed writing '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    throw IoError("cannot move checkpoint into place at '" + path + "'");
  }
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  RawCheckpoint raw = read_raw(path);
  try {
    const ModelConfig config = config_from_json(raw.header.at("model_config"));
    LoadedCheckpoint out{
        KacModel(config, 0),
        Vocabulary::from_words(
            raw.header.at("vocabulary").get<std::vector<std::string>>()),
        raw.header.at("settings").get<std::map<std::string, std::string>>()};
    if (out.vocabulary.size() != config.vocab_size) {
      throw CheckpointError("checkpoint '" + path +
                            "': vocabulary size disagrees with model config");
    }
    apply_tensors(raw, out.model, path);
    return out;
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint '" + path + "': " + e.what());
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError("checkpoint '" + path + "': " + e.what());
  }
}

void load_checkpoint_into(const std::string& path, KacModel& model) {
  RawCheckpoint raw = read_raw(path);
  try {
    apply_tensors(raw, model, path);
  } catch (const json::exception& e) {
    throw CheckpointError("checkpoint '" + path + "': " + e.what());
  }
}

}  // namespace kac
