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

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "kac/model.hpp"

namespace kac::test {

inline double uniform(Rng& rng, double lo = -1.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(shape);
  for (double& x : t.data()) x = uniform(rng, lo, hi);
  return t;
}

inline std::vector<double> random_vector(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = uniform(rng);
  return v;
}

inline ProposalSet random_proposals(std::size_t n, std::size_t d_v,
                                    std::size_t k, Rng& rng,
                                    const std::string& id = "img") {
  ProposalSet set;
  set.image_id = id;
  set.width = 200.0;
  set.height = 100.0;
  set.global_feature = random_vector(d_v, rng);
  for (std::size_t i = 0; i < n; ++i) {
    Proposal p;
    const double x1 = std::floor(uniform(rng, 0.0, 150.0));
    const double y1 = std::floor(uniform(rng, 0.0, 70.0));
    p.box = {x1, y1, x1 + 1.0 + std::floor(uniform(rng, 0.0, 49.0)),
             y1 + 1.0 + std::floor(uniform(rng, 0.0, 29.0))};
    p.feature = random_vector(d_v, rng);
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      p.class_probs.push_back(uniform(rng, 0.01, 1.0));
      total += p.class_probs.back();
    }
    for (double& x : p.class_probs) x /= total;
    set.proposals.push_back(std::move(p));
  }
  return set;
}

inline std::vector<std::size_t> random_tokens(std::size_t t, std::size_t vocab,
                                              Rng& rng) {
  std::vector<std::size_t> out(t);
  for (auto& id : out) {
    id = std::uniform_int_distribution<std::size_t>(3, vocab - 1)(rng);
  }
  return out;
}

inline ModelConfig tiny_config(std::size_t vocab = 8, std::size_t d_v = 4) {
  ModelConfig c;
  c.vocab_size = vocab;
  c.feature_dim = d_v;
  c.embed_dim = 3;
  c.query_dim = 6;
  c.recon_dim = 6;
  c.multimodal_dim = 5;
  return c;
}

// Moves every parameter and normalization statistic off its initial value
// so no term is trivially zero or one.
inline void scramble(KacModel& model, Rng& rng, double scale = 0.5) {
  for (Parameter* p : model.parameters()) {
    for (double& x : p->value.data()) x += uniform(rng, -scale, scale);
  }
  for (double& x : model.norm.running_mean.data()) x = uniform(rng, -0.3, 0.3);
  for (double& x : model.norm.running_var.data()) x = uniform(rng, 0.5, 2.0);
}

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("kac_test_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

}  // namespace kac::test
