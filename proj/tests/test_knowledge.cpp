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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "kac/errors.hpp"
#include "kac/knowledge.hpp"
#include "support/fixtures.hpp"
#include "support/reference.hpp"

using namespace kac;
using kac::test::uniform;

namespace {

// Unit vectors: dog and puppy at cosine 0.2, cat at -0.1 from dog, car
// orthogonal to dog.
struct Fixture {
  EmbeddingTable table{3};
  std::map<std::string, std::vector<double>> raw;
  KnowledgeConfig config;

  Fixture() {
    const double s2 = std::sqrt(1.0 - 0.04), s3 = std::sqrt(1.0 - 0.01);
    raw = {{"dog", {1.0, 0.0, 0.0}},
           {"puppy", {0.2, s2, 0.0}},
           {"cat", {-0.1, 0.0, s3}},
           {"car", {0.0, 0.0, 1.0}},
           {"traffic", {0.0, 1.0, 0.0}},
           {"light", {0.0, 0.0, 2.0}}};
    for (const auto& [w, v] : raw) table.add(w, v);
    config.mode = GateMode::kSoft;
    config.class_names = {"dog", "puppy", "cat"};
    config.embeddings = &table;
  }
};

Proposal peaked(std::size_t k, std::size_t on, double mass = 0.7) {
  Proposal p;
  p.box = {0, 0, 1, 1};
  p.feature = {0.0};
  p.class_probs.assign(k, (1.0 - mass) / static_cast<double>(k - 1));
  p.class_probs[on] = mass;
  return p;
}

ProposalSet set_of(std::initializer_list<std::size_t> classes, std::size_t k = 3) {
  ProposalSet s;
  s.image_id = "img";
  s.width = s.height = 10.0;
  s.global_feature = {0.0};
  for (std::size_t c : classes) s.proposals.push_back(peaked(k, c));
  return s;
}

}  // namespace

TEST_CASE("word similarity") {
  Fixture f;
  CHECK(word_similarity("dog", "dog", f.table) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(word_similarity("dog", "car", f.table) == 0.0);
  CHECK(word_similarity("dog", "zebra", f.table) == 0.0);
  CHECK(word_similarity("zebra", "dog", f.table) == 0.0);
  CHECK(word_similarity("dog", "puppy", f.table) == doctest::Approx(0.2).epsilon(1e-12));
  SUBCASE("multi-word names average their word vectors") {
    // mean of (0,1,0) and (0,0,1) after unit normalization: cosine with car
    // is 1/sqrt(2).
    CHECK(word_similarity("traffic light", "car", f.table) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
  }
  SUBCASE("zero-norm phrase vector") {
    EmbeddingTable t(2);
    t.add("up", std::vector<double>{1.0, 0.0});
    t.add("down", std::vector<double>{-1.0, 0.0});
    CHECK_THROWS_AS(word_similarity("up down", "up", t), NumericError);
  }
}

TEST_CASE("knowledge scores") {
  Fixture f;
  const std::vector<std::string> dog{"dog"};
  SUBCASE("identical class word scores one") {
    const auto raw = compute_knowledge(dog, set_of({0}), f.config);
    CHECK(raw[0] == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("two nouns average their similarities") {
    const std::vector<std::string> nouns{"dog", "car"};
    const auto raw = compute_knowledge(nouns, set_of({0}), f.config);
    CHECK(raw[0] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("three proposals peaked on different classes") {
    const auto raw = compute_knowledge(dog, set_of({0, 1, 2}), f.config);
    REQUIRE(raw.size() == 3);
    CHECK(std::fabs(raw[0] - 1.0) < 1e-12);
    CHECK(std::fabs(raw[1] - 0.2) < 1e-12);
    CHECK(std::fabs(raw[2] + 0.1) < 1e-12);
    const ProposalSet s = set_of({0, 1, 2});
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(std::fabs(raw[i] - ref::knowledge(s.proposals[i].class_probs,
                                             f.config.class_names, dog, f.raw)) < 1e-12);
    }
  }
  SUBCASE("no nouns means zero knowledge") {
    const auto raw = compute_knowledge({}, set_of({0, 1}), f.config);
    CHECK(raw == std::vector<double>{0.0, 0.0});
  }
  SUBCASE("argmax ties go to the lowest class index") {
    ProposalSet s = set_of({0});
    s.proposals[0].class_probs = {0.1, 0.45, 0.45};
    const auto raw = compute_knowledge(dog, s, f.config);
    CHECK(std::fabs(raw[0] - 0.2) < 1e-12);
    CHECK(argmax(std::vector<double>{1.0, 3.0, 3.0}) == 1);
  }
  SUBCASE("distribution length must match the class list") {
    CHECK_THROWS_AS(compute_knowledge(dog, set_of({0}, 4), f.config), FormatError);
  }
}

TEST_CASE("knowledge against the scalar oracle on random instances") {
  Rng rng(8);
  EmbeddingTable table(5);
  std::map<std::string, std::vector<double>> raw;
  const std::vector<std::string> words{"a", "b", "c", "d", "e", "f"};
  for (const auto& w : words) {
    raw[w] = kac::test::random_vector(5, rng);
    table.add(w, raw[w]);
  }
  KnowledgeConfig config;
  config.class_names = {"a", "b", "c d", "e", "zz"};
  config.embeddings = &table;
  for (int trial = 0; trial < 50; ++trial) {
    const ProposalSet set = kac::test::random_proposals(6, 2, 5, rng);
    std::vector<std::string> nouns;
    for (int j = 0; j < 1 + trial % 3; ++j) {
      nouns.push_back(words[static_cast<std::size_t>(uniform(rng, 0, 5.99))]);
    }
    const auto got = compute_knowledge(nouns, set, config);
    for (std::size_t i = 0; i < set.size(); ++i) {
      const double expect =
          ref::knowledge(set.proposals[i].class_probs, config.class_names, nouns, raw);
      CHECK(std::fabs(got[i] - expect) < 1e-10);
      CHECK(got[i] >= -1.0 - 1e-12);
      CHECK(got[i] <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("knowledge is invariant to positive rescaling of class distributions") {
  Rng rng(9);
  Fixture f;
  const std::vector<std::string> nouns{"dog", "cat"};
  for (int trial = 0; trial < 20; ++trial) {
    ProposalSet s = kac::test::random_proposals(5, 1, 3, rng);
    const auto before = compute_knowledge(nouns, s, f.config);
    for (Proposal& p : s.proposals) {
      const double factor = uniform(rng, 0.01, 100.0);
      for (double& x : p.class_probs) x *= factor;
    }
    CHECK(compute_knowledge(nouns, s, f.config) == before);
  }
}

TEST_CASE("knowledge and gates permute with the proposals") {
  Rng rng(10);
  Fixture f;
  const std::vector<std::string> nouns{"puppy"};
  ProposalSet s = kac::test::random_proposals(5, 1, 3, rng);
  const auto raw = compute_knowledge(nouns, s, f.config);
  std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  ProposalSet p = s;
  for (std::size_t i = 0; i < 5; ++i) p.proposals[i] = s.proposals[perm[i]];
  const auto permuted = compute_knowledge(nouns, p, f.config);
  const auto g1 = apply_gate(raw, GateMode::kHard, 0.3, GateContext::kConsistency);
  const auto g2 = apply_gate(permuted, GateMode::kHard, 0.3, GateContext::kConsistency);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(permuted[i] == raw[perm[i]]);
    CHECK(g2.gate[i] == g1.gate[perm[i]]);
  }
}

TEST_CASE("gates") {
  SUBCASE("hard threshold") {
    const auto g = apply_gate(std::vector<double>{0.4, 0.2}, GateMode::kHard, 0.3,
                              GateContext::kConsistency);
    CHECK(g.gate == std::vector<double>{1.0, 0.0});
    CHECK_FALSE(g.fallback_applied);
  }
  SUBCASE("hard threshold is inclusive") {
    const auto g = apply_gate(std::vector<double>{0.3}, GateMode::kHard, 0.3,
                              GateContext::kConsistency);
    CHECK(g.gate[0] == 1.0);
  }
  SUBCASE("all-zero hard gate falls back to ones for reconstruction") {
    const auto g = apply_gate(std::vector<double>{0.1, 0.2}, GateMode::kHard, 0.3,
                              GateContext::kReconstruction);
    CHECK(g.gate == std::vector<double>{1.0, 1.0});
    CHECK(g.fallback_applied);
  }
  SUBCASE("all-zero hard gate stays zero for consistency") {
    const auto g = apply_gate(std::vector<double>{0.1, 0.2}, GateMode::kHard, 0.3,
                              GateContext::kConsistency);
    CHECK(g.gate == std::vector<double>{0.0, 0.0});
    CHECK_FALSE(g.fallback_applied);
  }
  SUBCASE("soft gate at zero") {
    const auto g = apply_gate(std::vector<double>{0.0}, GateMode::kSoft, 0.3,
                              GateContext::kReconstruction);
    CHECK(g.gate[0] == 0.5);
  }
  SUBCASE("soft gate never falls back and stays strictly inside (0, 1)") {
    Rng rng(11);
    std::vector<double> raw(50);
    for (double& x : raw) x = uniform(rng, -1.0, 1.0);
    raw[0] = -1.0;
    raw[1] = 1.0;
    raw[2] = -30.0;
    raw[3] = 30.0;
    for (auto ctx : {GateContext::kConsistency, GateContext::kReconstruction}) {
      const auto g = apply_gate(raw, GateMode::kSoft, 0.3, ctx);
      CHECK_FALSE(g.fallback_applied);
      for (double v : g.gate) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
      }
    }
    const auto low = apply_gate(std::vector<double>{-0.5, -0.9}, GateMode::kSoft, 0.3,
                                GateContext::kReconstruction);
    CHECK_FALSE(low.fallback_applied);
  }
  SUBCASE("hard gate values are exactly zero or one") {
    Rng rng(12);
    std::vector<double> raw(40);
    for (double& x : raw) x = uniform(rng, -1.0, 1.0);
    const auto g = apply_gate(raw, GateMode::kHard, 0.1, GateContext::kReconstruction);
    for (double v : g.gate) CHECK((v == 0.0 || v == 1.0));
  }
  SUBCASE("disabled gate is all ones") {
    const auto g = apply_gate(std::vector<double>{-1.0, 0.5}, GateMode::kNone, 0.3,
                              GateContext::kConsistency);
    CHECK(g.gate == std::vector<double>{1.0, 1.0});
  }
}

TEST_CASE("noun extraction") {
  const std::unordered_set<std::string> lexicon{"man", "football"};
  const std::vector<std::string> tokens{"a", "man", "playing", "football"};
  CHECK(extract_nouns(tokens, lexicon) == std::vector<std::size_t>{1, 3});
  const std::vector<std::string> none{"the", "red", "one"};
  CHECK(extract_nouns(none, lexicon).empty());
  const std::vector<std::string> twice{"man", "and", "man"};
  CHECK(extract_nouns(twice, lexicon) == std::vector<std::size_t>{0, 2});
  CHECK_THROWS_AS(extract_nouns({}, lexicon), ContractError);

  Query q;
  q.tokens = tokens;
  CHECK(query_nouns(q, lexicon) == std::vector<std::string>{"man", "football"});
  q.noun_positions = std::vector<std::size_t>{2};
  CHECK(query_nouns(q, lexicon) == std::vector<std::string>{"playing"});
}

TEST_CASE("knowledge config validation") {
  Fixture f;
  CHECK_NOTHROW(f.config.validate());
  KnowledgeConfig c = f.config;
  c.mode = GateMode::kHard;
  c.threshold = 1.5;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.threshold = 0.1;
  CHECK_NOTHROW(c.validate());
  c.class_names.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = f.config;
  c.embeddings = nullptr;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(parse_gate_mode("hard") == GateMode::kHard);
  CHECK(to_string(GateMode::kSoft) == "soft");
  CHECK_THROWS_AS(parse_gate_mode("medium"), ConfigError);
}
