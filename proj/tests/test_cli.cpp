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

#include <sstream>

#include "doctest.h"
#include "kac/checkpoint.hpp"
#include "kac/corpus_io.hpp"
#include "kac/errors.hpp"
#include "kac_cli/commands.hpp"
#include "kac_cli/run_config.hpp"
#include "nlohmann/json.hpp"
#include "support/fixtures.hpp"

using namespace kac;
using namespace kac::cli;
using namespace kac::test;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// A small synthetic corpus plus a config file pointing at it.
struct Workspace {
  TempDir dir;
  std::string config;

  explicit Workspace(const std::string& extra = "") {
    config = dir.file("run.cfg");
    const std::string s = dir.file("synth");
    write_file(config, "out_dir = " + s + "\nimages = " + s + "/images.jsonl\n" +
                           "queries = " + s + "/train_queries.jsonl\n" +
                           "embeddings = " + s + "/embeddings.txt\n" +
                           "classes = " + s + "/classes.txt\n" +
                           "lexicon = " + s + "/lexicon.txt\n" +
                           "checkpoint = " + dir.file("m.ckpt") + "\n" +
                           "metrics = " + dir.file("metrics.csv") + "\n" +
                           "synth_images = 48\nsynth_test = 16\nsynth_classes = 4\n" +
                           "synth_proposals = 4\nsynth_feature_dim = 8\n" +
                           "synth_location_dim = 2\nsynth_embedding_dim = 6\n" +
                           "multimodal_dim = 6\nquery_dim = 6\nrecon_dim = 6\n" +
                           "embed_dim = 4\nbatch_size = 8\nepochs = 1\n" + extra);
  }
  std::string path(const std::string& name) const { return dir.file(name); }
  Run run(std::vector<std::string> args) const {
    args.insert(args.begin() + 1, {"--config", config});
    return invoke(args);
  }
};

std::size_t data_rows(const std::string& log) {
  std::istringstream in(log);
  std::string line;
  std::size_t rows = 0;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      CHECK(line == "step,lc,vc,reg,total");
      header = true;
      continue;
    }
    ++rows;
  }
  CHECK(header);
  return rows;
}

const char* kImages =
    R"({"format":"kac-images","version":1,"feature_dim":2,"num_classes":3}
{"image_id":"three","width":100,"height":100,"global_feature":[0,1],"proposals":[)"
    R"({"box":[0,0,50,50],"feature":[1,0],"class_probs":[0.8,0.1,0.1]},)"
    R"({"box":[50,0,100,50],"feature":[0,1],"class_probs":[0.1,0.8,0.1]},)"
    R"({"box":[0,50,50,100],"feature":[1,1],"class_probs":[0.1,0.1,0.8]}]}
{"image_id":"one","width":10,"height":10,"global_feature":[0,0],"proposals":[)"
    R"({"box":[1,1,9,9],"feature":[0.5,0.5],"class_probs":[0.2,0.3,0.5]}]}
)";

const char* kQueries = R"({"format":"kac-queries","version":1}
{"query_id":"q1","image_id":"three","tokens":["a","dog"],"gt_box":[0,50,50,100]}
{"query_id":"q2","image_id":"one","tokens":["the","cat"],"gt_box":[1,1,9,9]}
)";

// Hand-written corpus where only proposal 2 of image "three" is a dog.
struct TinyCorpus {
  TempDir dir;
  std::string config;
  TinyCorpus() {
    write_file(dir.file("images.jsonl"), kImages);
    write_file(dir.file("queries.jsonl"), kQueries);
    write_file(dir.file("emb.txt"), "cat 1 0 0\ncar 0 1 0\ndog 0 0 1\n");
    write_file(dir.file("classes.txt"), "cat\ncar\ndog\n");
    write_file(dir.file("lexicon.txt"), "cat\ncar\ndog\n");
    config = dir.file("run.cfg");
    write_file(config, "images = " + dir.file("images.jsonl") + "\nqueries = " +
                           dir.file("queries.jsonl") + "\nembeddings = " + dir.file("emb.txt") +
                           "\nclasses = " + dir.file("classes.txt") + "\nlexicon = " +
                           dir.file("lexicon.txt") + "\ncheckpoint = " + dir.file("m.ckpt") +
                           "\nmetrics = " + dir.file("metrics.csv") +
                           "\nmultimodal_dim = 4\nquery_dim = 4\nrecon_dim = 4\nembed_dim = 3\n"
                           "epochs = 0\n");
    REQUIRE(invoke({"train", "--config", config}).code == kOk);
  }
  Run ground(const std::string& query, const std::string& image, const std::string& gate) {
    return invoke({"ground", "--config", config, "--gate", gate, "--query", query, "--image", image});
  }
};

}  // namespace

TEST_CASE("config precedence") {
  TempDir dir;
  write_file(dir.file("a.cfg"), "# comment\nlambda = 2.5\nepochs=4\ngate = hard\n\n");
  RunConfig c;
  for (const auto& [k, v] : read_config_file(dir.file("a.cfg"))) set_field(c, k, v);
  CHECK(c.lambda == 2.5);
  CHECK(c.epochs == 4);
  CHECK(c.mu == 0.005);
  CHECK(c.gate_mode() == GateMode::kHard);

  RunConfig defaults;
  CHECK(defaults.lambda == 10.0);
  CHECK(defaults.mu == 0.005);
  CHECK(defaults.multimodal_dim == 128);
  CHECK(defaults.query_dim == 512);
  CHECK(defaults.recon_dim == 512);
  CHECK(defaults.batch_size == 40);
  CHECK(defaults.threshold == 0.3);

  CHECK_THROWS_AS(set_field(c, "lamda", "1"), ConfigError);
  CHECK_THROWS_AS(set_field(c, "epochs", "4x"), ConfigError);
  CHECK_THROWS_AS(set_field(c, "lc", "maybe"), ConfigError);
  write_file(dir.file("b.cfg"), "lambda 3\n");
  CHECK_THROWS_AS(read_config_file(dir.file("b.cfg")), ConfigError);

  // Flags beat the file; the echo in the synth summary shows the winner.
  Workspace ws("synth_noise = 0.25\n");
  const Run r = ws.run({"synth", "--synth_noise", "0.75"});
  REQUIRE(r.code == kOk);
  CHECK(read_file(ws.path("synth/config.txt")).find("# synth_noise=0.75\n") != std::string::npos);
}

TEST_CASE("config invariants") {
  RunConfig c;
  c.lc = false;
  c.vc = false;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.lambda = -1;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.gate = "fuzzy";
  CHECK_THROWS_AS(c.validate(), ConfigError);

  Workspace ws;
  const Run r = ws.run({"synth", "--synth_classes", "1"});
  CHECK(r.code == kUsageError);
  CHECK(r.err.find("error:") != std::string::npos);
  CHECK(invoke({"train", "--lc", "false", "--vc", "false"}).code == kUsageError);
  CHECK(invoke({"bogus"}).code == kUsageError);
  CHECK(invoke({}).code == kUsageError);
  CHECK(invoke({"ground", "--image", "x"}).code == kUsageError);
  CHECK(invoke({"--help"}).code == kOk);
}

TEST_CASE("synth writes reproducible files") {
  Workspace a, b;
  REQUIRE(a.run({"synth"}).code == kOk);
  REQUIRE(b.run({"synth"}).code == kOk);
  for (const char* f : {"images.jsonl", "queries.jsonl", "train_queries.jsonl",
                        "test_queries.jsonl", "embeddings.txt", "classes.txt", "lexicon.txt",
                        "tags.tsv"}) {
    CAPTURE(f);
    const std::string x = read_file(a.path(std::string("synth/") + f));
    CHECK_FALSE(x.empty());
    CHECK(x == read_file(b.path(std::string("synth/") + f)));
  }
  const Corpus c = load_grounding_corpus(a.path("synth/images.jsonl"), a.path("synth/queries.jsonl"));
  CHECK(c.images.size() == 48);
  CHECK(c.queries.size() == 48);
  CHECK(c.feature_dim == 8);
  CHECK(c.num_classes == 4);
  const Corpus test = load_grounding_corpus(a.path("synth/images.jsonl"), a.path("synth/test_queries.jsonl"));
  CHECK(test.queries.size() == 16);

  Workspace other;
  REQUIRE(other.run({"synth", "--seed", "2"}).code == kOk);
  CHECK(read_file(other.path("synth/images.jsonl")) != read_file(a.path("synth/images.jsonl")));
}

TEST_CASE("train logs and checkpoints") {
  Workspace ws;
  REQUIRE(ws.run({"synth"}).code == kOk);

  SUBCASE("zero epochs keeps the initialization") {
    REQUIRE(ws.run({"train", "--epochs", "0"}).code == kOk);
    CHECK(data_rows(read_file(ws.path("metrics.csv"))) == 0);
    LoadedCheckpoint loaded = load_checkpoint(ws.path("m.ckpt"));
    KacModel fresh(loaded.model.config(), 1);
    std::vector<Parameter*> a = loaded.model.parameters(), b = fresh.parameters();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i]->value == b[i]->value);
  }
  SUBCASE("language-only runs log a zero vc column") {
    REQUIRE(ws.run({"train", "--vc", "false"}).code == kOk);
    const std::string log = read_file(ws.path("metrics.csv"));
    CHECK(data_rows(log) == 4);
    std::istringstream in(log);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#' || line[0] == 's') continue;
      std::istringstream fields(line);
      std::string step, lc, vc;
      std::getline(fields, step, ',');
      std::getline(fields, lc, ',');
      std::getline(fields, vc, ',');
      CHECK(vc == "0");
      CHECK(std::stod(lc) > 0.0);
    }
  }
  SUBCASE("fixed seed gives identical logs and checkpoints") {
    REQUIRE(ws.run({"train", "--epochs", "2"}).code == kOk);
    const std::string log = read_file(ws.path("metrics.csv"));
    const std::string ckpt = read_file(ws.path("m.ckpt"));
    REQUIRE(ws.run({"train", "--epochs", "2"}).code == kOk);
    CHECK(read_file(ws.path("metrics.csv")) == log);
    CHECK(read_file(ws.path("m.ckpt")) == ckpt);
    CHECK(log.find("# lambda=10\n") != std::string::npos);
    CHECK(data_rows(log) == 8);
  }
  SUBCASE("validation split writes a best checkpoint") {
    const Run r = ws.run({"train", "--val_queries", ws.path("synth/test_queries.jsonl")});
    REQUIRE(r.code == kOk);
    CHECK(r.out.find("val_accuracy") != std::string::npos);
    CHECK_NOTHROW(load_checkpoint(ws.path("m.ckpt.best")));
  }
  SUBCASE("missing inputs") {
    CHECK(ws.run({"train", "--images", ws.path("nope.jsonl")}).code == kDataError);
  }
}

TEST_CASE("eval") {
  Workspace ws("synth_noise = 0\nsynth_corruption = 0\n");
  REQUIRE(ws.run({"synth"}).code == kOk);
  REQUIRE(ws.run({"train", "--epochs", "0"}).code == kOk);

  SUBCASE("oracle checkpoint scores 1.0") {
    // Flat attention leaves the ranking to the knowledge gate.
    LoadedCheckpoint loaded = load_checkpoint(ws.path("m.ckpt"));
    loaded.model.attention.weight.value.fill(0.0);
    loaded.model.attention.bias.value.fill(0.0);
    save_checkpoint(ws.path("oracle.ckpt"), loaded.model, loaded.vocabulary, loaded.settings);
    const Run r = ws.run({"eval", "--checkpoint", ws.path("oracle.ckpt"), "--queries",
                          ws.path("synth/test_queries.jsonl"), "--report", ws.path("r.json"),
                          "--outcomes", ws.path("o.csv"), "--tags", ws.path("synth/tags.tsv")});
    REQUIRE(r.code == kOk);
    const auto j = nlohmann::json::parse(read_file(ws.path("r.json")));
    CHECK(j.at("accuracy").get<double>() == 1.0);
    CHECK(j.at("total") == 16);
    CHECK(j.contains("by_tag"));
    CHECK(j.at("config").at("gate") == "soft");
    CHECK(r.out.find("100.00%") != std::string::npos);
    const std::string outcomes = read_file(ws.path("o.csv"));
    CHECK(outcomes.rfind("# images=", 0) == 0);
    CHECK(outcomes.find("query_id,chosen_x1") != std::string::npos);
  }
  SUBCASE("queries without ground truth") {
    std::string text = read_file(ws.path("synth/test_queries.jsonl"));
    const auto at = text.find("\"gt_box\"");
    REQUIRE(at != std::string::npos);
    text.erase(at, text.find(']', at) + 2 - at);
    write_file(ws.path("nogt.jsonl"), text);
    const Run r = ws.run({"eval", "--queries", ws.path("nogt.jsonl")});
    CHECK(r.code == kDataError);
    CHECK(r.err.find("ground-truth") != std::string::npos);
  }
  SUBCASE("missing checkpoint") {
    CHECK(ws.run({"eval", "--checkpoint", ws.path("absent.ckpt")}).code == kDataError);
  }
}

TEST_CASE("ground") {
  TinyCorpus tiny;
  const Run one = tiny.ground("the cat", "one", "soft");
  REQUIRE(one.code == kOk);
  CHECK(one.out.find("chosen: 0\n") != std::string::npos);
  CHECK(tiny.ground("a dog", "one", "hard").out.find("chosen: 0\n") != std::string::npos);

  const Run hard = tiny.ground("a dog", "three", "hard");
  REQUIRE(hard.code == kOk);
  CHECK(hard.out.find("chosen: 2\n") != std::string::npos);
  CHECK(hard.out.find("box: 0 50 50 100\n") != std::string::npos);
  CHECK(hard.out.find("gate_fallback: no\n") != std::string::npos);
  CHECK(hard.out.find("# gate=hard\n") != std::string::npos);
  CHECK(tiny.ground("a dog", "three", "hard").out == hard.out);

  const Run unknown = tiny.ground("a zebra", "three", "hard");
  REQUIRE(unknown.code == kOk);
  CHECK(unknown.err.find("zebra") != std::string::npos);
  CHECK(unknown.out.find("gate_fallback: yes\n") != std::string::npos);

  CHECK(tiny.ground("a dog", "four", "soft").code == kDataError);
  CHECK(invoke({"ground", "--config", tiny.config, "--checkpoint", tiny.dir.file("x.ckpt"),
             "--query", "a dog", "--image", "one"})
            .code == kDataError);
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ConfigError("x")) == kUsageError);
  CHECK(exit_code_for(FormatError("x")) == kDataError);
  CHECK(exit_code_for(IoError("x")) == kDataError);
  CHECK(exit_code_for(ReferenceError("x")) == kDataError);
  CHECK(exit_code_for(CheckpointError("x")) == kDataError);
  CHECK(exit_code_for(NumericError("x")) == kNumericError);
}
