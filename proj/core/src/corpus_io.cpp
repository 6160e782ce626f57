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

#include "kac/corpus_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "kac/errors.hpp"

namespace kac {

using nlohmann::json;

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

std::string where(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line) + ": ";
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

Box box_from(const json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw FormatError("box must be an array of 4 numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
          j[3].get<double>()};
}

json box_to(const Box& b) { return json::array({b.x1, b.y1, b.x2, b.y2}); }

void check_header(const json& header, const std::string& format,
                  const std::string& path) {
  if (!header.is_object() || header.value("format", "") != format) {
    throw FormatError(where(path, 1) + "expected a '" + format +
                      "' header record");
  }
  if (header.value("version", 0) != kCorpusFormatVersion) {
    throw FormatError(where(path, 1) + "unsupported " + format + " version");
  }
}

// Calls `fn(record, line_number)` for every non-blank line after the
// header, translating parse and schema errors into FormatError with the
// line number.
template <typename HeaderFn, typename Fn>
void for_each_record(const std::string& path, const std::string& format,
                     HeaderFn on_header, Fn fn) {
  std::ifstream in = open_in(path);
  std::string line;
  std::size_t number = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++number;
    if (blank(line)) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw FormatError(where(path, number) + "malformed record: " + e.what());
    }
    if (!have_header) {
      check_header(record, format, path);
      try {
        on_header(record);
      } catch (const json::exception& e) {
        throw FormatError(where(path, number) + "malformed header: " +
                          e.what());
      }
      have_header = true;
      continue;
    }
    try {
      fn(record, number);
    } catch (const json::exception& e) {
      throw FormatError(where(path, number) + "malformed record: " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(where(path, number) + e.what());
    } catch (const ReferenceError& e) {
      throw ReferenceError(where(path, number) + e.what());
    }
  }
  if (!have_header) throw FormatError(where(path, 1) + "missing header record");
}

}  // namespace

Corpus load_images(const std::string& path) {
  Corpus corpus;
  auto on_header = [&](const json& h) {
    corpus.feature_dim = h.at("feature_dim").get<std::size_t>();
    corpus.num_classes = h.at("num_classes").get<std::size_t>();
  };
  for_each_record(path, "kac-images", on_header, [&](const json& r,
                                                      std::size_t) {
    ProposalSet set;
    set.image_id = r.at("image_id").get<std::string>();
    set.width = r.at("width").get<double>();
    set.height = r.at("height").get<double>();
    set.global_feature = r.at("global_feature").get<std::vector<double>>();
    for (const json& p : r.at("proposals")) {
      Proposal proposal;
      proposal.box = box_from(p.at("box"));
      proposal.feature = p.at("feature").get<std::vector<double>>();
      proposal.class_probs = p.at("class_probs").get<std::vector<double>>();
      set.proposals.push_back(std::move(proposal));
    }
    validate(set, corpus.feature_dim, corpus.num_classes);
    corpus.images.push_back(std::move(set));
  });
  corpus.reindex();
  return corpus;
}

std::vector<Query> load_queries(const std::string& path, const Corpus& corpus) {
  std::vector<Query> queries;
  for_each_record(path, "kac-queries", [](const json&) {},
                  [&](const json& r, std::size_t) {
    Query q;
    q.query_id = r.at("query_id").get<std::string>();
    q.image_id = r.at("image_id").get<std::string>();
    q.tokens = r.at("tokens").get<std::vector<std::string>>();
    if (r.contains("noun_positions")) {
      q.noun_positions = r.at("noun_positions").get<std::vector<std::size_t>>();
    }
    if (r.contains("gt_box") && !r.at("gt_box").is_null()) {
      q.gt_box = box_from(r.at("gt_box"));
    }
    validate(q);
    const ProposalSet& image = corpus.image(q.image_id);
    if (q.gt_box) validate_box(*q.gt_box, image.width, image.height, "gt_box");
    queries.push_back(std::move(q));
  });
  return queries;
}

Corpus load_grounding_corpus(const std::string& images_path,
                             const std::string& queries_path) {
  Corpus corpus = load_images(images_path);
  corpus.queries = load_queries(queries_path, corpus);
  return corpus;
}

void write_images(const std::string& path, const Corpus& corpus) {
  std::ofstream out = open_out(path);
  out << json{{"format", "kac-images"},
              {"version", kCorpusFormatVersion},
              {"feature_dim", corpus.feature_dim},
              {"num_classes", corpus.num_classes}}
             .dump()
      << '\n';
  for (const ProposalSet& set : corpus.images) {
    json proposals = json::array();
    for (const Proposal& p : set.proposals) {
      proposals.push_back({{"box", box_to(p.box)},
                           {"feature", p.feature},
                           {"class_probs", p.class_probs}});
    }
    out << json{{"image_id", set.image_id},
                {"width", set.width},
                {"height", set.height},
                {"global_feature", set.global_feature},
                {"proposals", std::move(proposals)}}
               .dump()
        << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

void write_queries(const std::string& path, const std::vector<Query>& queries) {
  std::ofstream out = open_out(path);
  out << json{{"format", "kac-queries"}, {"version", kCorpusFormatVersion}}
             .dump()
      << '\n';
  for (const Query& q : queries) {
    json record{{"query_id", q.query_id},
                {"image_id", q.image_id},
                {"tokens", q.tokens}};
    if (q.noun_positions) record["noun_positions"] = *q.noun_positions;
    if (q.gt_box) record["gt_box"] = box_to(*q.gt_box);
    out << record.dump() << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in = open_in(path);
  EmbeddingTable table;
  std::string line;
  std::size_t number = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++number;
    if (blank(line)) continue;
    if (line[0] == '#') continue;
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    values.clear();
    std::string token;
    while (fields >> token) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(token, &used));
        if (used != token.size()) throw std::invalid_argument(token);
      } catch (const std::exception&) {
        throw FormatError(where(path, number) + "bad number '" + token + "'");
      }
    }
    // word2vec text header: "<count> <dim>"
    if (table.size() == 0 && values.size() == 1 &&
        word.find_first_not_of("0123456789") == std::string::npos) {
      continue;
    }
    try {
      table.add(word, values);
    } catch (const Error& e) {
      throw FormatError(where(path, number) + e.what());
    }
  }
  return table;
}

void write_embeddings(const std::string& path, const EmbeddingTable& table) {
  std::ofstream out = open_out(path);
  out << "#kac-embeddings 1\n";
  char buf[32];
  for (const std::string& word : table.words()) {
    out << word;
    const std::span<const double> vec = *table.find(word);
    for (double x : vec) {
      std::snprintf(buf, sizeof buf, " %.17g", x);
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<std::string> load_lines(const std::string& path) {
  std::ifstream in = open_in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && line[0] == '#') continue;
    if (blank(line)) continue;
    lines.push_back(line);
  }
  return lines;
}

void write_lines(const std::string& path, const std::vector<std::string>& lines,
                 const std::string& header) {
  std::ofstream out = open_out(path);
  if (!header.empty()) out << '#' << header << '\n';
  for (const std::string& l : lines) out << l << '\n';
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::unordered_set<std::string> load_lexicon(const std::string& path) {
  const std::vector<std::string> lines = load_lines(path);
  return {lines.begin(), lines.end()};
}

std::map<std::string, std::string> load_tags(const std::string& path) {
  std::map<std::string, std::string> tags;
  std::size_t number = 0;
  std::ifstream in = open_in(path);
  std::string line;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line) || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError(where(path, number) + "expected query_id<TAB>tag");
    }
    tags[line.substr(0, tab)] = line.substr(tab + 1);
  }
  return tags;
}

}  // namespace kac
