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

#include <map>
#include <string>
#include <unordered_set>
#include <vector>

#include "kac/corpus.hpp"
#include "kac/embeddings.hpp"

namespace kac {

// Line-delimited JSON corpora. The first line of each file is a header
// record naming the format and version:
//
//   images:  {"format":"kac-images","version":1,"feature_dim":D,"num_classes":K}
//            {"image_id":..,"width":..,"height":..,"global_feature":[D],
//             "proposals":[{"box":[x1,y1,x2,y2],"feature":[D],
//                           "class_probs":[K]}, ...]}
//   queries: {"format":"kac-queries","version":1}
//            {"query_id":..,"image_id":..,"tokens":[..],
//             "noun_positions":[..] (optional), "gt_box":[x1,y1,x2,y2]
//             (optional)}
//
// Errors carry "<path>:<line>:". Blank lines are ignored.
inline constexpr int kCorpusFormatVersion = 1;

Corpus load_grounding_corpus(const std::string& images_path,
                             const std::string& queries_path);
// Images only (feature_dim/num_classes from the header); queries empty.
Corpus load_images(const std::string& path);
// Queries checked against the images of `corpus`.
std::vector<Query> load_queries(const std::string& path, const Corpus& corpus);

void write_images(const std::string& path, const Corpus& corpus);
void write_queries(const std::string& path, const std::vector<Query>& queries);

// Word vectors, one "word v1 .. vd" per line. Accepts an optional
// "#kac-embeddings 1" header or a word2vec "<count> <dim>" header line.
EmbeddingTable load_embeddings(const std::string& path);
void write_embeddings(const std::string& path, const EmbeddingTable& table);

// One entry per line; lines starting with '#' are comments. For class
// names the entry's position is its class index.
std::vector<std::string> load_lines(const std::string& path);
void write_lines(const std::string& path, const std::vector<std::string>& lines,
                 const std::string& header);
std::unordered_set<std::string> load_lexicon(const std::string& path);

// "query_id<TAB>tag" per line.
std::map<std::string, std::string> load_tags(const std::string& path);

}  // namespace kac
