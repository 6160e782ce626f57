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

#include "kac/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "kac/errors.hpp"

namespace kac {

double iou(const Box& a, const Box& b) {
  if (!(a.area() > 0.0) || !(b.area() > 0.0)) {
    throw ContractError("iou: degenerate box with zero area");
  }
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

EvalReport accuracy_at_iou(std::span<const Prediction> predictions,
                           std::span<const Query> queries, double threshold,
                           const std::map<std::string, std::string>* tags,
                           std::vector<QueryOutcome>* outcomes) {
  std::unordered_map<std::string, const Query*> by_id;
  for (const Query& q : queries) by_id.emplace(q.query_id, &q);

  std::vector<std::string> missing;
  for (const Prediction& p : predictions) {
    auto it = by_id.find(p.query_id);
    if (it == by_id.end()) {
      throw ReferenceError("accuracy_at_iou: unknown query_id '" + p.query_id +
                           "'");
    }
    if (!it->second->gt_box) missing.push_back(p.query_id);
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) {
      list += (i ? ", " : "") + missing[i];
    }
    if (missing.size() > 20) list += ", ...";
    throw ContractError("accuracy_at_iou: " + std::to_string(missing.size()) +
                        " queries lack a ground-truth box: " + list);
  }

  EvalReport report;
  report.threshold = threshold;
  for (const Prediction& p : predictions) {
    const Query& q = *by_id.at(p.query_id);
    const double overlap = iou(p.box, *q.gt_box);
    const bool hit = overlap > threshold;
    ++report.total;
    report.hits += hit ? 1 : 0;
    if (tags) {
      auto t = tags->find(p.query_id);
      TagStats& stats =
          report.by_tag[t == tags->end() ? std::string("untagged") : t->second];
      ++stats.total;
      stats.hits += hit ? 1 : 0;
    }
    if (outcomes) {
      outcomes->push_back({p.query_id, p.box, *q.gt_box, overlap, hit});
    }
  }
  report.accuracy = report.total
                        ? static_cast<double>(report.hits) / report.total
                        : 0.0;
  for (auto& [tag, stats] : report.by_tag) {
    stats.accuracy = static_cast<double>(stats.hits) / stats.total;
  }
  return report;
}

std::string report_json(const EvalReport& report,
                        const std::map<std::string, std::string>& config) {
  nlohmann::json j{{"format", "kac-eval-report"},
                   {"version", 1},
                   {"threshold", report.threshold},
                   {"total", report.total},
                   {"hits", report.hits},
                   {"accuracy", report.accuracy},
                   {"config", config}};
  if (!report.by_tag.empty()) {
    nlohmann::json tags = nlohmann::json::object();
    for (const auto& [tag, stats] : report.by_tag) {
      tags[tag] = {{"total", stats.total},
                   {"hits", stats.hits},
                   {"accuracy", stats.accuracy}};
    }
    j["by_tag"] = std::move(tags);
  }
  return j.dump(2) + "\n";
}

std::string report_table(const EvalReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %8s %8s %10s\n", "group", "queries",
                "hits", "accuracy");
  out << line;
  std::snprintf(line, sizeof line, "%-20s %8zu %8zu %9.2f%%\n", "all",
                report.total, report.hits, 100.0 * report.accuracy);
  out << line;
  for (const auto& [tag, stats] : report.by_tag) {
    std::snprintf(line, sizeof line, "%-20s %8zu %8zu %9.2f%%\n", tag.c_str(),
                  stats.total, stats.hits, 100.0 * stats.accuracy);
    out << line;
  }
  return out.str();
}

std::string outcomes_csv(std::span<const QueryOutcome> outcomes) {
  std::ostringstream out;
  out << "query_id,chosen_x1,chosen_y1,chosen_x2,chosen_y2,gt_x1,gt_y1,gt_x2,"
         "gt_y2,iou,hit\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const QueryOutcome& o : outcomes) {
    out << o.query_id << ',' << num(o.chosen.x1) << ',' << num(o.chosen.y1)
        << ',' << num(o.chosen.x2) << ',' << num(o.chosen.y2) << ','
        << num(o.truth.x1) << ',' << num(o.truth.y1) << ',' << num(o.truth.x2)
        << ',' << num(o.truth.y2) << ',' << num(o.iou) << ','
        << (o.hit ? 1 : 0) << '\n';
  }
  return out.str();
}

}  // namespace kac
