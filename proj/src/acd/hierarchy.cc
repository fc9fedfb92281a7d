/*
 * Copyright 2026 The cdlab Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cdlab/acd/hierarchy.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "cdlab/errors.h"
#include "json.hpp"

namespace cdlab::acd {

Adjacency Adjacency::Chain(int64_t n) {
  Adjacency a;
  a.input_shape = {n};
  for (int64_t i = 0; i < n; ++i) {
    a.unit_coords.push_back({i});
    std::vector<int> nb;
    if (i > 0) nb.push_back(static_cast<int>(i - 1));
    if (i + 1 < n) nb.push_back(static_cast<int>(i + 1));
    a.neighbors.push_back(std::move(nb));
  }
  return a;
}

Adjacency Adjacency::Sequence(const Shape& input_shape, int64_t length) {
  if (input_shape.size() != 2 || length < 0 || length > input_shape[0]) {
    throw InvalidArgument("sequence adjacency needs [T, V] and 0 <= length <= T");
  }
  Adjacency a = Chain(length);
  a.input_shape = input_shape;
  const int64_t v = input_shape[1];
  for (int64_t t = 0; t < length; ++t) {
    a.unit_coords[t].clear();
    for (int64_t k = 0; k < v; ++k) a.unit_coords[t].push_back(t * v + k);
  }
  return a;
}

Adjacency Adjacency::Grid(const Shape& input_shape) {
  if (input_shape.size() != 3) throw InvalidArgument("grid adjacency needs [C, H, W]");
  const int64_t c = input_shape[0], h = input_shape[1], w = input_shape[2];
  Adjacency a;
  a.input_shape = input_shape;
  for (int64_t i = 0; i < h; ++i) {
    for (int64_t j = 0; j < w; ++j) {
      std::vector<int64_t> coords;
      for (int64_t ch = 0; ch < c; ++ch) coords.push_back((ch * h + i) * w + j);
      a.unit_coords.push_back(std::move(coords));
      std::vector<int> nb;
      if (i > 0) nb.push_back(static_cast<int>((i - 1) * w + j));
      if (j > 0) nb.push_back(static_cast<int>(i * w + j - 1));
      if (j + 1 < w) nb.push_back(static_cast<int>(i * w + j + 1));
      if (i + 1 < h) nb.push_back(static_cast<int>((i + 1) * w + j));
      a.neighbors.push_back(std::move(nb));
    }
  }
  return a;
}

void ValidateAdjacency(const Adjacency& adj) {
  const int n = adj.num_units();
  if (static_cast<int>(adj.neighbors.size()) != n) {
    throw InvalidArgument("adjacency: neighbor lists do not match unit count");
  }
  const int64_t size = NumElements(adj.input_shape);
  for (int u = 0; u < n; ++u) {
    for (int64_t c : adj.unit_coords[u]) {
      if (c < 0 || c >= size) throw InvalidArgument("adjacency: coordinate outside input");
    }
    for (int v : adj.neighbors[u]) {
      if (v == u) throw InvalidArgument("adjacency: unit " + std::to_string(u) + " is its own neighbor");
      if (v < 0 || v >= n) throw InvalidArgument("adjacency: neighbor index out of range");
      const auto& back = adj.neighbors[v];
      if (std::find(back.begin(), back.end(), u) == back.end()) {
        throw InvalidArgument("adjacency: relation is not symmetric");
      }
    }
  }
}

cd::FeatureGroup UnitMask(const Adjacency& adj, std::span<const int> units) {
  std::vector<double> m(NumElements(adj.input_shape), 0.0);
  for (int u : units) {
    for (int64_t c : adj.unit_coords.at(u)) m[c] = 1.0;
  }
  return Tensor(adj.input_shape, std::move(m));
}

std::vector<std::vector<int>> CandidateGroups(std::span<const int> group, const Adjacency& adj) {
  const std::set<int> in(group.begin(), group.end());
  std::set<int> boundary;
  for (int u : group) {
    for (int v : adj.neighbors.at(u)) {
      if (!in.count(v)) boundary.insert(v);
    }
  }
  std::vector<std::vector<int>> out;
  for (int v : boundary) {
    std::vector<int> cand(group.begin(), group.end());
    cand.push_back(v);
    std::sort(cand.begin(), cand.end());
    out.push_back(std::move(cand));
  }
  return out;
}

bool ScoreTies(double a, double b) {
  return std::abs(a - b) <= kTieTolerance * std::max({1.0, std::abs(a), std::abs(b)});
}

namespace {

std::vector<int> Merge(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  std::merge(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

// True when (score_a, units_a) should be processed before (score_b, units_b).
bool Before(double score_a, const std::vector<int>& a, double score_b, const std::vector<int>& b) {
  if (!ScoreTies(score_a, score_b)) return score_a > score_b;
  return a < b;
}

}  // namespace

Hierarchy BuildHierarchy(const net::Network& net, const Tensor& x, int class_index,
                         const Adjacency& adj, const HierarchyOptions& options) {
  if (!(options.k_percent > 0.0 && options.k_percent <= 100.0)) {
    throw InvalidArgument("k_percent must lie in (0, 100]");
  }
  if (adj.num_units() == 0) throw InvalidArgument("cannot build a hierarchy over an empty input");
  if (adj.input_shape != net.input_shape) {
    throw ShapeError("adjacency shape " + ShapeToString(adj.input_shape) +
                     " does not match network input " + ShapeToString(net.input_shape));
  }
  ValidateAdjacency(adj);

  Hierarchy h;
  h.class_index = class_index;
  h.k_percent = options.k_percent;
  const int n = adj.num_units();

  auto score_all = [&](const std::vector<std::vector<int>>& groups) {
    std::vector<cd::FeatureGroup> masks;
    for (const auto& g : groups) masks.push_back(UnitMask(adj, g));
    const auto scores = cd::ComputeCdScores(net, x, masks, class_index);
    std::vector<double> out;
    for (const auto& s : scores) out.push_back(s.beta_logit);
    return out;
  };

  std::vector<std::vector<int>> singles;
  for (int u = 0; u < n; ++u) singles.push_back({u});
  const std::vector<double> single_scores = score_all(singles);
  for (int u = 0; u < n; ++u) h.nodes.push_back({{u}, single_scores[u], 0, {}});

  std::vector<int> top(n);  // node id of the top-level group holding each unit
  for (int u = 0; u < n; ++u) top[u] = u;
  std::set<int> current;
  for (int u = 0; u < n; ++u) current.insert(u);

  int level = 0;
  while (current.size() > 1 && (options.max_levels <= 0 || level < options.max_levels)) {
    ++level;
    double best = -INFINITY;
    for (int id : current) best = std::max(best, h.nodes[id].score);
    const double threshold = best - options.k_percent / 100.0 * std::abs(best);
    std::vector<int> admitted;
    for (int id : current) {
      const double s = h.nodes[id].score;
      if (s >= threshold || ScoreTies(s, threshold)) admitted.push_back(id);
    }
    std::sort(admitted.begin(), admitted.end(), [&](int a, int b) {
      return Before(h.nodes[a].score, h.nodes[a].units, h.nodes[b].score, h.nodes[b].units);
    });

    std::vector<int> formed;
    for (int id : admitted) {
      if (!current.count(id)) continue;  // absorbed earlier this level
      const std::vector<int> units = h.nodes[id].units;
      const auto candidates = CandidateGroups(units, adj);
      if (candidates.empty()) continue;
      const std::vector<double> cand_scores = score_all(candidates);
      MergeStep step;
      step.level = level;
      step.group = id;
      int best_k = -1;
      for (size_t k = 0; k < candidates.size(); ++k) {
        int added = -1;
        for (int v : candidates[k]) {
          if (!std::binary_search(units.begin(), units.end(), v)) added = v;
        }
        const double inter = cand_scores[k] - h.nodes[id].score - single_scores[added];
        step.candidate_units.push_back(added);
        step.interactions.push_back(inter);
        if (best_k < 0 ||
            Before(inter, candidates[k], step.interactions[best_k], candidates[best_k])) {
          best_k = static_cast<int>(k);
        }
      }
      step.chosen_unit = step.candidate_units[best_k];
      step.merged_with = top[step.chosen_unit];
      HierarchyNode node;
      node.units = Merge(units, h.nodes[step.merged_with].units);
      node.level = level;
      node.children = {id, step.merged_with};
      const int new_id = static_cast<int>(h.nodes.size());
      step.result = new_id;
      h.nodes.push_back(std::move(node));
      current.erase(id);
      current.erase(step.merged_with);
      current.insert(new_id);
      for (int u : h.nodes[new_id].units) top[u] = new_id;
      formed.push_back(new_id);
      h.steps.push_back(std::move(step));
    }
    // Fresh scores for the groups formed at this level.
    std::vector<std::vector<int>> groups;
    std::vector<int> alive;
    for (int id : formed) {
      if (current.count(id)) {
        groups.push_back(h.nodes[id].units);
        alive.push_back(id);
      }
    }
    std::vector<int> absorbed;
    for (int id : formed) {
      if (!current.count(id)) absorbed.push_back(id);
    }
    for (int id : absorbed) groups.push_back(h.nodes[id].units);
    const auto scores = score_all(groups);
    for (size_t k = 0; k < alive.size(); ++k) h.nodes[alive[k]].score = scores[k];
    for (size_t k = 0; k < absorbed.size(); ++k) h.nodes[absorbed[k]].score = scores[alive.size() + k];
    if (formed.empty()) break;  // disconnected adjacency: nothing more to merge
  }
  h.levels = level;
  h.roots.assign(current.begin(), current.end());
  std::sort(h.roots.begin(), h.roots.end(), [&](int a, int b) {
    return h.nodes[a].units.front() < h.nodes[b].units.front();
  });
  return h;
}

std::string HierarchyToJson(const Hierarchy& h, const Adjacency& adj) {
  using nlohmann::json;
  std::function<json(int)> node_json = [&](int id) {
    const HierarchyNode& n = h.nodes[id];
    std::vector<int64_t> coords;
    for (int u : n.units) coords.insert(coords.end(), adj.unit_coords[u].begin(), adj.unit_coords[u].end());
    std::sort(coords.begin(), coords.end());
    json children = json::array();
    for (int c : n.children) children.push_back(node_json(c));
    return json{{"units", n.units}, {"coordinates", coords}, {"score", n.score},
                {"level", n.level}, {"children", std::move(children)}};
  };
  json roots = json::array();
  for (int r : h.roots) roots.push_back(node_json(r));
  json doc{{"class_index", h.class_index}, {"k_percent", h.k_percent}, {"levels", h.levels},
           {"roots", std::move(roots)}};
  return doc.dump(1);
}

std::vector<PatternScore> AggregateGroupScores(const net::Network& net,
                                               std::span<const Tensor> samples,
                                               std::span<const Adjacency> adjacencies,
                                               const PatternFn& pattern_of, int class_index,
                                               const HierarchyOptions& options,
                                               int64_t min_count) {
  if (samples.size() != adjacencies.size()) {
    throw InvalidArgument("one adjacency per sample is required");
  }
  std::map<std::string, std::pair<double, int64_t>> pool;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (adjacencies[i].num_units() == 0) continue;
    const Hierarchy h = BuildHierarchy(net, samples[i], class_index, adjacencies[i], options);
    for (const HierarchyNode& n : h.nodes) {
      auto& slot = pool[pattern_of(static_cast<int>(i), n.units)];
      slot.first += n.score;
      slot.second += 1;
    }
  }
  std::vector<PatternScore> out;
  for (const auto& [pattern, acc] : pool) {
    if (acc.second < min_count) continue;
    out.push_back({pattern, acc.first / static_cast<double>(acc.second), acc.second});
  }
  std::stable_sort(out.begin(), out.end(), [](const PatternScore& a, const PatternScore& b) {
    return a.mean_score > b.mean_score;
  });
  return out;
}

}  // namespace cdlab::acd
