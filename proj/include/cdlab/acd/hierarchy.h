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

#ifndef CDLAB_ACD_HIERARCHY_H_
#define CDLAB_ACD_HIERARCHY_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cdlab/cd/cd.h"
#include "cdlab/net/network.h"

namespace cdlab::acd {

// Units are the atoms of the hierarchy: a coordinate of a vector input, a
// time step of a sequence (all vocabulary channels), or a pixel of an image
// (all color channels). `neighbors` must be symmetric and irreflexive.
struct Adjacency {
  Shape input_shape;
  std::vector<std::vector<int64_t>> unit_coords;  // flat input indices
  std::vector<std::vector<int>> neighbors;        // sorted ascending

  int num_units() const { return static_cast<int>(unit_coords.size()); }

  // Vector input [n] as a chain.
  static Adjacency Chain(int64_t n);
  // Sequence input [T, V]; the first `length` steps form a chain.
  static Adjacency Sequence(const Shape& input_shape, int64_t length);
  // Image input [C, H, W] with a 4-neighborhood over pixels.
  static Adjacency Grid(const Shape& input_shape);
};

// Throws InvalidArgument if the relation is not symmetric and irreflexive or
// refers to coordinates outside the input.
void ValidateAdjacency(const Adjacency& adj);

// Mask over the input for a set of units.
cd::FeatureGroup UnitMask(const Adjacency& adj, std::span<const int> units);

// group u {v} for every unit v adjacent to the group, ordered by v.
std::vector<std::vector<int>> CandidateGroups(std::span<const int> group, const Adjacency& adj);

struct HierarchyNode {
  std::vector<int> units;  // sorted
  double score = 0.0;      // beta at the class logit
  int level = 0;
  std::vector<int> children;  // node indices
};

// One greedy expansion: `group` (a node) scored every boundary unit by
// interaction(group, {unit}) and merged with the top-level node holding the
// winner.
struct MergeStep {
  int level = 0;
  int group = 0;
  std::vector<int> candidate_units;
  std::vector<double> interactions;
  int chosen_unit = -1;
  int merged_with = -1;
  int result = -1;
};

struct HierarchyOptions {
  double k_percent = 5.0;
  int max_levels = 0;  // 0: until a single root
};

struct Hierarchy {
  int class_index = 0;
  double k_percent = 5.0;
  int levels = 0;
  std::vector<HierarchyNode> nodes;  // singletons first, in unit order
  std::vector<int> roots;            // top-level nodes at the end
  std::vector<MergeStep> steps;
};

// Scores within `tie_tolerance` relative to max(1, |a|, |b|) count as equal;
// equal candidates resolve to the lexicographically smallest unit list.
inline constexpr double kTieTolerance = 1e-12;
bool ScoreTies(double a, double b);

// Agglomerative hierarchy over the units of `adj` for sample x. Each level
// admits every top-level group scoring at least max - (k/100)|max|, and each
// admitted group (best first) absorbs the top-level group holding its
// highest-interaction neighbor. Throws InvalidArgument for k outside (0, 100]
// or an adjacency without units.
Hierarchy BuildHierarchy(const net::Network& net, const Tensor& x, int class_index,
                         const Adjacency& adj, const HierarchyOptions& options = {});

std::string HierarchyToJson(const Hierarchy& h, const Adjacency& adj);

struct PatternScore {
  std::string pattern;
  double mean_score = 0.0;
  int64_t count = 0;
};

// Labels the units of a node of sample `sample`, e.g. the token subsequence.
using PatternFn = std::function<std::string(int sample, std::span<const int> units)>;

// Builds a hierarchy for each sample and pools node scores by pattern. Rows
// with fewer than `min_count` occurrences are dropped; the rest are sorted by
// mean score (descending), then by pattern.
std::vector<PatternScore> AggregateGroupScores(const net::Network& net,
                                               std::span<const Tensor> samples,
                                               std::span<const Adjacency> adjacencies,
                                               const PatternFn& pattern_of, int class_index,
                                               const HierarchyOptions& options,
                                               int64_t min_count = 1);

}  // namespace cdlab::acd

#endif  // CDLAB_ACD_HIERARCHY_H_
