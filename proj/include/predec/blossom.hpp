#pragma once

#include <cstdint>
#include <vector>

namespace predec {

struct WeightedEdge {
  int u = 0, v = 0;
  std::int64_t w = 0;
};

// Maximum-weight matching on a general graph (Edmonds' blossom algorithm with
// dual variables, O(n^3)). With max_cardinality set, the result is the
// heaviest among the maximum-cardinality matchings. Returns mate per vertex,
// -1 when unmatched.
std::vector<int> max_weight_matching(int num_vertices, const std::vector<WeightedEdge>& edges,
                                     bool max_cardinality);

}  // namespace predec
