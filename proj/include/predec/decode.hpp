#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "predec/canon.hpp"
#include "predec/graph.hpp"
#include "predec/lattice.hpp"

namespace predec {

struct DecodeResult {
  // Matched detection pairs (a < b); b is the boundary node for boundary matches.
  std::vector<std::pair<int, int>> matched;
  std::vector<int> path_edges;  // graph edges on the expanded paths, with repeats
  double weight = 0;
  std::uint8_t obs = 0;         // predicted logical flip
  bool obs_ambiguous = false;   // brute force only: optima disagree on obs
  int passes = 1;
};

// Shortest-path cache over one graph. Paths may end at the boundary but never
// pass through it. A matcher built with explicit weights is a private overlay.
class Matcher {
 public:
  explicit Matcher(const MatchingGraph& g);
  Matcher(const MatchingGraph& g, std::vector<double> weights);

  DecodeResult mwpm(const std::vector<int>& detections) const;
  DecodeResult brute_force(const std::vector<int>& detections) const;

  const MatchingGraph& graph() const { return *g_; }
  const std::vector<double>& weights() const { return w_; }

 private:
  struct Tree {
    std::vector<double> dist;
    std::vector<int> pred_edge;
  };
  const Tree& tree(int source) const;
  Tree dijkstra(int source) const;
  void expand(int from, int to, DecodeResult& r) const;
  void prepare(const std::vector<int>& dets) const;

  const MatchingGraph* g_;
  std::vector<double> w_;
  std::vector<std::vector<std::pair<int, int>>> adj_;  // (neighbor, edge)
  mutable std::vector<Tree> trees_;
  mutable std::vector<std::uint8_t> have_;
};

// Integer scale used to hand weights to the blossom solver.
inline constexpr double kWeightScale = 1e7;

DecodeResult mwpm(const MatchingGraph& g, const std::vector<int>& detections);
// Exhaustive minimum over pairings and boundary assignments (at most 12 detections).
DecodeResult brute_force_match(const MatchingGraph& g, const std::vector<int>& detections);

enum class CorrelatedMode { Replace, Multiply };

// Two passes: matched edges of one graph reweight their hyperedge partners in
// the other graph with -ln P(E2|E1), then both graphs are matched again.
std::pair<DecodeResult, DecodeResult> correlated_decode(const MatchingGraph& gx, const MatchingGraph& gz,
                                                        const std::vector<int>& det_x, const std::vector<int>& det_z,
                                                        CorrelatedMode mode = CorrelatedMode::Replace);
// Same with caller-owned first-pass matchers.
std::pair<DecodeResult, DecodeResult> correlated_decode(const Matcher& mx, const Matcher& mz,
                                                        const std::vector<int>& det_x, const std::vector<int>& det_z,
                                                        CorrelatedMode mode = CorrelatedMode::Replace);

// Spacelike and timelike corrections of the matched paths in label layout
// (Z corrections and X-stabilizer timelike labels for the X graph).
LabelVolume corrections_from_matching(const DecodeResult& r, const MatchingGraph& g, const LatticeGeometry& geom);

}  // namespace predec
