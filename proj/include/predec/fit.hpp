#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "predec/graph.hpp"
#include "predec/noise.hpp"
#include "predec/sim.hpp"

namespace predec {

using LogitVector = std::array<double, kNumNoiseParams>;

// p = exp(a + (b - a) * sigmoid(z)) with a = ln(p_min / 100), b = ln(3 p_max).
struct BoundedLogspace {
  double p_min = 1e-3;
  double p_max = 1e-2;

  double lower() const { return p_min / 100; }
  double upper() const { return 3 * p_max; }
  double forward(double z) const;
  double derivative(double z) const;  // dp/dz
  // Throws std::domain_error outside the open image interval.
  double inverse(double p) const;
  // Variance-stabilizing weight (p0 / p)^2 with p0 = sqrt(p_min p_max).
  double weight(double p) const;

  ParamVector map(const LogitVector& z) const;
  LogitVector unmap(const ParamVector& p) const;
};

struct EdgeTarget {
  Basis kind = Basis::X;
  std::string tag;
  double target = 0;
  double count = 1;
  XorExpr expr;
};

struct HyperTarget {
  std::string x_tag, z_tag;
  double target = 0;
  double count = 1;
  std::vector<XorExpr> exprs;  // model value is their mean
};

struct FitTarget {
  int d = 0;
  std::vector<EdgeTarget> edges;
  std::vector<HyperTarget> hyper;
  std::int64_t shots = 0;      // 0 for formula-derived targets
  int clamped_estimates = 0;   // negative discriminants set to zero

  void validate() const;
  nlohmann::json to_json() const;
};

// Streaming one- and two-point detector counts for every graph edge incident
// to a set of window nodes.
class EdgeStatistics {
 public:
  EdgeStatistics(const MatchingGraph& g, const std::vector<int>& window_nodes);

  void add(const std::vector<int>& detections);
  void merge(const EdgeStatistics& o);
  std::int64_t shots() const { return shots_; }

  // Per graph edge; NaN for edges without an estimate. Pair edges use the
  // two-point inversion, boundary edges of window nodes divide the node
  // marginal by the other incident edges.
  std::vector<double> estimate(int* clamped = nullptr) const;

 private:
  const MatchingGraph* g_;
  std::vector<int> window_;
  std::vector<int> tracked_;                            // pair edges
  std::vector<std::vector<std::pair<int, int>>> nbr_;  // node -> (higher node, slot)
  std::vector<std::int64_t> node_count_;
  std::vector<std::int64_t> pair_count_;
  std::vector<std::uint8_t> mark_;
  std::int64_t shots_ = 0;
};

// p_ij from <x_i>, <x_j>, <x_i x_j>; negative discriminant gives 0 and sets *clamped.
double pair_inversion(double xi, double xj, double xij, bool* clamped = nullptr);

// Nodes of syndrome rounds r0 and r0 + 1.
std::vector<int> window_nodes(const MatchingGraph& g, int r0);

// Per-tag averages of the window edges (both endpoints in the window rounds).
FitTarget targets_from_statistics(const GraphPair& gp, const EdgeStatistics& sx, const EdgeStatistics& sz, int r0);

FitTarget estimate_edge_frequencies(const std::vector<DetectorShot>& shots, const GraphPair& gp, int r0);

// Samples `shots` detector shots (stream i for shot i) and reduces them in
// worker shards. Requires d_m >= 4 and at least 1e4 shots.
FitTarget estimate_from_simulation(const Simulator& sim, const GraphPair& gp, std::int64_t shots,
                                   std::uint64_t seed, int threads, int r0 = 2);

// Catalog formulas evaluated at known parameters, with hyperedge compositions.
FitTarget synthetic_targets(int d, const NoiseParams& truth, bool with_hyper = true);

struct FitConfig {
  BoundedLogspace map;
  int steps = 4000;
  double lr = 0.05;
  double lr_final = 1e-3;  // cosine decay endpoint
  double beta1 = 0.9;
  double beta2 = 0.999;
  bool use_hyper = true;
  bool variance_weight = false;
  int log_every = 200;

  nlohmann::json to_json() const;
  static FitConfig from_json(const nlohmann::json& j);
};

struct LossValue {
  double total = 0;
  double edge = 0;
  double hyper = 0;
  ParamVector grad{};  // with respect to the probabilities
};

// Count-weighted mean squared errors, each normalized by its count sum.
LossValue fit_loss(const ParamVector& p, const FitTarget& t, const FitConfig& cfg);

struct FitResult {
  NoiseParams params;
  LogitVector z{};
  double loss = 0;
  int best_step = 0;
  std::vector<double> history;  // loss per step

  nlohmann::json report(const FitTarget& t, const FitConfig& cfg) const;
};

using FitLogFn = std::function<void(int step, const LossValue& loss)>;

LogitVector initial_logits(const BoundedLogspace& map, double p);

// Adam in logit space; returns the best parameters seen.
FitResult fit(const FitTarget& t, const LogitVector& init, const FitConfig& cfg, const FitLogFn& log = {});

}  // namespace predec
