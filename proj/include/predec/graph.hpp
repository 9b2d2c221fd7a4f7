#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "predec/lattice.hpp"
#include "predec/noise.hpp"
#include "predec/types.hpp"

namespace predec {

using ParamVector = std::array<double, kNumNoiseParams>;

// One XOR operand: the sum of the listed NoiseParams entries (flat indices,
// repeats allowed), kept sorted.
using XorComponent = std::vector<int>;

struct XorExpr {
  std::vector<XorComponent> comps;

  // Sorts every component and the component list.
  void normalize();
  double evaluate(const ParamVector& p) const;
  double evaluate(const NoiseParams& n) const { return evaluate(n.to_vector()); }
  ParamVector gradient(const ParamVector& p) const;
  std::string to_string() const;
  bool empty() const { return comps.empty(); }
  friend bool operator==(const XorExpr&, const XorExpr&) = default;
  friend auto operator<=>(const XorExpr&, const XorExpr&) = default;
};

// Left fold of a + b - 2ab.
double xor_combine(const std::vector<double>& probs);

// Image of a parameter index under the X <-> Z exchange (control and target
// swap roles for CNOT entries).
int swap_param(int idx);
XorExpr swap_xz(const XorExpr& e);

enum class EdgeCategory { Spacelike, Timelike, Diagonal, Boundary };
char category_letter(EdgeCategory c);

// Node ids inside one graph: round * K + stab; the boundary is K * d_m.
struct TracePattern {
  std::vector<int> nodes;  // sorted, never contains the boundary
  XorExpr expr;
  std::uint8_t obs = 0;      // logical flip of the representative mechanism
  int rep_loc = -1;          // representative single fault
  int rep_code = 0;
  int rep_rank = 0;          // internal preference key
  int obs_conflicts = 0;     // mechanisms disagreeing with obs
};

struct TraceResult {
  int d = 0;
  int d_m = 0;
  Basis basis = Basis::Z;
  int K = 0;
  std::map<std::vector<int>, TracePattern> x, z;  // by graph kind
  // Mechanisms touching both kinds, keyed by (X nodes, Z nodes).
  std::map<std::pair<std::vector<int>, std::vector<int>>, XorExpr> joint;

  const std::map<std::vector<int>, TracePattern>& patterns(Basis kind) const { return kind == Basis::X ? x : z; }
};

// Symbolic single-fault trace: every location and Pauli is propagated, Paulis
// of one location with identical detector sets and logical flip are summed
// into one component, and components are XOR-combined across locations.
TraceResult trace_single_faults(const LatticeGeometry& geom, int d_m, Basis basis = Basis::Z);

EdgeCategory categorize(const std::vector<int>& nodes, int K);

// Bulk-round type catalog for one graph kind at one distance.
struct TypeCatalog {
  Basis kind = Basis::X;
  int d = 0;
  std::map<std::string, XorExpr> exprs;                        // tag -> formula
  std::map<std::string, int> counts;                           // tag -> bulk instances per round
  std::map<std::tuple<int, int, int>, std::string> by_key;     // (stab a, stab b or -1, round delta)
  std::map<std::pair<std::string, std::string>, int> compositions;  // (X tag, Z tag) -> bulk count
  // Joint formula of every bulk instance of a composition.
  std::map<std::pair<std::string, std::string>, std::vector<XorExpr>> composition_exprs;

  nlohmann::json to_json() const;
};

// Cached per (d, kind). The reference trace has seven layers and the bulk
// window is syndrome rounds 2 and 3.
const TypeCatalog& type_catalog(int d, Basis kind);

// Tag of an edge given its nodes; throws if the geometry is not in the catalog.
std::string classify_edge(const std::vector<int>& nodes, int K, const TypeCatalog& cat);

// Tags with a complete closed form.
const std::vector<std::string>& formula_tags();
XorExpr appendix_expr(const std::string& tag, Basis kind);
double appendix_formula(const std::string& tag, Basis kind, const NoiseParams& noise);

struct GraphEdge {
  int a = 0, b = 0;  // a < b; b is the boundary for B-type edges
  double p = 0;
  double w = 0;
  std::string tag;
  std::uint8_t obs = 0;
  std::vector<std::pair<int, int>> space;  // (data qubit, layer) corrections
  std::vector<std::pair<int, int>> time;   // (stab, round) timelike corrections
  XorExpr expr;                            // not serialized

  bool same(const GraphEdge& o) const {
    return a == o.a && b == o.b && p == o.p && w == o.w && tag == o.tag && obs == o.obs && space == o.space &&
           time == o.time;
  }
};

struct Hyperedge {
  int edge = 0;     // index in this graph
  int partner = 0;  // edge index in the other kind's graph
  double joint = 0;
  std::string tag;  // "<X tag>|<Z tag>"
  XorExpr expr;     // not serialized

  bool same(const Hyperedge& o) const {
    return edge == o.edge && partner == o.partner && joint == o.joint && tag == o.tag;
  }
};

struct MatchingGraph {
  Basis kind = Basis::X;
  Basis basis = Basis::Z;
  int d = 0;
  int d_m = 0;
  int K = 0;
  std::vector<GraphEdge> edges;  // sorted by (a, b)
  std::vector<Hyperedge> hyperedges;

  int num_nodes() const { return K * d_m + 1; }
  int boundary() const { return K * d_m; }
  // Edge index or -1.
  int find_edge(int a, int b) const;
  void rebuild_index();
  bool operator==(const MatchingGraph& o) const;

 private:
  std::map<std::pair<int, int>, int> index_;
};

struct GraphPair {
  MatchingGraph x, z;
  const MatchingGraph& of(Basis kind) const { return kind == Basis::X ? x : z; }
};

// Both kinds at once so hyperedges can reference partner edges.
GraphPair build_graphs(const LatticeGeometry& geom, const NoiseParams& noise, int d_m, Basis basis);
MatchingGraph build_graph(const LatticeGeometry& geom, const NoiseParams& noise, int d_m, Basis kind,
                          Basis basis = Basis::Z);

// Re-evaluates probabilities and weights for new noise (structure unchanged;
// edges that would vanish keep the clamp floor).
void reweight_graph(MatchingGraph& g, const NoiseParams& noise);

double edge_weight(double p);

// Text format, one record per line:
//   graph kind=<X|Z> basis=<X|Z> d=<d> d_m=<d_m> nodes=<n>
//   edge s<i>@r<k> s<j>@r<l> <p> tag=<t> obs=<0|1> space=<q@t,..> time=<s@t,..>
//   bedge s<i>@r<k> <p> tag=<t> obs=<0|1> space=.. time=..
//   hyper <edge> <partner edge> <joint> tag=<X tag>|<Z tag>
std::string export_dem(const MatchingGraph& g);
MatchingGraph parse_dem(const std::string& text);

}  // namespace predec
