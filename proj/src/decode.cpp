#include "predec/decode.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

#include "predec/blossom.hpp"

namespace predec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::int64_t to_int(double w) { return std::llround(w * kWeightScale); }

std::vector<double> graph_weights(const MatchingGraph& g) {
  std::vector<double> w;
  w.reserve(g.edges.size());
  for (const auto& e : g.edges) w.push_back(e.w);
  return w;
}

}  // namespace

Matcher::Matcher(const MatchingGraph& g) : Matcher(g, graph_weights(g)) {}

Matcher::Matcher(const MatchingGraph& g, std::vector<double> weights) : g_(&g), w_(std::move(weights)) {
  if (w_.size() != g.edges.size()) throw std::invalid_argument("weight overlay size mismatch");
  adj_.assign(g.num_nodes(), {});
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    if (w_[i] < 0) throw std::invalid_argument("negative edge weight");
    adj_[e.a].push_back({e.b, static_cast<int>(i)});
    adj_[e.b].push_back({e.a, static_cast<int>(i)});
  }
  trees_.resize(g.num_nodes());
  have_.assign(g.num_nodes(), 0);
}

Matcher::Tree Matcher::dijkstra(int source) const {
  const int n = g_->num_nodes(), bnd = g_->boundary();
  Tree t{std::vector<double>(n, kInf), std::vector<int>(n, -1)};
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  t.dist[source] = 0;
  pq.push({0.0, source});
  while (!pq.empty()) {
    auto [dv, v] = pq.top();
    pq.pop();
    if (dv > t.dist[v]) continue;
    if (v == bnd && v != source) continue;  // never route through the boundary
    for (auto [u, ei] : adj_[v]) {
      const double nd = dv + w_[ei];
      if (nd < t.dist[u]) {
        t.dist[u] = nd;
        t.pred_edge[u] = ei;
        pq.push({nd, u});
      }
    }
  }
  return t;
}

const Matcher::Tree& Matcher::tree(int source) const {
  if (!have_[source]) {
    trees_[source] = dijkstra(source);
    have_[source] = 1;
  }
  return trees_[source];
}

void Matcher::prepare(const std::vector<int>& dets) const {
  for (int v : dets) {
    if (v < 0 || v >= g_->boundary()) throw std::invalid_argument("detection outside the graph");
    tree(v);
  }
}

void Matcher::expand(int from, int to, DecodeResult& r) const {
  const Tree& t = tree(from);
  int v = to;
  while (v != from) {
    const int ei = t.pred_edge[v];
    if (ei < 0) throw std::logic_error("broken shortest-path tree");
    r.path_edges.push_back(ei);
    r.obs ^= g_->edges[ei].obs;
    const auto& e = g_->edges[ei];
    v = e.a == v ? e.b : e.a;
  }
}

DecodeResult Matcher::mwpm(const std::vector<int>& dets_in) const {
  std::vector<int> dets = dets_in;
  std::sort(dets.begin(), dets.end());
  if (std::adjacent_find(dets.begin(), dets.end()) != dets.end()) throw std::invalid_argument("repeated detection");
  DecodeResult r;
  const int n = static_cast<int>(dets.size());
  if (n == 0) return r;
  prepare(dets);
  const int bnd = g_->boundary();
  std::vector<std::int64_t> cb(n);
  std::vector<double> db(n);
  for (int i = 0; i < n; ++i) {
    db[i] = tree(dets[i]).dist[bnd];
    cb[i] = std::isfinite(db[i]) ? to_int(db[i]) : -1;
  }
  struct Cand {
    int u, v;
    std::int64_t cost;
  };
  std::vector<Cand> cands;
  for (int i = 0; i < n; ++i) {
    const Tree& t = tree(dets[i]);
    for (int j = i + 1; j < n; ++j) {
      const double dij = t.dist[dets[j]];
      if (!std::isfinite(dij)) continue;
      const std::int64_t c = to_int(dij);
      if (cb[i] >= 0 && cb[j] >= 0 && c >= cb[i] + cb[j]) continue;
      cands.push_back({i, j, c});
    }
    if (cb[i] >= 0) {
      cands.push_back({i, n + i, cb[i]});
    }
  }
  // Boundary copies n..2n-1 pair freely with each other at zero cost.
  std::vector<WeightedEdge> we;
  std::int64_t top = 0;
  for (const auto& c : cands) top = std::max(top, c.cost);
  top += 1;
  for (const auto& c : cands) we.push_back({c.u, c.v, top - c.cost});
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) we.push_back({n + i, n + j, top});
  const std::vector<int> mate = max_weight_matching(2 * n, we, true);
  for (int i = 0; i < n; ++i) {
    if (mate[i] < 0) throw std::runtime_error("detection " + std::to_string(dets[i]) + " cannot be matched");
    const int m = mate[i];
    if (m < n && m < i) continue;
    if (m < n) {
      r.matched.push_back({dets[i], dets[m]});
      r.weight += tree(dets[i]).dist[dets[m]];
      expand(dets[i], dets[m], r);
    } else {
      if (m != n + i) throw std::logic_error("matched to a foreign boundary copy");
      r.matched.push_back({dets[i], bnd});
      r.weight += db[i];
      expand(dets[i], bnd, r);
    }
  }
  std::sort(r.matched.begin(), r.matched.end());
  return r;
}

DecodeResult Matcher::brute_force(const std::vector<int>& dets_in) const {
  std::vector<int> dets = dets_in;
  std::sort(dets.begin(), dets.end());
  const int n = static_cast<int>(dets.size());
  if (n > 12) throw std::invalid_argument("brute force is limited to 12 detections");
  DecodeResult r;
  if (n == 0) return r;
  prepare(dets);
  const int bnd = g_->boundary();
  constexpr std::int64_t kNo = std::numeric_limits<std::int64_t>::max();
  std::vector<std::vector<std::int64_t>> c(n, std::vector<std::int64_t>(n + 1, kNo));
  std::vector<std::vector<std::uint8_t>> o(n, std::vector<std::uint8_t>(n + 1, 0));
  auto path_obs = [&](int from, int to) {
    DecodeResult tmp;
    expand(from, to, tmp);
    return tmp.obs;
  };
  for (int i = 0; i < n; ++i) {
    const Tree& t = tree(dets[i]);
    for (int j = i + 1; j < n; ++j)
      if (std::isfinite(t.dist[dets[j]])) {
        c[i][j] = to_int(t.dist[dets[j]]);
        o[i][j] = path_obs(dets[i], dets[j]);
      }
    if (std::isfinite(t.dist[bnd])) {
      c[i][n] = to_int(t.dist[bnd]);
      o[i][n] = path_obs(dets[i], bnd);
    }
  }
  const int full = (1 << n) - 1;
  std::vector<std::int64_t> best(1 << n, kNo);
  std::vector<int> choice(1 << n, -1);
  std::vector<std::uint8_t> obs_set(1 << n, 0);  // bit b set: an optimum with obs b exists
  best[full] = 0;
  obs_set[full] = 1;
  for (int mask = full - 1; mask >= 0; --mask) {
    int i = 0;
    while (mask >> i & 1) ++i;
    auto consider = [&](int partner, int next) {
      if (c[i][partner] == kNo || best[next] == kNo) return;
      const std::int64_t v = c[i][partner] + best[next];
      std::uint8_t os = obs_set[next];
      if (o[i][partner]) os = static_cast<std::uint8_t>(((os & 1) << 1) | ((os >> 1) & 1));
      if (v < best[mask]) {
        best[mask] = v;
        choice[mask] = partner;
        obs_set[mask] = os;
      } else if (v == best[mask]) {
        obs_set[mask] |= os;
      }
    };
    for (int j = i + 1; j < n; ++j)
      if (!(mask >> j & 1)) consider(j, mask | 1 << i | 1 << j);
    consider(n, mask | 1 << i);
  }
  if (best[0] == kNo) throw std::runtime_error("detections cannot be matched");
  int mask = 0;
  while (mask != full) {
    int i = 0;
    while (mask >> i & 1) ++i;
    const int p = choice[mask];
    if (p == n) {
      r.matched.push_back({dets[i], bnd});
      r.weight += tree(dets[i]).dist[bnd];
      expand(dets[i], bnd, r);
      mask |= 1 << i;
    } else {
      r.matched.push_back({dets[i], dets[p]});
      r.weight += tree(dets[i]).dist[dets[p]];
      expand(dets[i], dets[p], r);
      mask |= 1 << i | 1 << p;
    }
  }
  r.obs_ambiguous = obs_set[0] == 3;
  std::sort(r.matched.begin(), r.matched.end());
  return r;
}

DecodeResult mwpm(const MatchingGraph& g, const std::vector<int>& detections) {
  return Matcher(g).mwpm(detections);
}

DecodeResult brute_force_match(const MatchingGraph& g, const std::vector<int>& detections) {
  return Matcher(g).brute_force(detections);
}

namespace {

std::vector<double> partner_weights(const DecodeResult& first, const MatchingGraph& from, const Matcher& target,
                                    CorrelatedMode mode) {
  std::vector<double> w = target.weights();
  std::vector<std::uint8_t> used(from.edges.size(), 0);
  for (int e : first.path_edges) used[e] = 1;
  std::vector<double> best(w.size(), -1.0);
  for (const auto& h : from.hyperedges) {
    if (!used[h.edge]) continue;
    const double pe = from.edges[h.edge].p;
    if (pe <= 0) continue;
    const double cond = std::min(h.joint / pe, 1.0 - 1e-12);
    best[h.partner] = std::max(best[h.partner], cond);
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (best[i] <= 0) continue;
    const double wc = -std::log(best[i]);
    w[i] = mode == CorrelatedMode::Replace ? wc : w[i] + wc;
  }
  return w;
}

}  // namespace

std::pair<DecodeResult, DecodeResult> correlated_decode(const Matcher& mx, const Matcher& mz,
                                                        const std::vector<int>& det_x, const std::vector<int>& det_z,
                                                        CorrelatedMode mode) {
  const DecodeResult rx = mx.mwpm(det_x), rz = mz.mwpm(det_z);
  if (mx.graph().hyperedges.empty() && mz.graph().hyperedges.empty()) return {rx, rz};
  const Matcher ox(mx.graph(), partner_weights(rz, mz.graph(), mx, mode));
  const Matcher oz(mz.graph(), partner_weights(rx, mx.graph(), mz, mode));
  std::pair<DecodeResult, DecodeResult> out{ox.mwpm(det_x), oz.mwpm(det_z)};
  out.first.passes = out.second.passes = 2;
  return out;
}

std::pair<DecodeResult, DecodeResult> correlated_decode(const MatchingGraph& gx, const MatchingGraph& gz,
                                                        const std::vector<int>& det_x, const std::vector<int>& det_z,
                                                        CorrelatedMode mode) {
  return correlated_decode(Matcher(gx), Matcher(gz), det_x, det_z, mode);
}

LabelVolume corrections_from_matching(const DecodeResult& r, const MatchingGraph& g, const LatticeGeometry& geom) {
  const int D = geom.grid_dim();
  LabelVolume v;
  v.z = v.x = v.det_x = v.det_z = BitVolume(D, g.d_m);
  v.time_x = v.time_z = BitVolume(D, g.d_m - 1);
  BitVolume& sp = g.kind == Basis::X ? v.z : v.x;
  BitVolume& tm = g.kind == Basis::X ? v.time_x : v.time_z;
  const auto& st = geom.stabilizers(g.kind);
  for (int ei : r.path_edges) {
    const auto& e = g.edges[ei];
    for (auto [q, t] : e.space) sp.at(geom.data_coord(q), t) ^= 1;
    for (auto [s, t] : e.time) tm.at(st[s].anchor, t) ^= 1;
  }
  return v;
}

}  // namespace predec
