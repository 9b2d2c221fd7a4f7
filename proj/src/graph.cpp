#include "predec/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>

#include "predec/circuit.hpp"
#include "predec/sim.hpp"

namespace predec {

void XorExpr::normalize() {
  for (auto& c : comps) std::sort(c.begin(), c.end());
  std::sort(comps.begin(), comps.end());
}

double XorExpr::evaluate(const ParamVector& p) const {
  double prod = 1.0;
  for (const auto& c : comps) {
    double s = 0;
    for (int i : c) s += p[i];
    prod *= 1.0 - 2.0 * s;
  }
  return 0.5 * (1.0 - prod);
}

ParamVector XorExpr::gradient(const ParamVector& p) const {
  const std::size_t n = comps.size();
  std::vector<double> f(n), pre(n + 1, 1.0), suf(n + 1, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (int j : comps[i]) s += p[j];
    f[i] = 1.0 - 2.0 * s;
  }
  for (std::size_t i = 0; i < n; ++i) pre[i + 1] = pre[i] * f[i];
  for (std::size_t i = n; i-- > 0;) suf[i] = suf[i + 1] * f[i];
  ParamVector g{};
  for (std::size_t i = 0; i < n; ++i) {
    const double dc = pre[i] * suf[i + 1];
    for (int j : comps[i]) g[j] += dc;
  }
  return g;
}

std::string XorExpr::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    if (i) out += " ^ ";
    out += "[";
    for (std::size_t k = 0; k < comps[i].size(); ++k) {
      if (k) out += "+";
      out += NoiseParams::names()[comps[i][k]];
    }
    out += "]";
  }
  return out;
}

double xor_combine(const std::vector<double>& probs) {
  double acc = 0;
  for (double p : probs) acc = acc + p - 2.0 * acc * p;
  return acc;
}

int swap_param(int idx) {
  static const int pauli_swap[4] = {0, 3, 2, 1};
  if (idx < 4) return idx ^ 1;
  if (idx < 10) {
    const int base = idx < 7 ? 4 : 7;
    return base + 2 - (idx - base);
  }
  const int code = idx - 10 + 1;
  const int a = code / 4, b = code % 4;
  return 10 + 4 * pauli_swap[b] + pauli_swap[a] - 1;
}

XorExpr swap_xz(const XorExpr& e) {
  XorExpr out = e;
  for (auto& c : out.comps)
    for (int& i : c) i = swap_param(i);
  out.normalize();
  return out;
}

char category_letter(EdgeCategory c) {
  switch (c) {
    case EdgeCategory::Spacelike: return 'S';
    case EdgeCategory::Timelike: return 'T';
    case EdgeCategory::Diagonal: return 'D';
    default: return 'B';
  }
}

EdgeCategory categorize(const std::vector<int>& nodes, int K) {
  if (nodes.size() == 1) return EdgeCategory::Boundary;
  if (nodes.size() != 2) throw std::logic_error("pattern with " + std::to_string(nodes.size()) + " nodes");
  const int r0 = nodes[0] / K, r1 = nodes[1] / K, s0 = nodes[0] % K, s1 = nodes[1] % K;
  if (r0 == r1) return EdgeCategory::Spacelike;
  if (r1 - r0 != 1) throw std::logic_error("edge spans more than one round");
  return s0 == s1 ? EdgeCategory::Timelike : EdgeCategory::Diagonal;
}

TraceResult trace_single_faults(const LatticeGeometry& geom, int d_m, Basis basis) {
  if (d_m < 3) throw std::invalid_argument("tracing needs d_m >= 3");
  const Circuit c = build_circuit(geom, d_m, basis);
  const FaultTable t = build_fault_table(c, geom);
  TraceResult tr;
  tr.d = geom.d();
  tr.d_m = d_m;
  tr.basis = basis;
  tr.K = c.num_stabs;
  const int per_kind = c.num_stabs * d_m;
  // Majority bookkeeping for the logical flag.
  std::map<std::vector<int>, std::array<int, 2>> votes[2];

  for (std::size_t li = 0; li < t.choices.size(); ++li) {
    struct Group {
      std::vector<int> params;
      int code;
      const GlobalEffect* eff;
    };
    std::map<std::pair<std::vector<int>, int>, Group> groups;
    for (const auto& f : t.choices[li]) {
      const GlobalEffect& g = t.global[f.global];
      if (g.dets.empty()) continue;
      const int obs = basis == Basis::Z ? g.obs_x : g.obs_z;
      auto [it, fresh] = groups.try_emplace({g.dets, obs}, Group{{}, f.code, &g});
      it->second.params.push_back(f.param);
    }
    for (auto& [key, grp] : groups) {
      std::vector<int> nodes[2];
      for (int det : key.first) nodes[det / per_kind].push_back(det % per_kind);
      const int total = static_cast<int>(key.first.size());
      for (int k = 0; k < 2; ++k) {
        if (nodes[k].empty()) continue;
        auto& pats = k == 0 ? tr.x : tr.z;
        TracePattern& pt = pats[nodes[k]];
        pt.nodes = nodes[k];
        pt.expr.comps.push_back(grp.params);
        const std::uint8_t obs = k == 0 ? grp.eff->obs_z : grp.eff->obs_x;
        votes[k][nodes[k]][obs]++;
        const int rank = (nodes[1 - k].empty() ? 0 : 1000) + total;
        const bool better = pt.rep_loc < 0 || rank < pt.rep_rank ||
                            (rank == pt.rep_rank && std::make_pair(static_cast<int>(li), grp.code) <
                                                        std::make_pair(pt.rep_loc, pt.rep_code));
        if (better) {
          pt.rep_loc = static_cast<int>(li);
          pt.rep_code = grp.code;
          pt.rep_rank = rank;
          pt.obs = obs;
        }
      }
      if (!nodes[0].empty() && !nodes[1].empty()) tr.joint[{nodes[0], nodes[1]}].comps.push_back(grp.params);
    }
  }
  for (int k = 0; k < 2; ++k) {
    auto& pats = k == 0 ? tr.x : tr.z;
    for (auto& [nodes, pt] : pats) {
      pt.expr.normalize();
      const auto& v = votes[k][nodes];
      pt.obs_conflicts = v[1 - pt.obs];
    }
  }
  for (auto& [key, e] : tr.joint) e.normalize();
  return tr;
}

namespace {

struct Transcription {
  const char* tag;
  const char* text;
};

// Per-type closed forms for the X graph. CNOT entries are written control
// first. Is_/Ic_ mark idles in the preparation/measurement and CNOT windows;
// SX and MX are X-ancilla preparation and measurement flips.
const Transcription kForms[] = {
    {"S1", "YY+ZZ; IZ+XZ; Is_Z; Is_Z; YZ+ZY; IY+XY; Is_Y; Is_Y"},
    {"S2",
     "IY; XY; YZ+ZZ; IZ; IZ; ZI+ZZ; Ic_Z; Is_Z; Is_Z; IY; YX+YY; XY; YY+ZY; YI+YZ; Ic_Y; Is_Y; Is_Y; XZ; ZX+ZY; XZ"},
    {"S3",
     "IY; YX+YY; IY; ZX+ZY; XY; XY; IZ+ZI; ZZ; ZZ; IZ; IZ; ZI+ZZ; Is_Z; Is_Z; YY; YZ; YY; XY+YX; YI+YZ; Is_Y; Is_Y; "
     "XZ; IY+ZX; XZ; XZ+YI; ZY; YZ; ZY"},
    {"T1", "ZI; YI+ZI; SX; MX; YX; YI; ZX; YX+ZX"},
    {"T2", "YX+ZI; ZI; ZI; YI+ZI; SX; MX; YI; YX; YI+ZX; YX; ZX; ZX; YI; YX+ZX"},
    {"T3", "YI+ZI; Ic_Y+Ic_Z; Ic_Y+Ic_Z; SX; MX; YX+ZX"},
    {"T4", "YX+ZI; YI+ZI; Ic_Y+Ic_Z; Ic_Y+Ic_Z; SX; MX; YI+ZX; YX+ZX"},
    {"D1", "ZZ; YY; ZY; YZ"},
    {"D2", "IZ; ZZ; XY; XZ; YY; IY; ZY; YZ"},
    {"D3", "IZ+XY; ZI; ZI; YZ+ZZ; YI; YX; IY+XZ; YX; ZX; ZX; YI; YY+ZY"},
    {"D4", "IZ+XY; ZI; YZ+ZZ; Ic_Z; IY+XZ; YX; YI; YY+ZY; Ic_Y; ZX"},
    {"D5", "IZ; XY; XZ; IY"},
    {"B1",
     "IY; ZY; XY; YY; IY+XY; YX+YY; Is_Y; YX+ZX; IZ+XZ+YZ+ZZ; IZ; ZI+ZZ; Is_Z; Is_Z; Ic_Z; Ic_Z; YI+ZI; ZZ; XZ; YZ; "
     "ZX+ZY; YY+ZY; YI+YZ; Is_Y; Ic_Y; Ic_Y; YX+ZX; YI+ZI"},
};

int pauli_index(char ch) {
  switch (ch) {
    case 'I': return 0;
    case 'X': return 1;
    case 'Y': return 2;
    case 'Z': return 3;
  }
  throw std::logic_error(std::string("bad Pauli letter ") + ch);
}

int token_param(const std::string& tok) {
  if (tok == "SX") return 0;
  if (tok == "SZ") return 1;
  if (tok == "MX") return 2;
  if (tok == "MZ") return 3;
  if (tok.size() == 4 && tok[0] == 'I' && tok[2] == '_') {
    const int p = pauli_index(tok[3]);
    return (tok[1] == 's' ? 6 : 3) + p;
  }
  if (tok.size() == 2) return 10 + 4 * pauli_index(tok[0]) + pauli_index(tok[1]) - 1;
  throw std::logic_error("bad formula token " + tok);
}

XorExpr parse_form(const std::string& text) {
  XorExpr e;
  std::stringstream ss(text);
  std::string comp;
  while (std::getline(ss, comp, ';')) {
    XorComponent c;
    std::stringstream cs(comp);
    std::string tok;
    while (std::getline(cs, tok, '+')) {
      tok.erase(std::remove(tok.begin(), tok.end(), ' '), tok.end());
      if (!tok.empty()) c.push_back(token_param(tok));
    }
    if (!c.empty()) e.comps.push_back(c);
  }
  e.normalize();
  return e;
}

// Size of the multiset symmetric difference of two component lists.
int expr_distance(const XorExpr& a, const XorExpr& b) {
  std::vector<XorComponent> x = a.comps, y = b.comps, diff;
  std::set_symmetric_difference(x.begin(), x.end(), y.begin(), y.end(), std::back_inserter(diff));
  return static_cast<int>(diff.size());
}

using Key = std::tuple<int, int, int>;

Key pattern_key(const std::vector<int>& nodes, int K) {
  if (nodes.size() == 1) return {nodes[0] % K, -1, 0};
  if (nodes.size() != 2) throw std::logic_error("pattern with " + std::to_string(nodes.size()) + " nodes");
  return {nodes[0] % K, nodes[1] % K, nodes[1] / K - nodes[0] / K};
}

struct ClassInfo {
  char cat;
  XorExpr expr;
  std::vector<Key> keys;
  std::string tag;
};

constexpr int kRefLayers = 7;
constexpr int kBulkLo = 2, kBulkHi = 3;

bool in_bulk(const std::vector<int>& nodes, int K) {
  for (int n : nodes)
    if (n / K < kBulkLo || n / K > kBulkHi) return false;
  return true;
}

std::vector<ClassInfo> bulk_classes(const TraceResult& tr, Basis kind) {
  std::map<Key, XorExpr> seen;
  std::map<std::pair<char, XorExpr>, std::vector<Key>> groups;
  for (const auto& [nodes, pt] : tr.patterns(kind)) {
    if (!in_bulk(nodes, tr.K)) continue;
    const Key k = pattern_key(nodes, tr.K);
    auto [it, fresh] = seen.emplace(k, pt.expr);
    if (!fresh) {
      if (!(it->second == pt.expr)) throw std::logic_error("bulk formula differs between rounds");
      continue;
    }
    groups[{category_letter(categorize(nodes, tr.K)), pt.expr}].push_back(k);
  }
  std::vector<ClassInfo> out;
  for (auto& [ce, keys] : groups) out.push_back({ce.first, ce.second, keys, ""});
  return out;
}

// Exact formula matches first, then nearest unused transcription within the
// category, then the next free name of the category.
void name_classes(std::vector<ClassInfo>& cls, Basis kind, std::set<std::string> used) {
  for (auto& c : cls) {
    if (!c.tag.empty()) continue;
    for (const auto& f : kForms) {
      if (f.tag[0] != c.cat || used.count(f.tag)) continue;
      if (appendix_expr(f.tag, kind) == c.expr) {
        c.tag = f.tag;
        used.insert(f.tag);
        break;
      }
    }
  }
  struct Cand {
    int dist;
    std::size_t cls;
    std::string tag;
    bool operator<(const Cand& o) const { return std::tie(dist, cls, tag) < std::tie(o.dist, o.cls, o.tag); }
  };
  std::vector<Cand> cands;
  for (std::size_t i = 0; i < cls.size(); ++i) {
    if (!cls[i].tag.empty()) continue;
    for (const auto& f : kForms)
      if (f.tag[0] == cls[i].cat && !used.count(f.tag))
        cands.push_back({expr_distance(appendix_expr(f.tag, kind), cls[i].expr), i, f.tag});
  }
  std::sort(cands.begin(), cands.end());
  for (const auto& c : cands) {
    if (!cls[c.cls].tag.empty() || used.count(c.tag)) continue;
    cls[c.cls].tag = c.tag;
    used.insert(c.tag);
  }
  for (auto& c : cls) {
    if (!c.tag.empty()) continue;
    for (int n = 1;; ++n) {
      const std::string t = std::string(1, c.cat) + std::to_string(n);
      if (!used.count(t)) {
        c.tag = t;
        used.insert(t);
        break;
      }
    }
  }
}

struct CatalogPair {
  TypeCatalog x, z;
};

CatalogPair make_catalogs(int d) {
  const LatticeGeometry geom(d);
  const TraceResult tr = trace_single_faults(geom, kRefLayers, Basis::Z);
  auto cx = bulk_classes(tr, Basis::X);
  auto cz = bulk_classes(tr, Basis::Z);
  name_classes(cx, Basis::X, {});
  std::set<std::string> used;
  for (auto& c : cz)
    for (const auto& x : cx)
      if (x.cat == c.cat && swap_xz(x.expr) == c.expr && !used.count(x.tag)) {
        c.tag = x.tag;
        used.insert(x.tag);
        break;
      }
  name_classes(cz, Basis::Z, used);
  CatalogPair out;
  for (auto [cat, cls, kind] : {std::tuple{&out.x, &cx, Basis::X}, std::tuple{&out.z, &cz, Basis::Z}}) {
    cat->kind = kind;
    cat->d = d;
    for (const auto& c : *cls) {
      cat->exprs[c.tag] = c.expr;
      cat->counts[c.tag] = static_cast<int>(c.keys.size());
      for (const auto& k : c.keys) cat->by_key[k] = c.tag;
    }
  }
  std::map<std::pair<std::string, std::string>, int> comp;
  std::map<std::pair<std::string, std::string>, std::vector<XorExpr>> comp_exprs;
  std::set<std::pair<Key, Key>> seen;
  for (const auto& [key, e] : tr.joint) {
    if (!in_bulk(key.first, tr.K) || !in_bulk(key.second, tr.K)) continue;
    if (key.first.size() > 2 || key.second.size() > 2) continue;
    const auto kx = pattern_key(key.first, tr.K), kz = pattern_key(key.second, tr.K);
    // Offsets relative to the earliest round so rounds 2 and 3 collapse.
    const int r0 = std::min(key.first[0] / tr.K, key.second[0] / tr.K);
    const Key sx{std::get<0>(kx), std::get<1>(kx), key.first[0] / tr.K - r0};
    const Key sz{std::get<0>(kz), std::get<1>(kz), key.second[0] / tr.K - r0};
    if (!seen.insert({sx, sz}).second) continue;
    const std::pair<std::string, std::string> tags{out.x.by_key.at(kx), out.z.by_key.at(kz)};
    comp[tags]++;
    comp_exprs[tags].push_back(e);
  }
  out.x.compositions = out.z.compositions = comp;
  out.x.composition_exprs = out.z.composition_exprs = comp_exprs;
  return out;
}

}  // namespace

nlohmann::json TypeCatalog::to_json() const {
  nlohmann::json types = nlohmann::json::object();
  for (const auto& [tag, e] : exprs)
    types[tag] = {{"formula", e.to_string()}, {"components", e.comps.size()}, {"count", counts.at(tag)}};
  nlohmann::json comp = nlohmann::json::array();
  for (const auto& [k, n] : compositions) comp.push_back({{"x", k.first}, {"z", k.second}, {"count", n}});
  return {{"kind", std::string(1, basis_char(kind))}, {"d", d}, {"types", types}, {"compositions", comp}};
}

const TypeCatalog& type_catalog(int d, Basis kind) {
  static std::mutex mu;
  static std::map<int, CatalogPair> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(d);
  if (it == cache.end()) it = cache.emplace(d, make_catalogs(d)).first;
  return kind == Basis::X ? it->second.x : it->second.z;
}

std::string classify_edge(const std::vector<int>& nodes, int K, const TypeCatalog& cat) {
  const Key k = pattern_key(nodes, K);
  auto it = cat.by_key.find(k);
  if (it == cat.by_key.end()) {
    std::string desc;
    for (int n : nodes) desc += " s" + std::to_string(n % K) + "@r" + std::to_string(n / K);
    throw std::logic_error("unclassifiable edge:" + desc);
  }
  return it->second;
}

const std::vector<std::string>& formula_tags() {
  static const std::vector<std::string> tags = [] {
    std::vector<std::string> t;
    for (const auto& f : kForms) t.push_back(f.tag);
    return t;
  }();
  return tags;
}

XorExpr appendix_expr(const std::string& tag, Basis kind) {
  for (const auto& f : kForms)
    if (tag == f.tag) {
      XorExpr e = parse_form(f.text);
      return kind == Basis::X ? e : swap_xz(e);
    }
  throw std::invalid_argument("no complete closed form for type " + tag);
}

double appendix_formula(const std::string& tag, Basis kind, const NoiseParams& noise) {
  return appendix_expr(tag, kind).evaluate(noise);
}

double edge_weight(double p) { return -std::log(std::clamp(p, 1e-12, 0.5)); }

int MatchingGraph::find_edge(int a, int b) const {
  if (a > b) std::swap(a, b);
  auto it = index_.find({a, b});
  return it == index_.end() ? -1 : it->second;
}

void MatchingGraph::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < edges.size(); ++i) index_[{edges[i].a, edges[i].b}] = static_cast<int>(i);
}

bool MatchingGraph::operator==(const MatchingGraph& o) const {
  if (kind != o.kind || basis != o.basis || d != o.d || d_m != o.d_m || K != o.K) return false;
  if (edges.size() != o.edges.size() || hyperedges.size() != o.hyperedges.size()) return false;
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (!edges[i].same(o.edges[i])) return false;
  for (std::size_t i = 0; i < hyperedges.size(); ++i)
    if (!hyperedges[i].same(o.hyperedges[i])) return false;
  return true;
}

namespace {

void fill_corrections(GraphEdge& e, const ShotRecord& rec, const LatticeGeometry& geom, Basis kind) {
  const BitVolume& sp = kind == Basis::X ? rec.labels_space_z : rec.labels_space_x;
  const BitVolume& tm = kind == Basis::X ? rec.labels_time_x : rec.labels_time_z;
  for (int q = 0; q < geom.num_data(); ++q)
    for (int t = 0; t < sp.T; ++t)
      if (sp.at(geom.data_coord(q), t)) e.space.push_back({q, t});
  const auto& st = geom.stabilizers(kind);
  for (int s = 0; s < static_cast<int>(st.size()); ++s)
    for (int t = 0; t < tm.T; ++t)
      if (tm.at(st[s].anchor, t)) e.time.push_back({s, t});
  std::sort(e.space.begin(), e.space.end());
  std::sort(e.time.begin(), e.time.end());
}

}  // namespace

GraphPair build_graphs(const LatticeGeometry& geom, const NoiseParams& noise, int d_m, Basis basis) {
  noise.validate();
  const TraceResult tr = trace_single_faults(geom, d_m, basis);
  const Simulator sim(geom, noise, d_m, basis);
  const auto pv = noise.to_vector();
  GraphPair gp;
  for (Basis kind : {Basis::X, Basis::Z}) {
    MatchingGraph& g = kind == Basis::X ? gp.x : gp.z;
    const TypeCatalog& cat = type_catalog(geom.d(), kind);
    g.kind = kind;
    g.basis = basis;
    g.d = geom.d();
    g.d_m = d_m;
    g.K = tr.K;
    for (const auto& [nodes, pt] : tr.patterns(kind)) {
      const double p = pt.expr.evaluate(pv);
      if (p <= 0) continue;
      if (nodes.size() > 2) {
        std::string desc;
        for (int n : nodes) desc += " s" + std::to_string(n % tr.K) + "@r" + std::to_string(n / tr.K);
        throw std::logic_error("mechanism flips more than two detectors of one kind:" + desc);
      }
      GraphEdge e;
      e.a = nodes[0];
      e.b = nodes.size() == 1 ? g.boundary() : nodes[1];
      e.p = std::min(p, 0.5);
      e.w = edge_weight(p);
      try {
        e.tag = classify_edge(nodes, tr.K, cat);
      } catch (const std::logic_error&) {
        // Partners in the masked first/last layer fold into a time-boundary edge.
        const int r = nodes[0] / tr.K;
        if (kind == basis || nodes.size() != 1 || (r != 1 && r != d_m - 2)) throw;
        e.tag = "TB";
      }
      e.obs = pt.obs;
      e.expr = pt.expr;
      fill_corrections(e, sim.simulate_faults({{pt.rep_loc, pt.rep_code}}), geom, kind);
      g.edges.push_back(std::move(e));
    }
    std::sort(g.edges.begin(), g.edges.end(),
              [](const GraphEdge& l, const GraphEdge& r) { return std::tie(l.a, l.b) < std::tie(r.a, r.b); });
    g.rebuild_index();
  }
  auto edge_of = [&](const MatchingGraph& g, const std::vector<int>& nodes) {
    return nodes.size() == 1 ? g.find_edge(nodes[0], g.boundary()) : g.find_edge(nodes[0], nodes[1]);
  };
  for (const auto& [key, expr] : tr.joint) {
    const double p = expr.evaluate(pv);
    if (p <= 0) continue;
    const int ex = edge_of(gp.x, key.first), ez = edge_of(gp.z, key.second);
    if (ex < 0 || ez < 0) throw std::logic_error("hyperedge half is not a graph edge");
    const std::string tag = gp.x.edges[ex].tag + "|" + gp.z.edges[ez].tag;
    gp.x.hyperedges.push_back({ex, ez, p, tag, expr});
    gp.z.hyperedges.push_back({ez, ex, p, tag, expr});
  }
  for (MatchingGraph* g : {&gp.x, &gp.z})
    std::sort(g->hyperedges.begin(), g->hyperedges.end(), [](const Hyperedge& l, const Hyperedge& r) {
      return std::tie(l.edge, l.partner) < std::tie(r.edge, r.partner);
    });
  return gp;
}

MatchingGraph build_graph(const LatticeGeometry& geom, const NoiseParams& noise, int d_m, Basis kind, Basis basis) {
  GraphPair gp = build_graphs(geom, noise, d_m, basis);
  return kind == Basis::X ? std::move(gp.x) : std::move(gp.z);
}

void reweight_graph(MatchingGraph& g, const NoiseParams& noise) {
  const auto pv = noise.to_vector();
  for (auto& e : g.edges) {
    if (e.expr.empty()) throw std::invalid_argument("graph has no formulas (parsed from text?)");
    const double p = e.expr.evaluate(pv);
    e.p = std::clamp(p, 1e-12, 0.5);
    e.w = edge_weight(p);
  }
  for (auto& h : g.hyperedges) h.joint = h.expr.evaluate(pv);
}

namespace {

std::string node_name(const MatchingGraph& g, int n) {
  if (n == g.boundary()) return "B";
  return "s" + std::to_string(n % g.K) + "@r" + std::to_string(n / g.K);
}

int parse_node(const MatchingGraph& g, const std::string& s) {
  if (s == "B") return g.boundary();
  int st = 0, r = 0;
  if (std::sscanf(s.c_str(), "s%d@r%d", &st, &r) != 2 || st < 0 || st >= g.K || r < 0 || r >= g.d_m)
    throw std::runtime_error("bad node '" + s + "'");
  return r * g.K + st;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string pair_list(const std::vector<std::pair<int, int>>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i].first) + "@" + std::to_string(v[i].second);
  }
  return s;
}

std::vector<std::pair<int, int>> parse_pairs(const std::string& s) {
  std::vector<std::pair<int, int>> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    int a = 0, b = 0;
    if (std::sscanf(item.c_str(), "%d@%d", &a, &b) != 2) throw std::runtime_error("bad pair '" + item + "'");
    out.push_back({a, b});
  }
  return out;
}

std::map<std::string, std::string> parse_fields(std::istringstream& is) {
  std::map<std::string, std::string> f;
  std::string tok;
  while (is >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw std::runtime_error("expected key=value, got '" + tok + "'");
    f[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return f;
}

}  // namespace

std::string export_dem(const MatchingGraph& g) {
  std::ostringstream os;
  os << "# predec detector error model v1\n";
  os << "graph kind=" << basis_char(g.kind) << " basis=" << basis_char(g.basis) << " d=" << g.d << " d_m=" << g.d_m
     << " nodes=" << g.num_nodes() << "\n";
  for (const auto& e : g.edges) {
    if (e.b == g.boundary())
      os << "bedge " << node_name(g, e.a);
    else
      os << "edge " << node_name(g, e.a) << " " << node_name(g, e.b);
    os << " " << fmt_double(e.p) << " tag=" << e.tag << " obs=" << int(e.obs) << " space=" << pair_list(e.space)
       << " time=" << pair_list(e.time) << "\n";
  }
  for (const auto& h : g.hyperedges)
    os << "hyper " << h.edge << " " << h.partner << " " << fmt_double(h.joint) << " tag=" << h.tag << "\n";
  return os.str();
}

MatchingGraph parse_dem(const std::string& text) {
  MatchingGraph g;
  std::istringstream in(text);
  std::string line;
  bool header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string rec;
    ls >> rec;
    try {
      if (rec == "graph") {
        auto f = parse_fields(ls);
        g.kind = parse_basis(f.at("kind"));
        g.basis = parse_basis(f.at("basis"));
        g.d = std::stoi(f.at("d"));
        g.d_m = std::stoi(f.at("d_m"));
        g.K = (g.d * g.d - 1) / 2;
        if (std::stoi(f.at("nodes")) != g.num_nodes()) throw std::runtime_error("node count mismatch");
        header = true;
      } else if (rec == "edge" || rec == "bedge") {
        if (!header) throw std::runtime_error("record before graph header");
        GraphEdge e;
        std::string na, nb, ps;
        ls >> na;
        if (rec == "edge") ls >> nb;
        ls >> ps;
        e.a = parse_node(g, na);
        e.b = rec == "edge" ? parse_node(g, nb) : g.boundary();
        if (e.a > e.b) std::swap(e.a, e.b);
        e.p = std::stod(ps);
        e.w = edge_weight(e.p);
        auto f = parse_fields(ls);
        e.tag = f.at("tag");
        e.obs = static_cast<std::uint8_t>(std::stoi(f.at("obs")));
        e.space = parse_pairs(f["space"]);
        e.time = parse_pairs(f["time"]);
        g.edges.push_back(std::move(e));
      } else if (rec == "hyper") {
        Hyperedge h;
        ls >> h.edge >> h.partner >> h.joint;
        if (!ls) throw std::runtime_error("malformed hyper record");
        auto f = parse_fields(ls);
        h.tag = f.at("tag");
        if (h.edge < 0 || h.edge >= static_cast<int>(g.edges.size())) throw std::runtime_error("hyper edge index");
        g.hyperedges.push_back(std::move(h));
      } else {
        throw std::runtime_error("unknown record '" + rec + "'");
      }
    } catch (const std::exception& ex) {
      throw std::runtime_error("DEM line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  if (!header) throw std::runtime_error("DEM has no graph header");
  g.rebuild_index();
  return g;
}

}  // namespace predec
