#include "predec/canon.hpp"

#include <stdexcept>
#include <tuple>
#include <vector>

namespace predec {

namespace {

// Error channel acted on by stabilizers of `kind`: X stabilizers absorb X errors.
BitVolume& space_channel(LabelVolume& v, Basis kind) { return kind == Basis::X ? v.x : v.z; }

struct Rule {
  std::vector<Coord> from;  // exact pattern on the stabilizer support
  std::vector<Coord> to;
};

// Rules per stabilizer, anchored on its plaquette corner (a, b).
std::vector<Rule> fix_rules(const StabilizerDef& s, int d) {
  const int a = s.plaquette.row, b = s.plaquette.col;
  const Coord nw{a, b}, ne{a, b + 1}, sw{a + 1, b}, se{a + 1, b + 1};
  std::vector<Rule> r;
  if (s.weight() == 4) {
    r.push_back({{nw, sw}, {ne, se}});
    r.push_back({{sw, se}, {nw, ne}});
    if (s.kind == Basis::X)
      r.push_back({{nw, se}, {ne, sw}});
    else
      r.push_back({{ne, sw}, {nw, se}});
    return r;
  }
  if (s.kind == Basis::X) {
    if (b == 0) r.push_back({{se}, {ne}});       // left edge: bottom -> top
    else if (b == d) r.push_back({{nw}, {sw}});  // right edge: top -> bottom
  } else {
    if (a == 0) r.push_back({{sw}, {se}});       // top edge: left -> right
    else if (a == d) r.push_back({{ne}, {nw}});  // bottom edge: right -> left
  }
  return r;
}

int support_weight(const BitVolume& ch, const StabilizerDef& s, int t) {
  int w = 0;
  for (auto q : s.support) w += ch.at(q, t);
  return w;
}

bool weight_reduce(BitVolume& ch, const StabilizerDef& s, int t) {
  const int w = support_weight(ch, s, t);
  if (2 * w > s.weight() || (s.weight() == 2 && w == 2)) {
    for (auto q : s.support) ch.at(q, t) ^= 1;
    return true;
  }
  return false;
}

bool fix_equivalence(BitVolume& ch, const StabilizerDef& s, const std::vector<Rule>& rules, int t) {
  const int w = support_weight(ch, s, t);
  for (const auto& r : rules) {
    if (static_cast<int>(r.from.size()) != w) continue;
    bool match = true;
    for (auto q : r.from) match = match && ch.at(q, t);
    if (!match) continue;
    for (auto q : r.from) ch.at(q, t) = 0;
    for (auto q : r.to) ch.at(q, t) = 1;
    return true;
  }
  return false;
}

}  // namespace

LabelVolume label_volume_from(const ShotRecord& rec) {
  return {rec.labels_space_z, rec.labels_space_x, rec.labels_time_x, rec.labels_time_z, rec.detectors_x,
          rec.detectors_z};
}

void simplify_spacelike(LabelVolume& vol, Basis kind, const LatticeGeometry& geom) {
  BitVolume& ch = space_channel(vol, kind);
  const auto& stabs = geom.stabilizers(kind);
  std::vector<std::vector<Rule>> rules;
  for (const auto& s : stabs) rules.push_back(fix_rules(s, geom.d()));
  const int cap = 4 * geom.num_data() * geom.num_data();
  for (int t = 0; t < ch.T; ++t) {
    bool changed = true;
    int iter = 0;
    while (changed) {
      if (++iter > cap) throw std::logic_error("spacelike simplification did not converge");
      changed = false;
      for (const auto& s : stabs) changed |= weight_reduce(ch, s, t);
      for (std::size_t i = 0; i < stabs.size(); ++i) changed |= fix_equivalence(ch, stabs[i], rules[i], t);
    }
  }
}

int simplify_timelike(LabelVolume& vol, Basis kind, const LatticeGeometry& geom, bool weight2) {
  // Z corrections pair with X-stabilizer timelike bits, and vice versa.
  const Basis stab_kind = kind == Basis::Z ? Basis::X : Basis::Z;
  BitVolume& sp = kind == Basis::Z ? vol.z : vol.x;
  BitVolume& tl = stab_kind == Basis::X ? vol.time_x : vol.time_z;
  const BitVolume& det = stab_kind == Basis::X ? vol.det_x : vol.det_z;
  const int d_m = sp.T;
  if (d_m < 2) throw std::invalid_argument("timelike simplification needs d_m >= 2");

  struct Candidate {
    std::vector<Coord> qubits;
    std::vector<Coord> anchors;  // anticommuting stabilizers
  };
  std::vector<Candidate> cands;
  for (int q = 0; q < geom.num_data(); ++q) {
    Candidate c;
    c.qubits = {geom.data_coord(q)};
    for (int s : geom.stabilizers_on(stab_kind, q)) c.anchors.push_back(geom.stabilizer(stab_kind, s).anchor);
    cands.push_back(c);
  }
  if (weight2) {
    // Hook pairs: the last two CNOT partners of every check of the other kind.
    for (const auto& s : geom.stabilizers(kind)) {
      if (s.weight() != 4) continue;
      const Coord a = s.support[2], b = s.support[3];
      std::vector<std::uint8_t> e(geom.num_data(), 0);
      e[geom.data_index(a)] = e[geom.data_index(b)] = 1;
      const auto syn = geom.syndrome(stab_kind, e);
      Candidate c;
      c.qubits = {a, b};
      for (std::size_t i = 0; i < syn.size(); ++i)
        if (syn[i]) c.anchors.push_back(geom.stabilizer(stab_kind, i).anchor);
      cands.push_back(c);
    }
  }

  auto tbit = [&](Coord a, int k) -> int { return k < tl.T ? tl.at(a, k) : 0; };
  int accepted = 0;
  const std::size_t bound = static_cast<std::size_t>(sp.D) * sp.D * d_m * 4;
  std::size_t sweeps = 0;
  std::size_t prev = vol.weight();
  while (true) {
    if (++sweeps > bound) throw std::logic_error("timelike simplification exceeded its iteration bound");
    for (int k = 0; k + 1 < d_m; ++k) {
      for (const auto& c : cands) {
        int sy0 = 0, sy1 = 0, spy0 = 0, spy1 = 0, sx0 = 0, sx1 = 0;
        for (auto q : c.qubits) {
          sy0 += sp.at(q, k);
          spy0 += 1 - sp.at(q, k);
          sy1 += sp.at(q, k + 1);
          spy1 += 1 - sp.at(q, k + 1);
        }
        for (auto a : c.anchors) {
          sy0 += tbit(a, k);
          spy0 += 1 - tbit(a, k);
          sy1 += tbit(a, k + 1);
          spy1 += tbit(a, k + 1);
          sx0 += det.at(a, k);
          sx1 += det.at(a, k + 1);
        }
        const int s = sy0 + sx0 + sy1 + sx1;
        const int s_he = spy0 + sx0 + spy1 + sx1;
        const int s_max = std::max(sy0 + sx0, sy1 + sx1);
        const int s_he_max = std::max(spy0 + sx0, spy1 + sx1);
        if (s_he < s || (s_he == s && s_he_max > s_max)) {
          for (auto q : c.qubits) {
            sp.at(q, k) ^= 1;
            sp.at(q, k + 1) ^= 1;
          }
          for (auto a : c.anchors) tl.at(a, k) ^= 1;
          ++accepted;
        }
      }
    }
    const std::size_t w = vol.weight();
    if (w >= prev) break;
    prev = w;
  }
  return accepted;
}

void canonicalize(LabelVolume& vol, const LatticeGeometry& geom, const CanonOptions& opt) {
  // The tie rule of the timelike pass can make the sweep orbit a short cycle
  // instead of settling. The cycle's lexicographically smallest member is
  // then the representative, which keeps the map idempotent.
  std::vector<LabelVolume> seen{vol};
  for (int pass = 0; pass < opt.max_outer_passes; ++pass) {
    for (Basis k : {Basis::X, Basis::Z}) simplify_spacelike(vol, k, geom);
    for (Basis k : {Basis::X, Basis::Z}) simplify_timelike(vol, k, geom, opt.weight2);
    for (Basis k : {Basis::X, Basis::Z}) simplify_spacelike(vol, k, geom);
    if (vol == seen.back()) return;
    for (std::size_t i = 0; i < seen.size(); ++i) {
      if (!(seen[i] == vol)) continue;
      auto key = [](const LabelVolume& v) { return std::tie(v.z.bits, v.x.bits, v.time_x.bits, v.time_z.bits); };
      std::size_t best = i;
      for (std::size_t j = i + 1; j < seen.size(); ++j)
        if (key(seen[j]) < key(seen[best])) best = j;
      vol = seen[best];
      return;
    }
    seen.push_back(vol);
  }
  throw std::logic_error("canonicalization did not reach a fixed point");
}

std::pair<BitVolume, BitVolume> implied_detectors(const LabelVolume& vol, const LatticeGeometry& geom) {
  const int D = vol.z.D, d_m = vol.z.T;
  BitVolume ix(D, d_m), iz(D, d_m);
  const int nd = geom.num_data();
  for (int k = 0; k < d_m; ++k) {
    std::vector<std::uint8_t> ex(nd), ez(nd);
    for (int q = 0; q < nd; ++q) {
      ex[q] = vol.x.at(geom.data_coord(q), k);
      ez[q] = vol.z.at(geom.data_coord(q), k);
    }
    for (Basis kind : {Basis::X, Basis::Z}) {
      const auto m = geom.syndrome(kind, kind == Basis::X ? ez : ex);
      const BitVolume& tl = kind == Basis::X ? vol.time_x : vol.time_z;
      BitVolume& out = kind == Basis::X ? ix : iz;
      const auto& st = geom.stabilizers(kind);
      for (std::size_t i = 0; i < st.size(); ++i) {
        std::uint8_t v = m[i];
        if (k < tl.T) v ^= tl.at(st[i].anchor, k);
        if (k > 0) v ^= tl.at(st[i].anchor, k - 1);
        out.at(st[i].anchor, k) = v;
      }
    }
  }
  return {ix, iz};
}

std::pair<int, int> logical_class(const LabelVolume& vol, const LatticeGeometry& geom) {
  int fx = 0, fz = 0;
  for (int k = 0; k < vol.x.T; ++k) {
    for (int q : geom.logical_z()) fx ^= vol.x.at(geom.data_coord(q), k);
    for (int q : geom.logical_x()) fz ^= vol.z.at(geom.data_coord(q), k);
  }
  return {fx, fz};
}

}  // namespace predec
