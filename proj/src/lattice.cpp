#include "predec/lattice.hpp"

#include <algorithm>
#include <stdexcept>

namespace predec {

Basis parse_basis(const std::string& s) {
  if (s == "X" || s == "x") return Basis::X;
  if (s == "Z" || s == "z") return Basis::Z;
  throw std::invalid_argument("basis must be X or Z, got '" + s + "'");
}

std::size_t BitVolume::count() const {
  std::size_t n = 0;
  for (auto b : bits) n += b;
  return n;
}

BitVolume& BitVolume::operator^=(const BitVolume& o) {
  if (o.D != D || o.T != T) throw std::invalid_argument("BitVolume dimension mismatch");
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] ^= o.bits[i];
  return *this;
}

namespace {

enum Corner { NW, NE, SW, SE };

// X checks run NW, SW, NE, SE; Z checks run NW, NE, SW, SE. The last two
// CNOTs of each check touch a pair orthogonal to the logical they threaten.
constexpr int kXTime[4] = {2, 4, 3, 5};
constexpr int kZTime[4] = {2, 3, 4, 5};

}  // namespace

Coord grid_anchor(const StabilizerDef& stab) {
  if (stab.support.empty()) throw std::invalid_argument("stabilizer has no support");
  auto sup = stab.support;
  std::sort(sup.begin(), sup.end());
  if (stab.weight() == 4) {
    // NW for X, NE for Z.
    return stab.kind == Basis::X ? sup[0] : sup[1];
  }
  // weight 2: X sits on a left/right edge (vertical pair) -> top qubit;
  // Z sits on a top/bottom edge (horizontal pair) -> right qubit.
  return stab.kind == Basis::X ? sup[0] : sup[1];
}

LatticeGeometry::LatticeGeometry(int d) : d_(d) {
  if (d < 3 || d % 2 == 0) throw std::invalid_argument("distance must be odd and >= 3");
  const int nd = d * d;
  for (int a = 0; a <= d; ++a) {
    for (int b = 0; b <= d; ++b) {
      const Basis kind = (a + b) % 2 == 0 ? Basis::X : Basis::Z;
      const Coord corners[4] = {{a, b}, {a, b + 1}, {a + 1, b}, {a + 1, b + 1}};
      StabilizerDef s;
      s.kind = kind;
      s.plaquette = {a, b};
      std::vector<std::pair<int, Coord>> timed;
      for (int c = 0; c < 4; ++c) {
        const Coord q = corners[c];
        if (q.row < 1 || q.row > d || q.col < 1 || q.col > d) continue;
        timed.push_back({kind == Basis::X ? kXTime[c] : kZTime[c], q});
      }
      if (timed.size() == 2) {
        const bool lr = (b == 0 || b == d);
        const bool tb = (a == 0 || a == d);
        if (kind == Basis::X && !(lr && !tb)) continue;
        if (kind == Basis::Z && !(tb && !lr)) continue;
      } else if (timed.size() != 4) {
        continue;
      }
      std::sort(timed.begin(), timed.end(),
                [](const auto& l, const auto& r) { return l.first < r.first; });
      for (auto& [t, q] : timed) {
        s.schedule.push_back(t);
        s.support.push_back(q);
      }
      s.anchor = grid_anchor(s);
      (kind == Basis::X ? x_stabs_ : z_stabs_).push_back(std::move(s));
    }
  }
  auto by_anchor = [](const StabilizerDef& l, const StabilizerDef& r) { return l.anchor < r.anchor; };
  std::sort(x_stabs_.begin(), x_stabs_.end(), by_anchor);
  std::sort(z_stabs_.begin(), z_stabs_.end(), by_anchor);
  const int k = num_stabilizers();
  if (static_cast<int>(x_stabs_.size()) != k || static_cast<int>(z_stabs_.size()) != k)
    throw std::logic_error("stabilizer count mismatch");

  x_on_.assign(nd, {});
  z_on_.assign(nd, {});
  anchor_x_.assign(nd, -1);
  anchor_z_.assign(nd, -1);
  for (int i = 0; i < k; ++i) {
    x_stabs_[i].ancilla_id = nd + i;
    z_stabs_[i].ancilla_id = nd + k + i;
    for (auto q : x_stabs_[i].support) x_on_[data_index(q)].push_back(i);
    for (auto q : z_stabs_[i].support) z_on_[data_index(q)].push_back(i);
    anchor_x_[data_index(x_stabs_[i].anchor)] = i;
    anchor_z_[data_index(z_stabs_[i].anchor)] = i;
  }
  for (int c = 1; c <= d; ++c) logical_x_.push_back(data_index({1, c}));
  for (int r = 1; r <= d; ++r) logical_z_.push_back(data_index({r, 1}));
}

int LatticeGeometry::stabilizer_at(Basis kind, Coord q) const {
  if (q.row < 1 || q.row > d_ || q.col < 1 || q.col > d_) return -1;
  return (kind == Basis::X ? anchor_x_ : anchor_z_)[data_index(q)];
}

std::vector<std::uint8_t> LatticeGeometry::syndrome(Basis kind,
                                                    const std::vector<std::uint8_t>& err) const {
  if (static_cast<int>(err.size()) != num_data()) throw std::invalid_argument("error size mismatch");
  const auto& stabs = stabilizers(kind);
  std::vector<std::uint8_t> s(stabs.size(), 0);
  for (std::size_t i = 0; i < stabs.size(); ++i)
    for (auto q : stabs[i].support) s[i] ^= err[data_index(q)];
  return s;
}

nlohmann::json LatticeGeometry::to_json() const {
  nlohmann::json j;
  j["d"] = d_;
  j["grid_dim"] = d_;
  auto stabs = nlohmann::json::array();
  for (Basis kind : {Basis::X, Basis::Z}) {
    for (const auto& s : stabilizers(kind)) {
      nlohmann::json e;
      e["kind"] = std::string(1, basis_char(kind));
      e["ancilla_id"] = s.ancilla_id;
      e["anchor"] = {s.anchor.row, s.anchor.col};
      auto sup = nlohmann::json::array();
      for (std::size_t i = 0; i < s.support.size(); ++i)
        sup.push_back({{"qubit", {s.support[i].row, s.support[i].col}}, {"time", s.schedule[i]}});
      e["support"] = sup;
      stabs.push_back(e);
    }
  }
  j["stabilizers"] = stabs;
  auto coords = [&](const std::vector<int>& v) {
    auto a = nlohmann::json::array();
    for (int q : v) a.push_back({data_coord(q).row, data_coord(q).col});
    return a;
  };
  j["logical_x"] = coords(logical_x_);
  j["logical_z"] = coords(logical_z_);
  return j;
}

LatticeGeometry build_geometry(int d) { return LatticeGeometry(d); }

PresentChannels present_channels(const LatticeGeometry& geom, Basis basis, int d_m) {
  if (d_m < 1) throw std::invalid_argument("d_m must be >= 1");
  const int D = geom.grid_dim();
  PresentChannels pc;
  pc.D = D;
  pc.T = d_m;
  const std::size_t n = static_cast<std::size_t>(D) * D * d_m;
  pc.x.assign(n, 0.0);
  pc.z.assign(n, 0.0);
  // The kind that anticommutes with the initial/readout basis carries no
  // information in the first and last rounds.
  const Basis blind = other(basis);
  for (Basis kind : {Basis::X, Basis::Z}) {
    auto& ch = kind == Basis::X ? pc.x : pc.z;
    for (const auto& s : geom.stabilizers(kind)) {
      const double v = s.weight() == 4 ? 1.0 : 0.5;
      for (int t = 0; t < d_m; ++t) {
        if (kind == blind && (t == 0 || t == d_m - 1)) continue;
        ch[(static_cast<std::size_t>(s.anchor.row - 1) * D + (s.anchor.col - 1)) * d_m + t] = v;
      }
    }
  }
  return pc;
}

}  // namespace predec
