#include "predec/sim.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

namespace predec {

namespace {

void xor_list(std::vector<std::uint8_t>& v, const std::vector<int>& idx) {
  for (int i : idx) v[i] ^= 1;
}

std::vector<std::uint8_t> syndrome_of(const LatticeGeometry& geom, Basis kind, const std::vector<std::uint8_t>& e) {
  return geom.syndrome(kind, e);
}

}  // namespace

void scatter_anchors(const LatticeGeometry& geom, Basis kind, const std::vector<std::uint8_t>& bits, BitVolume& vol,
                     int t) {
  const auto& st = geom.stabilizers(kind);
  for (std::size_t i = 0; i < st.size(); ++i) vol.at(st[i].anchor, t) = bits[i];
}

std::vector<std::uint8_t> gather_anchors(const LatticeGeometry& geom, Basis kind, const BitVolume& vol, int t) {
  const auto& st = geom.stabilizers(kind);
  std::vector<std::uint8_t> out(st.size());
  for (std::size_t i = 0; i < st.size(); ++i) out[i] = vol.at(st[i].anchor, t);
  return out;
}

Simulator::Simulator(const LatticeGeometry& geom, const NoiseParams& noise, int d_m, Basis basis)
    : geom_(geom), noise_(noise), d_m_(d_m), basis_(basis), circuit_(build_circuit(geom, d_m, basis)) {
  noise_.validate();
  table_ = build_fault_table(circuit_, geom_);
  const auto pv = noise_.to_vector();
  cdf_.resize(table_.choices.size());
  for (std::size_t li = 0; li < table_.choices.size(); ++li) {
    double acc = 0;
    for (const auto& f : table_.choices[li]) cdf_[li].push_back(acc += pv[f.param]);
    if (acc > 0) active_.push_back(static_cast<int>(li));
  }
}

void Simulator::sample_choices(Rng& rng, std::vector<std::pair<int, int>>& picks) const {
  picks.clear();
  for (int li : active_) {
    const auto& cdf = cdf_[li];
    const double u = uniform01(rng);
    if (u >= cdf.back()) continue;
    int j = 0;
    while (u >= cdf[j]) ++j;
    picks.push_back({li, j});
  }
}

ShotRecord Simulator::simulate_shot(Rng& rng) const {
  std::vector<std::pair<int, int>> picks;
  sample_choices(rng, picks);
  return assemble(picks);
}

ShotRecord Simulator::simulate_faults(const std::vector<InjectedPauli>& faults) const {
  std::vector<std::pair<int, int>> picks;
  for (const auto& f : faults) {
    const auto& ch = table_.choices.at(f.loc);
    int j = -1;
    for (std::size_t i = 0; i < ch.size(); ++i)
      if (ch[i].code == f.code) j = static_cast<int>(i);
    if (j < 0) throw std::invalid_argument("Pauli not available at this location");
    picks.push_back({f.loc, j});
  }
  return assemble(picks);
}

DetectorShot Simulator::sample_detectors(Rng& rng) const {
  std::vector<std::pair<int, int>> picks;
  sample_choices(rng, picks);
  const int K = circuit_.num_stabs;
  std::vector<std::uint8_t> det(circuit_.num_detectors(), 0);
  DetectorShot out;
  for (auto [li, j] : picks) {
    const auto& g = table_.global[table_.choices[li][j].global];
    xor_list(det, g.dets);
    out.flip_x ^= g.obs_x;
    out.flip_z ^= g.obs_z;
  }
  const int per_kind = K * d_m_;
  for (int i = 0; i < per_kind; ++i) {
    if (det[i]) out.det_x.push_back(i);
    if (det[per_kind + i]) out.det_z.push_back(i);
  }
  return out;
}

ShotRecord Simulator::assemble(const std::vector<std::pair<int, int>>& picks) const {
  const int K = circuit_.num_stabs;
  const int nd = geom_.num_data();
  const int D = geom_.grid_dim();
  const int nr = d_m_ - 1;  // syndrome rounds
  using Bits = std::vector<std::uint8_t>;
  std::vector<Bits> lx(nr, Bits(nd, 0)), lz(nr, Bits(nd, 0)), sx(nr, Bits(K, 0)), sz(nr, Bits(K, 0));
  Bits ex(nd, 0), ez(nd, 0);
  std::vector<std::vector<int>> deferred(d_m_);
  std::vector<std::uint8_t> det(circuit_.num_detectors(), 0);

  ShotRecord rec;
  rec.D = D;
  rec.d_m = d_m_;
  rec.basis = basis_;

  for (auto [li, j] : picks) {
    const FaultChoice& f = table_.choices[li][j];
    const auto& g = table_.global[f.global];
    xor_list(det, g.dets);
    rec.logical_flip_x ^= g.obs_x;
    rec.logical_flip_z ^= g.obs_z;
    for (int ci : f.components) {
      const LocalEffect& l = table_.local[ci];
      if (l.round == nr) {
        xor_list(ex, l.data_x);
        xor_list(ez, l.data_z);
      } else if (!l.syn_x.empty() || !l.syn_z.empty()) {
        xor_list(lx[l.round], l.data_x);
        xor_list(lz[l.round], l.data_z);
        xor_list(sx[l.round], l.syn_x);
        xor_list(sz[l.round], l.syn_z);
      } else if (!l.data_x.empty() || !l.data_z.empty()) {
        if (l.round + 1 < nr) {
          deferred[l.round + 1].push_back(ci);
        } else {
          xor_list(ex, l.data_x);
          xor_list(ez, l.data_z);
          ++rec.readout_deferrals;
        }
      }
    }
  }
  // Deferred pieces enter at the start of the next round and are accepted there.
  for (int k = 1; k < nr; ++k) {
    for (int ci : deferred[k]) {
      const LocalEffect& l = table_.local[ci];
      Bits e_x(nd, 0), e_z(nd, 0);
      xor_list(e_x, l.data_x);
      xor_list(e_z, l.data_z);
      xor_list(lx[k], l.data_x);
      xor_list(lz[k], l.data_z);
      const auto s_x = syndrome_of(geom_, Basis::X, e_z);
      const auto s_z = syndrome_of(geom_, Basis::Z, e_x);
      for (int i = 0; i < K; ++i) {
        sx[k][i] ^= s_x[i];
        sz[k][i] ^= s_z[i];
      }
    }
  }

  rec.detectors_x = BitVolume(D, d_m_);
  rec.detectors_z = BitVolume(D, d_m_);
  rec.labels_space_x = BitVolume(D, d_m_);
  rec.labels_space_z = BitVolume(D, d_m_);
  rec.labels_time_x = BitVolume(D, nr);
  rec.labels_time_z = BitVolume(D, nr);
  for (Basis kind : {Basis::X, Basis::Z}) {
    auto& dv = kind == Basis::X ? rec.detectors_x : rec.detectors_z;
    for (int k = 0; k < d_m_; ++k)
      for (int i = 0; i < K; ++i)
        if (det[circuit_.detector_id(kind, k, i)]) dv.at(geom_.stabilizer(kind, i).anchor, k) = 1;
  }
  auto put_data = [&](BitVolume& v, const Bits& e, int k) {
    for (int q = 0; q < nd; ++q)
      if (e[q]) v.at(geom_.data_coord(q), k) = 1;
  };
  for (int k = 0; k < nr; ++k) {
    put_data(rec.labels_space_x, lx[k], k);
    put_data(rec.labels_space_z, lz[k], k);
    RoundFaults rf{sx[k], sz[k], lx[k], lz[k]};
    auto [tx, tz] = timelike_labels(rf, geom_);
    scatter_anchors(geom_, Basis::X, tx, rec.labels_time_x, k);
    scatter_anchors(geom_, Basis::Z, tz, rec.labels_time_z, k);
  }
  put_data(rec.labels_space_x, ex, nr);
  put_data(rec.labels_space_z, ez, nr);
  return rec;
}

std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> timelike_labels(const RoundFaults& rf,
                                                                                 const LatticeGeometry& geom) {
  auto tx = geom.syndrome(Basis::X, rf.err_z);
  auto tz = geom.syndrome(Basis::Z, rf.err_x);
  for (std::size_t i = 0; i < tx.size(); ++i) {
    tx[i] ^= rf.syn_x[i];
    tz[i] ^= rf.syn_z[i];
  }
  return {tx, tz};
}

double syndrome_density(const BitVolume& x, const BitVolume& z, int d) {
  const double denom = static_cast<double>(x.T) * (d * d - 1);
  return static_cast<double>(x.count() + z.count()) / denom;
}

double syndrome_density(const ShotRecord& rec) {
  return syndrome_density(rec.detectors_x, rec.detectors_z, rec.D);
}

DetectorShot detector_shot_from(const ShotRecord& rec, const LatticeGeometry& geom) {
  DetectorShot s;
  const int K = geom.num_stabilizers();
  for (int k = 0; k < rec.d_m; ++k) {
    for (int i = 0; i < K; ++i) {
      if (rec.detectors_x.at(geom.stabilizer(Basis::X, i).anchor, k)) s.det_x.push_back(k * K + i);
      if (rec.detectors_z.at(geom.stabilizer(Basis::Z, i).anchor, k)) s.det_z.push_back(k * K + i);
    }
  }
  s.flip_x = rec.logical_flip_x;
  s.flip_z = rec.logical_flip_z;
  return s;
}

namespace {

nlohmann::json vol_json(const BitVolume& v) { return {{"D", v.D}, {"T", v.T}, {"bits", v.bits}}; }

BitVolume vol_from(const nlohmann::json& j) {
  BitVolume v(j.at("D").get<int>(), j.at("T").get<int>());
  v.bits = j.at("bits").get<std::vector<std::uint8_t>>();
  if (v.bits.size() != static_cast<std::size_t>(v.D) * v.D * v.T) throw std::invalid_argument("volume size mismatch");
  return v;
}

void put_u32(std::ostream& os, std::uint32_t x) { os.write(reinterpret_cast<const char*>(&x), 4); }
std::uint32_t get_u32(std::istream& is) {
  std::uint32_t x = 0;
  if (!is.read(reinterpret_cast<char*>(&x), 4)) throw std::runtime_error("truncated shot file");
  return x;
}

void put_bits(std::ostream& os, const BitVolume& v) {
  std::vector<char> packed((v.bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < v.bits.size(); ++i)
    if (v.bits[i]) packed[i / 8] |= static_cast<char>(1 << (i % 8));
  os.write(packed.data(), static_cast<std::streamsize>(packed.size()));
}

void get_bits(std::istream& is, BitVolume& v) {
  std::vector<char> packed((v.bits.size() + 7) / 8, 0);
  if (!is.read(packed.data(), static_cast<std::streamsize>(packed.size()))) throw std::runtime_error("truncated shot file");
  for (std::size_t i = 0; i < v.bits.size(); ++i) v.bits[i] = (packed[i / 8] >> (i % 8)) & 1;
}

}  // namespace

nlohmann::json ShotRecord::to_json() const {
  return {{"D", D},
          {"d_m", d_m},
          {"basis", std::string(1, basis_char(basis))},
          {"detectors_x", vol_json(detectors_x)},
          {"detectors_z", vol_json(detectors_z)},
          {"labels_space_z", vol_json(labels_space_z)},
          {"labels_space_x", vol_json(labels_space_x)},
          {"labels_time_x", vol_json(labels_time_x)},
          {"labels_time_z", vol_json(labels_time_z)},
          {"logical_flip_x", logical_flip_x},
          {"logical_flip_z", logical_flip_z},
          {"readout_deferrals", readout_deferrals}};
}

ShotRecord ShotRecord::from_json(const nlohmann::json& j) {
  ShotRecord r;
  r.D = j.at("D").get<int>();
  r.d_m = j.at("d_m").get<int>();
  r.basis = parse_basis(j.at("basis").get<std::string>());
  r.detectors_x = vol_from(j.at("detectors_x"));
  r.detectors_z = vol_from(j.at("detectors_z"));
  r.labels_space_z = vol_from(j.at("labels_space_z"));
  r.labels_space_x = vol_from(j.at("labels_space_x"));
  r.labels_time_x = vol_from(j.at("labels_time_x"));
  r.labels_time_z = vol_from(j.at("labels_time_z"));
  r.logical_flip_x = j.at("logical_flip_x").get<std::uint8_t>();
  r.logical_flip_z = j.at("logical_flip_z").get<std::uint8_t>();
  r.readout_deferrals = j.value("readout_deferrals", 0);
  return r;
}

void write_shots_binary(std::ostream& os, const std::vector<ShotRecord>& shots) {
  os.write("PDSH", 4);
  put_u32(os, 1);
  const ShotRecord* first = shots.empty() ? nullptr : &shots.front();
  put_u32(os, first ? first->D : 0);
  put_u32(os, first ? first->d_m : 0);
  put_u32(os, first ? static_cast<std::uint32_t>(first->basis) : 0);
  put_u32(os, static_cast<std::uint32_t>(shots.size()));
  for (const auto& s : shots) {
    if (s.D != first->D || s.d_m != first->d_m || s.basis != first->basis)
      throw std::invalid_argument("mixed shot geometry in one batch");
    for (const BitVolume* v : {&s.detectors_x, &s.detectors_z, &s.labels_space_z, &s.labels_space_x,
                               &s.labels_time_x, &s.labels_time_z})
      put_bits(os, *v);
    const char flags = static_cast<char>(s.logical_flip_x | (s.logical_flip_z << 1));
    os.write(&flags, 1);
  }
}

std::vector<ShotRecord> read_shots_binary(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "PDSH") throw std::runtime_error("not a shot batch file");
  if (get_u32(is) != 1) throw std::runtime_error("unsupported shot batch version");
  const int D = static_cast<int>(get_u32(is));
  const int d_m = static_cast<int>(get_u32(is));
  const Basis basis = static_cast<Basis>(get_u32(is));
  const std::uint32_t n = get_u32(is);
  std::vector<ShotRecord> out(n);
  for (auto& s : out) {
    s.D = D;
    s.d_m = d_m;
    s.basis = basis;
    s.detectors_x = s.detectors_z = s.labels_space_z = s.labels_space_x = BitVolume(D, d_m);
    s.labels_time_x = s.labels_time_z = BitVolume(D, d_m - 1);
    for (BitVolume* v : {&s.detectors_x, &s.detectors_z, &s.labels_space_z, &s.labels_space_x, &s.labels_time_x,
                         &s.labels_time_z})
      get_bits(is, *v);
    char flags = 0;
    if (!is.read(&flags, 1)) throw std::runtime_error("truncated shot file");
    s.logical_flip_x = flags & 1;
    s.logical_flip_z = (flags >> 1) & 1;
  }
  return out;
}

}  // namespace predec
