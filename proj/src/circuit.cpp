#include "predec/circuit.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>

namespace predec {

namespace {

constexpr int kI = 0, kX = 1, kY = 2, kZ = 3;

int num_qubits(const Circuit& c) { return c.d * c.d + 2 * c.num_stabs; }

struct LaneState {
  std::vector<std::uint64_t> fx, fz, rec;
};

void inject(const FaultLocation& loc, int code, int lane, LaneState& s) {
  const std::uint64_t bit = std::uint64_t{1} << lane;
  auto apply = [&](int q, int p) {
    if (pauli_has_x(p)) s.fx[q] ^= bit;
    if (pauli_has_z(p)) s.fz[q] ^= bit;
  };
  if (loc.kind == LocKind::Cx) {
    apply(loc.q0, code / 4);
    apply(loc.q1, code % 4);
  } else {
    apply(loc.q0, code);
  }
}

// Runs faults f[0..n) (sorted by op_pos, at most 64) from the first fault up to `stop`.
void run_lanes(const Circuit& c, const InjectedPauli* f, int n, int stop, LaneState& s) {
  const int nq = num_qubits(c);
  s.fx.assign(nq, 0);
  s.fz.assign(nq, 0);
  s.rec.assign(c.num_records, 0);
  int ptr = 0;
  const int start = c.locations[f[0].loc].op_pos;
  for (int i = start; i < stop; ++i) {
    while (ptr < n && c.locations[f[ptr].loc].op_pos == i) {
      inject(c.locations[f[ptr].loc], f[ptr].code, ptr, s);
      ++ptr;
    }
    const Op& op = c.ops[i];
    switch (op.type) {
      case Op::Cx:
        s.fx[op.b] ^= s.fx[op.a];
        s.fz[op.a] ^= s.fz[op.b];
        break;
      case Op::MeasX:
        s.rec[op.b] = s.fz[op.a];
        break;
      case Op::MeasZ:
        s.rec[op.b] = s.fx[op.a];
        break;
      case Op::Reset:
        s.fx[op.a] = 0;
        s.fz[op.a] = 0;
        break;
    }
  }
  while (ptr < n) {
    if (c.locations[f[ptr].loc].op_pos != stop) throw std::logic_error("fault beyond propagation window");
    inject(c.locations[f[ptr].loc], f[ptr].code, ptr, s);
    ++ptr;
  }
}

}  // namespace

Circuit build_circuit(const LatticeGeometry& geom, int d_m, Basis basis) {
  if (d_m < 2) throw std::invalid_argument("d_m must be >= 2");
  Circuit c;
  c.d = geom.d();
  c.d_m = d_m;
  c.basis = basis;
  const int K = geom.num_stabilizers();
  const int nd = geom.num_data();
  c.num_stabs = K;
  const int nq = nd + 2 * K;
  c.anc_record.assign(static_cast<std::size_t>(d_m - 1) * 2 * K, -1);
  c.data_record.assign(nd, -1);

  auto add_loc = [&](FaultLocation l) { c.locations.push_back(l); };
  for (int k = 0; k + 1 < d_m; ++k) {
    const int start = static_cast<int>(c.ops.size());
    for (Basis kind : {Basis::X, Basis::Z}) {
      for (int i = 0; i < K; ++i) {
        const auto& s = geom.stabilizer(kind, i);
        add_loc({LocKind::PrepAncilla, k, 1, s.ancilla_id, -1, kind, i, start});
      }
    }
    if (k == 0)
      for (int q = 0; q < nd; ++q) add_loc({LocKind::PrepData, k, 1, q, -1, basis, -1, start});
    for (int q = 0; q < nd; ++q) add_loc({LocKind::IdleSpam, k, 1, q, -1, basis, -1, start});

    for (int t = 2; t <= 5; ++t) {
      std::vector<char> busy(nq, 0);
      for (Basis kind : {Basis::X, Basis::Z}) {
        for (int i = 0; i < K; ++i) {
          const auto& s = geom.stabilizer(kind, i);
          for (std::size_t j = 0; j < s.support.size(); ++j) {
            if (s.schedule[j] != t) continue;
            const int dq = geom.data_index(s.support[j]);
            const int ctrl = kind == Basis::X ? s.ancilla_id : dq;
            const int targ = kind == Basis::X ? dq : s.ancilla_id;
            if (busy[ctrl] || busy[targ]) throw std::logic_error("CNOT schedule conflict");
            busy[ctrl] = busy[targ] = 1;
            c.ops.push_back({Op::Cx, ctrl, targ});
            add_loc({LocKind::Cx, k, t, ctrl, targ, kind, i, static_cast<int>(c.ops.size())});
          }
        }
      }
      const int pos = static_cast<int>(c.ops.size());
      for (int q = 0; q < nq; ++q)
        if (!busy[q]) add_loc({LocKind::IdleCnot, k, t, q, -1, basis, -1, pos});
    }

    const int mpos = static_cast<int>(c.ops.size());
    for (int q = 0; q < nd; ++q) add_loc({LocKind::IdleSpam, k, 6, q, -1, basis, -1, mpos});
    for (Basis kind : {Basis::X, Basis::Z}) {
      for (int i = 0; i < K; ++i) {
        const auto& s = geom.stabilizer(kind, i);
        add_loc({LocKind::MeasAncilla, k, 6, s.ancilla_id, -1, kind, i, mpos});
      }
    }
    for (Basis kind : {Basis::X, Basis::Z}) {
      for (int i = 0; i < K; ++i) {
        const auto& s = geom.stabilizer(kind, i);
        const int r = c.num_records++;
        c.anc_record[(k * 2 + static_cast<int>(kind)) * K + i] = r;
        c.ops.push_back({kind == Basis::X ? Op::MeasX : Op::MeasZ, s.ancilla_id, r});
      }
    }
    for (Basis kind : {Basis::X, Basis::Z})
      for (int i = 0; i < K; ++i) c.ops.push_back({Op::Reset, geom.stabilizer(kind, i).ancilla_id, 0});
    c.round_end.push_back(static_cast<int>(c.ops.size()));
  }

  const int rpos = static_cast<int>(c.ops.size());
  for (int q = 0; q < nd; ++q) add_loc({LocKind::MeasData, d_m - 1, 0, q, -1, basis, -1, rpos});
  for (int q = 0; q < nd; ++q) {
    const int r = c.num_records++;
    c.data_record[q] = r;
    c.ops.push_back({basis == Basis::X ? Op::MeasX : Op::MeasZ, q, r});
  }
  c.round_end.push_back(static_cast<int>(c.ops.size()));
  std::stable_sort(c.locations.begin(), c.locations.end(),
                   [](const FaultLocation& a, const FaultLocation& b) { return a.op_pos < b.op_pos; });
  return c;
}

std::vector<std::vector<int>> detector_records(const Circuit& c, const LatticeGeometry& geom) {
  const int K = c.num_stabs;
  std::vector<std::vector<int>> out(c.num_detectors());
  for (Basis kind : {Basis::X, Basis::Z}) {
    for (int i = 0; i < K; ++i) {
      for (int k = 0; k < c.d_m; ++k) {
        if (c.detector_masked(kind, k)) continue;
        auto& recs = out[c.detector_id(kind, k, i)];
        if (k + 1 < c.d_m) {
          recs.push_back(c.record(k, kind, i));
          if (k > 0) recs.push_back(c.record(k - 1, kind, i));
        } else {
          for (auto q : geom.stabilizer(kind, i).support) recs.push_back(c.data_record[geom.data_index(q)]);
          recs.push_back(c.record(k - 1, kind, i));
        }
      }
    }
  }
  return out;
}

std::vector<int> decompose_y_fault(int code, Basis ancilla_kind) {
  const int dp = code / 4, ap = code % 4;
  if (code < 1 || code > 15) throw std::invalid_argument("Pauli code out of range");
  if (dp != kY && ap != kY) throw std::invalid_argument("fault has no Y content");
  auto pc = [](int a, int b) { return 4 * a + b; };
  const bool xa = ancilla_kind == Basis::X;
  if (dp == kY && ap == kI) return {pc(kX, kI), pc(kZ, kI)};
  if (dp == kI && ap == kY) return {pc(kI, kX), pc(kI, kZ)};
  if (dp == kY && ap == kX)
    return xa ? std::vector<int>{pc(kX, kI), pc(kZ, kI), pc(kI, kX)} : std::vector<int>{pc(kX, kX), pc(kZ, kI)};
  if (dp == kY && ap == kZ)
    return xa ? std::vector<int>{pc(kZ, kZ), pc(kX, kI)} : std::vector<int>{pc(kX, kI), pc(kZ, kI), pc(kI, kZ)};
  if (dp == kY && ap == kY)
    return xa ? std::vector<int>{pc(kZ, kZ), pc(kX, kI), pc(kI, kX)}
              : std::vector<int>{pc(kX, kX), pc(kZ, kI), pc(kI, kZ)};
  if (dp == kX && ap == kY)
    return xa ? std::vector<int>{pc(kX, kI), pc(kI, kX), pc(kI, kZ)} : std::vector<int>{pc(kX, kX), pc(kI, kZ)};
  // ZY
  return xa ? std::vector<int>{pc(kZ, kZ), pc(kI, kX)} : std::vector<int>{pc(kZ, kI), pc(kI, kX), pc(kI, kZ)};
}

std::vector<GlobalEffect> propagate_global(const Circuit& c, const LatticeGeometry& geom,
                                           const std::vector<InjectedPauli>& faults) {
  std::vector<int> order(faults.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return c.locations[faults[a].loc].op_pos < c.locations[faults[b].loc].op_pos;
  });
  const auto det_recs = detector_records(c, geom);
  const int nd = geom.num_data();
  const int stop = static_cast<int>(c.ops.size());
  std::vector<GlobalEffect> out(faults.size());
  std::vector<InjectedPauli> batch;
  LaneState s;
  std::vector<std::uint64_t> det(det_recs.size());
  for (std::size_t b0 = 0; b0 < order.size(); b0 += 64) {
    const std::size_t n = std::min<std::size_t>(64, order.size() - b0);
    batch.clear();
    for (std::size_t j = 0; j < n; ++j) batch.push_back(faults[order[b0 + j]]);
    run_lanes(c, batch.data(), static_cast<int>(n), stop, s);
    for (std::size_t di = 0; di < det_recs.size(); ++di) {
      std::uint64_t m = 0;
      for (int r : det_recs[di]) m ^= s.rec[r];
      det[di] = m;
    }
    std::vector<std::uint64_t> mx(nd), mz(nd);
    for (int q = 0; q < nd; ++q) {
      const std::uint64_t rec = s.rec[c.data_record[q]];
      mx[q] = c.basis == Basis::Z ? rec : s.fx[q];
      mz[q] = c.basis == Basis::X ? rec : s.fz[q];
    }
    for (std::size_t j = 0; j < n; ++j) {
      GlobalEffect& e = out[order[b0 + j]];
      for (std::size_t di = 0; di < det.size(); ++di)
        if ((det[di] >> j) & 1) e.dets.push_back(static_cast<int>(di));
      for (int q = 0; q < nd; ++q) {
        if ((mx[q] >> j) & 1) e.data_x.push_back(q);
        if ((mz[q] >> j) & 1) e.data_z.push_back(q);
      }
      for (int q : geom.logical_z()) e.obs_x ^= (mx[q] >> j) & 1;
      for (int q : geom.logical_x()) e.obs_z ^= (mz[q] >> j) & 1;
    }
  }
  return out;
}

std::vector<LocalEffect> propagate_local(const Circuit& c, const LatticeGeometry& geom,
                                         const std::vector<InjectedPauli>& faults) {
  std::vector<int> order(faults.size());
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](int i) {
    const auto& l = c.locations[faults[i].loc];
    return std::make_pair(l.round, l.op_pos);
  };
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key(a) < key(b); });
  const int K = c.num_stabs;
  const int nd = geom.num_data();
  std::vector<LocalEffect> out(faults.size());
  std::vector<InjectedPauli> batch;
  LaneState s;
  std::size_t b0 = 0;
  while (b0 < order.size()) {
    const int round = c.locations[faults[order[b0]].loc].round;
    std::size_t n = 0;
    batch.clear();
    while (b0 + n < order.size() && n < 64 && c.locations[faults[order[b0 + n]].loc].round == round) {
      batch.push_back(faults[order[b0 + n]]);
      ++n;
    }
    run_lanes(c, batch.data(), static_cast<int>(n), c.round_end[round], s);
    const bool readout = round == c.d_m - 1;
    for (std::size_t j = 0; j < n; ++j) {
      LocalEffect& e = out[order[b0 + j]];
      e.round = round;
      for (int q = 0; q < nd; ++q) {
        std::uint64_t x = s.fx[q], z = s.fz[q];
        if (readout) (c.basis == Basis::Z ? x : z) = s.rec[c.data_record[q]];
        if ((x >> j) & 1) e.data_x.push_back(q);
        if ((z >> j) & 1) e.data_z.push_back(q);
      }
      if (!readout) {
        for (int i = 0; i < K; ++i) {
          if ((s.rec[c.record(round, Basis::X, i)] >> j) & 1) e.syn_x.push_back(i);
          if ((s.rec[c.record(round, Basis::Z, i)] >> j) & 1) e.syn_z.push_back(i);
        }
      }
    }
    b0 += n;
  }
  return out;
}

FaultTable build_fault_table(const Circuit& c, const LatticeGeometry& geom) {
  FaultTable t;
  t.choices.resize(c.locations.size());
  std::vector<InjectedPauli> whole, parts;
  std::map<std::pair<int, int>, int> part_index;
  auto add_part = [&](int loc, int code) {
    auto [it, fresh] = part_index.emplace(std::make_pair(loc, code), static_cast<int>(parts.size()));
    if (fresh) parts.push_back({loc, code});
    return it->second;
  };
  for (std::size_t li = 0; li < c.locations.size(); ++li) {
    const FaultLocation& l = c.locations[li];
    const int loc = static_cast<int>(li);
    auto& ch = t.choices[li];
    auto single = [&](int code, int param) {
      FaultChoice f;
      f.code = code;
      f.param = param;
      if (code == kY) {
        f.components = {add_part(loc, kX), add_part(loc, kZ)};
      } else {
        f.components = {add_part(loc, code)};
      }
      ch.push_back(f);
    };
    switch (l.kind) {
      case LocKind::PrepAncilla:
        if (l.kind_basis == Basis::X) single(kZ, 0); else single(kX, 1);
        break;
      case LocKind::PrepData:
        if (l.kind_basis == Basis::X) single(kZ, 0); else single(kX, 1);
        break;
      case LocKind::MeasAncilla:
        if (l.kind_basis == Basis::X) single(kZ, 2); else single(kX, 3);
        break;
      case LocKind::MeasData:
        if (l.kind_basis == Basis::X) single(kZ, 2); else single(kX, 3);
        break;
      case LocKind::IdleCnot:
        for (int p = 1; p <= 3; ++p) single(p, 3 + p);
        break;
      case LocKind::IdleSpam:
        for (int p = 1; p <= 3; ++p) single(p, 6 + p);
        break;
      case LocKind::Cx: {
        const bool xa = l.kind_basis == Basis::X;  // ancilla is the control for X checks
        for (int code = 1; code < 16; ++code) {
          FaultChoice f;
          f.code = code;
          f.param = 10 + code - 1;
          const int cp = code / 4, tp = code % 4;
          if (cp == kY || tp == kY) {
            const int da = xa ? 4 * tp + cp : code;
            for (int comp : decompose_y_fault(da, l.kind_basis)) {
              const int cc = xa ? 4 * (comp % 4) + comp / 4 : comp;
              f.components.push_back(add_part(loc, cc));
            }
          } else {
            f.components = {add_part(loc, code)};
          }
          ch.push_back(f);
        }
        break;
      }
    }
    for (auto& f : ch) {
      f.global = static_cast<int>(whole.size());
      whole.push_back({loc, f.code});
    }
  }
  t.global = propagate_global(c, geom, whole);
  t.local = propagate_local(c, geom, parts);
  return t;
}

int find_location(const Circuit& c, LocKind kind, int round, int step, int q0, int q1) {
  for (std::size_t i = 0; i < c.locations.size(); ++i) {
    const auto& l = c.locations[i];
    if (l.kind == kind && l.round == round && l.step == step && l.q0 == q0 && (q1 < 0 || l.q1 == q1))
      return static_cast<int>(i);
  }
  return -1;
}

}  // namespace predec
