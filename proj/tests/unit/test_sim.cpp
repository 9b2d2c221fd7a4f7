#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "predec/canon.hpp"
#include "predec/nn.hpp"
#include "predec/sim.hpp"

using namespace predec;

namespace {

constexpr int kX = 1, kZ = 3;

std::set<int> anchors_fired(const LatticeGeometry& g, Basis kind, const BitVolume& v, int t) {
  std::set<int> out;
  const auto bits = gather_anchors(g, kind, v, t);
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (bits[i]) out.insert(static_cast<int>(i));
  return out;
}

std::size_t total(const ShotRecord& r) {
  return r.detectors_x.count() + r.detectors_z.count() + r.labels_space_x.count() + r.labels_space_z.count() +
         r.labels_time_x.count() + r.labels_time_z.count() + r.logical_flip_x + r.logical_flip_z;
}

}  // namespace

TEST(Sim, ZeroNoiseIsSilent) {
  const auto g = build_geometry(5);
  Simulator sim(g, NoiseParams{}, 5, Basis::Z);
  for (int s = 0; s < 20; ++s) {
    Rng r = make_rng(1, s);
    EXPECT_EQ(total(sim.simulate_shot(r)), 0u);
    Rng r2 = make_rng(1, s);
    const auto ds = sim.sample_detectors(r2);
    EXPECT_TRUE(ds.det_x.empty() && ds.det_z.empty());
  }
}

TEST(Sim, DeterministicPerSeed) {
  const auto g = build_geometry(5);
  Simulator sim(g, depolarizing_from_base(0.008), 5, Basis::Z);
  for (int s = 0; s < 20; ++s) {
    Rng a = make_rng(9, s), b = make_rng(9, s);
    EXPECT_EQ(sim.simulate_shot(a), sim.simulate_shot(b));
  }
}

TEST(Sim, ShapesFollowDistanceAndRounds) {
  const auto g = build_geometry(5);
  Simulator sim(g, depolarizing_from_base(0.005), 7, Basis::X);
  Rng r(3);
  const auto rec = sim.simulate_shot(r);
  EXPECT_EQ(rec.detectors_x.T, 7);
  EXPECT_EQ(rec.labels_space_z.T, 7);
  EXPECT_EQ(rec.labels_time_x.T, 6);
  EXPECT_EQ(rec.detectors_z.D, 5);
}

TEST(Sim, SingleDataZFiresAdjacentXChecks) {
  const auto g = build_geometry(5);
  Simulator sim(g, depolarizing_from_base(0.001), 5, Basis::Z);
  const int q = g.data_index({3, 3});
  const int k = 2;
  const int loc = find_location(sim.circuit(), LocKind::IdleSpam, k, 1, q);
  ASSERT_GE(loc, 0);
  const auto rec = sim.simulate_faults({{loc, kZ}});

  const auto& on = g.stabilizers_on(Basis::X, q);
  EXPECT_EQ(anchors_fired(g, Basis::X, rec.detectors_x, k), std::set<int>(on.begin(), on.end()));
  EXPECT_EQ(rec.detectors_x.count(), 2u);
  EXPECT_EQ(rec.detectors_z.count(), 0u);
  EXPECT_EQ(rec.labels_space_z.at(Coord{3, 3}, k), 1);
  EXPECT_EQ(rec.labels_space_z.count(), 1u);
  EXPECT_EQ(rec.labels_time_x.count() + rec.labels_time_z.count(), 0u);
}

TEST(Sim, AncillaMeasurementFlipIsTimelike) {
  const auto g = build_geometry(5);
  Simulator sim(g, depolarizing_from_base(0.001), 5, Basis::Z);
  const int k = 1, i = 4;
  const auto& s = g.stabilizer(Basis::X, i);
  const int loc = find_location(sim.circuit(), LocKind::MeasAncilla, k, 6, s.ancilla_id);
  ASSERT_GE(loc, 0);
  const auto rec = sim.simulate_faults({{loc, kZ}});
  EXPECT_EQ(anchors_fired(g, Basis::X, rec.detectors_x, k), std::set<int>{i});
  EXPECT_EQ(anchors_fired(g, Basis::X, rec.detectors_x, k + 1), std::set<int>{i});
  EXPECT_EQ(rec.detectors_x.count(), 2u);
  EXPECT_EQ(rec.labels_time_x.at(s.anchor, k), 1);
  EXPECT_EQ(rec.labels_time_x.count(), 1u);
  EXPECT_EQ(rec.labels_space_z.count() + rec.labels_space_x.count(), 0u);
}

TEST(Sim, ReadoutErrorFlipsLogicalOnlyInReadoutBasis) {
  const auto g = build_geometry(3);
  Simulator sim(g, depolarizing_from_base(0.001), 3, Basis::Z);
  const int q = g.logical_z()[1];
  const int loc = find_location(sim.circuit(), LocKind::MeasData, 2, 0, q);
  ASSERT_GE(loc, 0);
  const auto rec = sim.simulate_faults({{loc, kX}});
  EXPECT_EQ(rec.logical_flip_x, 1);
  EXPECT_EQ(rec.logical_flip_z, 0);
  EXPECT_GT(rec.detectors_z.count(), 0u);
}

TEST(Sim, UnavailablePauliIsRejected) {
  const auto g = build_geometry(3);
  Simulator sim(g, depolarizing_from_base(0.001), 3, Basis::Z);
  const int loc = find_location(sim.circuit(), LocKind::MeasAncilla, 0, 6, g.stabilizer(Basis::X, 0).ancilla_id);
  EXPECT_THROW(sim.simulate_faults({{loc, kX}}), std::invalid_argument);
}

TEST(Sim, YDecompositionTable) {
  auto pc = [](int a, int b) { return 4 * a + b; };
  const int I = 0, X = 1, Y = 2, Z = 3;
  EXPECT_EQ(decompose_y_fault(pc(Y, Z), Basis::X), (std::vector<int>{pc(Z, Z), pc(X, I)}));
  EXPECT_EQ(decompose_y_fault(pc(Y, Y), Basis::Z), (std::vector<int>{pc(X, X), pc(Z, I), pc(I, Z)}));
  EXPECT_EQ(decompose_y_fault(pc(X, Y), Basis::X), (std::vector<int>{pc(X, I), pc(I, X), pc(I, Z)}));
  EXPECT_EQ(decompose_y_fault(pc(Y, I), Basis::Z), (std::vector<int>{pc(X, I), pc(Z, I)}));
  EXPECT_THROW(decompose_y_fault(pc(X, Z), Basis::X), std::invalid_argument);
}

// Each component product must equal the original Pauli up to phase.
TEST(Sim, YDecompositionMultipliesBack) {
  for (Basis b : {Basis::X, Basis::Z})
    for (int code = 1; code < 16; ++code) {
      if (code / 4 != 2 && code % 4 != 2) continue;
      int dx = 0, ax = 0;
      for (int c : decompose_y_fault(code, b)) {
        dx ^= c / 4;
        ax ^= c % 4;
      }
      EXPECT_EQ(dx, code / 4);
      EXPECT_EQ(ax, code % 4);
    }
}

TEST(Sim, TimelikeLabelsXorInRoundAndPushedSyndrome) {
  const auto g = build_geometry(3);
  RoundFaults rf;
  rf.syn_x.assign(4, 0);
  rf.syn_z.assign(4, 0);
  rf.err_x.assign(9, 0);
  rf.err_z.assign(9, 0);
  rf.syn_x[1] = 1;
  auto [tx, tz] = timelike_labels(rf, g);
  EXPECT_EQ(tx, (std::vector<std::uint8_t>{0, 1, 0, 0}));
  rf.err_z[g.data_index({2, 2})] = 1;
  const auto m = g.syndrome(Basis::X, rf.err_z);
  std::tie(tx, tz) = timelike_labels(rf, g);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(tx[i], m[i] ^ (i == 1));
  EXPECT_EQ(tz, std::vector<std::uint8_t>(4, 0));
}

TEST(Sim, SyndromeDensity) {
  BitVolume x(5, 5), z(5, 5);
  for (int i = 0; i < 12; ++i) x.bits[i * 3] = 1;
  EXPECT_DOUBLE_EQ(syndrome_density(x, z, 5), 0.1);
}

TEST(Sim, FastPathMatchesFullShot) {
  const auto g = build_geometry(5);
  Simulator sim(g, depolarizing_from_base(0.008), 5, Basis::Z);
  for (int s = 0; s < 300; ++s) {
    Rng a = make_rng(4, s), b = make_rng(4, s);
    const auto rec = sim.simulate_shot(a);
    const auto fast = sim.sample_detectors(b);
    const auto slow = detector_shot_from(rec, g);
    EXPECT_EQ(fast.det_x, slow.det_x);
    EXPECT_EQ(fast.det_z, slow.det_z);
    EXPECT_EQ(fast.flip_x, rec.logical_flip_x);
    EXPECT_EQ(fast.flip_z, rec.logical_flip_z);
  }
}

class SimLabels : public ::testing::TestWithParam<std::tuple<int, Basis>> {};

// Labels reproduce the detectors (M(E_k) ^ t_k ^ t_{k-1}) and the logical flip.
TEST_P(SimLabels, PerfectPredecoderLeavesNothing) {
  const auto [d, basis] = GetParam();
  const auto g = build_geometry(d);
  const int dm = d + 1;
  Simulator sim(g, depolarizing_from_base(0.01), dm, basis);
  for (int s = 0; s < 400; ++s) {
    Rng r = make_rng(5, s);
    const auto rec = sim.simulate_shot(r);
    const auto lv = label_volume_from(rec);
    const auto [rx, rz] = apply_corrections(rec.detectors_x, rec.detectors_z, lv, g, basis);
    ASSERT_EQ(rx.count() + rz.count(), 0u) << "shot " << s;
    const auto [fx, fz] = logical_class(lv, g);
    ASSERT_EQ(fx, rec.logical_flip_x);
    ASSERT_EQ(fz, rec.logical_flip_z);
  }
}

INSTANTIATE_TEST_SUITE_P(Shots, SimLabels,
                         ::testing::Values(std::make_tuple(3, Basis::Z), std::make_tuple(5, Basis::Z),
                                           std::make_tuple(5, Basis::X), std::make_tuple(7, Basis::Z)));

TEST(Sim, JsonAndBinaryRoundTrip) {
  const auto g = build_geometry(5);
  Simulator sim(g, depolarizing_from_base(0.01), 6, Basis::X);
  std::vector<ShotRecord> shots;
  for (int s = 0; s < 25; ++s) {
    Rng r = make_rng(2, s);
    shots.push_back(sim.simulate_shot(r));
    EXPECT_EQ(ShotRecord::from_json(shots.back().to_json()), shots.back());
  }
  std::stringstream ss;
  write_shots_binary(ss, shots);
  auto back = read_shots_binary(ss);
  ASSERT_EQ(back.size(), shots.size());
  for (std::size_t i = 0; i < shots.size(); ++i) {
    // Deferral counts are diagnostics and are not serialized.
    back[i].readout_deferrals = shots[i].readout_deferrals;
    EXPECT_EQ(back[i], shots[i]);
  }
}

TEST(Sim, BinaryRejectsGarbage) {
  std::stringstream ss("NOPE0000");
  EXPECT_THROW(read_shots_binary(ss), std::runtime_error);
}
