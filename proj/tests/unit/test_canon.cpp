#include <gtest/gtest.h>

#include "predec/canon.hpp"
#include "predec/sim.hpp"

using namespace predec;

namespace {

LabelVolume empty_volume(int d, int d_m) {
  LabelVolume v;
  v.z = v.x = v.det_x = v.det_z = BitVolume(d, d_m);
  v.time_x = v.time_z = BitVolume(d, d_m - 1);
  return v;
}

const StabilizerDef& bulk_stabilizer(const LatticeGeometry& g, Basis kind) {
  for (const auto& s : g.stabilizers(kind))
    if (s.weight() == 4 && s.plaquette.row > 1 && s.plaquette.col > 1) return s;
  throw std::logic_error("no bulk stabilizer");
}

std::vector<Coord> set_qubits(const BitVolume& v, int t) {
  std::vector<Coord> out;
  for (int r = 1; r <= v.D; ++r)
    for (int c = 1; c <= v.D; ++c)
      if (v.at(Coord{r, c}, t)) out.push_back({r, c});
  return out;
}

}  // namespace

TEST(Canon, FullPlaquetteIsRemoved) {
  const auto g = build_geometry(5);
  for (Basis kind : {Basis::X, Basis::Z}) {
    auto v = empty_volume(5, 4);
    BitVolume& ch = kind == Basis::X ? v.x : v.z;
    for (auto q : bulk_stabilizer(g, kind).support) ch.at(q, 2) = 1;
    simplify_spacelike(v, kind, g);
    EXPECT_EQ(ch.count(), 0u);
  }
}

TEST(Canon, WeightThreeBecomesComplement) {
  const auto g = build_geometry(5);
  const auto& s = bulk_stabilizer(g, Basis::X);
  auto v = empty_volume(5, 4);
  for (int i = 0; i < 3; ++i) v.x.at(s.support[i], 1) = 1;
  simplify_spacelike(v, Basis::X, g);
  EXPECT_EQ(set_qubits(v.x, 1), std::vector<Coord>{s.support[3]});
}

TEST(Canon, VerticalPairMovesRight) {
  const auto g = build_geometry(5);
  const auto& s = bulk_stabilizer(g, Basis::X);
  const int a = s.plaquette.row, b = s.plaquette.col;
  auto v = empty_volume(5, 3);
  v.x.at(Coord{a, b}, 0) = v.x.at(Coord{a + 1, b}, 0) = 1;
  simplify_spacelike(v, Basis::X, g);
  EXPECT_EQ(set_qubits(v.x, 0), (std::vector<Coord>{{a, b + 1}, {a + 1, b + 1}}));
}

TEST(Canon, BoundaryPairIsRemoved) {
  const auto g = build_geometry(5);
  for (const auto& s : g.stabilizers(Basis::Z)) {
    if (s.weight() != 2) continue;
    auto v = empty_volume(5, 3);
    for (auto q : s.support) v.z.at(q, 1) = 1;
    simplify_spacelike(v, Basis::Z, g);
    EXPECT_EQ(v.z.count(), 0u);
  }
}

TEST(Canon, SpacelikeKeepsSyndromeAndClass) {
  const auto g = build_geometry(7);
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    auto v = empty_volume(7, 2);
    for (auto& b : v.x.bits) b = uniform01(rng) < 0.15;
    for (auto& b : v.z.bits) b = uniform01(rng) < 0.15;
    const auto before = implied_detectors(v, g);
    const auto cls = logical_class(v, g);
    for (Basis k : {Basis::X, Basis::Z}) simplify_spacelike(v, k, g);
    EXPECT_EQ(implied_detectors(v, g), before);
    EXPECT_EQ(logical_class(v, g), cls);
  }
}

// A bit flipped in two consecutive rounds is the same syndrome history as two
// measurement errors; the tie rule keeps the event confined to one round.
TEST(Canon, RepeatedDataErrorBecomesMeasurementErrors) {
  const auto g = build_geometry(5);
  const Coord q{3, 3};
  const int qi = g.data_index(q), k = 1;
  auto v = empty_volume(5, 5);
  v.z.at(q, k) = v.z.at(q, k + 1) = 1;
  const auto [dx, dz] = implied_detectors(v, g);
  v.det_x = dx;
  v.det_z = dz;
  const auto w0 = v.weight();
  EXPECT_EQ(simplify_timelike(v, Basis::Z, g), 1);
  EXPECT_EQ(v.z.count(), 0u);
  for (int s : g.stabilizers_on(Basis::X, qi)) EXPECT_EQ(v.time_x.at(g.stabilizer(Basis::X, s).anchor, k), 1);
  EXPECT_EQ(v.time_x.count(), 2u);
  EXPECT_LE(v.weight(), w0);
  EXPECT_EQ(implied_detectors(v, g), std::make_pair(dx, dz));
}

TEST(Canon, TimelikeNeedsTwoRounds) {
  const auto g = build_geometry(3);
  auto v = empty_volume(3, 1);
  EXPECT_THROW(simplify_timelike(v, Basis::Z, g), std::invalid_argument);
}

class CanonShots : public ::testing::TestWithParam<std::tuple<int, double, bool>> {};

TEST_P(CanonShots, PreservesDetectorsClassAndIsIdempotent) {
  const auto [d, p, w2] = GetParam();
  const auto g = build_geometry(d);
  Simulator sim(g, depolarizing_from_base(p), d, Basis::Z);
  CanonOptions opt;
  opt.weight2 = w2;
  for (int s = 0; s < 150; ++s) {
    Rng rng = make_rng(23, s);
    auto v = label_volume_from(sim.simulate_shot(rng));
    const auto det = implied_detectors(v, g);
    const auto cls = logical_class(v, g);
    const auto w = v.weight();
    canonicalize(v, g, opt);
    ASSERT_EQ(implied_detectors(v, g), det) << "shot " << s;
    ASSERT_EQ(logical_class(v, g), cls) << "shot " << s;
    ASSERT_LE(v.weight(), w) << "shot " << s;
    auto again = v;
    canonicalize(again, g, opt);
    ASSERT_EQ(again, v) << "shot " << s;
  }
}

INSTANTIATE_TEST_SUITE_P(Shots, CanonShots,
                         ::testing::Values(std::make_tuple(3, 0.01, false), std::make_tuple(5, 0.006, false),
                                           std::make_tuple(5, 0.015, false), std::make_tuple(5, 0.01, true),
                                           std::make_tuple(7, 0.008, false)));
