#include <gtest/gtest.h>

#include <sstream>

#include "predec/encode.hpp"

using namespace predec;

TEST(Encode, ZeroNoiseInputIsGeometryOnly) {
  const auto g = build_geometry(5);
  Simulator sim(g, NoiseParams{}, 5, Basis::Z);
  Rng r(1);
  const auto t = build_input(sim.simulate_shot(r), g);
  ASSERT_EQ(t.C, 4);
  ASSERT_EQ(t.D, 5);
  ASSERT_EQ(t.T, 5);
  const auto pc = present_channels(g, Basis::Z, 5);
  const std::size_t n = t.channel_size();
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_EQ(t.v[i], 0.0);
    EXPECT_EQ(t.v[n + i], 0.0);
    EXPECT_EQ(t.v[2 * n + i], pc.x[i]);
    EXPECT_EQ(t.v[3 * n + i], pc.z[i]);
  }
}

TEST(Encode, DetectorChannelsMirrorShot) {
  const auto g = build_geometry(5);
  Simulator sim(g, depolarizing_from_base(0.01), 6, Basis::X);
  for (int s = 0; s < 20; ++s) {
    Rng r = make_rng(8, s);
    const auto rec = sim.simulate_shot(r);
    const auto t = build_input(rec, g);
    for (int row = 0; row < 5; ++row)
      for (int c = 0; c < 5; ++c)
        for (int k = 0; k < 6; ++k) {
          EXPECT_EQ(t.at(0, row, c, k), rec.detectors_x.at(row, c, k));
          EXPECT_EQ(t.at(1, row, c, k), rec.detectors_z.at(row, c, k));
        }
  }
}

TEST(Encode, TimelikeLabelsZeroInFinalRound) {
  const auto g = build_geometry(5);
  Simulator sim(g, depolarizing_from_base(0.02), 5, Basis::Z);
  for (bool canon : {false, true})
    for (int s = 0; s < 30; ++s) {
      Rng r = make_rng(3, s);
      const auto t = build_labels(sim.simulate_shot(r), g, canon);
      ASSERT_EQ(t.T, 5);
      for (int c : {2, 3})
        for (int row = 0; row < 5; ++row)
          for (int col = 0; col < 5; ++col) EXPECT_EQ(t.at(c, row, col, 4), 0.0);
    }
}

TEST(Encode, LabelChannelOrder) {
  const auto g = build_geometry(3);
  Simulator sim(g, depolarizing_from_base(0.001), 3, Basis::Z);
  const int q = g.data_index({2, 2});
  const int loc = find_location(sim.circuit(), LocKind::IdleSpam, 1, 1, q);
  const auto t = build_labels(sim.simulate_faults({{loc, 3}}), g, false);
  EXPECT_EQ(t.at(0, 1, 1, 1), 1.0);
  double rest = 0;
  for (double x : t.v) rest += x;
  EXPECT_EQ(rest, 1.0);
}

TEST(Encode, RejectsMismatchedGeometry) {
  const auto g3 = build_geometry(3), g5 = build_geometry(5);
  Simulator sim(g5, NoiseParams{}, 5, Basis::Z);
  Rng r(1);
  const auto rec = sim.simulate_shot(r);
  EXPECT_THROW(build_input(rec, g3), std::invalid_argument);
  EXPECT_THROW(build_labels(rec, g3, false), std::invalid_argument);
}

TEST(Encode, TensorBinaryRoundTrip) {
  TensorVolume t(4, 3, 2);
  for (std::size_t i = 0; i < t.v.size(); ++i) t.v[i] = 0.25 * static_cast<double>(i) - 3.0;
  std::stringstream ss;
  write_tensor_binary(ss, t);
  EXPECT_EQ(read_tensor_binary(ss), t);
  std::stringstream bad("PDTV");
  EXPECT_THROW(read_tensor_binary(bad), std::runtime_error);
}
