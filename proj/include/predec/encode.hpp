#pragma once

#include <iosfwd>
#include <vector>

#include "predec/canon.hpp"
#include "predec/lattice.hpp"
#include "predec/sim.hpp"

namespace predec {

// Real-valued (channel, row, col, round) volume, round fastest.
struct TensorVolume {
  int C = 0, D = 0, T = 0;
  std::vector<double> v;

  TensorVolume() = default;
  TensorVolume(int channels, int dim, int rounds)
      : C(channels), D(dim), T(rounds), v(static_cast<std::size_t>(channels) * dim * dim * rounds, 0.0) {}

  std::size_t index(int c, int r, int col, int t) const {
    return ((static_cast<std::size_t>(c) * D + r) * D + col) * T + t;
  }
  double& at(int c, int r, int col, int t) { return v[index(c, r, col, t)]; }
  double at(int c, int r, int col, int t) const { return v[index(c, r, col, t)]; }
  std::size_t channel_size() const { return static_cast<std::size_t>(D) * D * T; }
  friend bool operator==(const TensorVolume&, const TensorVolume&) = default;
};

// Channels: X detectors, Z detectors, x_present, z_present.
TensorVolume build_input(const ShotRecord& rec, const LatticeGeometry& geom);

// Channels: Z corrections, X corrections, X-stabilizer timelike, Z-stabilizer timelike.
TensorVolume build_labels(const ShotRecord& rec, const LatticeGeometry& geom, bool canonical,
                          const CanonOptions& opt = {});
TensorVolume labels_tensor(const LabelVolume& vol);

// Copies a BitVolume into channel c (rounds beyond vol.T stay zero).
void put_channel(TensorVolume& t, int c, const BitVolume& vol);

// "PDTV", version, C, D, T, then float64 values in index order.
void write_tensor_binary(std::ostream& os, const TensorVolume& t);
TensorVolume read_tensor_binary(std::istream& is);

}  // namespace predec
