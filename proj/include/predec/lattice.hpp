#pragma once

#include <vector>

#include <json.hpp>

#include "predec/types.hpp"

namespace predec {

struct StabilizerDef {
  Basis kind = Basis::X;
  std::vector<Coord> support;  // in CNOT order
  std::vector<int> schedule;   // time step of each support entry, in 2..5
  int ancilla_id = 0;          // qubit index; data qubits occupy 0..d*d-1
  Coord anchor;
  Coord plaquette;             // corner (a, b) with a, b in 0..d
  int weight() const { return static_cast<int>(support.size()); }
};

class LatticeGeometry {
 public:
  explicit LatticeGeometry(int d);

  int d() const { return d_; }
  int grid_dim() const { return d_; }
  int num_data() const { return d_ * d_; }
  int num_qubits() const { return d_ * d_ + 2 * num_stabilizers(); }
  int num_stabilizers() const { return (d_ * d_ - 1) / 2; }

  const std::vector<StabilizerDef>& stabilizers(Basis kind) const {
    return kind == Basis::X ? x_stabs_ : z_stabs_;
  }
  const StabilizerDef& stabilizer(Basis kind, int i) const { return stabilizers(kind)[i]; }

  int data_index(Coord q) const { return (q.row - 1) * d_ + (q.col - 1); }
  Coord data_coord(int q) const { return {q / d_ + 1, q % d_ + 1}; }

  // Indices of stabilizers of `kind` whose support contains data qubit q.
  const std::vector<int>& stabilizers_on(Basis kind, int q) const {
    return kind == Basis::X ? x_on_[q] : z_on_[q];
  }
  // Stabilizer index anchored at q, or -1.
  int stabilizer_at(Basis kind, Coord q) const;

  // Data indices of the horizontal X string (row 1) and vertical Z string (column 1).
  const std::vector<int>& logical_x() const { return logical_x_; }
  const std::vector<int>& logical_z() const { return logical_z_; }

  // Syndrome of a per-data-qubit error pattern under the stabilizers of `kind`.
  // X stabilizers see Z errors and vice versa.
  std::vector<std::uint8_t> syndrome(Basis kind, const std::vector<std::uint8_t>& err) const;

  nlohmann::json to_json() const;

 private:
  int d_;
  std::vector<StabilizerDef> x_stabs_, z_stabs_;
  std::vector<std::vector<int>> x_on_, z_on_;
  std::vector<int> anchor_x_, anchor_z_;
  std::vector<int> logical_x_, logical_z_;
};

LatticeGeometry build_geometry(int d);

Coord grid_anchor(const StabilizerDef& stab);

// Geometric input channels as D x D x d_m value grids, same layout as BitVolume.
struct PresentChannels {
  int D = 0;
  int T = 0;
  std::vector<double> x, z;
};

PresentChannels present_channels(const LatticeGeometry& geom, Basis basis, int d_m);

}  // namespace predec
