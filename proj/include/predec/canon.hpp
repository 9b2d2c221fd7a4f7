#pragma once

#include "predec/lattice.hpp"
#include "predec/sim.hpp"
#include "predec/types.hpp"

namespace predec {

// Output channels: Z-corrections, X-corrections, X-stabilizer timelike,
// Z-stabilizer timelike. The detector volumes ride along as read-only
// context for the timelike cost terms.
struct LabelVolume {
  BitVolume z, x;            // D x D x d_m on data qubits
  BitVolume time_x, time_z;  // D x D x (d_m - 1) at anchors
  BitVolume det_x, det_z;    // D x D x d_m at anchors

  std::size_t weight() const { return z.count() + x.count() + time_x.count() + time_z.count(); }
  friend bool operator==(const LabelVolume&, const LabelVolume&) = default;
};

LabelVolume label_volume_from(const ShotRecord& rec);

struct CanonOptions {
  bool weight2 = false;     // also try single-fault weight-two timelike patterns
  int max_outer_passes = 64;
};

// Multiplies stabilizers of `kind` into the matching error channel (X errors
// by X stabilizers) until no rule fires in any round.
void simplify_spacelike(LabelVolume& vol, Basis kind, const LatticeGeometry& geom);

// Two-round flips of single data-qubit corrections (Z corrections use the
// X-stabilizer timelike channel). Returns the number of accepted flips.
int simplify_timelike(LabelVolume& vol, Basis kind, const LatticeGeometry& geom, bool weight2 = false);

// spacelike -> timelike -> spacelike for both kinds, repeated until stable.
void canonicalize(LabelVolume& vol, const LatticeGeometry& geom, const CanonOptions& opt = {});

// Detectors implied by labels: M(E_k) xor t_k xor t_{k-1}, no masking.
std::pair<BitVolume, BitVolume> implied_detectors(const LabelVolume& vol, const LatticeGeometry& geom);

// Parity of the accumulated spacelike labels on (Z logical, X logical).
std::pair<int, int> logical_class(const LabelVolume& vol, const LatticeGeometry& geom);

}  // namespace predec
