#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <json.hpp>

#include "predec/circuit.hpp"
#include "predec/lattice.hpp"
#include "predec/noise.hpp"
#include "predec/rng.hpp"
#include "predec/types.hpp"

namespace predec {

struct ShotRecord {
  int D = 0;
  int d_m = 0;
  Basis basis = Basis::Z;
  BitVolume detectors_x, detectors_z;        // D x D x d_m at anchors
  BitVolume labels_space_z, labels_space_x;  // D x D x d_m on data qubits
  BitVolume labels_time_x, labels_time_z;    // D x D x (d_m - 1) at anchors
  std::uint8_t logical_flip_x = 0;
  std::uint8_t logical_flip_z = 0;
  int readout_deferrals = 0;

  nlohmann::json to_json() const;
  static ShotRecord from_json(const nlohmann::json& j);
  friend bool operator==(const ShotRecord&, const ShotRecord&) = default;
};

// Detection events as node lists (round * K + stab) per stabilizer kind.
struct DetectorShot {
  std::vector<int> det_x, det_z;
  std::uint8_t flip_x = 0;
  std::uint8_t flip_z = 0;
};

class Simulator {
 public:
  Simulator(const LatticeGeometry& geom, const NoiseParams& noise, int d_m, Basis basis);

  // Full shot with labels: faults are Y-decomposed and each piece is tested
  // for same-round syndrome weight, deferring silent data errors once.
  ShotRecord simulate_shot(Rng& rng) const;
  // Same, for an explicit fault list (no sampling).
  ShotRecord simulate_faults(const std::vector<InjectedPauli>& faults) const;
  // Merged-frame fast path: detection events and flips only.
  DetectorShot sample_detectors(Rng& rng) const;

  const LatticeGeometry& geometry() const { return geom_; }
  const Circuit& circuit() const { return circuit_; }
  const FaultTable& faults() const { return table_; }
  const NoiseParams& noise() const { return noise_; }
  int d_m() const { return d_m_; }
  Basis basis() const { return basis_; }

 private:
  // Chosen fault per location; returns index into choices or -1.
  void sample_choices(Rng& rng, std::vector<std::pair<int, int>>& picks) const;
  ShotRecord assemble(const std::vector<std::pair<int, int>>& picks) const;

  LatticeGeometry geom_;
  NoiseParams noise_;
  int d_m_;
  Basis basis_;
  Circuit circuit_;
  FaultTable table_;
  std::vector<int> active_;                // locations with nonzero total probability
  std::vector<std::vector<double>> cdf_;   // per location cumulative choice probabilities
};

// Result of Algorithm-1 style timelike labelling for one round.
struct RoundFaults {
  std::vector<std::uint8_t> syn_x, syn_z;  // in-round syndrome flips (s_1)
  std::vector<std::uint8_t> err_x, err_z;  // data error left at round end
};

// s_1 xor s_2 per stabilizer, where s_2 is the syndrome of the round's
// output data error pushed through a clean round.
std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> timelike_labels(const RoundFaults& rf,
                                                                                 const LatticeGeometry& geom);

// |events| / (d_m (d^2 - 1)).
double syndrome_density(const ShotRecord& rec);
double syndrome_density(const BitVolume& x, const BitVolume& z, int d);

// Scatter per-stabilizer bits onto anchor cells of round t.
void scatter_anchors(const LatticeGeometry& geom, Basis kind, const std::vector<std::uint8_t>& bits,
                     BitVolume& vol, int t);
std::vector<std::uint8_t> gather_anchors(const LatticeGeometry& geom, Basis kind, const BitVolume& vol, int t);

// Detection-event node lists from detector volumes.
DetectorShot detector_shot_from(const ShotRecord& rec, const LatticeGeometry& geom);

// Compact binary batch layout: "PDSH", version, d, d_m, basis, count, then
// per shot the channels bit-packed in ShotRecord field order plus flip bits.
void write_shots_binary(std::ostream& os, const std::vector<ShotRecord>& shots);
std::vector<ShotRecord> read_shots_binary(std::istream& is);

}  // namespace predec
