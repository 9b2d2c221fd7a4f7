#pragma once

#include <cstdint>
#include <vector>

#include "predec/lattice.hpp"
#include "predec/noise.hpp"

namespace predec {

// Pauli letters: I=0, X=1, Y=2, Z=3. Two-qubit codes are 4 * first + second.
inline bool pauli_has_x(int p) { return p == 1 || p == 2; }
inline bool pauli_has_z(int p) { return p == 2 || p == 3; }

enum class LocKind : std::uint8_t { PrepAncilla, PrepData, IdleSpam, IdleCnot, Cx, MeasAncilla, MeasData };

// A place where the noise model may insert a Pauli. Rounds are 0-based
// layers: 0..d_m-2 are syndrome rounds, d_m-1 is the transversal readout.
struct FaultLocation {
  LocKind kind = LocKind::IdleCnot;
  int round = 0;
  int step = 0;      // 1..6 inside a syndrome round, 0 at readout
  int q0 = -1;       // qubit, or CNOT control
  int q1 = -1;       // CNOT target
  Basis kind_basis = Basis::X;  // stabilizer kind (ancilla, CNOT) or prep/readout basis (data)
  int stab = -1;     // stabilizer index for ancilla and CNOT locations
  int op_pos = 0;    // the Pauli acts just before ops[op_pos]
};

struct Op {
  enum Type : std::uint8_t { Cx, MeasX, MeasZ, Reset };
  Type type;
  int a;  // control / measured qubit
  int b;  // target / record index
};

struct Circuit {
  int d = 0;
  int d_m = 0;
  Basis basis = Basis::Z;
  int num_stabs = 0;  // per kind
  std::vector<Op> ops;
  std::vector<FaultLocation> locations;
  std::vector<int> round_end;    // one past the last op of each layer
  std::vector<int> anc_record;   // [(round * 2 + kind) * K + stab]
  std::vector<int> data_record;  // per data qubit
  int num_records = 0;

  int num_detectors() const { return 2 * num_stabs * d_m; }
  // Detector ids: (kind * d_m + round) * K + stab. Detectors of the kind
  // blind to the prep/readout basis are defined but never fire in the first
  // and last layer.
  int detector_id(Basis kind, int round, int stab) const {
    return (static_cast<int>(kind) * d_m + round) * num_stabs + stab;
  }
  bool detector_masked(Basis kind, int round) const {
    return kind != basis && (round == 0 || round == d_m - 1);
  }
  int record(int round, Basis kind, int stab) const {
    return anc_record[(round * 2 + static_cast<int>(kind)) * num_stabs + stab];
  }
};

Circuit build_circuit(const LatticeGeometry& geom, int d_m, Basis basis);

// Ordered list of records whose parity forms each detector.
std::vector<std::vector<int>> detector_records(const Circuit& c, const LatticeGeometry& geom);

// Y-decomposition of a two-qubit fault given as (data, ancilla) code.
// Returns component codes in the same ordering.
std::vector<int> decompose_y_fault(int data_anc_code, Basis ancilla_kind);

// Effect of a fault propagated to the end of the circuit.
struct GlobalEffect {
  std::vector<int> dets;            // sorted detector ids
  std::uint8_t obs_x = 0;           // X-error parity on the Z logical
  std::uint8_t obs_z = 0;           // Z-error parity on the X logical
  std::vector<int> data_x, data_z;  // residual data frame after readout
};

// Effect of a fault propagated to the end of its own round.
struct LocalEffect {
  int round = 0;
  std::vector<int> data_x, data_z;  // data frame at round end
  std::vector<int> syn_x, syn_z;    // flipped ancilla outcomes in that round
};

struct FaultChoice {
  int code = 0;                 // Pauli on the location's qubits
  int param = 0;                // index into NoiseParams::to_vector()
  int global = 0;               // index into FaultTable::global
  std::vector<int> components;  // Y-decomposed pieces, indices into FaultTable::local
};

struct FaultTable {
  std::vector<std::vector<FaultChoice>> choices;  // per location
  std::vector<GlobalEffect> global;
  std::vector<LocalEffect> local;
};

FaultTable build_fault_table(const Circuit& c, const LatticeGeometry& geom);

// One injected fault, used by tests and by the tracer.
struct InjectedPauli {
  int loc = 0;
  int code = 0;
};

// Propagates arbitrary single faults to the circuit end.
std::vector<GlobalEffect> propagate_global(const Circuit& c, const LatticeGeometry& geom,
                                           const std::vector<InjectedPauli>& faults);
std::vector<LocalEffect> propagate_local(const Circuit& c, const LatticeGeometry& geom,
                                         const std::vector<InjectedPauli>& faults);

// Index of the location matching the fields, or -1.
int find_location(const Circuit& c, LocKind kind, int round, int step, int q0, int q1 = -1);

}  // namespace predec
