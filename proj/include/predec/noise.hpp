#pragma once

#include <array>
#include <string>

#include <json.hpp>

#include "predec/rng.hpp"

namespace predec {

// Two-qubit Pauli code: 4 * first + second with I=0, X=1, Y=2, Z=3.
// The 15 CNOT entries are stored at code - 1; the first letter is the control.
inline constexpr int kNumCxPaulis = 15;
inline constexpr int kNumNoiseParams = 25;

struct NoiseParams {
  double p_prep_x = 0;  // Z flip after |+> preparation
  double p_prep_z = 0;  // X flip after |0> preparation
  double p_meas_x = 0;
  double p_meas_z = 0;
  std::array<double, 3> p_idle_cnot{};  // X, Y, Z
  std::array<double, 3> p_idle_spam{};  // X, Y, Z
  std::array<double, kNumCxPaulis> p_cx{};

  double cx(int first, int second) const { return p_cx[4 * first + second - 1]; }

  // Throws std::invalid_argument when an invariant fails.
  void validate() const;

  // Flat view in the canonical order of names().
  std::array<double, kNumNoiseParams> to_vector() const;
  static NoiseParams from_vector(const std::array<double, kNumNoiseParams>& v);
  static const std::array<std::string, kNumNoiseParams>& names();
  static int index_of(const std::string& name);

  nlohmann::json to_json() const;
  static NoiseParams from_json(const nlohmann::json& j);

  friend bool operator==(const NoiseParams&, const NoiseParams&) = default;
};

// Label of a two-qubit Pauli code, e.g. 7 -> "XZ".
std::string cx_label(int code);

NoiseParams depolarizing_from_base(double p);

struct HierarchicalConfig {
  double p_min = 1e-3;
  double p_max = 1e-2;
  double m_lo = 0.5;
  double m_hi = 2.0;
};

NoiseParams sample_hierarchical(double p_base, Rng& rng, const HierarchicalConfig& cfg = {});

}  // namespace predec
