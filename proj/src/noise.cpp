#include "predec/noise.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace predec {

namespace {

constexpr char kPauliChar[4] = {'I', 'X', 'Y', 'Z'};

std::array<std::string, kNumNoiseParams> make_names() {
  std::array<std::string, kNumNoiseParams> n;
  int i = 0;
  n[i++] = "p_prep_x";
  n[i++] = "p_prep_z";
  n[i++] = "p_meas_x";
  n[i++] = "p_meas_z";
  for (const char* s : {"x", "y", "z"}) n[i++] = std::string("p_idle_cnot_") + s;
  for (const char* s : {"x", "y", "z"}) n[i++] = std::string("p_idle_spam_") + s;
  for (int c = 1; c < 16; ++c) n[i++] = "p_cx_" + cx_label(c);
  return n;
}

// Uniform point on the probability simplex.
std::vector<double> simplex_point(int n, Rng& rng) {
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> w(n);
  double s = 0;
  for (auto& x : w) s += (x = ex(rng));
  for (auto& x : w) x /= s;
  return w;
}

}  // namespace

std::string cx_label(int code) {
  if (code < 1 || code > 15) throw std::invalid_argument("two-qubit Pauli code out of range");
  return {kPauliChar[code / 4], kPauliChar[code % 4]};
}

const std::array<std::string, kNumNoiseParams>& NoiseParams::names() {
  static const auto n = make_names();
  return n;
}

int NoiseParams::index_of(const std::string& name) {
  const auto& n = names();
  for (int i = 0; i < kNumNoiseParams; ++i)
    if (n[i] == name) return i;
  throw std::invalid_argument("unknown noise parameter '" + name + "'");
}

std::array<double, kNumNoiseParams> NoiseParams::to_vector() const {
  std::array<double, kNumNoiseParams> v{};
  int i = 0;
  v[i++] = p_prep_x;
  v[i++] = p_prep_z;
  v[i++] = p_meas_x;
  v[i++] = p_meas_z;
  for (double x : p_idle_cnot) v[i++] = x;
  for (double x : p_idle_spam) v[i++] = x;
  for (double x : p_cx) v[i++] = x;
  return v;
}

NoiseParams NoiseParams::from_vector(const std::array<double, kNumNoiseParams>& v) {
  NoiseParams p;
  int i = 0;
  p.p_prep_x = v[i++];
  p.p_prep_z = v[i++];
  p.p_meas_x = v[i++];
  p.p_meas_z = v[i++];
  for (double& x : p.p_idle_cnot) x = v[i++];
  for (double& x : p.p_idle_spam) x = v[i++];
  for (double& x : p.p_cx) x = v[i++];
  return p;
}

void NoiseParams::validate() const {
  const auto v = to_vector();
  for (int i = 0; i < kNumNoiseParams; ++i) {
    if (!(v[i] >= 0.0 && v[i] <= 0.5))
      throw std::invalid_argument(names()[i] + " outside [0, 0.5]");
  }
  double s = 0;
  for (double x : p_cx) s += x;
  if (s > 1.0) throw std::invalid_argument("CNOT Pauli probabilities sum above 1");
  if (p_idle_cnot[0] + p_idle_cnot[1] + p_idle_cnot[2] > 1.0 ||
      p_idle_spam[0] + p_idle_spam[1] + p_idle_spam[2] > 1.0)
    throw std::invalid_argument("idle Pauli probabilities sum above 1");
}

nlohmann::json NoiseParams::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  const auto v = to_vector();
  for (int i = 0; i < kNumNoiseParams; ++i) j[names()[i]] = v[i];
  return j;
}

NoiseParams NoiseParams::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("noise parameters must be a JSON object");
  std::array<double, kNumNoiseParams> v{};
  for (int i = 0; i < kNumNoiseParams; ++i) {
    if (!j.contains(names()[i])) throw std::invalid_argument("missing " + names()[i]);
    v[i] = j.at(names()[i]).get<double>();
  }
  for (auto it = j.begin(); it != j.end(); ++it) index_of(it.key());
  auto p = from_vector(v);
  p.validate();
  return p;
}

NoiseParams depolarizing_from_base(double p) {
  if (!(p >= 0.0 && p <= 0.1)) throw std::invalid_argument("base rate must lie in [0, 0.1]");
  NoiseParams n;
  n.p_prep_x = n.p_prep_z = n.p_meas_x = n.p_meas_z = 2.0 * p / 3.0;
  n.p_idle_cnot.fill(p / 3.0);
  n.p_idle_spam.fill(p / 3.0);
  n.p_cx.fill(p / 15.0);
  return n;
}

NoiseParams sample_hierarchical(double p_base, Rng& rng, const HierarchicalConfig& cfg) {
  if (!(p_base >= cfg.p_min && p_base <= cfg.p_max))
    throw std::invalid_argument("base rate outside [p_min, p_max]");
  const double llo = std::log(cfg.m_lo), lhi = std::log(cfg.m_hi);
  auto mass = [&] { return p_base * std::exp(llo + (lhi - llo) * uniform01(rng)); };
  NoiseParams n;
  n.p_prep_x = mass();
  n.p_prep_z = mass();
  n.p_meas_x = mass();
  n.p_meas_z = mass();
  auto split = [&](auto& arr) {
    const double m = mass();
    const auto w = simplex_point(static_cast<int>(arr.size()), rng);
    for (std::size_t i = 0; i < arr.size(); ++i) arr[i] = m * w[i];
  };
  split(n.p_idle_cnot);
  split(n.p_idle_spam);
  split(n.p_cx);
  n.validate();
  return n;
}

}  // namespace predec
