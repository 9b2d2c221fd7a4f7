#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "predec/decode.hpp"
#include "predec/nn.hpp"
#include "predec/noise.hpp"

namespace predec {

enum class DecoderMode { Mwpm, Correlated, PredecMwpm, PredecCorrelated, LabelOracle };

std::string mode_name(DecoderMode m);
DecoderMode parse_mode(const std::string& s);
bool mode_uses_model(DecoderMode m);

struct ExperimentConfig {
  int d = 5;
  int d_m = 5;
  Basis basis = Basis::Z;
  NoiseParams noise;
  double p = 0;  // nominal base rate for reports
  std::int64_t shots = 10000;
  DecoderMode mode = DecoderMode::Mwpm;
  std::string checkpoint;      // model path for the predec modes
  bool canonical_labels = true;  // label-oracle only
  std::uint64_t seed = 1;
  int threads = 1;

  void validate() const;
  nlohmann::json to_json() const;
  // Accepts either "p" (depolarizing) or a full "noise" object.
  static ExperimentConfig from_json(const nlohmann::json& j);
};

struct Interval {
  double lo = 0, hi = 0;
};

// Wilson score interval, z = 1.96 by default.
Interval wilson_interval(std::int64_t k, std::int64_t n, double z = 1.959963984540054);

// 1 - (1 - L)^(1 / d_m).
double per_round_ler(double block_ler, int d_m);

struct LerRecord {
  ExperimentConfig config;
  std::int64_t shots = 0;
  std::int64_t failures = 0;
  double ler_block = 0;
  double ler_per_round = 0;
  Interval ci;
  double input_density = 0;
  double residual_density = 0;  // after pre-decoding; equals input otherwise
  double sdr = 1;               // input / residual, infinite when nothing remains
  double seconds = 0;

  nlohmann::json to_json() const;
  static std::string csv_header();
  std::string csv_row() const;
};

// Shared read-only across workers. The graphs may come from different noise
// than the sampled shots (fitted weights).
struct ExperimentContext {
  LatticeGeometry geom;
  GraphPair graphs;
  std::optional<ParamStore> model;

  // Graphs from cfg.noise; the checkpoint is loaded when the mode needs one.
  explicit ExperimentContext(const ExperimentConfig& cfg);
  ExperimentContext(const ExperimentConfig& cfg, GraphPair graphs, std::optional<ParamStore> model);
};

LerRecord run_ler(const ExperimentConfig& cfg);
LerRecord run_ler(const ExperimentConfig& cfg, const ExperimentContext& ctx);

// p_L(p, d) = c1 d (c2 p)^((d + 1) / 2)
struct LerFit {
  double c1 = 0.01938;
  double c2 = 116.95;
  std::vector<double> residuals;  // log-space, fit_pl only

  double operator()(double p, int d) const;
  nlohmann::json to_json() const;
};

struct LerPoint {
  double p = 0;
  int d = 0;
  double ler = 0;
};

// Least squares of ln(p_L / d) = ln c1 + (d + 1)/2 (ln c2 + ln p).
LerFit fit_pl(const std::vector<LerPoint>& data);

double pl_model(double p, int d, double c1, double c2);

// Smallest odd d >= 3 with p_L(p, d) < delta.
int distance_for_budget(double p, double delta, const LerFit& fit);

// Smallest alpha with alpha p_L(p, d) >= delta, i.e. where the budget stops
// being met at d and a larger distance is needed.
double alpha_for_distance(double p, int d, double delta, const LerFit& fit);

// Wait time after the j-th window of a sliding-window decoder with
// T_DEC(r) = c r.
double backlog_wait(double c, double r, double T_s, double T_l, int j);

// ceil(2 T_dec / ((T_l + T_s)(n_com + n_w))), at least 1.
int npar_required(double T_dec, double T_l, double T_s, int n_com, int n_w);
double npar_bound(double T_dec, double T_l, double T_s, int n_com, int n_w);

struct PipelineTimes {
  double predecoded = 0;  // T_s + T_l1 + T_pre + T_l2 + T_al(s')
  double baseline = 0;    // T_s + T_l + T_al(s)
  bool speedup = false;

  nlohmann::json to_json() const;
};

PipelineTimes pipeline_time(double T_s, double T_l1, double T_pre, double T_l2, double T_al_reduced, double T_l,
                            double T_al);

// Linear interpolation of log LER between adjacent p where the d_a and d_b
// curves swap order; NaN when they never cross.
double crossing_point(const std::vector<LerPoint>& data, int d_a, int d_b);

}  // namespace predec
