#include "predec/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

#include "predec/encode.hpp"
#include "predec/sim.hpp"

namespace predec {

std::string mode_name(DecoderMode m) {
  switch (m) {
    case DecoderMode::Mwpm: return "mwpm";
    case DecoderMode::Correlated: return "correlated";
    case DecoderMode::PredecMwpm: return "predec+mwpm";
    case DecoderMode::PredecCorrelated: return "predec+correlated";
    case DecoderMode::LabelOracle: return "label-oracle";
  }
  return "?";
}

DecoderMode parse_mode(const std::string& s) {
  for (DecoderMode m : {DecoderMode::Mwpm, DecoderMode::Correlated, DecoderMode::PredecMwpm,
                        DecoderMode::PredecCorrelated, DecoderMode::LabelOracle})
    if (mode_name(m) == s) return m;
  throw std::invalid_argument("unknown decoder mode: " + s);
}

bool mode_uses_model(DecoderMode m) { return m == DecoderMode::PredecMwpm || m == DecoderMode::PredecCorrelated; }

void ExperimentConfig::validate() const {
  if (d < 3 || d % 2 == 0) throw std::invalid_argument("d must be odd and >= 3");
  if (d_m < 2) throw std::invalid_argument("d_m must be >= 2");
  if (shots < 1) throw std::invalid_argument("shots must be >= 1");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  if (mode_uses_model(mode) && checkpoint.empty()) throw std::invalid_argument(mode_name(mode) + " needs a checkpoint");
  noise.validate();
}

nlohmann::json ExperimentConfig::to_json() const {
  return {{"d", d},
          {"d_m", d_m},
          {"basis", std::string(1, basis_char(basis))},
          {"p", p},
          {"noise", noise.to_json()},
          {"shots", shots},
          {"mode", mode_name(mode)},
          {"checkpoint", checkpoint},
          {"canonical_labels", canonical_labels},
          {"seed", seed},
          {"threads", threads}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.d = j.value("d", c.d);
  c.d_m = j.value("d_m", c.d);
  if (j.contains("basis")) c.basis = parse_basis(j.at("basis").get<std::string>());
  c.p = j.value("p", 0.0);
  c.noise = j.contains("noise") ? NoiseParams::from_json(j.at("noise")) : depolarizing_from_base(c.p);
  c.shots = j.value("shots", c.shots);
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  c.checkpoint = j.value("checkpoint", c.checkpoint);
  c.canonical_labels = j.value("canonical_labels", c.canonical_labels);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  c.validate();
  return c;
}

Interval wilson_interval(std::int64_t k, std::int64_t n, double z) {
  if (n <= 0) return {0, 1};
  const double N = static_cast<double>(n), ph = k / N, z2 = z * z;
  const double den = 1 + z2 / N;
  const double mid = (ph + z2 / (2 * N)) / den;
  const double half = z * std::sqrt(ph * (1 - ph) / N + z2 / (4 * N * N)) / den;
  return {k == 0 ? 0.0 : std::max(0.0, mid - half), k == n ? 1.0 : std::min(1.0, mid + half)};
}

double per_round_ler(double block_ler, int d_m) { return 1 - std::pow(1 - block_ler, 1.0 / d_m); }

nlohmann::json LerRecord::to_json() const {
  return {{"config", config.to_json()},
          {"shots", shots},
          {"failures", failures},
          {"ler_block", ler_block},
          {"ler_per_round", ler_per_round},
          {"per_round_conversion", "1-(1-L)^(1/d_m)"},
          {"ci95", {ci.lo, ci.hi}},
          {"input_density", input_density},
          {"residual_density", residual_density},
          {"sdr", std::isfinite(sdr) ? nlohmann::json(sdr) : nlohmann::json("inf")},
          {"seconds", seconds}};
}

std::string LerRecord::csv_header() {
  return "d,p,mode,d_m,basis,shots,failures,ler_block,ci_lo,ci_hi,ler_per_round,input_density,residual_density,sdr,"
         "seconds";
}

std::string LerRecord::csv_row() const {
  std::ostringstream os;
  os.precision(10);
  os << config.d << ',' << config.p << ',' << mode_name(config.mode) << ',' << config.d_m << ','
     << basis_char(config.basis) << ',' << shots << ',' << failures << ',' << ler_block << ',' << ci.lo << ','
     << ci.hi << ',' << ler_per_round << ',' << input_density << ',' << residual_density << ',' << sdr << ','
     << seconds;
  return os.str();
}

namespace {

void check_model(const ParamStore& m) {
  if (m.spec.in_channels != 4 || m.spec.layers.empty() || m.spec.layers.back().filters != 4)
    throw std::invalid_argument("checkpoint is not a 4-in/4-out pre-decoder");
}

}  // namespace

ExperimentContext::ExperimentContext(const ExperimentConfig& cfg)
    : geom(cfg.d), graphs(build_graphs(geom, cfg.noise, cfg.d_m, cfg.basis)) {
  if (mode_uses_model(cfg.mode)) {
    model = ParamStore::load(cfg.checkpoint).ema_view();
    check_model(*model);
  }
}

ExperimentContext::ExperimentContext(const ExperimentConfig& cfg, GraphPair g, std::optional<ParamStore> m)
    : geom(cfg.d), graphs(std::move(g)), model(std::move(m)) {
  if (graphs.x.d != cfg.d || graphs.x.d_m != cfg.d_m || graphs.x.basis != cfg.basis)
    throw std::invalid_argument("graphs do not match the experiment geometry");
  if (mode_uses_model(cfg.mode)) {
    if (!model) throw std::invalid_argument(mode_name(cfg.mode) + " needs a model");
    check_model(*model);
  }
}

LerRecord run_ler(const ExperimentConfig& cfg) {
  cfg.validate();
  return run_ler(cfg, ExperimentContext(cfg));
}

namespace {

struct Tally {
  std::int64_t failures = 0;
  std::int64_t input_events = 0;
  std::int64_t residual_events = 0;
};

std::uint8_t spacelike_parity(const BitVolume& v, const std::vector<int>& logical, const LatticeGeometry& geom) {
  std::uint8_t f = 0;
  for (int t = 0; t < v.T; ++t)
    for (int q : logical) f ^= v.at(geom.data_coord(q), t);
  return f;
}

}  // namespace

LerRecord run_ler(const ExperimentConfig& cfg, const ExperimentContext& ctx) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const Simulator sim(ctx.geom, cfg.noise, cfg.d_m, cfg.basis);
  const Basis kind = cfg.basis;  // the graph whose observable is tracked
  const bool correlated = cfg.mode == DecoderMode::Correlated || cfg.mode == DecoderMode::PredecCorrelated;
  const bool labels = cfg.mode != DecoderMode::Mwpm && cfg.mode != DecoderMode::Correlated;

  auto work = [&](int w) {
    Tally tl;
    const Matcher mx(ctx.graphs.x), mz(ctx.graphs.z);
    const std::int64_t lo = cfg.shots * w / cfg.threads, hi = cfg.shots * (w + 1) / cfg.threads;
    for (std::int64_t i = lo; i < hi; ++i) {
      Rng rng = make_rng(cfg.seed, static_cast<std::uint64_t>(i));
      DetectorShot ds;
      std::uint8_t pre_flip = 0;
      if (!labels) {
        ds = sim.sample_detectors(rng);
        tl.input_events += ds.det_x.size() + ds.det_z.size();
        tl.residual_events += ds.det_x.size() + ds.det_z.size();
      } else {
        ShotRecord rec = sim.simulate_shot(rng);
        LabelVolume corr;
        if (cfg.mode == DecoderMode::LabelOracle) {
          corr = label_volume_from(rec);
          if (cfg.canonical_labels) canonicalize(corr, ctx.geom);
        } else {
          corr = infer_corrections(*ctx.model, build_input(rec, ctx.geom));
        }
        tl.input_events += rec.detectors_x.count() + rec.detectors_z.count();
        auto [rx, rz] = apply_corrections(rec.detectors_x, rec.detectors_z, corr, ctx.geom, cfg.basis);
        rec.detectors_x = std::move(rx);
        rec.detectors_z = std::move(rz);
        tl.residual_events += rec.detectors_x.count() + rec.detectors_z.count();
        ds = detector_shot_from(rec, ctx.geom);
        pre_flip = kind == Basis::Z ? spacelike_parity(corr.x, ctx.geom.logical_z(), ctx.geom)
                                    : spacelike_parity(corr.z, ctx.geom.logical_x(), ctx.geom);
      }
      std::uint8_t obs;
      if (correlated) {
        auto [rx, rz] = correlated_decode(mx, mz, ds.det_x, ds.det_z);
        obs = kind == Basis::Z ? rz.obs : rx.obs;
      } else {
        obs = kind == Basis::Z ? mz.mwpm(ds.det_z).obs : mx.mwpm(ds.det_x).obs;
      }
      const std::uint8_t truth = kind == Basis::Z ? ds.flip_x : ds.flip_z;
      tl.failures += (obs ^ pre_flip) != truth;
    }
    return tl;
  };

  std::vector<std::future<Tally>> fs;
  for (int w = 1; w < cfg.threads; ++w) fs.push_back(std::async(std::launch::async, work, w));
  Tally total = work(0);
  for (auto& f : fs) {
    const Tally t = f.get();
    total.failures += t.failures;
    total.input_events += t.input_events;
    total.residual_events += t.residual_events;
  }

  LerRecord r;
  r.config = cfg;
  r.shots = cfg.shots;
  r.failures = total.failures;
  r.ler_block = static_cast<double>(total.failures) / cfg.shots;
  r.ler_per_round = per_round_ler(r.ler_block, cfg.d_m);
  r.ci = wilson_interval(total.failures, cfg.shots);
  const double denom = static_cast<double>(cfg.shots) * cfg.d_m * (cfg.d * cfg.d - 1);
  r.input_density = total.input_events / denom;
  r.residual_density = total.residual_events / denom;
  r.sdr = total.residual_events > 0 ? static_cast<double>(total.input_events) / total.residual_events
                                    : std::numeric_limits<double>::infinity();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

double pl_model(double p, int d, double c1, double c2) { return c1 * d * std::pow(c2 * p, (d + 1) / 2.0); }

double LerFit::operator()(double p, int d) const { return pl_model(p, d, c1, c2); }

nlohmann::json LerFit::to_json() const { return {{"c1", c1}, {"c2", c2}, {"residuals", residuals}}; }

LerFit fit_pl(const std::vector<LerPoint>& data) {
  std::vector<LerPoint> pts;
  for (const auto& x : data)
    if (x.ler > 0 && x.p > 0) pts.push_back(x);
  if (pts.size() < 4) throw std::invalid_argument("fit_pl needs at least 4 points with nonzero LER");
  const auto [mn, mx] = std::minmax_element(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.d < b.d; });
  if (mn->d == mx->d) throw std::invalid_argument("fit_pl needs at least two distances");
  // ln(L/d) - h ln p = ln c1 + h ln c2 with h = (d + 1) / 2
  Eigen::MatrixXd A(pts.size(), 2);
  Eigen::VectorXd y(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double h = (pts[i].d + 1) / 2.0;
    A(i, 0) = 1;
    A(i, 1) = h;
    y(i) = std::log(pts[i].ler / pts[i].d) - h * std::log(pts[i].p);
  }
  const Eigen::VectorXd x = A.colPivHouseholderQr().solve(y);
  LerFit f;
  f.c1 = std::exp(x(0));
  f.c2 = std::exp(x(1));
  const Eigen::VectorXd res = A * x - y;
  f.residuals.assign(res.data(), res.data() + res.size());
  return f;
}

int distance_for_budget(double p, double delta, const LerFit& fit) {
  if (!(p > 0) || !(delta > 0)) throw std::invalid_argument("p and delta must be positive");
  if (fit.c2 * p >= 1) throw std::domain_error("p is at or above the model threshold 1/c2");
  for (int d = 3; d < 100001; d += 2)
    if (fit(p, d) < delta) return d;
  throw std::domain_error("no distance below 1e5 meets the budget");
}

double alpha_for_distance(double p, int d, double delta, const LerFit& fit) { return delta / fit(p, d); }

double backlog_wait(double c, double r, double T_s, double T_l, int j) {
  if (!(T_s > 0)) throw std::invalid_argument("T_s must be positive");
  if (j < 1) throw std::invalid_argument("j must be >= 1");
  const double head = std::pow(c, j) * r / std::pow(T_s, j - 1);
  // (c^j - T_s^j) / (c - T_s) tends to j T_s^(j-1) as c -> T_s
  const double bracket = std::abs(c - T_s) < 1e-12 * T_s
                             ? static_cast<double>(j)
                             : std::pow(T_s, 1 - j) * (std::pow(c, j) - std::pow(T_s, j)) / (c - T_s);
  return head + T_l * bracket;
}

double npar_bound(double T_dec, double T_l, double T_s, int n_com, int n_w) {
  if (!(T_l + T_s > 0) || n_com + n_w <= 0) throw std::invalid_argument("npar needs positive times and window sizes");
  return 2 * T_dec / ((T_l + T_s) * (n_com + n_w));
}

int npar_required(double T_dec, double T_l, double T_s, int n_com, int n_w) {
  const double b = npar_bound(T_dec, T_l, T_s, n_com, n_w);
  return std::max(1, static_cast<int>(std::ceil(b - 1e-9)));
}

nlohmann::json PipelineTimes::to_json() const {
  return {{"predecoded", predecoded}, {"baseline", baseline}, {"speedup", speedup}};
}

PipelineTimes pipeline_time(double T_s, double T_l1, double T_pre, double T_l2, double T_al_reduced, double T_l,
                            double T_al) {
  for (double v : {T_s, T_l1, T_pre, T_l2, T_al_reduced, T_l, T_al})
    if (v < 0) throw std::invalid_argument("pipeline times must be nonnegative");
  PipelineTimes t;
  t.predecoded = T_s + T_l1 + T_pre + T_l2 + T_al_reduced;
  t.baseline = T_s + T_l + T_al;
  t.speedup = t.predecoded < t.baseline;
  return t;
}

double crossing_point(const std::vector<LerPoint>& data, int d_a, int d_b) {
  std::map<double, std::pair<double, double>> by_p;
  std::map<double, int> seen;
  for (const auto& x : data) {
    if (x.d == d_a) by_p[x.p].first = x.ler, seen[x.p] |= 1;
    if (x.d == d_b) by_p[x.p].second = x.ler, seen[x.p] |= 2;
  }
  std::vector<std::pair<double, double>> diff;  // (p, ln L_a - ln L_b)
  for (const auto& [p, l] : by_p)
    if (seen[p] == 3 && l.first > 0 && l.second > 0) diff.push_back({p, std::log(l.first) - std::log(l.second)});
  for (std::size_t i = 0; i + 1 < diff.size(); ++i) {
    const auto [p0, f0] = diff[i];
    const auto [p1, f1] = diff[i + 1];
    if (f0 == 0) return p0;
    if ((f0 > 0) != (f1 > 0)) return p0 + (p1 - p0) * f0 / (f0 - f1);
  }
  if (!diff.empty() && diff.back().second == 0) return diff.back().first;
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace predec
