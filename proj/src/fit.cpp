#include "predec/fit.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace predec {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

double BoundedLogspace::forward(double z) const {
  const double a = std::log(lower()), b = std::log(upper());
  return std::exp(a + (b - a) * sigmoid(z));
}

double BoundedLogspace::derivative(double z) const {
  const double a = std::log(lower()), b = std::log(upper());
  const double s = sigmoid(z);
  return forward(z) * (b - a) * s * (1 - s);
}

double BoundedLogspace::inverse(double p) const {
  if (!(p > lower() && p < upper())) throw std::domain_error("probability outside the bounded map image");
  const double a = std::log(lower()), b = std::log(upper());
  const double s = (std::log(p) - a) / (b - a);
  return std::log(s / (1 - s));
}

double BoundedLogspace::weight(double p) const {
  const double p0 = std::sqrt(p_min * p_max);
  const double q = std::max(p, lower());
  return (p0 / q) * (p0 / q);
}

ParamVector BoundedLogspace::map(const LogitVector& z) const {
  ParamVector p{};
  for (int i = 0; i < kNumNoiseParams; ++i) p[i] = forward(z[i]);
  return p;
}

LogitVector BoundedLogspace::unmap(const ParamVector& p) const {
  LogitVector z{};
  for (int i = 0; i < kNumNoiseParams; ++i) z[i] = inverse(std::clamp(p[i], lower() * (1 + 1e-9), upper() * (1 - 1e-9)));
  return z;
}

void FitTarget::validate() const {
  if (edges.empty()) throw std::invalid_argument("fit target has no edge types");
  for (const auto& e : edges) {
    if (!(e.count >= 1)) throw std::invalid_argument("edge type " + e.tag + " has count < 1");
    if (!(e.target >= 0 && e.target <= 0.5)) throw std::invalid_argument("edge type " + e.tag + " target outside [0, 0.5]");
  }
  for (const auto& h : hyper) {
    if (!(h.count >= 1) || h.exprs.empty()) throw std::invalid_argument("empty hyperedge composition");
    if (!(h.target >= 0 && h.target <= 0.5)) throw std::invalid_argument("hyperedge target outside [0, 0.5]");
  }
}

nlohmann::json FitTarget::to_json() const {
  nlohmann::json je = nlohmann::json::array(), jh = nlohmann::json::array();
  for (const auto& e : edges)
    je.push_back({{"kind", std::string(1, basis_char(e.kind))}, {"tag", e.tag}, {"target", e.target}, {"count", e.count}});
  for (const auto& h : hyper)
    jh.push_back({{"x", h.x_tag}, {"z", h.z_tag}, {"target", h.target}, {"count", h.count}});
  return {{"d", d}, {"shots", shots}, {"clamped", clamped_estimates}, {"edges", je}, {"hyper", jh}};
}

double pair_inversion(double xi, double xj, double xij, bool* clamped) {
  const double den = 1 - 2 * xi - 2 * xj + 4 * xij;
  const double disc = den > 0 ? 1 - 4 * (xij - xi * xj) / den : -1;
  if (disc < 0) {
    if (clamped) *clamped = true;
    return 0;
  }
  return std::max(0.0, 0.5 - 0.5 * std::sqrt(disc));
}

EdgeStatistics::EdgeStatistics(const MatchingGraph& g, const std::vector<int>& window_nodes)
    : g_(&g), window_(window_nodes) {
  const int n = g.num_nodes(), bnd = g.boundary();
  std::vector<std::uint8_t> in_window(n, 0);
  for (int v : window_) in_window.at(v) = 1;
  nbr_.assign(n, {});
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    if (e.b == bnd || !(in_window[e.a] || in_window[e.b])) continue;
    nbr_[e.a].push_back({e.b, static_cast<int>(tracked_.size())});
    tracked_.push_back(static_cast<int>(i));
  }
  node_count_.assign(n, 0);
  pair_count_.assign(tracked_.size(), 0);
  mark_.assign(n, 0);
}

void EdgeStatistics::add(const std::vector<int>& detections) {
  for (int v : detections) {
    mark_[v] = 1;
    ++node_count_[v];
  }
  for (int v : detections)
    for (auto [u, slot] : nbr_[v])
      if (mark_[u]) ++pair_count_[slot];
  for (int v : detections) mark_[v] = 0;
  ++shots_;
}

void EdgeStatistics::merge(const EdgeStatistics& o) {
  if (o.g_ != g_ || o.tracked_ != tracked_) throw std::invalid_argument("merging statistics of different layouts");
  for (std::size_t i = 0; i < node_count_.size(); ++i) node_count_[i] += o.node_count_[i];
  for (std::size_t i = 0; i < pair_count_.size(); ++i) pair_count_[i] += o.pair_count_[i];
  shots_ += o.shots_;
}

std::vector<double> EdgeStatistics::estimate(int* clamped) const {
  const auto& g = *g_;
  std::vector<double> p(g.edges.size(), std::numeric_limits<double>::quiet_NaN());
  if (shots_ == 0) return p;
  const double N = static_cast<double>(shots_);
  int bad = 0;
  for (std::size_t s = 0; s < tracked_.size(); ++s) {
    const auto& e = g.edges[tracked_[s]];
    bool c = false;
    p[tracked_[s]] = pair_inversion(node_count_[e.a] / N, node_count_[e.b] / N, pair_count_[s] / N, &c);
    bad += c;
  }
  const int bnd = g.boundary();
  for (int v : window_) {
    const int be = g.find_edge(v, bnd);
    if (be < 0) continue;
    double prod = 1;
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
      const auto& e = g.edges[i];
      if (static_cast<int>(i) == be || (e.a != v && e.b != v)) continue;
      prod *= 1 - 2 * p[i];
    }
    const double q = (1 - 2 * node_count_[v] / N) / prod;
    p[be] = std::clamp(0.5 - 0.5 * q, 0.0, 0.5);
  }
  if (clamped) *clamped += bad;
  return p;
}

std::vector<int> window_nodes(const MatchingGraph& g, int r0) {
  if (r0 < 1 || r0 + 1 >= g.d_m - 1) throw std::invalid_argument("window must avoid the first and last rounds");
  std::vector<int> v;
  for (int r = r0; r <= r0 + 1; ++r)
    for (int s = 0; s < g.K; ++s) v.push_back(r * g.K + s);
  return v;
}

FitTarget targets_from_statistics(const GraphPair& gp, const EdgeStatistics& sx, const EdgeStatistics& sz, int r0) {
  FitTarget t;
  t.d = gp.x.d;
  t.shots = sx.shots();
  for (Basis kind : {Basis::X, Basis::Z}) {
    const MatchingGraph& g = gp.of(kind);
    const TypeCatalog& cat = type_catalog(g.d, kind);
    const auto est = (kind == Basis::X ? sx : sz).estimate(&t.clamped_estimates);
    auto in_window = [&](int v) { return v == g.boundary() || (v / g.K >= r0 && v / g.K <= r0 + 1); };
    std::map<std::string, std::pair<double, int>> acc;
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
      const auto& e = g.edges[i];
      if (!in_window(e.a) || !in_window(e.b) || !cat.exprs.count(e.tag) || std::isnan(est[i])) continue;
      acc[e.tag].first += est[i];
      acc[e.tag].second += 1;
    }
    for (const auto& [tag, expr] : cat.exprs) {
      auto it = acc.find(tag);
      if (it == acc.end()) continue;
      t.edges.push_back({kind, tag, it->second.first / it->second.second, static_cast<double>(it->second.second), expr});
    }
  }
  return t;
}

FitTarget estimate_edge_frequencies(const std::vector<DetectorShot>& shots, const GraphPair& gp, int r0) {
  EdgeStatistics sx(gp.x, window_nodes(gp.x, r0)), sz(gp.z, window_nodes(gp.z, r0));
  for (const auto& s : shots) {
    sx.add(s.det_x);
    sz.add(s.det_z);
  }
  return targets_from_statistics(gp, sx, sz, r0);
}

FitTarget estimate_from_simulation(const Simulator& sim, const GraphPair& gp, std::int64_t shots,
                                   std::uint64_t seed, int threads, int r0) {
  if (sim.d_m() < 4) throw std::invalid_argument("noise estimation needs d_m >= 4");
  if (shots < 10000) throw std::invalid_argument("noise estimation needs at least 1e4 shots");
  const auto wx = window_nodes(gp.x, r0), wz = window_nodes(gp.z, r0);
  const int workers = std::max(1, threads);
  auto work = [&](int w) {
    std::pair<EdgeStatistics, EdgeStatistics> st{EdgeStatistics(gp.x, wx), EdgeStatistics(gp.z, wz)};
    const std::int64_t lo = shots * w / workers, hi = shots * (w + 1) / workers;
    for (std::int64_t i = lo; i < hi; ++i) {
      Rng rng = make_rng(seed, static_cast<std::uint64_t>(i));
      const DetectorShot s = sim.sample_detectors(rng);
      st.first.add(s.det_x);
      st.second.add(s.det_z);
    }
    return st;
  };
  std::vector<std::future<std::pair<EdgeStatistics, EdgeStatistics>>> fs;
  for (int w = 1; w < workers; ++w) fs.push_back(std::async(std::launch::async, work, w));
  auto total = work(0);
  for (auto& f : fs) {
    auto part = f.get();
    total.first.merge(part.first);
    total.second.merge(part.second);
  }
  return targets_from_statistics(gp, total.first, total.second, r0);
}

FitTarget synthetic_targets(int d, const NoiseParams& truth, bool with_hyper) {
  FitTarget t;
  t.d = d;
  const auto pv = truth.to_vector();
  for (Basis kind : {Basis::X, Basis::Z}) {
    const TypeCatalog& cat = type_catalog(d, kind);
    for (const auto& [tag, expr] : cat.exprs)
      t.edges.push_back({kind, tag, expr.evaluate(pv), static_cast<double>(cat.counts.at(tag)), expr});
  }
  if (with_hyper) {
    const TypeCatalog& cat = type_catalog(d, Basis::X);
    for (const auto& [tags, exprs] : cat.composition_exprs) {
      double m = 0;
      for (const auto& e : exprs) m += e.evaluate(pv);
      t.hyper.push_back({tags.first, tags.second, m / exprs.size(), static_cast<double>(exprs.size()), exprs});
    }
  }
  return t;
}

nlohmann::json FitConfig::to_json() const {
  return {{"p_min", map.p_min}, {"p_max", map.p_max}, {"steps", steps}, {"lr", lr}, {"lr_final", lr_final},
          {"beta1", beta1}, {"beta2", beta2}, {"use_hyper", use_hyper}, {"variance_weight", variance_weight},
          {"log_every", log_every}};
}

FitConfig FitConfig::from_json(const nlohmann::json& j) {
  FitConfig c;
  c.map.p_min = j.value("p_min", c.map.p_min);
  c.map.p_max = j.value("p_max", c.map.p_max);
  c.steps = j.value("steps", c.steps);
  c.lr = j.value("lr", c.lr);
  c.lr_final = j.value("lr_final", c.lr_final);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.use_hyper = j.value("use_hyper", c.use_hyper);
  c.variance_weight = j.value("variance_weight", c.variance_weight);
  c.log_every = j.value("log_every", c.log_every);
  if (!(c.map.p_min > 0 && c.map.p_max > c.map.p_min)) throw std::invalid_argument("need 0 < p_min < p_max");
  if (c.steps < 1) throw std::invalid_argument("steps must be positive");
  return c;
}

LossValue fit_loss(const ParamVector& p, const FitTarget& t, const FitConfig& cfg) {
  LossValue out;
  double csum = 0;
  for (const auto& e : t.edges) csum += e.count;
  for (const auto& e : t.edges) {
    const double w = e.count / csum * (cfg.variance_weight ? cfg.map.weight(e.target) : 1.0);
    const double r = e.expr.evaluate(p) - e.target;
    out.edge += w * r * r;
    const auto g = e.expr.gradient(p);
    for (int i = 0; i < kNumNoiseParams; ++i) out.grad[i] += 2 * w * r * g[i];
  }
  if (cfg.use_hyper && !t.hyper.empty()) {
    double hsum = 0;
    for (const auto& h : t.hyper) hsum += h.count;
    for (const auto& h : t.hyper) {
      const double w = h.count / hsum * (cfg.variance_weight ? cfg.map.weight(h.target) : 1.0);
      const double inv = 1.0 / h.exprs.size();
      double m = 0;
      ParamVector gm{};
      for (const auto& e : h.exprs) {
        m += inv * e.evaluate(p);
        const auto g = e.gradient(p);
        for (int i = 0; i < kNumNoiseParams; ++i) gm[i] += inv * g[i];
      }
      const double r = m - h.target;
      out.hyper += w * r * r;
      for (int i = 0; i < kNumNoiseParams; ++i) out.grad[i] += 2 * w * r * gm[i];
    }
  }
  out.total = out.edge + out.hyper;
  return out;
}

LogitVector initial_logits(const BoundedLogspace& map, double p) {
  LogitVector z;
  z.fill(map.inverse(p));
  return z;
}

FitResult fit(const FitTarget& t, const LogitVector& init, const FitConfig& cfg, const FitLogFn& log) {
  t.validate();
  LogitVector z = init, m{}, v{};
  FitResult best;
  best.loss = std::numeric_limits<double>::infinity();
  for (int step = 0; step <= cfg.steps; ++step) {
    const ParamVector p = cfg.map.map(z);
    const LossValue L = fit_loss(p, t, cfg);
    if (!std::isfinite(L.total)) throw std::runtime_error("non-finite fit loss at step " + std::to_string(step));
    best.history.push_back(L.total);
    if (L.total < best.loss) {
      best.loss = L.total;
      best.z = z;
      best.best_step = step;
    }
    if (log && cfg.log_every > 0 && step % cfg.log_every == 0) log(step, L);
    if (step == cfg.steps) break;
    const double frac = static_cast<double>(step) / cfg.steps;
    const double lr = cfg.lr_final + 0.5 * (cfg.lr - cfg.lr_final) * (1 + std::cos(std::numbers::pi * frac));
    const double b1t = 1 - std::pow(cfg.beta1, step + 1), b2t = 1 - std::pow(cfg.beta2, step + 1);
    for (int i = 0; i < kNumNoiseParams; ++i) {
      const double g = L.grad[i] * cfg.map.derivative(z[i]);
      m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g * g;
      const double vh = v[i] / b2t;
      if (vh > 0) z[i] -= lr * (m[i] / b1t) / std::sqrt(vh);
    }
  }
  best.params = NoiseParams::from_vector(cfg.map.map(best.z));
  return best;
}

nlohmann::json FitResult::report(const FitTarget& t, const FitConfig& cfg) const {
  const auto pv = params.to_vector();
  nlohmann::json res = nlohmann::json::array();
  for (const auto& e : t.edges) {
    const double f = e.expr.evaluate(pv);
    res.push_back({{"kind", std::string(1, basis_char(e.kind))},
                   {"tag", e.tag},
                   {"target", e.target},
                   {"fitted", f},
                   {"rel_residual", e.target > 0 ? (f - e.target) / e.target : f}});
  }
  std::vector<double> curve;
  const std::size_t stride = std::max<std::size_t>(1, history.size() / 200);
  for (std::size_t i = 0; i < history.size(); i += stride) curve.push_back(history[i]);
  return {{"config", cfg.to_json()}, {"targets", t.to_json()}, {"params", params.to_json()}, {"loss", loss},
          {"best_step", best_step}, {"residuals", res}, {"loss_curve", curve}, {"loss_curve_stride", stride}};
}

}  // namespace predec
