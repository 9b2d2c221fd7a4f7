// predec: command line front end.
//
// Every subcommand reads an optional JSON config (--config) and then applies
// flags given on the command line on top of it.

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "predec/bench.hpp"
#include "predec/decode.hpp"
#include "predec/encode.hpp"
#include "predec/fit.hpp"
#include "predec/graph.hpp"
#include "predec/nn.hpp"
#include "predec/sim.hpp"

using namespace predec;
using nlohmann::json;

namespace {

// Flag values are kept as text until the config file has been merged in.
class Options {
 public:
  explicit Options(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_, "JSON config file");
  }

  void add(const std::string& key, json def, const std::string& help) {
    defaults_[key] = std::move(def);
    std::string flag = "--" + key;
    for (auto& ch : flag)
      if (ch == '_') ch = '-';
    opts_[key] = app_->add_option(flag, text_[key], help);
  }

  void add_flag(const std::string& key, const std::string& help) {
    defaults_[key] = false;
    std::string flag = "--" + key;
    for (auto& ch : flag)
      if (ch == '_') ch = '-';
    opts_[key] = app_->add_flag(flag, help);
  }

  void stochastic() {
    add("seed", 1, "RNG seed");
    add("shots", 10000, "number of shots");
    add("threads", 1, "worker threads");
  }

  json resolve() const {
    json out = defaults_;
    if (!config_path_.empty()) {
      std::ifstream is(config_path_);
      if (!is) throw std::runtime_error("cannot open config " + config_path_);
      const json file = json::parse(is);
      for (auto it = file.begin(); it != file.end(); ++it) out[it.key()] = it.value();
    }
    for (const auto& [key, opt] : opts_) {
      if (opt->count() == 0) continue;
      auto t = text_.find(key);
      if (t == text_.end()) {
        out[key] = true;
        continue;
      }
      out[key] = parse_value(t->second, defaults_.at(key));
    }
    return out;
  }

 private:
  static json parse_value(const std::string& s, const json& def) {
    if (def.is_string()) return s;
    if (def.is_array()) {
      json arr = json::array();
      std::stringstream ss(s);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        const json v = json::parse(item, nullptr, false);
        arr.push_back(v.is_discarded() ? json(item) : v);
      }
      return arr;
    }
    const json v = json::parse(s, nullptr, false);
    if (v.is_discarded()) throw std::runtime_error("bad value '" + s + "'");
    return v;
  }

  CLI::App* app_;
  std::string config_path_;
  json defaults_ = json::object();
  std::map<std::string, std::string> text_;
  std::map<std::string, CLI::Option*> opts_;
};

NoiseParams noise_from(const json& c) {
  if (c.contains("noise_file") && !c.at("noise_file").get<std::string>().empty()) {
    std::ifstream is(c.at("noise_file").get<std::string>());
    if (!is) throw std::runtime_error("cannot open noise file");
    json j = json::parse(is);
    return NoiseParams::from_json(j.contains("params") ? j.at("params") : j);
  }
  return depolarizing_from_base(c.at("p").get<double>());
}

void add_geometry(Options& o) {
  o.add("d", 5, "code distance");
  o.add("d_m", 0, "layers including readout (default d)");
  o.add("basis", "Z", "memory basis X|Z");
  o.add("p", 0.006, "depolarizing base rate");
  o.add("noise_file", "", "NoiseParams JSON (overrides --p)");
}

int layers(const json& c) {
  const int dm = c.at("d_m").get<int>();
  return dm > 0 ? dm : c.at("d").get<int>();
}

void log_line(const json& j) { std::cerr << j.dump() << std::endl; }

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
  if (!os) throw std::runtime_error("cannot write " + path);
  return os;
}

std::vector<ShotRecord> read_shots(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open shots file " + path);
  return read_shots_binary(is);
}

// Per-worker contiguous shard of stream-seeded shots.
template <class Fn>
void for_shots(std::int64_t shots, int threads, Fn&& fn) {
  std::vector<std::thread> ts;
  for (int w = 0; w < threads; ++w)
    ts.emplace_back([&, w] {
      const std::int64_t lo = shots * w / threads, hi = shots * (w + 1) / threads;
      for (std::int64_t i = lo; i < hi; ++i) fn(i);
    });
  for (auto& t : ts) t.join();
}

int cmd_simulate(const json& c) {
  const LatticeGeometry geom(c.at("d").get<int>());
  const NoiseParams noise = noise_from(c);
  const Simulator sim(geom, noise, layers(c), parse_basis(c.at("basis")));
  const auto shots = c.at("shots").get<std::int64_t>();
  const auto seed = c.at("seed").get<std::uint64_t>();
  std::vector<ShotRecord> recs(shots);
  for_shots(shots, c.at("threads").get<int>(), [&](std::int64_t i) {
    Rng rng = make_rng(seed, i);
    recs[i] = sim.simulate_shot(rng);
  });
  const std::string out = c.at("out");
  if (c.at("format") == "jsonl") {
    auto os = open_out(out);
    for (const auto& r : recs) os << r.to_json().dump() << "\n";
  } else {
    auto os = open_out(out, true);
    write_shots_binary(os, recs);
  }
  double dens = 0, fx = 0, fz = 0;
  for (const auto& r : recs) {
    dens += syndrome_density(r);
    fx += r.logical_flip_x;
    fz += r.logical_flip_z;
  }
  log_line({{"event", "simulate"}, {"shots", shots}, {"density", dens / shots}, {"flip_x", fx / shots},
            {"flip_z", fz / shots}, {"out", out}});
  return 0;
}

int cmd_gen_data(const json& c) {
  const int d = c.at("d").get<int>(), dm = layers(c);
  const Basis basis = parse_basis(c.at("basis"));
  const LatticeGeometry geom(d);
  const auto shots = c.at("shots").get<std::int64_t>();
  const auto seed = c.at("seed").get<std::uint64_t>();
  const int groups = std::max(1, c.at("noise_draws").get<int>());
  const bool canonical = c.at("canonical").get<bool>();
  std::vector<ShotRecord> recs(shots);
  std::vector<json> draws;
  for (int gi = 0; gi < groups; ++gi) {
    NoiseParams noise = noise_from(c);
    if (c.at("hierarchical").get<bool>()) {
      Rng nr = make_rng(seed, 0xD5A7000ull + gi);
      const double lo = c.at("p_base_min").get<double>(), hi = c.at("p_base_max").get<double>();
      noise = sample_hierarchical(lo + (hi - lo) * uniform01(nr), nr);
    }
    draws.push_back(noise.to_json());
    const Simulator sim(geom, noise, dm, basis);
    const std::int64_t lo = shots * gi / groups, hi = shots * (gi + 1) / groups;
    for_shots(hi - lo, c.at("threads").get<int>(), [&](std::int64_t k) {
      const std::int64_t i = lo + k;
      Rng rng = make_rng(seed, i);
      ShotRecord r = sim.simulate_shot(rng);
      if (canonical) {
        LabelVolume v = label_volume_from(r);
        canonicalize(v, geom);
        r.labels_space_z = v.z;
        r.labels_space_x = v.x;
        r.labels_time_x = v.time_x;
        r.labels_time_z = v.time_z;
      }
      recs[i] = std::move(r);
    });
  }
  const std::string out = c.at("out");
  {
    auto os = open_out(out, true);
    write_shots_binary(os, recs);
  }
  {
    auto os = open_out(out + ".json");
    os << json{{"d", d}, {"d_m", dm}, {"basis", std::string(1, basis_char(basis))}, {"shots", shots},
               {"seed", seed}, {"canonical", canonical}, {"noise", draws}}
              .dump(2)
       << "\n";
  }
  log_line({{"event", "gen-data"}, {"shots", shots}, {"out", out}, {"canonical", canonical}});
  return 0;
}

int cmd_train(const json& c) {
  const auto recs = read_shots(c.at("data"));
  if (recs.empty()) throw std::runtime_error("empty training set");
  const LatticeGeometry geom(recs[0].D);
  json tj = TrainConfig::from_json(c.value("train", json::object())).to_json();
  for (const char* k : {"steps", "batch", "lr", "seed", "threads", "dropout", "ema_rate", "warmup"})
    if (c.contains(k) && !c.at(k).is_null()) tj[k] = c.at(k);
  const TrainConfig tc = TrainConfig::from_json(tj);
  Conv3dSpec spec = c.contains("spec") && c.at("spec").is_object() ? Conv3dSpec::from_json(c.at("spec"))
                                                                     : Conv3dSpec::model1(c.at("width").get<int>());
  auto sample = [&](std::size_t i, TensorVolume& x, TensorVolume& y) {
    x = build_input(recs[i], geom);
    y = build_labels(recs[i], geom, false);
  };
  auto logger = [](std::int64_t step, double lr, double loss) {
    log_line({{"event", "train"}, {"step", step}, {"lr", lr}, {"loss", loss}});
  };
  ParamStore store;
  if (!c.at("resume").get<std::string>().empty()) {
    store = ParamStore::load(c.at("resume"));
    train_continue(store, recs.size(), sample, tc, logger);
  } else {
    store = train(spec, recs.size(), sample, tc, logger);
  }
  store.save(c.at("out"), {{"train", tc.to_json()}, {"d", recs[0].D}, {"d_m", recs[0].d_m}});
  log_line({{"event", "saved"}, {"out", c.at("out")}, {"params", store.num_params()},
            {"receptive_field", receptive_field(store.spec)}});
  return 0;
}

GraphPair graphs_from(const json& c) {
  const LatticeGeometry geom(c.at("d").get<int>());
  return build_graphs(geom, noise_from(c), layers(c), parse_basis(c.at("basis")));
}

int cmd_build_graph(const json& c) {
  if (c.at("catalog").get<bool>()) {
    const int d = c.at("d").get<int>();
    std::cout << json{{"X", type_catalog(d, Basis::X).to_json()}, {"Z", type_catalog(d, Basis::Z).to_json()}}.dump(2)
              << "\n";
    return 0;
  }
  const GraphPair gp = graphs_from(c);
  const std::string out = c.at("out"), kind = c.at("kind");
  for (Basis k : {Basis::X, Basis::Z}) {
    if (kind != "both" && kind != std::string(1, basis_char(k))) continue;
    const std::string path = kind == "both" ? out + "." + std::string(1, basis_char(k)) + ".dem" : out;
    auto os = open_out(path);
    os << export_dem(gp.of(k));
    log_line({{"event", "graph"}, {"kind", std::string(1, basis_char(k))}, {"edges", gp.of(k).edges.size()},
              {"hyperedges", gp.of(k).hyperedges.size()}, {"out", path}});
  }
  return 0;
}

int cmd_decode(const json& c) {
  const GraphPair gp = graphs_from(c);
  const LatticeGeometry geom(c.at("d").get<int>());
  const Basis basis = parse_basis(c.at("basis"));
  const bool correlated = c.at("mode") == "correlated";
  if (!correlated && c.at("mode") != "mwpm") throw std::runtime_error("decode mode must be mwpm or correlated");
  std::vector<DetectorShot> shots;
  if (!c.at("input").get<std::string>().empty()) {
    for (const auto& r : read_shots(c.at("input"))) shots.push_back(detector_shot_from(r, geom));
  } else {
    const Simulator sim(geom, noise_from(c), layers(c), basis);
    shots.resize(c.at("shots").get<std::int64_t>());
    const auto seed = c.at("seed").get<std::uint64_t>();
    for_shots(shots.size(), c.at("threads").get<int>(), [&](std::int64_t i) {
      Rng rng = make_rng(seed, i);
      shots[i] = sim.sample_detectors(rng);
    });
  }
  std::vector<json> lines(shots.size());
  const int threads = c.at("threads").get<int>();
  std::vector<std::thread> ts;
  for (int w = 0; w < threads; ++w)
    ts.emplace_back([&, w] {
      const Matcher mx(gp.x), mz(gp.z);
      const std::size_t lo = shots.size() * w / threads, hi = shots.size() * (w + 1) / threads;
      for (std::size_t i = lo; i < hi; ++i) {
        const auto& s = shots[i];
        DecodeResult rx, rz;
        if (correlated) {
          std::tie(rx, rz) = correlated_decode(mx, mz, s.det_x, s.det_z);
        } else {
          rx = mx.mwpm(s.det_x);
          rz = mz.mwpm(s.det_z);
        }
        const DecodeResult& r = basis == Basis::Z ? rz : rx;
        const int truth = basis == Basis::Z ? s.flip_x : s.flip_z;
        lines[i] = {{"shot", i}, {"detections", basis == Basis::Z ? s.det_z.size() : s.det_x.size()},
                    {"obs", r.obs}, {"truth", truth}, {"fail", r.obs != truth}, {"weight", r.weight},
                    {"matched", r.matched}, {"passes", r.passes}};
      }
    });
  for (auto& t : ts) t.join();
  auto os = open_out(c.at("out"));
  std::int64_t fails = 0;
  for (const auto& l : lines) {
    os << l.dump() << "\n";
    fails += l.at("fail").get<bool>();
  }
  log_line({{"event", "decode"}, {"shots", shots.size()}, {"failures", fails},
            {"ler", shots.empty() ? 0.0 : double(fails) / shots.size()}});
  return 0;
}

int cmd_fit_noise(const json& c) {
  const int d = c.at("d").get<int>();
  const NoiseParams truth = noise_from(c);
  FitConfig fc = FitConfig::from_json(c.value("fit", json::object()));
  fc.use_hyper = c.at("hyper").get<bool>();
  FitTarget targets;
  if (c.at("synthetic").get<bool>()) {
    targets = synthetic_targets(d, truth, fc.use_hyper);
  } else {
    const int dm = std::max(4, c.at("d_m").get<int>() > 0 ? c.at("d_m").get<int>() : 6);
    const LatticeGeometry geom(d);
    const Basis basis = parse_basis(c.at("basis"));
    const Simulator sim(geom, truth, dm, basis);
    const GraphPair gp = build_graphs(geom, truth, dm, basis);
    targets = estimate_from_simulation(sim, gp, c.at("shots").get<std::int64_t>(), c.at("seed").get<std::uint64_t>(),
                                       c.at("threads").get<int>(), 2);
    fc.use_hyper = false;
  }
  const FitResult r = fit(targets, initial_logits(fc.map, c.at("init_p").get<double>()), fc,
                          [](int step, const LossValue& L) {
                            log_line({{"event", "fit"}, {"step", step}, {"loss", L.total}, {"edge", L.edge},
                                      {"hyper", L.hyper}});
                          });
  json rep = r.report(targets, fc);
  rep["truth"] = truth.to_json();
  auto os = open_out(c.at("out"));
  os << rep.dump(2) << "\n";
  log_line({{"event", "fit-done"}, {"loss", r.loss}, {"best_step", r.best_step}, {"out", c.at("out")}});
  return 0;
}

int cmd_bench_ler(const json& c) {
  const auto ds = c.at("distances").get<std::vector<int>>();
  const auto ps = c.at("ps").get<std::vector<double>>();
  const auto modes = c.at("modes").get<std::vector<std::string>>();
  auto csv = open_out(c.at("out"));
  csv << LerRecord::csv_header() << "\n";
  std::ofstream jl;
  if (!c.at("log").get<std::string>().empty()) jl = open_out(c.at("log"));
  for (int d : ds)
    for (double p : ps)
      for (const auto& m : modes) {
        ExperimentConfig ec;
        ec.d = d;
        ec.d_m = c.at("d_m").get<int>() > 0 ? c.at("d_m").get<int>() : d;
        ec.basis = parse_basis(c.at("basis"));
        ec.p = p;
        ec.noise = depolarizing_from_base(p);
        ec.shots = c.at("shots").get<std::int64_t>();
        ec.mode = parse_mode(m);
        ec.checkpoint = c.at("checkpoint");
        ec.seed = c.at("seed").get<std::uint64_t>();
        ec.threads = c.at("threads").get<int>();
        const LerRecord r = run_ler(ec);
        csv << r.csv_row() << std::endl;
        if (jl) jl << r.to_json().dump() << std::endl;
        log_line({{"event", "ler"}, {"d", d}, {"p", p}, {"mode", m}, {"ler", r.ler_block}, {"sdr", r.sdr}});
      }
  return 0;
}

double num(const json& c, const char* k) { return c.at(k).get<double>(); }

int cmd_calc(const json& c) {
  const std::string what = c.at("what");
  const LerFit fit{c.at("c1").get<double>(), c.at("c2").get<double>(), {}};
  json out;
  if (what == "pl") {
    out = {{"p_L", fit(c.at("p").get<double>(), c.at("d").get<int>())}};
  } else if (what == "budget") {
    const double p = num(c, "p"), delta = num(c, "delta");
    const int d = distance_for_budget(p, delta, fit);
    out = {{"d", d}, {"p_L", fit(p, d)}, {"alpha_next", alpha_for_distance(p, d, delta, fit)}};
  } else if (what == "backlog") {
    json rows = json::array();
    for (int j = 1; j <= c.at("j").get<int>(); ++j)
      rows.push_back({{"j", j}, {"wait", backlog_wait(num(c, "c"), num(c, "r"), num(c, "T_s"), num(c, "T_l"), j)}});
    out = {{"backlog", rows}};
  } else if (what == "npar") {
    const double T = num(c, "T_dec"), tl = num(c, "T_l"), ts = num(c, "T_s");
    const int nc = c.at("n_com").get<int>(), nw = c.at("n_w").get<int>();
    out = {{"bound", npar_bound(T, tl, ts, nc, nw)}, {"N_par", npar_required(T, tl, ts, nc, nw)}};
  } else if (what == "pipeline") {
    out = pipeline_time(num(c, "T_s"), num(c, "T_l1"), num(c, "T_pre"), num(c, "T_l2"), num(c, "T_al_reduced"),
                        num(c, "T_l"), num(c, "T_al"))
              .to_json();
  } else if (what == "fit-pl") {
    std::ifstream is(c.at("input").get<std::string>());
    if (!is) throw std::runtime_error("cannot open LER csv");
    std::string line;
    std::getline(is, line);
    std::vector<LerPoint> pts;
    while (std::getline(is, line)) {
      std::stringstream ss(line);
      std::vector<std::string> f;
      std::string x;
      while (std::getline(ss, x, ',')) f.push_back(x);
      if (f.size() < 8) continue;
      pts.push_back({std::stod(f[1]), std::stoi(f[0]), std::stod(f[7])});
    }
    out = fit_pl(pts).to_json();
  } else {
    throw std::runtime_error("calc: unknown quantity " + what);
  }
  std::cout << out.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surface-code pre-decoding toolkit"};
  app.require_subcommand(1);

  struct Cmd {
    CLI::App* app;
    std::unique_ptr<Options> opts;  // CLI11 binds into it, so it must not move
    int (*run)(const json&);
  };
  std::vector<Cmd> cmds;
  auto make = [&](const std::string& name, const std::string& help, int (*run)(const json&)) -> Options& {
    auto* sub = app.add_subcommand(name, help);
    cmds.push_back({sub, std::make_unique<Options>(sub), run});
    return *cmds.back().opts;
  };

  {
    auto& o = make("simulate", "sample labelled shots", cmd_simulate);
    add_geometry(o);
    o.stochastic();
    o.add("out", "shots.pdsh", "output file");
    o.add("format", "binary", "binary|jsonl");
  }
  {
    auto& o = make("gen-data", "generate training shots with (canonical) labels", cmd_gen_data);
    add_geometry(o);
    o.stochastic();
    o.add("out", "train.pdsh", "output file");
    o.add("canonical", true, "canonicalize labels");
    o.add_flag("hierarchical", "draw hierarchical noise per group");
    o.add("noise_draws", 1, "number of noise groups");
    o.add("p_base_min", 1e-3, "hierarchical base-rate range");
    o.add("p_base_max", 1e-2, "hierarchical base-rate range");
  }
  {
    auto& o = make("train", "train a pre-decoder", cmd_train);
    o.add("data", "train.pdsh", "shots file from gen-data");
    o.add("out", "model.pdck", "checkpoint path");
    o.add("width", 16, "hidden width of the Model-1 shape");
    o.add("resume", "", "continue from checkpoint");
    o.add("steps", nullptr, "optimizer steps");
    o.add("batch", nullptr, "batch size");
    o.add("lr", nullptr, "peak learning rate");
    o.add("dropout", nullptr, "dropout rate");
    o.add("ema_rate", nullptr, "shadow weight rate");
    o.add("warmup", nullptr, "warmup steps");
    o.add("seed", nullptr, "RNG seed");
    o.add("threads", nullptr, "worker threads");
  }
  {
    auto& o = make("build-graph", "build matching graphs and export them", cmd_build_graph);
    add_geometry(o);
    o.add("kind", "both", "X|Z|both");
    o.add("out", "graph", "output path (prefix for both)");
    o.add_flag("catalog", "print the bulk type catalog instead");
  }
  {
    auto& o = make("decode", "decode shots with MWPM", cmd_decode);
    add_geometry(o);
    o.stochastic();
    o.add("mode", "mwpm", "mwpm|correlated");
    o.add("input", "", "shots file (sampled when empty)");
    o.add("out", "decode.jsonl", "per-shot JSON lines");
  }
  {
    auto& o = make("fit-noise", "learn noise parameters from syndrome statistics", cmd_fit_noise);
    add_geometry(o);
    o.stochastic();
    o.add_flag("synthetic", "targets from formulas at the true parameters");
    o.add("hyper", true, "hyperedge loss (synthetic mode)");
    o.add("init_p", 1e-3, "initial probability of every parameter");
    o.add("out", "fit.json", "report path");
  }
  {
    auto& o = make("bench-ler", "Monte-Carlo logical error rates", cmd_bench_ler);
    o.stochastic();
    o.add("distances", json::array({3, 5, 7}), "comma list");
    o.add("ps", json::array({0.004, 0.006, 0.008, 0.01}), "comma list");
    o.add("modes", json::array({"mwpm"}), "comma list");
    o.add("d_m", 0, "layers (default d)");
    o.add("basis", "Z", "X|Z");
    o.add("checkpoint", "", "model for predec modes");
    o.add("out", "ler.csv", "CSV path");
    o.add("log", "", "JSON-lines log path");
  }
  {
    auto& o = make("calc", "analytic calculators", cmd_calc);
    o.add("what", "pl", "pl|budget|backlog|npar|pipeline|fit-pl");
    o.add("c1", 0.01938, "p_L model constant");
    o.add("c2", 116.95, "p_L model constant");
    o.add("p", 0.001, "physical error rate");
    o.add("d", 21, "distance");
    o.add("delta", 1e-10, "LER budget");
    o.add("c", 2.0, "decoder time per round");
    o.add("r", 5.0, "rounds per window");
    o.add("T_s", 1.0, "syndrome round time");
    o.add("T_l", 0.0, "link latency");
    o.add("j", 1, "windows");
    o.add("T_dec", 130.0, "decode time");
    o.add("n_com", 13, "commit rounds");
    o.add("n_w", 13, "buffer rounds");
    o.add("T_l1", 0.0, "link to pre-decoder");
    o.add("T_pre", 0.0, "pre-decoder time");
    o.add("T_l2", 0.0, "link to global decoder");
    o.add("T_al_reduced", 0.0, "global decode time after pre-decoding");
    o.add("T_al", 0.0, "global decode time without pre-decoding");
    o.add("input", "ler.csv", "bench-ler CSV for fit-pl");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    for (auto& c : cmds)
      if (c.app->parsed()) return c.run(c.opts->resolve());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
