#include "predec/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <numeric>
#include <stdexcept>

namespace predec {

namespace {

const char* act_name(Activation a) {
  switch (a) {
    case Activation::Gelu: return "gelu";
    case Activation::Relu: return "relu";
    default: return "none";
  }
}

Activation parse_act(const std::string& s) {
  if (s == "gelu") return Activation::Gelu;
  if (s == "relu") return Activation::Relu;
  if (s == "none") return Activation::None;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

double act_apply(Activation a, double x) {
  switch (a) {
    case Activation::Gelu: return gelu(x);
    case Activation::Relu: return x > 0 ? x : 0.0;
    default: return x;
  }
}

double act_grad(Activation a, double x) {
  switch (a) {
    case Activation::Gelu: return gelu_grad(x);
    case Activation::Relu: return x > 0 ? 1.0 : 0.0;
    default: return 1.0;
  }
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct Shape {
  int D, T, B;
  int V() const { return D * D * T; }
  int N() const { return V() * B; }
};

// Patch matrix: row (ci, dr, dc, dt), column = voxel of the batch.
void im2col(const RowMat& A, const Shape& s, int k, RowMat& col) {
  const int cin = static_cast<int>(A.rows());
  const int p = (k - 1) / 2, k3 = k * k * k, V = s.V();
  col.setZero(static_cast<Eigen::Index>(cin) * k3, s.N());
  for (int ci = 0; ci < cin; ++ci) {
    const double* src = A.row(ci).data();
    for (int o = 0; o < k3; ++o) {
      const int dr = o / (k * k) - p, dc = (o / k) % k - p, dt = o % k - p;
      double* dst = col.row(static_cast<Eigen::Index>(ci) * k3 + o).data();
      for (int b = 0; b < s.B; ++b) {
        const int base = b * V;
        for (int r = 0; r < s.D; ++r) {
          const int rr = r + dr;
          if (rr < 0 || rr >= s.D) continue;
          for (int c = 0; c < s.D; ++c) {
            const int cc = c + dc;
            if (cc < 0 || cc >= s.D) continue;
            const int t0 = std::max(0, -dt), t1 = std::min(s.T, s.T - dt);
            const int drow = base + (r * s.D + c) * s.T;
            const int srow = base + (rr * s.D + cc) * s.T + dt;
            for (int t = t0; t < t1; ++t) dst[drow + t] = src[srow + t];
          }
        }
      }
    }
  }
}

void col2im_add(const RowMat& col, const Shape& s, int k, RowMat& dA) {
  const int cin = static_cast<int>(dA.rows());
  const int p = (k - 1) / 2, k3 = k * k * k, V = s.V();
  for (int ci = 0; ci < cin; ++ci) {
    double* dst = dA.row(ci).data();
    for (int o = 0; o < k3; ++o) {
      const int dr = o / (k * k) - p, dc = (o / k) % k - p, dt = o % k - p;
      const double* src = col.row(static_cast<Eigen::Index>(ci) * k3 + o).data();
      for (int b = 0; b < s.B; ++b) {
        const int base = b * V;
        for (int r = 0; r < s.D; ++r) {
          const int rr = r + dr;
          if (rr < 0 || rr >= s.D) continue;
          for (int c = 0; c < s.D; ++c) {
            const int cc = c + dc;
            if (cc < 0 || cc >= s.D) continue;
            const int t0 = std::max(0, -dt), t1 = std::min(s.T, s.T - dt);
            const int drow = base + (r * s.D + c) * s.T;
            const int srow = base + (rr * s.D + cc) * s.T + dt;
            for (int t = t0; t < t1; ++t) dst[srow + t] += src[drow + t];
          }
        }
      }
    }
  }
}

struct Cache {
  std::vector<RowMat> col, Z, A, mask;
};

RowMat pack(const std::vector<const TensorVolume*>& xs, int channels, Shape& s) {
  s = {xs.front()->D, xs.front()->T, static_cast<int>(xs.size())};
  RowMat X(channels, s.N());
  for (int b = 0; b < s.B; ++b) {
    const TensorVolume& x = *xs[b];
    if (x.C != channels || x.D != s.D || x.T != s.T) throw std::invalid_argument("input dims mismatch");
    for (int c = 0; c < channels; ++c)
      std::copy_n(x.v.data() + static_cast<std::size_t>(c) * s.V(), s.V(), X.row(c).data() + b * s.V());
  }
  return X;
}

// Returns logits (4, N).
RowMat run_forward(const ParamStore& st, const RowMat& X, const Shape& s, Cache* cache, double dropout, Rng* rng) {
  const auto& layers = st.spec.layers;
  if (cache) {
    cache->col.resize(layers.size());
    cache->Z.resize(layers.size());
    cache->A.assign(layers.size() + 1, RowMat());
    cache->mask.assign(layers.size(), RowMat());
    cache->A[0] = X;
  }
  RowMat prev = X, col;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& L = layers[l];
    im2col(prev, s, L.kernel, col);
    RowMat Z = st.W[l] * col;
    Z.colwise() += st.b[l];
    RowMat A = Z.unaryExpr([&](double v) { return act_apply(L.act, v); });
    const bool last = l + 1 == layers.size();
    if (!last && dropout > 0.0) {
      RowMat m(A.rows(), A.cols());
      const double keep = 1.0 - dropout;
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform01(*rng) < keep ? 1.0 / keep : 0.0;
      A = A.cwiseProduct(m);
      if (cache) cache->mask[l] = std::move(m);
    }
    if (L.residual) A += prev;
    if (cache) {
      cache->col[l] = std::move(col);
      cache->Z[l] = std::move(Z);
      cache->A[l + 1] = A;
      col = RowMat();
    }
    prev = std::move(A);
  }
  return prev;
}

double logit_bce(double z, double y) { return std::max(z, 0.0) - y * z + std::log1p(std::exp(-std::abs(z))); }

}  // namespace

double gelu(double x) {
  const double c = std::sqrt(2.0 / M_PI);
  return 0.5 * x * (1.0 + std::tanh(c * (x + 0.044715 * x * x * x)));
}

double gelu_grad(double x) {
  const double c = std::sqrt(2.0 / M_PI);
  const double u = c * (x + 0.044715 * x * x * x);
  const double th = std::tanh(u);
  return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * c * (1.0 + 3.0 * 0.044715 * x * x);
}

void Conv3dSpec::validate() const {
  if (layers.empty()) throw std::invalid_argument("network needs at least one layer");
  if (layers.back().filters != 4) throw std::invalid_argument("final layer must have 4 filters");
  int cin = in_channels;
  for (const auto& L : layers) {
    if (L.filters < 1) throw std::invalid_argument("layer needs at least one filter");
    if (L.kernel < 1 || L.kernel % 2 == 0) throw std::invalid_argument("kernel size must be odd");
    if (L.residual && L.filters != cin) throw std::invalid_argument("residual layer needs equal widths");
    cin = L.filters;
  }
}

nlohmann::json Conv3dSpec::to_json() const {
  auto arr = nlohmann::json::array();
  for (const auto& L : layers)
    arr.push_back({{"filters", L.filters}, {"kernel", L.kernel}, {"activation", act_name(L.act)}, {"residual", L.residual}});
  return {{"in_channels", in_channels}, {"layers", arr}};
}

Conv3dSpec Conv3dSpec::from_json(const nlohmann::json& j) {
  Conv3dSpec s;
  s.in_channels = j.value("in_channels", 4);
  for (const auto& l : j.at("layers"))
    s.layers.push_back({l.at("filters").get<int>(), l.value("kernel", 3), parse_act(l.value("activation", "gelu")),
                        l.value("residual", false)});
  s.validate();
  return s;
}

Conv3dSpec Conv3dSpec::model1(int width, Activation act) {
  Conv3dSpec s;
  s.layers = {{width, 3, act, false}, {width, 3, act, false}, {width, 3, act, false}, {4, 3, Activation::None, false}};
  return s;
}

int receptive_field(const Conv3dSpec& spec) {
  int r = 1;
  for (const auto& L : spec.layers) r += L.kernel - 1;
  return r;
}

ParamStore ParamStore::zeros(const Conv3dSpec& spec) {
  spec.validate();
  ParamStore p;
  p.spec = spec;
  int cin = spec.in_channels;
  for (const auto& L : spec.layers) {
    const int fan_in = cin * L.kernel * L.kernel * L.kernel;
    p.W.push_back(RowMat::Zero(L.filters, fan_in));
    p.b.push_back(Eigen::VectorXd::Zero(L.filters));
    cin = L.filters;
  }
  p.mW = p.W;
  p.mb = p.b;
  p.emaW = p.W;
  p.emab = p.b;
  return p;
}

ParamStore ParamStore::init(const Conv3dSpec& spec, Rng& rng) {
  ParamStore p = zeros(spec);
  for (std::size_t l = 0; l < p.W.size(); ++l) {
    std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / static_cast<double>(p.W[l].cols())));
    for (Eigen::Index i = 0; i < p.W[l].size(); ++i) p.W[l].data()[i] = nd(rng);
  }
  p.emaW = p.W;
  return p;
}

std::size_t ParamStore::num_params() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < W.size(); ++l) n += W[l].size() + b[l].size();
  return n;
}

ParamStore ParamStore::ema_view() const {
  ParamStore p = *this;
  p.W = emaW;
  p.b = emab;
  return p;
}

void ParamStore::save(const std::string& path, const nlohmann::json& meta) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint " + path);
  nlohmann::json hdr = {{"spec", spec.to_json()}, {"meta", meta}};
  const std::string h = hdr.dump();
  os.write("PDCK", 4);
  const std::uint32_t ver = 1, len = static_cast<std::uint32_t>(h.size());
  os.write(reinterpret_cast<const char*>(&ver), 4);
  os.write(reinterpret_cast<const char*>(&len), 4);
  os.write(h.data(), len);
  auto put = [&](const double* p, Eigen::Index n) {
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  };
  for (auto* set : {&W, &mW, &emaW})
    for (const auto& m : *set) put(m.data(), m.size());
  for (auto* set : {&b, &mb, &emab})
    for (const auto& v : *set) put(v.data(), v.size());
  os.write(reinterpret_cast<const char*>(&step), sizeof step);
  std::ofstream js(path + ".json");
  js << hdr.dump(2) << "\n";
}

ParamStore ParamStore::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint " + path);
  char magic[4];
  std::uint32_t ver = 0, len = 0;
  is.read(magic, 4);
  is.read(reinterpret_cast<char*>(&ver), 4);
  is.read(reinterpret_cast<char*>(&len), 4);
  if (!is || std::string(magic, 4) != "PDCK" || ver != 1) throw std::runtime_error("not a checkpoint: " + path);
  std::string h(len, '\0');
  is.read(h.data(), len);
  ParamStore p = zeros(Conv3dSpec::from_json(nlohmann::json::parse(h).at("spec")));
  auto get = [&](double* d, Eigen::Index n) {
    if (!is.read(reinterpret_cast<char*>(d), static_cast<std::streamsize>(n * sizeof(double))))
      throw std::runtime_error("truncated checkpoint " + path);
  };
  for (auto* set : {&p.W, &p.mW, &p.emaW})
    for (auto& m : *set) get(m.data(), m.size());
  for (auto* set : {&p.b, &p.mb, &p.emab})
    for (auto& v : *set) get(v.data(), v.size());
  if (!is.read(reinterpret_cast<char*>(&p.step), sizeof p.step)) throw std::runtime_error("truncated checkpoint");
  return p;
}

TensorVolume forward(const ParamStore& store, const TensorVolume& input) {
  Shape s;
  const RowMat X = pack({&input}, store.spec.in_channels, s);
  const RowMat Z = run_forward(store, X, s, nullptr, 0.0, nullptr);
  TensorVolume out(4, s.D, s.T);
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < s.V(); ++i) {
      const double z = Z(c, i);
      if (!std::isfinite(z))
        throw std::runtime_error("non-finite network output at channel " + std::to_string(c) + ", voxel " +
                                 std::to_string(i));
      out.v[static_cast<std::size_t>(c) * s.V() + i] = sigmoid(z);
    }
  return out;
}

std::pair<double, TensorVolume> bce_loss(const TensorVolume& pred, const TensorVolume& target) {
  if (pred.C != target.C || pred.D != target.D || pred.T != target.T) throw std::invalid_argument("BCE dims mismatch");
  constexpr double eps = 1e-12;
  TensorVolume g(pred.C, pred.D, pred.T);
  double loss = 0;
  for (std::size_t i = 0; i < pred.v.size(); ++i) {
    const double p = std::clamp(pred.v[i], eps, 1.0 - eps);
    const double y = target.v[i];
    loss += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    g.v[i] = (p - y) / (p * (1.0 - p));
  }
  return {loss, g};
}

double loss_and_gradients(const ParamStore& st, const std::vector<const TensorVolume*>& inputs,
                          const std::vector<const TensorVolume*>& targets, Gradients& grads, double dropout, Rng* rng) {
  if (inputs.empty() || inputs.size() != targets.size()) throw std::invalid_argument("batch mismatch");
  if (dropout > 0.0 && !rng) throw std::invalid_argument("dropout needs an rng");
  Shape s;
  const RowMat X = pack(inputs, st.spec.in_channels, s);
  Shape ts;
  const RowMat Y = pack(targets, 4, ts);
  Cache cache;
  const RowMat out = run_forward(st, X, s, &cache, dropout, rng);
  double loss = 0;
  RowMat dA(out.rows(), out.cols());
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double z = out.data()[i], y = Y.data()[i];
    loss += logit_bce(z, y);
    dA.data()[i] = sigmoid(z) - y;
  }
  const auto& layers = st.spec.layers;
  grads.W.resize(layers.size());
  grads.b.resize(layers.size());
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    const auto& L = layers[l];
    RowMat dZ = dA;
    if (cache.mask[l].size()) dZ = dZ.cwiseProduct(cache.mask[l]);
    if (L.act != Activation::None) {
      const RowMat& Z = cache.Z[l];
      for (Eigen::Index i = 0; i < dZ.size(); ++i) dZ.data()[i] *= act_grad(L.act, Z.data()[i]);
    }
    grads.W[l].noalias() = dZ * cache.col[l].transpose();
    grads.b[l] = dZ.rowwise().sum();
    if (l == 0) break;
    RowMat dprev = L.residual ? dA : RowMat::Zero(cache.A[l].rows(), cache.A[l].cols());
    const RowMat dcol = st.W[l].transpose() * dZ;
    col2im_add(dcol, s, L.kernel, dprev);
    dA = std::move(dprev);
  }
  return loss;
}

nlohmann::json TrainConfig::to_json() const {
  return {{"steps", steps},     {"batch", batch},     {"lr", lr},
          {"weight_decay", weight_decay}, {"beta1", beta1}, {"beta2", beta2},
          {"warmup", warmup},   {"milestones", milestones}, {"gamma", gamma},
          {"dropout", dropout}, {"ema_rate", ema_rate}, {"seed", seed},
          {"threads", threads}, {"log_every", log_every}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.steps = j.value("steps", c.steps);
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.warmup = j.value("warmup", c.warmup);
  c.milestones = j.value("milestones", c.milestones);
  c.gamma = j.value("gamma", c.gamma);
  c.dropout = j.value("dropout", c.dropout);
  c.ema_rate = j.value("ema_rate", c.ema_rate);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  c.log_every = j.value("log_every", c.log_every);
  return c;
}

double learning_rate(const TrainConfig& cfg, std::int64_t step) {
  double lr = cfg.lr;
  if (cfg.warmup > 0 && step < cfg.warmup) lr *= static_cast<double>(step + 1) / cfg.warmup;
  for (double m : cfg.milestones)
    if (static_cast<double>(step) >= m * static_cast<double>(cfg.steps)) lr *= cfg.gamma;
  return lr;
}

void lion_step(ParamStore& st, const Gradients& g, const TrainConfig& cfg) {
  const double lr = learning_rate(cfg, st.step);
  auto update = [&](double* p, double* m, const double* gr, double* ema, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double c = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gr[i];
      const double sgn = (c > 0) - (c < 0);
      p[i] -= lr * (sgn + cfg.weight_decay * p[i]);
      m[i] = cfg.beta2 * m[i] + (1.0 - cfg.beta2) * gr[i];
      ema[i] += cfg.ema_rate * (p[i] - ema[i]);
    }
  };
  for (std::size_t l = 0; l < st.W.size(); ++l) {
    update(st.W[l].data(), st.mW[l].data(), g.W[l].data(), st.emaW[l].data(), st.W[l].size());
    update(st.b[l].data(), st.mb[l].data(), g.b[l].data(), st.emab[l].data(), st.b[l].size());
  }
  ++st.step;
}

void train_continue(ParamStore& st, std::size_t n, const SampleFn& sample, const TrainConfig& cfg, const LogFn& log) {
  if (n == 0) throw std::invalid_argument("empty dataset");
  Rng rng = make_rng(cfg.seed, 0x7A11);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::size_t cursor = 0;
  const int workers = std::max(1, cfg.threads);
  std::vector<TensorVolume> xs(cfg.batch), ys(cfg.batch);
  double running = 0;
  int running_n = 0;
  while (st.step < cfg.steps) {
    for (int i = 0; i < cfg.batch; ++i) {
      if (cursor == n) {
        std::shuffle(perm.begin(), perm.end(), rng);
        cursor = 0;
      }
      sample(perm[cursor++], xs[i], ys[i]);
    }
    // Shards are reduced in a fixed order, so results do not depend on timing.
    const int shards = std::min(workers, cfg.batch);
    std::vector<Gradients> part(shards);
    std::vector<double> losses(shards, 0.0);
    auto work = [&](int w) {
      std::vector<const TensorVolume*> xi, yi;
      for (int i = w; i < cfg.batch; i += shards) {
        xi.push_back(&xs[i]);
        yi.push_back(&ys[i]);
      }
      Rng drop = make_rng(cfg.seed, (static_cast<std::uint64_t>(st.step) << 8) + static_cast<std::uint64_t>(w) + 1);
      losses[w] = loss_and_gradients(st, xi, yi, part[w], cfg.dropout, &drop);
    };
    if (shards == 1) {
      work(0);
    } else {
      std::vector<std::future<void>> fs;
      for (int w = 0; w < shards; ++w) fs.push_back(std::async(std::launch::async, work, w));
      for (auto& f : fs) f.get();
    }
    Gradients g = part[0];
    double loss = losses[0];
    for (int w = 1; w < shards; ++w) {
      loss += losses[w];
      for (std::size_t l = 0; l < g.W.size(); ++l) {
        g.W[l] += part[w].W[l];
        g.b[l] += part[w].b[l];
      }
    }
    if (!std::isfinite(loss)) throw std::runtime_error("training diverged: non-finite loss at step " + std::to_string(st.step));
    const double lr = learning_rate(cfg, st.step);
    lion_step(st, g, cfg);
    running += loss / cfg.batch;
    ++running_n;
    if (log && cfg.log_every > 0 && (st.step % cfg.log_every == 0 || st.step == cfg.steps)) {
      log(st.step, lr, running / running_n);
      running = 0;
      running_n = 0;
    }
  }
}

ParamStore train(const Conv3dSpec& spec, std::size_t n, const SampleFn& sample, const TrainConfig& cfg,
                 const LogFn& log) {
  Rng rng = make_rng(cfg.seed, 0x1A17);
  ParamStore st = ParamStore::init(spec, rng);
  train_continue(st, n, sample, cfg, log);
  return st;
}

LabelVolume threshold_outputs(const TensorVolume& probs) {
  if (probs.C != 4) throw std::invalid_argument("expected 4 output channels");
  LabelVolume v;
  const int D = probs.D, T = probs.T;
  v.z = v.x = BitVolume(D, T);
  v.time_x = v.time_z = BitVolume(D, T - 1);
  for (int r = 0; r < D; ++r)
    for (int c = 0; c < D; ++c)
      for (int t = 0; t < T; ++t) {
        v.z.at(r, c, t) = probs.at(0, r, c, t) > 0.5;
        v.x.at(r, c, t) = probs.at(1, r, c, t) > 0.5;
        if (t + 1 < T) {
          v.time_x.at(r, c, t) = probs.at(2, r, c, t) > 0.5;
          v.time_z.at(r, c, t) = probs.at(3, r, c, t) > 0.5;
        }
      }
  return v;
}

LabelVolume infer_corrections(const ParamStore& store, const TensorVolume& input) {
  LabelVolume v = threshold_outputs(forward(store, input));
  v.det_x = v.det_z = BitVolume(input.D, input.T);
  for (int r = 0; r < input.D; ++r)
    for (int c = 0; c < input.D; ++c)
      for (int t = 0; t < input.T; ++t) {
        v.det_x.at(r, c, t) = input.at(0, r, c, t) > 0.5;
        v.det_z.at(r, c, t) = input.at(1, r, c, t) > 0.5;
      }
  return v;
}

std::pair<BitVolume, BitVolume> apply_corrections(const BitVolume& det_x, const BitVolume& det_z,
                                                  const LabelVolume& corr, const LatticeGeometry& geom, Basis basis) {
  if (det_x.D != corr.z.D || det_x.T != corr.z.T || det_z.T != det_x.T) throw std::invalid_argument("dims mismatch");
  LabelVolume tmp = corr;
  auto [ix, iz] = implied_detectors(tmp, geom);
  BitVolume rx = det_x, rz = det_z;
  rx ^= ix;
  rz ^= iz;
  const int T = det_x.T;
  const Basis blind = other(basis);
  BitVolume& rb = blind == Basis::X ? rx : rz;
  for (const auto& s : geom.stabilizers(blind)) {
    rb.at(s.anchor, 0) = 0;
    rb.at(s.anchor, T - 1) = 0;
  }
  return {rx, rz};
}

std::pair<int, int> logical_outcome(const BitVolume& global_x, const BitVolume& global_z, const LabelVolume& pre,
                                    const BitVolume& true_x, const BitVolume& true_z, const LatticeGeometry& geom) {
  int fx = 0, fz = 0;
  for (const BitVolume* v : {&global_x, &pre.x, &true_x})
    for (int t = 0; t < v->T; ++t)
      for (int q : geom.logical_z()) fx ^= v->at(geom.data_coord(q), t);
  for (const BitVolume* v : {&global_z, &pre.z, &true_z})
    for (int t = 0; t < v->T; ++t)
      for (int q : geom.logical_x()) fz ^= v->at(geom.data_coord(q), t);
  return {fx, fz};
}

}  // namespace predec
