#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "predec/nn.hpp"

using namespace predec;

namespace {

TensorVolume random_volume(int C, int D, int T, Rng& rng, double density) {
  TensorVolume t(C, D, T);
  for (auto& v : t.v) v = uniform01(rng) < density;
  return t;
}

Conv3dSpec small_spec() {
  Conv3dSpec s;
  s.layers = {{3, 3, Activation::Gelu, false}, {3, 3, Activation::Gelu, true}, {4, 3, Activation::None, false}};
  return s;
}

}  // namespace

TEST(Nn, GeluMatchesErfForm) {
  for (double x = -4; x <= 4; x += 0.125) {
    const double exact = 0.5 * x * (1 + std::erf(x / std::sqrt(2.0)));
    EXPECT_NEAR(gelu(x), exact, 1e-3);
    const double h = 1e-6;
    EXPECT_NEAR(gelu_grad(x), (gelu(x + h) - gelu(x - h)) / (2 * h), 1e-7);
  }
  EXPECT_EQ(gelu(0.0), 0.0);
}

TEST(Nn, BceValueAndGradient) {
  TensorVolume p(1, 1, 2), y(1, 1, 2);
  p.v = {0.8, 0.3};
  y.v = {1.0, 0.0};
  const auto [l, g] = bce_loss(p, y);
  EXPECT_NEAR(l, -std::log(0.8) - std::log(0.7), 1e-12);
  EXPECT_NEAR(g.v[0], -1 / 0.8, 1e-12);
  EXPECT_NEAR(g.v[1], 1 / 0.7, 1e-12);
  TensorVolume bad(2, 1, 2);
  EXPECT_THROW(bce_loss(p, bad), std::invalid_argument);
}

TEST(Nn, SpecValidation) {
  EXPECT_NO_THROW(Conv3dSpec::model1(16).validate());
  Conv3dSpec s = Conv3dSpec::model1(8);
  s.layers.back().filters = 3;
  EXPECT_THROW(s.validate(), std::invalid_argument);
  Conv3dSpec r = Conv3dSpec::model1(8);
  r.layers[0].residual = true;  // 4 -> 8 cannot be an identity shortcut
  EXPECT_THROW(r.validate(), std::invalid_argument);
  Conv3dSpec k = Conv3dSpec::model1(8);
  k.layers[1].kernel = 4;
  EXPECT_THROW(k.validate(), std::invalid_argument);
  EXPECT_EQ(Conv3dSpec::from_json(small_spec().to_json()), small_spec());
}

TEST(Nn, ShapesArePreserved) {
  Rng rng(1);
  const auto st = ParamStore::init(Conv3dSpec::model1(4), rng);
  for (int n : {9, 13}) {
    const auto in = random_volume(4, n, n, rng, 0.1);
    const auto out = forward(st, in);
    EXPECT_EQ(out.C, 4);
    EXPECT_EQ(out.D, n);
    EXPECT_EQ(out.T, n);
    for (double v : out.v) {
      ASSERT_GT(v, 0.0);
      ASSERT_LT(v, 1.0);
    }
  }
}

TEST(Nn, ReceptiveFieldIsExact) {
  const auto spec = Conv3dSpec::model1(4);
  const int rf = receptive_field(spec);
  ASSERT_EQ(rf, 9);
  const int rad = rf / 2, n = 11, c = 5;
  Rng rng(2);
  auto st = ParamStore::init(spec, rng);
  for (auto& b : st.b) b.setConstant(0.1);
  TensorVolume a(4, n, n);
  auto b = a;
  b.at(0, c, c, c) = 1.0;
  const auto ya = forward(st, a), yb = forward(st, b);
  bool edge_changed = false;
  for (int r = 0; r < n; ++r)
    for (int col = 0; col < n; ++col)
      for (int t = 0; t < n; ++t) {
        const int dist = std::max({std::abs(r - c), std::abs(col - c), std::abs(t - c)});
        double diff = 0;
        for (int ch = 0; ch < 4; ++ch) diff += std::abs(ya.at(ch, r, col, t) - yb.at(ch, r, col, t));
        if (dist > rad) EXPECT_EQ(diff, 0.0);
        if (dist == rad && diff > 0) edge_changed = true;
      }
  EXPECT_TRUE(edge_changed);
}

TEST(Nn, GradientsMatchFiniteDifferences) {
  Rng rng(5);
  auto p = ParamStore::init(small_spec(), rng);
  for (auto& b : p.b) b.setRandom();
  std::vector<TensorVolume> X, Y;
  for (int i = 0; i < 2; ++i) {
    X.push_back(random_volume(4, 3, 4, rng, 0.3));
    Y.push_back(random_volume(4, 3, 4, rng, 0.3));
  }
  std::vector<const TensorVolume*> xi{&X[0], &X[1]}, yi{&Y[0], &Y[1]};
  Gradients g;
  const double L = loss_and_gradients(p, xi, yi, g);
  double L2 = 0;
  for (int i = 0; i < 2; ++i) L2 += bce_loss(forward(p, X[i]), Y[i]).first;
  EXPECT_NEAR(L, L2, 1e-9 * std::abs(L));

  const double h = 1e-6;
  double worst = 0;
  auto check = [&](double& w, double analytic) {
    const double o = w;
    Gradients tmp;
    w = o + h;
    const double a = loss_and_gradients(p, xi, yi, tmp);
    w = o - h;
    const double b = loss_and_gradients(p, xi, yi, tmp);
    w = o;
    const double num = (a - b) / (2 * h);
    worst = std::max(worst, std::abs(num - analytic) / (std::abs(num) + std::abs(analytic) + 1e-8));
  };
  for (std::size_t l = 0; l < p.W.size(); ++l) {
    for (Eigen::Index i = 0; i < p.W[l].size(); i += 5) check(p.W[l].data()[i], g.W[l].data()[i]);
    for (Eigen::Index i = 0; i < p.b[l].size(); ++i) check(p.b[l][i], g.b[l][i]);
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Nn, LearningRateSchedule) {
  TrainConfig c;
  c.steps = 1000;
  c.lr = 1e-3;
  c.warmup = 10;
  c.milestones = {0.25, 0.5, 1.0};
  c.gamma = 0.7;
  EXPECT_NEAR(learning_rate(c, 0), 1e-4, 1e-18);
  EXPECT_NEAR(learning_rate(c, 9), 1e-3, 1e-18);
  EXPECT_NEAR(learning_rate(c, 249), 1e-3, 1e-18);
  EXPECT_NEAR(learning_rate(c, 250), 7e-4, 1e-15);
  EXPECT_NEAR(learning_rate(c, 500), 4.9e-4, 1e-15);
  EXPECT_NEAR(learning_rate(c, 999), 4.9e-4, 1e-15);
}

TEST(Nn, LionStepUsesSignOfInterpolation) {
  Conv3dSpec s;
  s.in_channels = 4;
  s.layers = {{4, 1, Activation::None, false}};
  auto st = ParamStore::zeros(s);
  st.W[0](0, 0) = 1.0;
  st.emaW[0](0, 0) = 1.0;
  st.mW[0](0, 1) = 2.0;
  Gradients g;
  g.W = {RowMat::Zero(4, 4)};
  g.b = {Eigen::VectorXd::Zero(4)};
  g.W[0](0, 0) = 0.5;
  g.W[0](0, 1) = -1.0;  // 0.9 * 2 + 0.1 * -1 > 0
  TrainConfig c;
  c.warmup = 0;
  c.lr = 0.01;
  c.weight_decay = 0.1;
  c.ema_rate = 0.5;
  lion_step(st, g, c);
  EXPECT_NEAR(st.W[0](0, 0), 1.0 - 0.01 * (1 + 0.1), 1e-15);
  EXPECT_NEAR(st.W[0](0, 1), -0.01, 1e-15);
  EXPECT_EQ(st.W[0](1, 1), 0.0);
  EXPECT_NEAR(st.mW[0](0, 0), 0.05 * 0.5, 1e-15);
  EXPECT_NEAR(st.mW[0](0, 1), 0.95 * 2 - 0.05, 1e-15);
  EXPECT_NEAR(st.emaW[0](0, 0), 1.0 + 0.5 * (st.W[0](0, 0) - 1.0), 1e-15);
  EXPECT_EQ(st.step, 1);
}

TEST(Nn, ThresholdIsStrict) {
  TensorVolume p(4, 2, 3);
  p.at(0, 0, 0, 0) = 0.5;
  p.at(1, 1, 1, 2) = 0.5000001;
  p.at(2, 0, 1, 1) = 0.9;
  p.at(3, 0, 1, 2) = 0.9;  // final round has no timelike label
  const auto v = threshold_outputs(p);
  EXPECT_EQ(v.z.count(), 0u);
  EXPECT_EQ(v.x.at(1, 1, 2), 1);
  EXPECT_EQ(v.time_x.at(0, 1, 1), 1);
  EXPECT_EQ(v.time_z.T, 2);
  EXPECT_EQ(v.time_z.count(), 0u);
}

TEST(Nn, CheckpointRoundTrip) {
  Rng rng(3);
  auto st = ParamStore::init(Conv3dSpec::model1(4), rng);
  st.step = 42;
  st.mW[1].setRandom();
  st.emab[2].setRandom();
  const auto path = (std::filesystem::temp_directory_path() / "predec_nn_ckpt.bin").string();
  st.save(path, {{"note", "unit"}});
  const auto back = ParamStore::load(path);
  std::remove(path.c_str());
  EXPECT_EQ(back.spec, st.spec);
  EXPECT_EQ(back.step, 42);
  for (std::size_t l = 0; l < st.W.size(); ++l) {
    EXPECT_EQ(back.W[l], st.W[l]);
    EXPECT_EQ(back.b[l], st.b[l]);
    EXPECT_EQ(back.mW[l], st.mW[l]);
    EXPECT_EQ(back.emaW[l], st.emaW[l]);
    EXPECT_EQ(back.emab[l], st.emab[l]);
  }
  const auto ema = st.ema_view();
  EXPECT_EQ(ema.W[2], st.emaW[2]);
  EXPECT_THROW(ParamStore::load(path + ".missing"), std::runtime_error);
}

TEST(Nn, TrainingReducesLoss) {
  // Target: copy the X-detector channel into the Z-correction channel.
  Rng rng(7);
  std::vector<TensorVolume> X, Y;
  for (int i = 0; i < 16; ++i) {
    X.push_back(random_volume(4, 3, 3, rng, 0.2));
    TensorVolume y(4, 3, 3);
    std::copy(X.back().v.begin(), X.back().v.begin() + y.channel_size(), y.v.begin());
    Y.push_back(y);
  }
  TrainConfig c;
  c.steps = 150;
  c.batch = 8;
  c.lr = 3e-3;
  c.warmup = 5;
  c.dropout = 0;
  c.ema_rate = 1.0;
  c.log_every = 0;
  auto sample = [&](std::size_t i, TensorVolume& in, TensorVolume& out) {
    in = X[i];
    out = Y[i];
  };
  auto loss_of = [&](const ParamStore& st) {
    double l = 0;
    for (int i = 0; i < 16; ++i) l += bce_loss(forward(st, X[i]), Y[i]).first;
    return l;
  };
  Rng r0 = make_rng(c.seed, 0x1A17);
  const double before = loss_of(ParamStore::init(Conv3dSpec::model1(4), r0));
  const auto st = train(Conv3dSpec::model1(4), X.size(), sample, c);
  EXPECT_EQ(st.step, 150);
  EXPECT_LT(loss_of(st), 0.3 * before);
}
