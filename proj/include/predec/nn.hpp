#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "predec/canon.hpp"
#include "predec/encode.hpp"
#include "predec/lattice.hpp"
#include "predec/rng.hpp"

namespace predec {

enum class Activation { Gelu, Relu, None };

struct LayerSpec {
  int filters = 0;
  int kernel = 3;
  Activation act = Activation::Gelu;
  bool residual = false;  // identity shortcut; needs equal in/out widths
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Conv3dSpec {
  int in_channels = 4;
  std::vector<LayerSpec> layers;

  void validate() const;
  nlohmann::json to_json() const;
  static Conv3dSpec from_json(const nlohmann::json& j);
  // Four kernel-3 layers: width, width, width, 4.
  static Conv3dSpec model1(int width, Activation act = Activation::Gelu);
  friend bool operator==(const Conv3dSpec&, const Conv3dSpec&) = default;
};

int receptive_field(const Conv3dSpec& spec);

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ParamStore {
  Conv3dSpec spec;
  std::vector<RowMat> W;  // (filters, in * k^3)
  std::vector<Eigen::VectorXd> b;
  std::vector<RowMat> mW;  // optimizer momentum
  std::vector<Eigen::VectorXd> mb;
  std::vector<RowMat> emaW;  // shadow copy
  std::vector<Eigen::VectorXd> emab;
  std::int64_t step = 0;

  static ParamStore zeros(const Conv3dSpec& spec);
  // He-normal weights, zero biases.
  static ParamStore init(const Conv3dSpec& spec, Rng& rng);
  std::size_t num_params() const;
  // Store with the shadow weights swapped in.
  ParamStore ema_view() const;

  // "PDCK", version, JSON header length, JSON header, then W/b, momentum and
  // shadow tensors as float64, then the step counter.
  void save(const std::string& path, const nlohmann::json& meta = {}) const;
  static ParamStore load(const std::string& path);
};

struct Gradients {
  std::vector<RowMat> W;
  std::vector<Eigen::VectorXd> b;
};

double gelu(double x);
double gelu_grad(double x);

// Sigmoid probabilities, same dims as the input.
TensorVolume forward(const ParamStore& store, const TensorVolume& input);

// Summed binary cross-entropy and its gradient with respect to pred.
std::pair<double, TensorVolume> bce_loss(const TensorVolume& pred, const TensorVolume& target);

// Summed BCE over a batch and the parameter gradients. With dropout > 0 a
// mask is drawn from rng.
double loss_and_gradients(const ParamStore& store, const std::vector<const TensorVolume*>& inputs,
                          const std::vector<const TensorVolume*>& targets, Gradients& grads, double dropout = 0.0,
                          Rng* rng = nullptr);

struct TrainConfig {
  std::int64_t steps = 1000;
  int batch = 32;
  double lr = 3e-4;
  double weight_decay = 1e-7;
  double beta1 = 0.9;
  double beta2 = 0.95;
  int warmup = 100;
  std::vector<double> milestones{0.25, 0.5, 1.0};
  double gamma = 0.7;
  double dropout = 0.05;
  double ema_rate = 1e-4;  // shadow += rate * (param - shadow)
  std::uint64_t seed = 1;
  int threads = 1;
  int log_every = 100;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

double learning_rate(const TrainConfig& cfg, std::int64_t step);

// Lion update of store from gradients at the store's current step.
void lion_step(ParamStore& store, const Gradients& g, const TrainConfig& cfg);

// Produces sample `index` of the dataset.
using SampleFn = std::function<void(std::size_t index, TensorVolume& input, TensorVolume& target)>;
using LogFn = std::function<void(std::int64_t step, double lr, double loss)>;

ParamStore train(const Conv3dSpec& spec, std::size_t dataset_size, const SampleFn& sample,
                 const TrainConfig& cfg, const LogFn& log = {});
void train_continue(ParamStore& store, std::size_t dataset_size, const SampleFn& sample, const TrainConfig& cfg,
                    const LogFn& log = {});

// Thresholds outputs at 0.5 (strictly greater is 1). Timelike channels keep d_m - 1 rounds.
LabelVolume infer_corrections(const ParamStore& store, const TensorVolume& input);
LabelVolume threshold_outputs(const TensorVolume& probs);

// Residual detectors R_k = det_k ^ M(space_k) ^ time_k ^ time_{k-1}, with
// the basis-blind kind cleared in the first and last rounds.
std::pair<BitVolume, BitVolume> apply_corrections(const BitVolume& det_x, const BitVolume& det_z,
                                                  const LabelVolume& corr, const LatticeGeometry& geom, Basis basis);

// XOR of all supplied data-error volumes, reported as (parity on Z logical of
// the X part, parity on X logical of the Z part).
std::pair<int, int> logical_outcome(const BitVolume& global_x, const BitVolume& global_z, const LabelVolume& pre,
                                    const BitVolume& true_x, const BitVolume& true_z, const LatticeGeometry& geom);

}  // namespace predec
