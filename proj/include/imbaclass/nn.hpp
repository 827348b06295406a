/* Copyright 2026 The imbaclass Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef IMBACLASS_NN_HPP_
#define IMBACLASS_NN_HPP_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "imbaclass/dataset.hpp"
#include "imbaclass/losses.hpp"

namespace imbaclass {

struct Shape {
  int channels = 1;
  int height = 1;
  int width = 1;

  std::size_t volume() const noexcept {
    return static_cast<std::size_t>(channels) * height * width;
  }
  friend bool operator==(const Shape&, const Shape&) = default;
};

// Batch of planar feature maps, layout [n][c][h][w].
template <class Real>
struct Tensor {
  int n = 0;
  Shape shape;
  std::vector<Real> data;

  Tensor() = default;
  Tensor(int batch, Shape s, Real fill = Real(0))
      : n(batch), shape(s), data(static_cast<std::size_t>(batch) * s.volume(), fill) {}

  std::size_t sample_size() const noexcept { return shape.volume(); }
  Real* sample(int i) noexcept { return data.data() + static_cast<std::size_t>(i) * sample_size(); }
  const Real* sample(int i) const noexcept {
    return data.data() + static_cast<std::size_t>(i) * sample_size();
  }
};

enum class LayerKind {
  kConv,           // out_channels, kernel, stride; "same" zero padding of kernel/2
  kRelu,
  kAffine,         // learnable per-channel scale and shift
  kMaxPool,        // window (stride = window)
  kAvgPool,        // window (stride = window)
  kResidual,       // repeat x [relu-conv3-affine-relu-conv3] + shortcut
  kDense,          // repeat layers of relu-conv3 with `growth` channels each
  kTransition,     // relu-conv1x1(out_channels)-avgpool2
  kGlobalAvgPool,
  kLinear,         // classifier head, must be last
};

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  int out_channels = 0;  // conv, transition; residual (0 = keep input width)
  int kernel = 3;
  int stride = 1;
  int window = 2;
  int repeat = 1;  // residual: number of blocks; dense: layers per block
  int growth = 0;  // dense
};

struct NetworkSpec {
  std::string name;
  Shape input{1, 32, 32};
  int num_classes = 3;
  std::vector<LayerSpec> layers;

  // Checks shape compatibility and that every declared layer reaches the
  // classifier head (nothing after the head, no empty blocks). Throws
  // InvalidArgument.
  void validate() const;
  // Output shape after each layer, index-aligned with `layers`.
  std::vector<Shape> layer_shapes() const;

  // Stem conv + 2 residual blocks + global average pool + linear head.
  static NetworkSpec mini_res(Shape input = {1, 32, 32}, int num_classes = 3);
  // Stem conv + 1 dense block (4 layers) + transition + pool + head.
  static NetworkSpec mini_dense(Shape input = {1, 32, 32}, int num_classes = 3);
  // "mini_res" or "mini_dense".
  static NetworkSpec by_id(const std::string& id, Shape input = {1, 32, 32}, int num_classes = 3);
};

struct ParamInfo {
  std::string name;
  std::vector<int> dims;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Flat storage for every trainable tensor of a network, in declaration order.
template <class Real>
struct ParameterSet {
  std::vector<ParamInfo> layout;
  std::vector<Real> values;
  std::uint64_t seed = 0;

  std::span<Real> tensor(std::size_t i) {
    return std::span<Real>(values).subspan(layout[i].offset, layout[i].size);
  }
  std::span<const Real> tensor(std::size_t i) const {
    return std::span<const Real>(values).subspan(layout[i].offset, layout[i].size);
  }
  const ParamInfo* find(const std::string& name) const;
};

template <class Real>
class Layer;

// Intermediate values recorded during a forward pass for reverse mode. The
// contents are private to the layer that wrote them.
template <class Real>
struct Tape {
  std::vector<std::vector<Real>> buffers;
  std::vector<std::int32_t> indices;
  std::vector<Tape> children;
};

template <class Real>
class Network {
 public:
  explicit Network(NetworkSpec spec);
  ~Network();
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;

  const NetworkSpec& spec() const noexcept { return spec_; }
  const std::vector<ParamInfo>& layout() const noexcept { return layout_; }
  std::size_t parameter_count() const noexcept { return param_count_; }

  // He-uniform weights (bound sqrt(6 / fan_in)), zero biases, unit affine
  // scales.
  ParameterSet<Real> init_parameters(std::uint64_t seed) const;

  // Logits of shape (n, classes, 1, 1).
  Tensor<Real> forward(const ParameterSet<Real>& params, const Tensor<Real>& x) const;
  Tensor<Real> forward(const ParameterSet<Real>& params, const Tensor<Real>& x,
                       Tape<Real>& tape) const;
  // Accumulates d(loss)/d(params) into `grads` given d(loss)/d(logits).
  void backward(const ParameterSet<Real>& params, const Tape<Real>& tape,
                const Tensor<Real>& grad_logits, std::span<Real> grads) const;

  // Output of the first `count` layers; used to inspect block arithmetic.
  Tensor<Real> forward_prefix(const ParameterSet<Real>& params, const Tensor<Real>& x,
                              std::size_t count) const;

 private:
  void check_params(const ParameterSet<Real>& params) const;
  void check_input(const Tensor<Real>& x) const;

  NetworkSpec spec_;
  std::vector<ParamInfo> layout_;
  std::size_t param_count_ = 0;
  std::vector<std::unique_ptr<Layer<Real>>> layers_;
};

extern template class Network<float>;
extern template class Network<double>;

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  int batch_size = 32;
  int max_epochs = 100;
  double learning_rate = 0.001;
  AdamOptions adam;
  std::uint64_t seed = 0;
  LossConfig loss;

  void validate() const;
};

template <class Real>
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;
};

// Bias-corrected Adam update; moments live in double precision.
template <class Real>
void adam_step(std::span<Real> params, std::span<const Real> grads, AdamState<Real>& state,
               const TrainConfig& cfg);

// Planar batch from dataset images (all must share the network input shape).
template <class Real>
Tensor<Real> images_to_tensor(const LabeledDataset& data, std::span<const std::size_t> indices);
template <class Real>
Tensor<Real> images_to_tensor(std::span<const Image> images);

// Mean loss over the batch and its gradient with respect to every parameter.
template <class Real>
struct BackwardResult {
  double loss = 0.0;
  std::vector<Real> gradient;
};

template <class Real>
BackwardResult<Real> backward(const Network<Real>& net, const ParameterSet<Real>& params,
                              const Tensor<Real>& images, std::span<const int> labels,
                              const LossConfig& loss);

// Row-major class probabilities (softmax of the logits).
template <class Real>
std::vector<double> predict(const Network<Real>& net, const ParameterSet<Real>& params,
                            const Tensor<Real>& images);

// Probabilities + labels for a whole dataset, evaluated in chunks.
PredictionBatch predict_dataset(const Network<float>& net, const ParameterSet<float>& params,
                                const LabeledDataset& data);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN when no validation set was given
};

struct TrainResult {
  ParameterSet<float> params;
  std::vector<EpochRecord> history;
};

// Mini-batch Adam for stop_epoch epochs, reshuffling every epoch with
// derive_seed(cfg.seed, "epoch", epoch). Parameters are initialised from
// derive_seed(cfg.seed, "init"). When `validation` is given its mean loss
// (under cfg.loss) is recorded after each epoch.
TrainResult train(const NetworkSpec& spec, const LabeledDataset& data, const TrainConfig& cfg,
                  int stop_epoch, const LabeledDataset* validation = nullptr);

// Mean loss of a dataset under `loss`.
double dataset_loss(const Network<float>& net, const ParameterSet<float>& params,
                    const LabeledDataset& data, const LossConfig& loss);

// Binary checkpoint: "IMBC" magic, u32 version, u32 spec-JSON length, spec
// JSON, u64 parameter count, little-endian float32 payload.
void save_checkpoint(const std::filesystem::path& path, const NetworkSpec& spec,
                     const ParameterSet<float>& params);
std::pair<NetworkSpec, ParameterSet<float>> load_checkpoint(const std::filesystem::path& path);

}  // namespace imbaclass

#endif  // IMBACLASS_NN_HPP_
