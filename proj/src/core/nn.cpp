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

#include "imbaclass/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "imbaclass/error.hpp"
#include "imbaclass/rng.hpp"

namespace imbaclass {

namespace {

std::string kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kConv: return "conv";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kAffine: return "affine";
    case LayerKind::kMaxPool: return "max_pool";
    case LayerKind::kAvgPool: return "avg_pool";
    case LayerKind::kResidual: return "residual";
    case LayerKind::kDense: return "dense";
    case LayerKind::kTransition: return "transition";
    case LayerKind::kGlobalAvgPool: return "global_avg_pool";
    case LayerKind::kLinear: return "linear";
  }
  return "?";
}

Shape conv_shape(Shape in, int out_channels, int kernel, int stride) {
  const int pad = kernel / 2;
  return {out_channels, (in.height + 2 * pad - kernel) / stride + 1,
          (in.width + 2 * pad - kernel) / stride + 1};
}

// Shape after one layer; validates the layer against its input.
Shape apply_spec(const LayerSpec& l, Shape in, std::size_t index, int num_classes) {
  const std::string where = "layer " + std::to_string(index) + " (" + kind_name(l.kind) + "): ";
  switch (l.kind) {
    case LayerKind::kConv:
      IMBACLASS_REQUIRE(l.out_channels >= 1, where + "out_channels must be >= 1");
      IMBACLASS_REQUIRE(l.kernel >= 1 && l.kernel % 2 == 1, where + "kernel must be odd and >= 1");
      IMBACLASS_REQUIRE(l.stride >= 1, where + "stride must be >= 1");
      return conv_shape(in, l.out_channels, l.kernel, l.stride);
    case LayerKind::kRelu:
    case LayerKind::kAffine:
      return in;
    case LayerKind::kMaxPool:
    case LayerKind::kAvgPool:
      IMBACLASS_REQUIRE(l.window >= 1, where + "window must be >= 1");
      IMBACLASS_REQUIRE(in.height >= l.window && in.width >= l.window,
                        where + "pool window larger than its input");
      return {in.channels, in.height / l.window, in.width / l.window};
    case LayerKind::kResidual: {
      IMBACLASS_REQUIRE(l.repeat >= 1, where + "a residual stage needs at least one block");
      IMBACLASS_REQUIRE(l.out_channels >= 0, where + "out_channels must be >= 0");
      const int out = l.out_channels == 0 ? in.channels : l.out_channels;
      return {out, in.height, in.width};
    }
    case LayerKind::kDense:
      IMBACLASS_REQUIRE(l.repeat >= 1, where + "a dense block needs at least one layer");
      IMBACLASS_REQUIRE(l.growth >= 1, where + "growth must be >= 1");
      return {in.channels + l.repeat * l.growth, in.height, in.width};
    case LayerKind::kTransition:
      IMBACLASS_REQUIRE(l.out_channels >= 1, where + "out_channels must be >= 1");
      IMBACLASS_REQUIRE(in.height >= 2 && in.width >= 2, where + "input too small to pool");
      return {l.out_channels, in.height / 2, in.width / 2};
    case LayerKind::kGlobalAvgPool:
      return {in.channels, 1, 1};
    case LayerKind::kLinear:
      return {num_classes, 1, 1};
  }
  throw InvalidArgument(where + "unknown layer kind");
}

}  // namespace

void NetworkSpec::validate() const {
  IMBACLASS_REQUIRE(input.channels >= 1 && input.height >= 1 && input.width >= 1,
                    "network input shape must be positive");
  IMBACLASS_REQUIRE(num_classes >= 2, "network needs at least two classes");
  IMBACLASS_REQUIRE(!layers.empty(), "network has no layers");
  IMBACLASS_REQUIRE(layers.back().kind == LayerKind::kLinear,
                    "the last layer must be the linear classifier head");
  for (std::size_t i = 0; i + 1 < layers.size(); ++i)
    IMBACLASS_REQUIRE(layers[i].kind != LayerKind::kLinear,
                      "layer " + std::to_string(i) +
                          ": layers after the classifier head would never reach the loss");
  (void)layer_shapes();
}

std::vector<Shape> NetworkSpec::layer_shapes() const {
  std::vector<Shape> shapes;
  Shape s = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    s = apply_spec(layers[i], s, i, num_classes);
    IMBACLASS_REQUIRE(s.channels >= 1 && s.height >= 1 && s.width >= 1,
                      "layer " + std::to_string(i) + " produces an empty feature map");
    shapes.push_back(s);
  }
  return shapes;
}

NetworkSpec NetworkSpec::mini_res(Shape input, int num_classes) {
  NetworkSpec s;
  s.name = "mini_res";
  s.input = input;
  s.num_classes = num_classes;
  s.layers = {
      {.kind = LayerKind::kConv, .out_channels = 8, .kernel = 3, .stride = 2},
      {.kind = LayerKind::kMaxPool, .window = 2},
      {.kind = LayerKind::kResidual, .out_channels = 0, .repeat = 1},
      {.kind = LayerKind::kMaxPool, .window = 2},
      {.kind = LayerKind::kResidual, .out_channels = 12, .repeat = 1},
      {.kind = LayerKind::kRelu},
      {.kind = LayerKind::kGlobalAvgPool},
      {.kind = LayerKind::kLinear},
  };
  return s;
}

NetworkSpec NetworkSpec::mini_dense(Shape input, int num_classes) {
  NetworkSpec s;
  s.name = "mini_dense";
  s.input = input;
  s.num_classes = num_classes;
  s.layers = {
      {.kind = LayerKind::kConv, .out_channels = 8, .kernel = 3, .stride = 2},
      {.kind = LayerKind::kMaxPool, .window = 2},
      {.kind = LayerKind::kDense, .repeat = 4, .growth = 4},
      {.kind = LayerKind::kTransition, .out_channels = 12},
      {.kind = LayerKind::kRelu},
      {.kind = LayerKind::kGlobalAvgPool},
      {.kind = LayerKind::kLinear},
  };
  return s;
}

NetworkSpec NetworkSpec::by_id(const std::string& id, Shape input, int num_classes) {
  if (id == "mini_res") return mini_res(input, num_classes);
  if (id == "mini_dense") return mini_dense(input, num_classes);
  throw InvalidArgument("unknown network id '" + id + "' (expected mini_res or mini_dense)");
}

template <class Real>
const ParamInfo* ParameterSet<Real>::find(const std::string& name) const {
  for (const ParamInfo& p : layout)
    if (p.name == name) return &p;
  return nullptr;
}

template struct ParameterSet<float>;
template struct ParameterSet<double>;

// --- layers --------------------------------------------------------------------

namespace {

struct LayoutBuilder {
  std::vector<ParamInfo> entries;
  std::size_t total = 0;

  std::size_t add(std::string name, std::vector<int> dims) {
    std::size_t n = 1;
    for (int d : dims) n *= static_cast<std::size_t>(d);
    entries.push_back({std::move(name), std::move(dims), total, n});
    total += n;
    return entries.back().offset;
  }
};

template <class Real>
using RowMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Real>
using MatrixMap = Eigen::Map<RowMatrix<Real>>;
template <class Real>
using ConstMatrixMap = Eigen::Map<const RowMatrix<Real>>;

// Feature maps inside the layer stack, layout [c][n][h][w]. Every channel is
// one contiguous row of n * h * w values, so a convolution is a single GEMM
// and channel concatenation is an append.
template <class Real>
struct Planes {
  int n = 0;
  Shape shape;
  std::vector<Real> data;

  Planes() = default;
  Planes(int batch, Shape s) : n(batch), shape(s), data(static_cast<std::size_t>(batch) * s.volume()) {}

  Eigen::Index plane() const { return static_cast<Eigen::Index>(shape.height) * shape.width; }
  Eigen::Index cols() const { return plane() * n; }
  Real* channel(int c) { return data.data() + c * cols(); }
  const Real* channel(int c) const { return data.data() + c * cols(); }
  MatrixMap<Real> matrix() { return {data.data(), shape.channels, cols()}; }
  ConstMatrixMap<Real> matrix() const { return {data.data(), shape.channels, cols()}; }
};

template <class Real>
Planes<Real> to_planes(const Tensor<Real>& t) {
  Planes<Real> p(t.n, t.shape);
  const std::size_t plane = static_cast<std::size_t>(t.shape.height) * t.shape.width;
  for (int n = 0; n < t.n; ++n)
    for (int c = 0; c < t.shape.channels; ++c)
      std::copy_n(t.sample(n) + c * plane, plane, p.channel(c) + n * plane);
  return p;
}

template <class Real>
Tensor<Real> to_tensor(const Planes<Real>& p) {
  Tensor<Real> t(p.n, p.shape);
  const std::size_t plane = static_cast<std::size_t>(p.plane());
  for (int n = 0; n < p.n; ++n)
    for (int c = 0; c < p.shape.channels; ++c)
      std::copy_n(p.channel(c) + n * plane, plane, t.sample(n) + c * plane);
  return t;
}

template <class Real>
void init_uniform(Real* w, std::size_t n, int fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / fan_in);
  for (std::size_t i = 0; i < n; ++i) w[i] = static_cast<Real>(rng.uniform(-bound, bound));
}

}  // namespace

template <class Real>
class Layer {
 public:
  Layer(Shape in, Shape out) : in_(in), out_(out) {}
  virtual ~Layer() = default;
  Shape in_shape() const { return in_; }
  Shape out_shape() const { return out_; }

  virtual void init(Real* /*params*/, Rng& /*rng*/) const {}
  virtual Planes<Real> forward(const Real* p, Planes<Real> x, Tape<Real>* tape) const = 0;
  // Returns d(loss)/d(input) and accumulates parameter gradients into gp.
  virtual Planes<Real> backward(const Real* p, const Tape<Real>& tape, Planes<Real> gy,
                                Real* gp) const = 0;

 protected:
  Shape in_;
  Shape out_;
};

namespace {

template <class Real>
using LayerPtr = std::unique_ptr<Layer<Real>>;

template <class Real>
class Conv final : public Layer<Real> {
 public:
  Conv(Shape in, int out_channels, int kernel, int stride, LayoutBuilder& lb,
       const std::string& name)
      : Layer<Real>(in, conv_shape(in, out_channels, kernel, stride)),
        k_(kernel), s_(stride), pad_(kernel / 2) {
    w_ = lb.add(name + ".weight", {out_channels, in.channels, kernel, kernel});
    b_ = lb.add(name + ".bias", {out_channels});
  }

  void init(Real* p, Rng& rng) const override {
    init_uniform(p + w_, static_cast<std::size_t>(this->out_.channels) * taps(), static_cast<int>(taps()), rng);
    std::fill_n(p + b_, this->out_.channels, Real(0));
  }

  Planes<Real> forward(const Real* p, Planes<Real> x, Tape<Real>* tape) const override {
    std::vector<Real> patches = pointwise() ? std::move(x.data) : unfold(x);
    Planes<Real> y(x.n, this->out_);
    const ConstMatrixMap<Real> cols(patches.data(), taps(), y.cols());
    auto out = y.matrix();
    out.noalias() = weights(p) * cols;
    for (int oc = 0; oc < this->out_.channels; ++oc) out.row(oc).array() += p[b_ + oc];
    if (tape) tape->buffers.assign(1, std::move(patches));
    return y;
  }

  Planes<Real> backward(const Real* p, const Tape<Real>& tape, Planes<Real> gy,
                        Real* gp) const override {
    const auto g = std::as_const(gy).matrix();
    const ConstMatrixMap<Real> cols(tape.buffers.at(0).data(), taps(), gy.cols());
    MatrixMap<Real> gw(gp + w_, this->out_.channels, taps());
    gw.noalias() += g * cols.transpose();
    for (int oc = 0; oc < this->out_.channels; ++oc) gp[b_ + oc] += g.row(oc).sum();
    if (pointwise()) {
      Planes<Real> gx(gy.n, this->in_);
      gx.matrix().noalias() = weights(p).transpose() * g;
      return gx;
    }
    RowMatrix<Real> gcols(taps(), gy.cols());
    gcols.noalias() = weights(p).transpose() * g;
    return fold(gcols, gy.n);
  }

 private:
  Eigen::Index taps() const { return static_cast<Eigen::Index>(this->in_.channels) * k_ * k_; }
  bool pointwise() const { return k_ == 1 && s_ == 1; }

  ConstMatrixMap<Real> weights(const Real* p) const {
    return ConstMatrixMap<Real>(p + w_, this->out_.channels, taps());
  }

  // Output columns [lo, hi) whose tap kx lands inside the input row.
  std::pair<int, int> valid_columns(int kx) const {
    const int in_w = this->in_.width, out_w = this->out_.width;
    int lo = 0;
    while (lo < out_w && lo * s_ + kx - pad_ < 0) ++lo;
    int hi = out_w;
    while (hi > lo && (hi - 1) * s_ + kx - pad_ >= in_w) --hi;
    return {lo, hi};
  }

  // Row (c, ky, kx), column (n, oy, ox) holds x[c][n][oy*s + ky - pad][ox*s + kx - pad].
  std::vector<Real> unfold(const Planes<Real>& x) const {
    const Shape in = this->in_, out = this->out_;
    const Eigen::Index out_plane = static_cast<Eigen::Index>(out.height) * out.width;
    const Eigen::Index in_plane = x.plane();
    const Eigen::Index cols = out_plane * x.n;
    std::vector<Real> m(static_cast<std::size_t>(taps() * cols));
    for (int c = 0; c < in.channels; ++c)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          const auto [lo, hi] = valid_columns(kx);
          Real* row = m.data() + ((c * k_ + ky) * k_ + kx) * cols;
          for (int n = 0; n < x.n; ++n) {
            const Real* src = x.channel(c) + n * in_plane;
            for (int oy = 0; oy < out.height; ++oy) {
              Real* dst = row + n * out_plane + oy * out.width;
              const int iy = oy * s_ + ky - pad_;
              if (iy < 0 || iy >= in.height) continue;
              const Real* line = src + iy * in.width + kx - pad_;
              if (s_ == 1) {
                std::copy(line + lo, line + hi, dst + lo);
              } else {
                for (int ox = lo; ox < hi; ++ox) dst[ox] = line[ox * s_];
              }
            }
          }
        }
    return m;
  }

  // Adjoint of unfold.
  Planes<Real> fold(const RowMatrix<Real>& m, int batch) const {
    const Shape in = this->in_, out = this->out_;
    const Eigen::Index out_plane = static_cast<Eigen::Index>(out.height) * out.width;
    Planes<Real> gx(batch, in);
    const Eigen::Index in_plane = gx.plane();
    for (int c = 0; c < in.channels; ++c)
      for (int ky = 0; ky < k_; ++ky)
        for (int kx = 0; kx < k_; ++kx) {
          const auto [lo, hi] = valid_columns(kx);
          const Real* row = m.row((c * k_ + ky) * k_ + kx).data();
          for (int n = 0; n < batch; ++n) {
            Real* dst = gx.channel(c) + n * in_plane;
            for (int oy = 0; oy < out.height; ++oy) {
              const int iy = oy * s_ + ky - pad_;
              if (iy < 0 || iy >= in.height) continue;
              const Real* src = row + n * out_plane + oy * out.width;
              Real* line = dst + iy * in.width + kx - pad_;
              for (int ox = lo; ox < hi; ++ox) line[ox * s_] += src[ox];
            }
          }
        }
    return gx;
  }

  int k_, s_, pad_;
  std::size_t w_ = 0, b_ = 0;
};

template <class Real>
class Relu final : public Layer<Real> {
 public:
  explicit Relu(Shape s) : Layer<Real>(s, s) {}

  Planes<Real> forward(const Real*, Planes<Real> x, Tape<Real>* tape) const override {
    for (Real& v : x.data) v = v > Real(0) ? v : Real(0);
    if (tape) tape->buffers.assign(1, x.data);
    return x;
  }

  Planes<Real> backward(const Real*, const Tape<Real>& tape, Planes<Real> gy,
                        Real*) const override {
    const std::vector<Real>& y = tape.buffers.at(0);
    for (std::size_t i = 0; i < gy.data.size(); ++i)
      if (!(y[i] > Real(0))) gy.data[i] = Real(0);
    return gy;
  }
};

template <class Real>
class Affine final : public Layer<Real> {
 public:
  Affine(Shape s, LayoutBuilder& lb, const std::string& name) : Layer<Real>(s, s) {
    scale_ = lb.add(name + ".scale", {s.channels});
    shift_ = lb.add(name + ".shift", {s.channels});
  }

  void init(Real* p, Rng&) const override {
    std::fill_n(p + scale_, this->in_.channels, Real(1));
    std::fill_n(p + shift_, this->in_.channels, Real(0));
  }

  Planes<Real> forward(const Real* p, Planes<Real> x, Tape<Real>* tape) const override {
    if (tape) tape->buffers.assign(1, x.data);
    auto m = x.matrix();
    for (int c = 0; c < x.shape.channels; ++c)
      m.row(c) = (m.row(c).array() * p[scale_ + c] + p[shift_ + c]).matrix();
    return x;
  }

  Planes<Real> backward(const Real* p, const Tape<Real>& tape, Planes<Real> gy,
                        Real* gp) const override {
    const ConstMatrixMap<Real> x(tape.buffers.at(0).data(), gy.shape.channels, gy.cols());
    auto g = gy.matrix();
    for (int c = 0; c < gy.shape.channels; ++c) {
      gp[scale_ + c] += g.row(c).dot(x.row(c));
      gp[shift_ + c] += g.row(c).sum();
      g.row(c) *= p[scale_ + c];
    }
    return gy;
  }

 private:
  std::size_t scale_ = 0, shift_ = 0;
};

template <class Real>
class Pool final : public Layer<Real> {
 public:
  Pool(Shape in, int window, bool max)
      : Layer<Real>(in, {in.channels, in.height / window, in.width / window}),
        win_(window), max_(max) {}

  Planes<Real> forward(const Real*, Planes<Real> x, Tape<Real>* tape) const override {
    const Shape in = this->in_, out = this->out_;
    Planes<Real> y(x.n, out);
    std::vector<std::int32_t> arg;
    if (max_ && tape) arg.resize(y.data.size());
    const Real inv = Real(1) / static_cast<Real>(win_ * win_);
    const std::size_t in_plane = static_cast<std::size_t>(x.plane());
    std::size_t o = 0;
    for (std::size_t block = 0; block < static_cast<std::size_t>(in.channels) * x.n; ++block) {
      const Real* src = x.data.data() + block * in_plane;
      for (int oy = 0; oy < out.height; ++oy)
        for (int ox = 0; ox < out.width; ++ox, ++o) {
          Real acc = max_ ? -std::numeric_limits<Real>::infinity() : Real(0);
          std::int32_t best = 0;
          for (int dy = 0; dy < win_; ++dy)
            for (int dx = 0; dx < win_; ++dx) {
              const std::int32_t idx = (oy * win_ + dy) * in.width + ox * win_ + dx;
              if (max_) {
                if (src[idx] > acc) {
                  acc = src[idx];
                  best = idx;
                }
              } else {
                acc += src[idx];
              }
            }
          y.data[o] = max_ ? acc : acc * inv;
          if (!arg.empty()) arg[o] = best;
        }
    }
    if (tape) tape->indices = std::move(arg);
    return y;
  }

  Planes<Real> backward(const Real*, const Tape<Real>& tape, Planes<Real> gy,
                        Real*) const override {
    const Shape in = this->in_, out = this->out_;
    Planes<Real> gx(gy.n, in);
    const Real inv = Real(1) / static_cast<Real>(win_ * win_);
    const std::size_t in_plane = static_cast<std::size_t>(gx.plane());
    std::size_t o = 0;
    for (std::size_t block = 0; block < static_cast<std::size_t>(in.channels) * gy.n; ++block) {
      Real* dst = gx.data.data() + block * in_plane;
      for (int oy = 0; oy < out.height; ++oy)
        for (int ox = 0; ox < out.width; ++ox, ++o) {
          if (max_) {
            dst[tape.indices[o]] += gy.data[o];
          } else {
            for (int dy = 0; dy < win_; ++dy)
              for (int dx = 0; dx < win_; ++dx)
                dst[(oy * win_ + dy) * in.width + ox * win_ + dx] += gy.data[o] * inv;
          }
        }
    }
    return gx;
  }

 private:
  int win_;
  bool max_;
};

template <class Real>
class GlobalAvgPool final : public Layer<Real> {
 public:
  explicit GlobalAvgPool(Shape in) : Layer<Real>(in, {in.channels, 1, 1}) {}

  Planes<Real> forward(const Real*, Planes<Real> x, Tape<Real>*) const override {
    Planes<Real> y(x.n, this->out_);
    const Eigen::Index plane = x.plane();
    const ConstMatrixMap<Real> blocks(x.data.data(), static_cast<Eigen::Index>(x.shape.channels) * x.n, plane);
    Eigen::Map<Eigen::Matrix<Real, Eigen::Dynamic, 1>>(y.data.data(), blocks.rows()) =
        blocks.rowwise().sum() / static_cast<Real>(plane);
    return y;
  }

  Planes<Real> backward(const Real*, const Tape<Real>&, Planes<Real> gy, Real*) const override {
    Planes<Real> gx(gy.n, this->in_);
    const std::size_t plane = static_cast<std::size_t>(gx.plane());
    for (std::size_t i = 0; i < gy.data.size(); ++i)
      std::fill_n(gx.data.data() + i * plane, plane, gy.data[i] / static_cast<Real>(plane));
    return gx;
  }
};

// Fully connected head. Activations are laid out features x batch.
template <class Real>
class Linear final : public Layer<Real> {
 public:
  Linear(Shape in, int out, LayoutBuilder& lb, const std::string& name)
      : Layer<Real>(in, {out, 1, 1}) {
    w_ = lb.add(name + ".weight", {out, static_cast<int>(in.volume())});
    b_ = lb.add(name + ".bias", {out});
  }

  void init(Real* p, Rng& rng) const override {
    const int fan_in = static_cast<int>(this->in_.volume());
    init_uniform(p + w_, static_cast<std::size_t>(this->out_.channels) * fan_in, fan_in, rng);
    std::fill_n(p + b_, this->out_.channels, Real(0));
  }

  Planes<Real> forward(const Real* p, Planes<Real> x, Tape<Real>* tape) const override {
    std::vector<Real> features = flatten(x);
    const Eigen::Index in = static_cast<Eigen::Index>(this->in_.volume());
    const ConstMatrixMap<Real> f(features.data(), in, x.n);
    Planes<Real> y(x.n, this->out_);
    auto z = y.matrix();
    z.noalias() = weights(p) * f;
    for (int o = 0; o < this->out_.channels; ++o) z.row(o).array() += p[b_ + o];
    if (tape) tape->buffers.assign(1, std::move(features));
    return y;
  }

  Planes<Real> backward(const Real* p, const Tape<Real>& tape, Planes<Real> gy,
                        Real* gp) const override {
    const Eigen::Index in = static_cast<Eigen::Index>(this->in_.volume());
    const ConstMatrixMap<Real> f(tape.buffers.at(0).data(), in, gy.n);
    const auto g = std::as_const(gy).matrix();
    MatrixMap<Real>(gp + w_, this->out_.channels, in).noalias() += g * f.transpose();
    for (int o = 0; o < this->out_.channels; ++o) gp[b_ + o] += g.row(o).sum();
    RowMatrix<Real> gf(in, gy.n);
    gf.noalias() = weights(p).transpose() * g;
    return unflatten(gf, gy.n);
  }

 private:
  ConstMatrixMap<Real> weights(const Real* p) const {
    return ConstMatrixMap<Real>(p + w_, this->out_.channels, static_cast<Eigen::Index>(this->in_.volume()));
  }

  // (c, h, w) x n feature matrix.
  std::vector<Real> flatten(Planes<Real>& x) const {
    if (x.plane() == 1) return std::move(x.data);
    const std::size_t plane = static_cast<std::size_t>(x.plane());
    std::vector<Real> f(x.data.size());
    for (int c = 0; c < x.shape.channels; ++c)
      for (int n = 0; n < x.n; ++n)
        for (std::size_t i = 0; i < plane; ++i)
          f[(c * plane + i) * x.n + n] = x.channel(c)[n * plane + i];
    return f;
  }

  Planes<Real> unflatten(const RowMatrix<Real>& f, int batch) const {
    Planes<Real> gx(batch, this->in_);
    const std::size_t plane = static_cast<std::size_t>(gx.plane());
    for (int c = 0; c < gx.shape.channels; ++c)
      for (int n = 0; n < batch; ++n)
        for (std::size_t i = 0; i < plane; ++i)
          gx.channel(c)[n * plane + i] = f(static_cast<Eigen::Index>(c * plane + i), n);
    return gx;
  }

  std::size_t w_ = 0, b_ = 0;
};

// Runs sub-layers in order, one child tape per sub-layer.
template <class Real>
class Chain {
 public:
  void push(LayerPtr<Real> l) { layers_.push_back(std::move(l)); }
  Shape out_shape() const { return layers_.back()->out_shape(); }

  void init(Real* p, Rng& rng) const {
    for (const auto& l : layers_) l->init(p, rng);
  }

  Planes<Real> forward(const Real* p, Planes<Real> x, Tape<Real>* tape) const {
    if (tape) tape->children.assign(layers_.size(), {});
    for (std::size_t i = 0; i < layers_.size(); ++i)
      x = layers_[i]->forward(p, std::move(x), tape ? &tape->children[i] : nullptr);
    return x;
  }

  Planes<Real> backward(const Real* p, const Tape<Real>& tape, Planes<Real> g, Real* gp) const {
    for (std::size_t i = layers_.size(); i-- > 0;)
      g = layers_[i]->backward(p, tape.children.at(i), std::move(g), gp);
    return g;
  }

 private:
  std::vector<LayerPtr<Real>> layers_;
};

// Pre-activation block: y = F(x) + S(x) with F = conv(relu(affine(conv(relu x))))
// and S the identity, or a 1x1 conv when the channel count changes.
template <class Real>
class ResidualBlock final : public Layer<Real> {
 public:
  ResidualBlock(Shape in, int out_channels, LayoutBuilder& lb, const std::string& name)
      : Layer<Real>(in, {out_channels, in.height, in.width}) {
    const Shape mid{out_channels, in.height, in.width};
    branch_.push(std::make_unique<Relu<Real>>(in));
    branch_.push(std::make_unique<Conv<Real>>(in, out_channels, 3, 1, lb, name + ".conv1"));
    branch_.push(std::make_unique<Affine<Real>>(mid, lb, name + ".affine"));
    branch_.push(std::make_unique<Relu<Real>>(mid));
    branch_.push(std::make_unique<Conv<Real>>(mid, out_channels, 3, 1, lb, name + ".conv2"));
    if (out_channels != in.channels)
      projection_ = std::make_unique<Conv<Real>>(in, out_channels, 1, 1, lb, name + ".projection");
  }

  void init(Real* p, Rng& rng) const override {
    branch_.init(p, rng);
    if (projection_) projection_->init(p, rng);
  }

  Planes<Real> forward(const Real* p, Planes<Real> x, Tape<Real>* tape) const override {
    if (tape) tape->children.assign(2, {});
    Planes<Real> y = branch_.forward(p, x, tape ? &tape->children[0] : nullptr);
    if (projection_) x = projection_->forward(p, std::move(x), tape ? &tape->children[1] : nullptr);
    y.matrix() += std::as_const(x).matrix();
    return y;
  }

  Planes<Real> backward(const Real* p, const Tape<Real>& tape, Planes<Real> gy,
                        Real* gp) const override {
    Planes<Real> gx = branch_.backward(p, tape.children.at(0), gy, gp);
    if (projection_) gy = projection_->backward(p, tape.children.at(1), std::move(gy), gp);
    gx.matrix() += std::as_const(gy).matrix();
    return gx;
  }

 private:
  Chain<Real> branch_;
  LayerPtr<Real> projection_;
};

// Layer l sees the concatenation of the block input and the outputs of
// layers 0..l-1; the block output is the concatenation of all of them.
template <class Real>
class DenseBlock final : public Layer<Real> {
 public:
  DenseBlock(Shape in, int layers, int growth, LayoutBuilder& lb, const std::string& name)
      : Layer<Real>(in, {in.channels + layers * growth, in.height, in.width}), growth_(growth) {
    for (int l = 0; l < layers; ++l) {
      const Shape s{in.channels + l * growth, in.height, in.width};
      Chain<Real> c;
      c.push(std::make_unique<Relu<Real>>(s));
      c.push(std::make_unique<Conv<Real>>(s, growth, 3, 1, lb,
                                          name + ".layer" + std::to_string(l) + ".conv"));
      stages_.push_back(std::move(c));
    }
  }

  void init(Real* p, Rng& rng) const override {
    for (const auto& c : stages_) c.init(p, rng);
  }

  Planes<Real> forward(const Real* p, Planes<Real> x, Tape<Real>* tape) const override {
    if (tape) tape->children.assign(stages_.size(), {});
    for (std::size_t l = 0; l < stages_.size(); ++l) {
      const Planes<Real> y = stages_[l].forward(p, x, tape ? &tape->children[l] : nullptr);
      x.data.insert(x.data.end(), y.data.begin(), y.data.end());
      x.shape.channels += growth_;
    }
    return x;
  }

  Planes<Real> backward(const Real* p, const Tape<Real>& tape, Planes<Real> g,
                        Real* gp) const override {
    for (std::size_t l = stages_.size(); l-- > 0;) {
      const std::size_t keep = static_cast<std::size_t>(g.shape.channels - growth_) * g.cols();
      Planes<Real> g_out(g.n, {growth_, g.shape.height, g.shape.width});
      std::copy(g.data.begin() + static_cast<std::ptrdiff_t>(keep), g.data.end(), g_out.data.begin());
      g.data.resize(keep);
      g.shape.channels -= growth_;
      const Planes<Real> g_in = stages_[l].backward(p, tape.children.at(l), std::move(g_out), gp);
      g.matrix() += g_in.matrix();
    }
    return g;
  }

 private:
  int growth_;
  std::vector<Chain<Real>> stages_;
};

// Wraps a Chain as a single layer.
template <class Real>
class ChainLayer final : public Layer<Real> {
 public:
  ChainLayer(Shape in, Chain<Real> chain)
      : Layer<Real>(in, chain.out_shape()), chain_(std::move(chain)) {}

  void init(Real* p, Rng& rng) const override { chain_.init(p, rng); }
  Planes<Real> forward(const Real* p, Planes<Real> x, Tape<Real>* tape) const override {
    return chain_.forward(p, std::move(x), tape);
  }
  Planes<Real> backward(const Real* p, const Tape<Real>& tape, Planes<Real> gy,
                        Real* gp) const override {
    return chain_.backward(p, tape, std::move(gy), gp);
  }

 private:
  Chain<Real> chain_;
};

template <class Real>
LayerPtr<Real> build_layer(const LayerSpec& l, Shape in, int num_classes, LayoutBuilder& lb,
                           const std::string& name) {
  switch (l.kind) {
    case LayerKind::kConv:
      return std::make_unique<Conv<Real>>(in, l.out_channels, l.kernel, l.stride, lb, name);
    case LayerKind::kRelu:
      return std::make_unique<Relu<Real>>(in);
    case LayerKind::kAffine:
      return std::make_unique<Affine<Real>>(in, lb, name);
    case LayerKind::kMaxPool:
      return std::make_unique<Pool<Real>>(in, l.window, true);
    case LayerKind::kAvgPool:
      return std::make_unique<Pool<Real>>(in, l.window, false);
    case LayerKind::kResidual: {
      const int out = l.out_channels == 0 ? in.channels : l.out_channels;
      if (l.repeat == 1) return std::make_unique<ResidualBlock<Real>>(in, out, lb, name + ".block0");
      Chain<Real> c;
      Shape s = in;
      for (int b = 0; b < l.repeat; ++b) {
        c.push(std::make_unique<ResidualBlock<Real>>(s, out, lb, name + ".block" + std::to_string(b)));
        s = {out, in.height, in.width};
      }
      return std::make_unique<ChainLayer<Real>>(in, std::move(c));
    }
    case LayerKind::kDense:
      return std::make_unique<DenseBlock<Real>>(in, l.repeat, l.growth, lb, name);
    case LayerKind::kTransition: {
      Chain<Real> c;
      c.push(std::make_unique<Relu<Real>>(in));
      auto conv = std::make_unique<Conv<Real>>(in, l.out_channels, 1, 1, lb, name + ".conv");
      const Shape mid = conv->out_shape();
      c.push(std::move(conv));
      c.push(std::make_unique<Pool<Real>>(mid, 2, false));
      return std::make_unique<ChainLayer<Real>>(in, std::move(c));
    }
    case LayerKind::kGlobalAvgPool:
      return std::make_unique<GlobalAvgPool<Real>>(in);
    case LayerKind::kLinear:
      return std::make_unique<Linear<Real>>(in, num_classes, lb, name);
  }
  throw InvalidArgument("unknown layer kind");
}

}  // namespace

// --- network ---------------------------------------------------------------------

template <class Real>
Network<Real>::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  spec_.validate();
  LayoutBuilder lb;
  Shape s = spec_.input;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    layers_.push_back(build_layer<Real>(spec_.layers[i], s, spec_.num_classes, lb,
                                        "layer" + std::to_string(i)));
    s = layers_.back()->out_shape();
  }
  layout_ = std::move(lb.entries);
  param_count_ = lb.total;
}

template <class Real>
Network<Real>::~Network() = default;
template <class Real>
Network<Real>::Network(Network&&) noexcept = default;
template <class Real>
Network<Real>& Network<Real>::operator=(Network&&) noexcept = default;

template <class Real>
ParameterSet<Real> Network<Real>::init_parameters(std::uint64_t seed) const {
  ParameterSet<Real> p;
  p.layout = layout_;
  p.values.assign(param_count_, Real(0));
  p.seed = seed;
  Rng rng(seed);
  for (const auto& l : layers_) l->init(p.values.data(), rng);
  return p;
}

template <class Real>
void Network<Real>::check_params(const ParameterSet<Real>& params) const {
  IMBACLASS_REQUIRE(params.values.size() == param_count_,
                    "parameter set does not match the network layout");
}

template <class Real>
void Network<Real>::check_input(const Tensor<Real>& x) const {
  IMBACLASS_REQUIRE(x.shape == spec_.input, "input shape does not match the network input");
  IMBACLASS_REQUIRE(x.n >= 1, "empty input batch");
  IMBACLASS_REQUIRE(x.data.size() == static_cast<std::size_t>(x.n) * x.sample_size(),
                    "tensor storage does not match its shape");
}

template <class Real>
Tensor<Real> Network<Real>::forward(const ParameterSet<Real>& params, const Tensor<Real>& x) const {
  return forward_prefix(params, x, layers_.size());
}

template <class Real>
Tensor<Real> Network<Real>::forward_prefix(const ParameterSet<Real>& params, const Tensor<Real>& x,
                                           std::size_t count) const {
  check_params(params);
  check_input(x);
  Planes<Real> cur = to_planes(x);
  for (std::size_t i = 0; i < std::min(count, layers_.size()); ++i)
    cur = layers_[i]->forward(params.values.data(), std::move(cur), nullptr);
  return to_tensor(cur);
}

template <class Real>
Tensor<Real> Network<Real>::forward(const ParameterSet<Real>& params, const Tensor<Real>& x,
                                    Tape<Real>& tape) const {
  check_params(params);
  check_input(x);
  tape.buffers.clear();
  tape.indices.clear();
  tape.children.assign(layers_.size(), {});
  Planes<Real> cur = to_planes(x);
  for (std::size_t i = 0; i < layers_.size(); ++i)
    cur = layers_[i]->forward(params.values.data(), std::move(cur), &tape.children[i]);
  return to_tensor(cur);
}

template <class Real>
void Network<Real>::backward(const ParameterSet<Real>& params, const Tape<Real>& tape,
                             const Tensor<Real>& grad_logits, std::span<Real> grads) const {
  check_params(params);
  IMBACLASS_REQUIRE(grads.size() == param_count_, "gradient buffer does not match the layout");
  IMBACLASS_REQUIRE(tape.children.size() == layers_.size(), "tape does not belong to this network");
  IMBACLASS_REQUIRE(grad_logits.shape == layers_.back()->out_shape(),
                    "logit gradient has the wrong shape");
  Planes<Real> g = to_planes(grad_logits);
  for (std::size_t i = layers_.size(); i-- > 0;)
    g = layers_[i]->backward(params.values.data(), tape.children[i], std::move(g), grads.data());
}

template class Network<float>;
template class Network<double>;


// --- training ----------------------------------------------------------------------

void TrainConfig::validate() const {
  IMBACLASS_REQUIRE(batch_size >= 1, "batch_size must be >= 1");
  IMBACLASS_REQUIRE(max_epochs >= 0, "max_epochs must be >= 0");
  IMBACLASS_REQUIRE(learning_rate > 0.0 && std::isfinite(learning_rate), "learning_rate must be > 0");
  IMBACLASS_REQUIRE(adam.beta1 >= 0.0 && adam.beta1 < 1.0, "adam beta1 must lie in [0, 1)");
  IMBACLASS_REQUIRE(adam.beta2 >= 0.0 && adam.beta2 < 1.0, "adam beta2 must lie in [0, 1)");
  IMBACLASS_REQUIRE(adam.epsilon > 0.0, "adam epsilon must be > 0");
  loss.validate();
}

template <class Real>
void adam_step(std::span<Real> params, std::span<const Real> grads, AdamState<Real>& state,
               const TrainConfig& cfg) {
  IMBACLASS_REQUIRE(params.size() == grads.size(), "parameter and gradient sizes differ");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  IMBACLASS_REQUIRE(state.m.size() == params.size(), "optimizer state size differs");
  const double b1 = cfg.adam.beta1, b2 = cfg.adam.beta2;
  ++state.t;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] = static_cast<Real>(params[i] - cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam.epsilon));
  }
}

template void adam_step<float>(std::span<float>, std::span<const float>, AdamState<float>&,
                               const TrainConfig&);
template void adam_step<double>(std::span<double>, std::span<const double>, AdamState<double>&,
                                const TrainConfig&);

namespace {

template <class Real>
void write_planar(const Image& img, Real* dst) {
  const int c = img.channels();
  const std::size_t plane = static_cast<std::size_t>(img.width()) * img.height();
  auto px = img.pixels();
  for (std::size_t i = 0; i < plane; ++i)
    for (int ch = 0; ch < c; ++ch) dst[ch * plane + i] = static_cast<Real>(px[i * c + ch]);
}

}  // namespace

template <class Real>
Tensor<Real> images_to_tensor(std::span<const Image> images) {
  IMBACLASS_REQUIRE(!images.empty(), "empty image batch");
  const Shape s{images[0].channels(), images[0].height(), images[0].width()};
  Tensor<Real> t(static_cast<int>(images.size()), s);
  for (std::size_t i = 0; i < images.size(); ++i) {
    IMBACLASS_REQUIRE(images[i].channels() == s.channels && images[i].height() == s.height &&
                          images[i].width() == s.width,
                      "images in a batch must share one shape");
    write_planar(images[i], t.sample(static_cast<int>(i)));
  }
  return t;
}

template <class Real>
Tensor<Real> images_to_tensor(const LabeledDataset& data, std::span<const std::size_t> indices) {
  IMBACLASS_REQUIRE(!indices.empty(), "empty image batch");
  const Image& first = data.samples.at(indices[0]).image;
  const Shape s{first.channels(), first.height(), first.width()};
  Tensor<Real> t(static_cast<int>(indices.size()), s);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Image& img = data.samples.at(indices[i]).image;
    IMBACLASS_REQUIRE(img.channels() == s.channels && img.height() == s.height &&
                          img.width() == s.width,
                      "images in a batch must share one shape");
    write_planar(img, t.sample(static_cast<int>(i)));
  }
  return t;
}

template Tensor<float> images_to_tensor<float>(std::span<const Image>);
template Tensor<double> images_to_tensor<double>(std::span<const Image>);
template Tensor<float> images_to_tensor<float>(const LabeledDataset&, std::span<const std::size_t>);
template Tensor<double> images_to_tensor<double>(const LabeledDataset&, std::span<const std::size_t>);

template <class Real>
BackwardResult<Real> backward(const Network<Real>& net, const ParameterSet<Real>& params,
                              const Tensor<Real>& images, std::span<const int> labels,
                              const LossConfig& loss) {
  IMBACLASS_REQUIRE(static_cast<std::size_t>(images.n) == labels.size(),
                    "images and labels disagree on batch size");
  Tape<Real> tape;
  const Tensor<Real> logits = net.forward(params, images, tape);
  const std::vector<double> z(logits.data.begin(), logits.data.end());
  const int classes = net.spec().num_classes;
  BackwardResult<Real> out;
  out.loss = evaluate_loss(softmax_batch(z, labels, classes), loss).mean;
  const std::vector<double> dz = loss_gradient(z, labels, classes, loss);
  Tensor<Real> g(logits.n, logits.shape);
  std::transform(dz.begin(), dz.end(), g.data.begin(), [](double v) { return static_cast<Real>(v); });
  out.gradient.assign(net.parameter_count(), Real(0));
  net.backward(params, tape, g, out.gradient);
  return out;
}

template BackwardResult<float> backward<float>(const Network<float>&, const ParameterSet<float>&,
                                               const Tensor<float>&, std::span<const int>,
                                               const LossConfig&);
template BackwardResult<double> backward<double>(const Network<double>&,
                                                 const ParameterSet<double>&,
                                                 const Tensor<double>&, std::span<const int>,
                                                 const LossConfig&);

template <class Real>
std::vector<double> predict(const Network<Real>& net, const ParameterSet<Real>& params,
                            const Tensor<Real>& images) {
  const Tensor<Real> logits = net.forward(params, images);
  const std::vector<double> z(logits.data.begin(), logits.data.end());
  return softmax(z, net.spec().num_classes);
}

template std::vector<double> predict<float>(const Network<float>&, const ParameterSet<float>&,
                                            const Tensor<float>&);
template std::vector<double> predict<double>(const Network<double>&, const ParameterSet<double>&,
                                             const Tensor<double>&);

namespace {
constexpr std::size_t kEvalChunk = 256;
}

PredictionBatch predict_dataset(const Network<float>& net, const ParameterSet<float>& params,
                                const LabeledDataset& data) {
  PredictionBatch out;
  out.num_classes = net.spec().num_classes;
  out.probabilities.reserve(data.size() * out.num_classes);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += kEvalChunk) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + kEvalChunk); ++i) idx.push_back(i);
    const auto probs = predict(net, params, images_to_tensor<float>(data, idx));
    out.probabilities.insert(out.probabilities.end(), probs.begin(), probs.end());
  }
  for (const Sample& s : data.samples) out.labels.push_back(s.label);
  return out;
}

double dataset_loss(const Network<float>& net, const ParameterSet<float>& params,
                    const LabeledDataset& data, const LossConfig& loss) {
  IMBACLASS_REQUIRE(!data.empty(), "loss of an empty dataset");
  return evaluate_loss(predict_dataset(net, params, data), loss).mean;
}

TrainResult train(const NetworkSpec& spec, const LabeledDataset& data, const TrainConfig& cfg,
                  int stop_epoch, const LabeledDataset* validation) {
  cfg.validate();
  IMBACLASS_REQUIRE(!data.empty(), "cannot train on an empty dataset");
  IMBACLASS_REQUIRE(stop_epoch >= 0 && stop_epoch <= cfg.max_epochs,
                    "stop_epoch must lie in [0, max_epochs]");
  IMBACLASS_REQUIRE(data.num_classes <= spec.num_classes,
                    "dataset has more classes than the network outputs");
  const Network<float> net(spec);
  TrainResult result;
  result.params = net.init_parameters(derive_seed(cfg.seed, "init"));
  AdamState<float> adam;

  std::vector<std::size_t> order(data.size());
  std::vector<std::size_t> batch;
  std::vector<int> labels;
  std::vector<float> grads(net.parameter_count());
  for (int epoch = 1; epoch <= stop_epoch; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng(derive_seed(cfg.seed, "epoch", static_cast<std::uint64_t>(epoch))).shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      batch.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                   order.begin() + static_cast<std::ptrdiff_t>(end));
      labels.clear();
      for (std::size_t i : batch) labels.push_back(data.samples[i].label);
      const Tensor<float> x = images_to_tensor<float>(data, batch);
      auto step = backward(net, result.params, x, labels, cfg.loss);
      loss_sum += step.loss * static_cast<double>(batch.size());
      adam_step<float>(result.params.values, step.gradient, adam, cfg);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(data.size());
    rec.val_loss = validation ? dataset_loss(net, result.params, *validation, cfg.loss)
                              : std::numeric_limits<double>::quiet_NaN();
    result.history.push_back(rec);
  }
  return result;
}

}  // namespace imbaclass
