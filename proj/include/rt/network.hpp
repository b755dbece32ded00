#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "rt/layers.hpp"
#include "rt/tensor.hpp"

namespace rt {

enum class LayerKind { conv, relu, pool, flatten, dense };

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  Index units = 0;  // conv filters, dense outputs, or the declared flatten width
  Index size = 0;   // conv kernel size or pool window

  bool operator==(const LayerSpec&) const = default;
};

/// Ordered layer list with a fixed input geometry. The text form is one
/// layer per `;`-separated clause, e.g.
///   input 1x210x210; conv 16x11; relu; pool 2; ...; flatten 7744; dense 3
/// The final dense layer feeds an implicit softmax.
class Architecture {
 public:
  Architecture(Shape input, std::vector<LayerSpec> layers);

  /// conv 16x11 -> pool 2 -> conv 16x9 -> pool 2 -> conv 16x3 -> pool 2
  /// (ReLU after each conv) -> flatten 7744 -> dense 128 -> relu -> dense 3.
  /// Spatial trace 210 -> 200 -> 100 -> 92 -> 46 -> 44 -> 22.
  static Architecture reference();
  static Architecture parse(std::string_view text);

  std::string to_string() const;

  const Shape& input_shape() const { return input_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  /// Output shape of every layer, in order.
  const std::vector<Shape>& trace() const { return trace_; }
  std::size_t flatten_index() const { return flatten_index_; }
  Index feature_width() const { return layers_[flatten_index_].units; }
  Index num_classes() const { return trace_.back()[0]; }

  bool operator==(const Architecture& other) const {
    return input_ == other.input_ && layers_ == other.layers_;
  }

 private:
  Shape input_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> trace_;
  std::size_t flatten_index_ = 0;
};

/// Called with (layer index, layer output) on every forward pass when set.
template <typename Scalar>
using LayerObserver = std::function<void(std::size_t, const Tensor<Scalar>&)>;

template <typename Scalar>
class Network {
 public:
  using Gradients = std::vector<Tensor<Scalar>>;

  /// All parameters zero.
  explicit Network(Architecture arch) : arch_(std::move(arch)) {
    Shape in = arch_.input_shape();
    for (std::size_t i = 0; i < arch_.layers().size(); ++i) {
      const LayerSpec& spec = arch_.layers()[i];
      Slot slot;
      if (spec.kind == LayerKind::conv) {
        slot.conv.kernels = Tensor<Scalar>({spec.units, in[0], spec.size, spec.size});
        slot.conv.bias = Tensor<Scalar>({spec.units});
      } else if (spec.kind == LayerKind::dense) {
        slot.dense.weights = Tensor<Scalar>({spec.units, in[0]});
        slot.dense.bias = Tensor<Scalar>({spec.units});
      }
      slots_.push_back(std::move(slot));
      in = arch_.trace()[i];
    }
  }

  /// Weights uniform in +-sqrt(6 / (fan_in + fan_out)); biases zero.
  static Network initialized(Architecture arch, std::uint64_t seed) {
    Network net(std::move(arch));
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < net.slots_.size(); ++i) {
      const LayerSpec& spec = net.arch_.layers()[i];
      Tensor<Scalar>* w = nullptr;
      double fan_in = 0, fan_out = 0;
      if (spec.kind == LayerKind::conv) {
        w = &net.slots_[i].conv.kernels;
        const double area = static_cast<double>(spec.size * spec.size);
        fan_in = static_cast<double>(w->dim(1)) * area;
        fan_out = static_cast<double>(w->dim(0)) * area;
      } else if (spec.kind == LayerKind::dense) {
        w = &net.slots_[i].dense.weights;
        fan_in = static_cast<double>(w->dim(1));
        fan_out = static_cast<double>(w->dim(0));
      } else {
        continue;
      }
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (Index j = 0; j < w->size(); ++j) (*w)[j] = static_cast<Scalar>(dist(rng));
    }
    return net;
  }

  const Architecture& architecture() const { return arch_; }

  /// Weights and biases of every conv and dense layer, in layer order.
  std::vector<Tensor<Scalar>*> parameters() {
    std::vector<Tensor<Scalar>*> out;
    for (std::size_t i = 0; i < slots_.size(); ++i) {
      const LayerKind kind = arch_.layers()[i].kind;
      if (kind == LayerKind::conv) {
        out.push_back(&slots_[i].conv.kernels);
        out.push_back(&slots_[i].conv.bias);
      } else if (kind == LayerKind::dense) {
        out.push_back(&slots_[i].dense.weights);
        out.push_back(&slots_[i].dense.bias);
      }
    }
    return out;
  }

  std::vector<const Tensor<Scalar>*> parameters() const {
    auto mut = const_cast<Network*>(this)->parameters();
    return {mut.begin(), mut.end()};
  }

  Index parameter_count() const {
    Index n = 0;
    for (const auto* p : parameters()) n += p->size();
    return n;
  }

  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> flat_parameters() const {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> flat(parameter_count());
    Index off = 0;
    for (const auto* p : parameters()) {
      flat.segment(off, p->size()) = p->values();
      off += p->size();
    }
    return flat;
  }

  void set_flat_parameters(const Eigen::Ref<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>& flat) {
    if (flat.size() != parameter_count()) {
      throw Error(Errc::shape_error, "flat parameter vector has wrong length");
    }
    Index off = 0;
    for (auto* p : parameters()) {
      p->values() = flat.segment(off, p->size());
      off += p->size();
    }
  }

  Gradients zero_gradients() const {
    Gradients g;
    for (const auto* p : parameters()) g.emplace_back(p->shape());
    return g;
  }

  template <typename Other>
  Network<Other> cast() const {
    Network<Other> out(arch_);
    auto src = parameters();
    auto dst = out.parameters();
    for (std::size_t i = 0; i < src.size(); ++i) *dst[i] = src[i]->template cast<Other>();
    return out;
  }

  void set_observer(LayerObserver<Scalar> observer) { observer_ = std::move(observer); }

  Tensor<Scalar> input_from(const Eigen::Ref<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>& matrix) const {
    const Shape& in = arch_.input_shape();
    if (in[0] != 1 || matrix.rows() != in[1] || matrix.cols() != in[2]) {
      throw Error(Errc::shape_error, std::to_string(matrix.rows()) + "x" +
                                         std::to_string(matrix.cols()) +
                                         " matrix does not fit network input " + shape_string(in));
    }
    Tensor<Scalar> t(in);
    Index i = 0;
    for (Index r = 0; r < matrix.rows(); ++r) {
      for (Index c = 0; c < matrix.cols(); ++c) t[i++] = static_cast<Scalar>(matrix(r, c));
    }
    return t;
  }

  /// Activations after the last pooling layer, flattened row-major.
  Tensor<Scalar> features(const Tensor<Scalar>& input) const {
    check_input(input);
    Tensor<Scalar> x = input;
    for (std::size_t i = 0; i <= arch_.flatten_index(); ++i) x = apply(i, x, nullptr);
    return x;
  }

  Tensor<Scalar> logits(const Tensor<Scalar>& input) const {
    Tensor<Scalar> x = features(input);
    for (std::size_t i = arch_.flatten_index() + 1; i < slots_.size(); ++i) x = apply(i, x, nullptr);
    return x;
  }

  Tensor<Scalar> probabilities(const Tensor<Scalar>& input) const { return softmax(logits(input)); }

  Index predict(const Tensor<Scalar>& input) const {
    Index best = 0;
    logits(input).values().maxCoeff(&best);
    return best;
  }

  struct Step {
    Scalar loss{};
    Index predicted = 0;
  };

  /// Forward + backward for one sample; writes parameter gradients of the
  /// cross-entropy loss into `grads` (overwriting).
  Step backprop(const Tensor<Scalar>& input, Index target, Gradients& grads) const {
    check_input(input);
    const std::size_t n = slots_.size();
    std::vector<Tensor<Scalar>> inputs;
    std::vector<PoolMask> masks(n);
    inputs.reserve(n);
    Tensor<Scalar> x = input;
    for (std::size_t i = 0; i < n; ++i) {
      inputs.push_back(x);
      x = apply(i, x, &masks[i]);
    }
    const auto sm = softmax_cross_entropy(x, target);
    Step step{sm.loss, 0};
    x.values().maxCoeff(&step.predicted);

    if (grads.size() != parameters().size()) grads = zero_gradients();
    std::size_t slot_param = grads.size();
    Tensor<Scalar> g = sm.logit_grad;
    for (std::size_t i = n; i-- > 0;) {
      const LayerSpec& spec = arch_.layers()[i];
      switch (spec.kind) {
        case LayerKind::conv: {
          auto cg = conv2d_backward(slots_[i].conv, inputs[i], g, i > 0);
          slot_param -= 2;
          grads[slot_param] = std::move(cg.kernels);
          grads[slot_param + 1] = std::move(cg.bias);
          g = std::move(cg.input);
          break;
        }
        case LayerKind::dense: {
          auto dg = dense_backward(slots_[i].dense, inputs[i], g);
          slot_param -= 2;
          grads[slot_param] = std::move(dg.weights);
          grads[slot_param + 1] = std::move(dg.bias);
          g = std::move(dg.input);
          break;
        }
        case LayerKind::relu:
          g = relu_backward(inputs[i], g);
          break;
        case LayerKind::pool:
          g = maxpool_backward(masks[i], g);
          break;
        case LayerKind::flatten:
          g = unflatten(g, inputs[i].shape());
          break;
      }
    }
    return step;
  }

 private:
  struct Slot {
    ConvLayer<Scalar> conv;
    DenseLayer<Scalar> dense;
  };

  void check_input(const Tensor<Scalar>& input) const {
    if (input.shape() != arch_.input_shape()) {
      throw Error(Errc::shape_error, "input " + shape_string(input.shape()) + " vs network input " +
                                         shape_string(arch_.input_shape()));
    }
  }

  Tensor<Scalar> apply(std::size_t i, const Tensor<Scalar>& x, PoolMask* mask) const {
    const LayerSpec& spec = arch_.layers()[i];
    Tensor<Scalar> y;
    switch (spec.kind) {
      case LayerKind::conv: y = conv2d_forward(x, slots_[i].conv); break;
      case LayerKind::relu: y = relu(x); break;
      case LayerKind::pool: {
        auto r = maxpool_forward(x, PoolLayer{spec.size});
        if (mask) *mask = std::move(r.mask);
        y = std::move(r.output);
        break;
      }
      case LayerKind::flatten: y = flatten(x); break;
      case LayerKind::dense: y = dense_forward(x, slots_[i].dense); break;
    }
    if (observer_) observer_(i, y);
    return y;
  }

  Architecture arch_;
  std::vector<Slot> slots_;
  LayerObserver<Scalar> observer_;
};

}  // namespace rt
