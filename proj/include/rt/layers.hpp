#pragma once

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rt/tensor.hpp"

namespace rt {

// ---------------------------------------------------------------------------
// Convolution: valid padding, stride 1, lowered to GEMM through im2col.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct ConvLayer {
  Tensor<Scalar> kernels;  // [out_ch, in_ch, k, k]
  Tensor<Scalar> bias;     // [out_ch]

  Index out_channels() const { return kernels.dim(0); }
  Index in_channels() const { return kernels.dim(1); }
  Index kernel_size() const { return kernels.dim(2); }
};

template <typename Scalar>
struct ConvGrads {
  Tensor<Scalar> input;  // empty when not requested
  Tensor<Scalar> kernels;
  Tensor<Scalar> bias;
};

namespace detail {

template <typename Scalar>
void check_conv_shapes(const Tensor<Scalar>& input, const ConvLayer<Scalar>& layer) {
  if (layer.kernels.rank() != 4 || layer.kernels.dim(2) != layer.kernels.dim(3) ||
      layer.bias.size() != layer.kernels.dim(0)) {
    throw Error(Errc::shape_error, "conv kernels must be [out,in,k,k] with matching bias");
  }
  if (input.rank() != 3 || input.dim(0) != layer.in_channels()) {
    throw Error(Errc::shape_error, "conv input " + shape_string(input.shape()) + " vs kernels " +
                                       shape_string(layer.kernels.shape()));
  }
  const Index k = layer.kernel_size();
  if (input.dim(1) < k || input.dim(2) < k) {
    throw Error(Errc::shape_error, "conv input " + shape_string(input.shape()) +
                                       " smaller than kernel " + std::to_string(k));
  }
}

/// Rows index output positions (y * out_w + x); columns index (c, dy, dx).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> im2col(const Tensor<Scalar>& input, Index k) {
  const Index channels = input.dim(0), height = input.dim(1), width = input.dim(2);
  const Index out_h = height - k + 1, out_w = width - k + 1;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> cols(out_h * out_w, channels * k * k);
  for (Index c = 0; c < channels; ++c) {
    for (Index dy = 0; dy < k; ++dy) {
      for (Index dx = 0; dx < k; ++dx) {
        Scalar* col = cols.col((c * k + dy) * k + dx).data();
        for (Index y = 0; y < out_h; ++y) {
          std::memcpy(col + y * out_w, input.data() + (c * height + y + dy) * width + dx,
                      sizeof(Scalar) * out_w);
        }
      }
    }
  }
  return cols;
}

}  // namespace detail

/// out[o][y][x] = bias[o] + sum_{i,dy,dx} input[i][y+dy][x+dx] * kernels[o][i][dy][dx]
template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& input, const ConvLayer<Scalar>& layer) {
  detail::check_conv_shapes(input, layer);
  const Index k = layer.kernel_size(), out_ch = layer.out_channels();
  const Index fan = layer.in_channels() * k * k;
  const Index out_h = input.dim(1) - k + 1, out_w = input.dim(2) - k + 1;

  const auto cols = detail::im2col(input, k);
  Tensor<Scalar> out({out_ch, out_h, out_w});
  auto out_m = out.matrix(out_h * out_w, out_ch);
  out_m.noalias() = cols * layer.kernels.matrix(fan, out_ch);
  out_m.rowwise() += layer.bias.values().transpose();
  return out;
}

template <typename Scalar>
ConvGrads<Scalar> conv2d_backward(const ConvLayer<Scalar>& layer, const Tensor<Scalar>& input,
                                  const Tensor<Scalar>& upstream, bool want_input_grad = true) {
  detail::check_conv_shapes(input, layer);
  const Index k = layer.kernel_size(), out_ch = layer.out_channels();
  const Index fan = layer.in_channels() * k * k;
  const Index out_h = input.dim(1) - k + 1, out_w = input.dim(2) - k + 1;
  if (upstream.shape() != Shape{out_ch, out_h, out_w}) {
    throw Error(Errc::shape_error, "conv upstream gradient " + shape_string(upstream.shape()));
  }

  const auto g = upstream.matrix(out_h * out_w, out_ch);
  const auto cols = detail::im2col(input, k);

  ConvGrads<Scalar> grads;
  grads.kernels = Tensor<Scalar>(layer.kernels.shape());
  grads.kernels.matrix(fan, out_ch).noalias() = cols.transpose() * g;
  grads.bias = Tensor<Scalar>({out_ch}, g.colwise().sum().transpose());

  if (want_input_grad) {
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> dcols =
        g * layer.kernels.matrix(fan, out_ch).transpose();
    grads.input = Tensor<Scalar>(input.shape());
    const Index channels = input.dim(0);
    for (Index c = 0; c < channels; ++c) {
      for (Index dy = 0; dy < k; ++dy) {
        for (Index dx = 0; dx < k; ++dx) {
          const Scalar* col = dcols.col((c * k + dy) * k + dx).data();
          for (Index y = 0; y < out_h; ++y) {
            Scalar* row = &grads.input(c, y + dy, dx);
            const Scalar* src = col + y * out_w;
            for (Index x = 0; x < out_w; ++x) row[x] += src[x];
          }
        }
      }
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Max pooling, stride == window. Ties go to the first element in row-major
// scan order so backward routing is deterministic.
// ---------------------------------------------------------------------------

struct PoolLayer {
  Index window = 2;
};

struct PoolMask {
  Shape input_shape;
  std::vector<Index> argmax;  // flat input index per output cell
};

template <typename Scalar>
struct PoolResult {
  Tensor<Scalar> output;
  PoolMask mask;
};

template <typename Scalar>
PoolResult<Scalar> maxpool_forward(const Tensor<Scalar>& input, const PoolLayer& layer) {
  const Index w = layer.window;
  if (w < 1 || input.rank() != 3 || input.dim(1) < w || input.dim(2) < w) {
    throw Error(Errc::shape_error, "maxpool window " + std::to_string(w) + " on input " +
                                       shape_string(input.shape()));
  }
  const Index channels = input.dim(0), height = input.dim(1), width = input.dim(2);
  const Index out_h = height / w, out_w = width / w;

  PoolResult<Scalar> r;
  r.output = Tensor<Scalar>({channels, out_h, out_w});
  r.mask.input_shape = input.shape();
  r.mask.argmax.resize(static_cast<std::size_t>(channels * out_h * out_w));

  std::size_t cell = 0;
  for (Index c = 0; c < channels; ++c) {
    for (Index y = 0; y < out_h; ++y) {
      for (Index x = 0; x < out_w; ++x, ++cell) {
        Index best = (c * height + y * w) * width + x * w;
        Scalar best_v = input[best];
        for (Index dy = 0; dy < w; ++dy) {
          const Index row = (c * height + y * w + dy) * width + x * w;
          for (Index dx = 0; dx < w; ++dx) {
            if (input[row + dx] > best_v) {
              best_v = input[row + dx];
              best = row + dx;
            }
          }
        }
        r.output[static_cast<Index>(cell)] = best_v;
        r.mask.argmax[cell] = best;
      }
    }
  }
  return r;
}

template <typename Scalar>
Tensor<Scalar> maxpool_backward(const PoolMask& mask, const Tensor<Scalar>& upstream) {
  if (static_cast<std::size_t>(upstream.size()) != mask.argmax.size()) {
    throw Error(Errc::shape_error, "maxpool upstream gradient " + shape_string(upstream.shape()) +
                                       " does not match mask");
  }
  Tensor<Scalar> grad(mask.input_shape);
  for (std::size_t i = 0; i < mask.argmax.size(); ++i) {
    grad[mask.argmax[i]] += upstream[static_cast<Index>(i)];
  }
  return grad;
}

// ---------------------------------------------------------------------------
// Elementwise and reshaping layers.
// ---------------------------------------------------------------------------

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& input) {
  return Tensor<Scalar>(input.shape(), input.values().cwiseMax(Scalar(0)));
}

/// Passes the upstream gradient where the forward input was > 0.
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& upstream) {
  if (input.shape() != upstream.shape()) {
    throw Error(Errc::shape_error, "relu upstream gradient shape mismatch");
  }
  return Tensor<Scalar>(input.shape(),
                        (input.values().array() > Scalar(0)).select(upstream.values(), Scalar(0)));
}

template <typename Scalar>
Tensor<Scalar> flatten(const Tensor<Scalar>& input) {
  return input.reshaped({input.size()});
}

template <typename Scalar>
Tensor<Scalar> unflatten(const Tensor<Scalar>& input, const Shape& shape) {
  return input.reshaped(shape);
}

// ---------------------------------------------------------------------------
// Fully connected layer: out = W x + b with W stored row-major [out, in].
// ---------------------------------------------------------------------------

template <typename Scalar>
struct DenseLayer {
  Tensor<Scalar> weights;  // [out, in]
  Tensor<Scalar> bias;     // [out]

  Index out_features() const { return weights.dim(0); }
  Index in_features() const { return weights.dim(1); }
};

template <typename Scalar>
struct DenseGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weights;
  Tensor<Scalar> bias;
};

template <typename Scalar>
Tensor<Scalar> dense_forward(const Tensor<Scalar>& input, const DenseLayer<Scalar>& layer) {
  const Index n_out = layer.out_features(), n_in = layer.in_features();
  if (input.size() != n_in || layer.bias.size() != n_out) {
    throw Error(Errc::shape_error, "dense layer " + shape_string(layer.weights.shape()) +
                                       " on input " + shape_string(input.shape()));
  }
  // Row-major [out, in] storage is the column-major [in, out] matrix.
  Tensor<Scalar> out({n_out});
  out.values().noalias() = layer.weights.matrix(n_in, n_out).transpose() * input.values();
  out.values() += layer.bias.values();
  return out;
}

template <typename Scalar>
DenseGrads<Scalar> dense_backward(const DenseLayer<Scalar>& layer, const Tensor<Scalar>& input,
                                  const Tensor<Scalar>& upstream) {
  const Index n_out = layer.out_features(), n_in = layer.in_features();
  if (input.size() != n_in || upstream.size() != n_out) {
    throw Error(Errc::shape_error, "dense backward shape mismatch");
  }
  DenseGrads<Scalar> g;
  g.input = Tensor<Scalar>(input.shape());
  g.input.values().noalias() = layer.weights.matrix(n_in, n_out) * upstream.values();
  g.weights = Tensor<Scalar>(layer.weights.shape());
  g.weights.matrix(n_in, n_out).noalias() = input.values() * upstream.values().transpose();
  g.bias = upstream.reshaped({n_out});
  return g;
}

// ---------------------------------------------------------------------------
// Softmax with cross-entropy loss.
// ---------------------------------------------------------------------------

template <typename Scalar>
struct SoftmaxResult {
  Scalar loss{};
  Tensor<Scalar> probs;
  Tensor<Scalar> logit_grad;  // probs - onehot(target)
};

/// Max-shifted softmax; loss is computed as logsumexp(z) - z[target] so it
/// stays finite even when probs[target] underflows.
template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& logits) {
  const Scalar shift = logits.values().maxCoeff();
  typename Tensor<Scalar>::Vector e = (logits.values().array() - shift).exp();
  e /= e.sum();
  return Tensor<Scalar>({logits.size()}, std::move(e));
}

template <typename Scalar>
SoftmaxResult<Scalar> softmax_cross_entropy(const Tensor<Scalar>& logits, Index target) {
  const Index classes = logits.size();
  if (classes < 2) throw Error(Errc::shape_error, "softmax needs at least 2 classes");
  if (target < 0 || target >= classes) {
    throw Error(Errc::invalid_class, "target " + std::to_string(target) + " with " +
                                         std::to_string(classes) + " classes");
  }
  const Scalar shift = logits.values().maxCoeff();
  const auto shifted = (logits.values().array() - shift).eval();
  const auto e = shifted.exp().eval();
  const Scalar total = e.sum();

  SoftmaxResult<Scalar> r;
  r.probs = Tensor<Scalar>({classes}, (e / total).matrix());
  r.loss = std::log(total) - shifted[target];
  r.logit_grad = r.probs;
  r.logit_grad[target] -= Scalar(1);
  return r;
}

// ---------------------------------------------------------------------------
// Optimizer.
// ---------------------------------------------------------------------------

/// v <- momentum * v - lr * g;  p <- p + v
template <typename Scalar>
void sgd_momentum_step(Tensor<Scalar>& params, const Tensor<Scalar>& grads,
                       Tensor<Scalar>& velocity, Scalar lr, Scalar momentum) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw Error(Errc::shape_error, "sgd step: parameter/gradient/velocity sizes differ");
  }
  velocity.values() = momentum * velocity.values() - lr * grads.values();
  params.values() += velocity.values();
}

}  // namespace rt
