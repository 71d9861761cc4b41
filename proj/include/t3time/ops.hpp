#pragma once

#include <cstddef>
#include <vector>

#include "t3time/rng.hpp"
#include "t3time/tensor.hpp"

// Differentiable primitives. Every function records a backward rule when
// any input requires a gradient and grad mode is on.
//
// Broadcasting is restricted to leading dimensions: in a binary elementwise
// op the smaller operand's shape must equal a trailing suffix of the larger
// one's. matmul broadcasts its batch dimensions numpy-style (size 1 or
// missing). Anything else is a DimensionError.

namespace t3time {

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

/// s * x
template <typename T>
Tensor<T> scale(const Tensor<T>& x, double s);
/// s * x + shift
template <typename T>
Tensor<T> affine(const Tensor<T>& x, double s, double shift);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

/// Max-subtracted softmax along `axis`.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::ptrdiff_t axis);

/// Normalizes each slice along `axis` to zero mean and unit population
/// variance, then applies optional per-element gain and bias (shape {len}).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, std::ptrdiff_t axis, const Tensor<T>& gain,
                     const Tensor<T>& bias, double eps = 1e-5);

template <typename T>
Tensor<T> transpose(const Tensor<T>& x, std::ptrdiff_t axis_a, std::ptrdiff_t axis_b);
template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::ptrdiff_t axis);
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::ptrdiff_t axis, std::size_t start, std::size_t length);

/// Inserts a new axis at position `axis` and repeats the input `count` times along it.
template <typename T>
Tensor<T> expand(const Tensor<T>& x, std::ptrdiff_t axis, std::size_t count);

template <typename T>
Tensor<T> mean(const Tensor<T>& x, std::ptrdiff_t axis, bool keepdim = false);
template <typename T>
Tensor<T> sum_all(const Tensor<T>& x);
template <typename T>
Tensor<T> mean_all(const Tensor<T>& x);

/// Inverted dropout: in training, zeroes each element with probability p and
/// scales survivors by 1/(1-p). Identity otherwise. Throws ConfigError
/// unless 0 <= p < 1.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, CounterRng& rng);

/// Dropout settings threaded through attention and feed-forward blocks.
struct DropoutCtx {
  double p = 0.0;
  bool training = false;
  CounterRng* rng = nullptr;

  template <typename T>
  Tensor<T> apply(const Tensor<T>& x) const {
    if (!training || p == 0.0 || rng == nullptr) return x;
    return dropout(x, p, training, *rng);
  }
};

/// softmax(Q K^T / sqrt(d)) over the key axis; rows sum to one.
template <typename T>
Tensor<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k);

/// softmax(Q K^T / sqrt(d)) V with optional dropout on the weights.
template <typename T>
Tensor<T> scaled_dot_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               const DropoutCtx& drop = {});

}  // namespace t3time
