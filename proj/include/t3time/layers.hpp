#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "t3time/ops.hpp"
#include "t3time/rng.hpp"
#include "t3time/tensor.hpp"

namespace t3time {

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

/// Ordered set of trainable tensors. Registration order is the checkpoint
/// order and the optimizer traversal order; names are unique.
template <typename T>
class ParamRegistry {
 public:
  Tensor<T> add(std::string name, Tensor<T> tensor);

  const std::vector<NamedParam<T>>& params() const { return params_; }
  std::vector<NamedParam<T>>& params() { return params_; }
  const Tensor<T>* find(std::string_view name) const;
  std::size_t size() const { return params_.size(); }
  std::size_t element_count() const;
  void zero_grad();

 private:
  std::vector<NamedParam<T>> params_;
};

/// Uniform in +-sqrt(6 / (fan_in + fan_out)).
template <typename T>
Tensor<T> glorot_uniform(std::size_t fan_in, std::size_t fan_out, CounterRng& rng);

/// y = x W + b, W of shape (in, out). Bias is optional.
template <typename T>
struct Linear {
  Tensor<T> weight;
  Tensor<T> bias;

  static Linear create(ParamRegistry<T>& reg, const std::string& name, std::size_t in,
                       std::size_t out, bool with_bias, CounterRng& rng);
  Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(std::vector<Tensor<T>>& out) const;
};

template <typename T>
struct LayerNorm {
  Tensor<T> gain;
  Tensor<T> bias;
  double eps = 1e-5;

  static LayerNorm create(ParamRegistry<T>& reg, const std::string& name, std::size_t dim);
  Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, -1, gain, bias, eps); }
  void collect(std::vector<Tensor<T>>& out) const;
};

/// Multi-head attention over (batch, tokens, dim) inputs; dim is split
/// evenly across heads.
template <typename T>
struct MultiHeadAttention {
  Linear<T> query, key, value, output;
  std::size_t heads = 1;

  static MultiHeadAttention create(ParamRegistry<T>& reg, const std::string& name, std::size_t dim,
                                   std::size_t heads, CounterRng& rng);
  Tensor<T> operator()(const Tensor<T>& q_in, const Tensor<T>& kv_in, const DropoutCtx& drop) const;
  void collect(std::vector<Tensor<T>>& out) const;
};

/// Position-wise two-layer ReLU network with dropout on the hidden layer.
template <typename T>
struct FeedForward {
  Linear<T> in, out;

  static FeedForward create(ParamRegistry<T>& reg, const std::string& name, std::size_t dim,
                            std::size_t hidden, CounterRng& rng);
  Tensor<T> operator()(const Tensor<T>& x, const DropoutCtx& drop) const;
  void collect(std::vector<Tensor<T>>& o) const;
};

/// Pre-norm self-attention block:
///   x += MHA(LN(x)); x += FFN(LN(x))
template <typename T>
struct EncoderBlock {
  LayerNorm<T> attn_norm, ffn_norm;
  MultiHeadAttention<T> attn;
  FeedForward<T> ffn;

  static EncoderBlock create(ParamRegistry<T>& reg, const std::string& name, std::size_t dim,
                             std::size_t heads, std::size_t ffn_hidden, CounterRng& rng);
  Tensor<T> operator()(const Tensor<T>& x, const DropoutCtx& drop) const;
  void collect(std::vector<Tensor<T>>& out) const;
};

/// Pre-norm decoder block attending to itself and to `memory`:
///   x += SelfMHA(LN(x)); x += CrossMHA(LN(x), memory); x += FFN(LN(x))
template <typename T>
struct DecoderBlock {
  LayerNorm<T> self_norm, cross_norm, ffn_norm;
  MultiHeadAttention<T> self_attn, cross_attn;
  FeedForward<T> ffn;

  static DecoderBlock create(ParamRegistry<T>& reg, const std::string& name, std::size_t dim,
                             std::size_t heads, std::size_t ffn_hidden, CounterRng& rng);
  Tensor<T> operator()(const Tensor<T>& x, const Tensor<T>& memory, const DropoutCtx& drop) const;
  void collect(std::vector<Tensor<T>>& out) const;
};

template <typename T>
Tensor<T> run_encoder(const std::vector<EncoderBlock<T>>& blocks, Tensor<T> x, const DropoutCtx& drop) {
  for (const auto& b : blocks) x = b(x, drop);
  return x;
}

#define T3TIME_EXTERN_LAYERS(T)               \
  extern template class ParamRegistry<T>;      \
  extern template struct Linear<T>;            \
  extern template struct LayerNorm<T>;         \
  extern template struct MultiHeadAttention<T>; \
  extern template struct FeedForward<T>;       \
  extern template struct EncoderBlock<T>;      \
  extern template struct DecoderBlock<T>;

T3TIME_EXTERN_LAYERS(float)
T3TIME_EXTERN_LAYERS(double)
#undef T3TIME_EXTERN_LAYERS

}  // namespace t3time
