#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "t3time/layers.hpp"

namespace t3time {

/// Hidden width of the head-importance network.
inline constexpr std::size_t kHeadGateHidden = 128;

template <typename T>
struct GateOutput {
  Tensor<T> gate;   // (B, C), entries in (0, 1)
  Tensor<T> fused;  // (B, C, N)
};

/// g * f + (1 - g) * z with g of shape (B, C) broadcast over variables;
/// f and z are (B, N, C). Returns (B, C, N).
template <typename T>
Tensor<T> gated_mix(const Tensor<T>& gate, const Tensor<T>& f_tilde, const Tensor<T>& z_t);

/// Horizon-aware gate. The variable-mean of the time encoding plus the
/// normalized horizon feed a two-layer MLP whose sigmoid output weights
/// frequency against time features per channel.
template <typename T>
class HorizonGate {
 public:
  HorizonGate(ParamRegistry<T>& reg, const std::string& name, std::size_t channels,
              std::size_t hidden, double horizon_norm, CounterRng& rng);

  /// (B, C) gate for a given forecast length.
  Tensor<T> gate(const Tensor<T>& z_t, std::size_t horizon) const;
  GateOutput<T> operator()(const Tensor<T>& f_tilde, const Tensor<T>& z_t, std::size_t horizon) const;

  void collect(std::vector<Tensor<T>>& out) const;

  Linear<T> hidden;  // W_3, (C+1, d_g)
  Linear<T> output;  // W_4, (d_g, C)
  double horizon_norm = 720.0;
};

/// One cross-modal alignment head: fused time-frequency features query the
/// prompt features, variables acting as tokens.
template <typename T>
struct CmaHead {
  Linear<T> query;  // C -> C
  Linear<T> key;    // E_p -> C
  Linear<T> value;  // E_p -> C

  static CmaHead create(ParamRegistry<T>& reg, const std::string& name, std::size_t channels,
                        std::size_t prompt_dim, CounterRng& rng);
  /// z_g (B, C, N), z_llm (B, E_p, N) -> (B, C, N).
  Tensor<T> operator()(const Tensor<T>& z_g, const Tensor<T>& z_llm, const DropoutCtx& drop = {}) const;
  void collect(std::vector<Tensor<T>>& out) const;
};

template <typename T>
struct HeadFusionOutput {
  Tensor<T> fused;    // (B, C, N)
  Tensor<T> weights;  // (B, N, H), each row on the simplex
};

/// Adaptive head fusion: per (sample, variable) softmax weights over heads
/// from W_6 relu(LN(W_5 U)), then the weighted sum of head outputs.
template <typename T>
class HeadGate {
 public:
  HeadGate(ParamRegistry<T>& reg, const std::string& name, std::size_t channels, std::size_t heads,
           CounterRng& rng);

  HeadFusionOutput<T> operator()(const std::vector<Tensor<T>>& heads) const;
  void collect(std::vector<Tensor<T>>& out) const;

  Linear<T> hidden;     // W_5, (H*C, 128)
  LayerNorm<T> norm;    // over the 128 hidden units
  Linear<T> score;      // W_6, (128, H)
  std::size_t heads = 1;
};

/// Fusion for an arbitrary weight tensor (B, N, H); exposed so that the
/// convex-combination step can be checked apart from the scoring network.
template <typename T>
Tensor<T> combine_heads(const std::vector<Tensor<T>>& heads, const Tensor<T>& weights);

/// Theta = gamma * Lambda + (1 - gamma) * Z_g per channel, gamma = sigmoid(raw).
template <typename T>
class ChannelResidual {
 public:
  ChannelResidual(ParamRegistry<T>& reg, const std::string& name, std::size_t channels);

  Tensor<T> gamma() const { return sigmoid(gamma_raw); }
  /// lambda, z_g: (B, C, N).
  Tensor<T> operator()(const Tensor<T>& lambda, const Tensor<T>& z_g) const;
  void collect(std::vector<Tensor<T>>& out) const { out.push_back(gamma_raw); }

  Tensor<T> gamma_raw;  // (C), initialized at 0
};

extern template class HorizonGate<float>;
extern template class HorizonGate<double>;
extern template struct CmaHead<float>;
extern template struct CmaHead<double>;
extern template class HeadGate<float>;
extern template class HeadGate<double>;
extern template class ChannelResidual<float>;
extern template class ChannelResidual<double>;

}  // namespace t3time
