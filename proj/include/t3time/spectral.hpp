#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "t3time/layers.hpp"

namespace t3time {

/// Discrete Fourier transform of a real sequence of fixed length n, in
/// double precision. Power-of-two lengths use an iterative radix-2 FFT;
/// other lengths go through Bluestein's chirp-z reformulation on a padded
/// power-of-two FFT. No 1/n scaling.
class RealFft {
 public:
  explicit RealFft(std::size_t n);

  std::size_t size() const { return n_; }
  /// Non-redundant bin count, floor(n/2) + 1.
  std::size_t bins() const { return n_ / 2 + 1; }

  std::vector<std::complex<double>> transform(std::span<const double> x) const;
  std::vector<double> magnitude(std::span<const double> x) const;

 private:
  std::size_t n_;
  std::size_t padded_ = 0;                       // Bluestein only
  std::vector<std::complex<double>> chirp_;      // exp(-i pi k^2 / n)
  std::vector<std::complex<double>> kernel_fft_; // FFT of the conjugate chirp
};

/// In-place iterative radix-2 FFT; size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& a, bool inverse);

struct SpectralConfig {
  std::size_t lookback = 96;
  std::size_t channels = 64;
  std::size_t encoder_heads = 4;
  std::size_t ffn_hidden = 256;
  std::size_t pool_hidden = 64;
  double dropout = 0.0;

  std::size_t bins() const { return lookback / 2 + 1; }
  void validate() const;
};

/// Magnitude spectra with rows ordered (batch, variable).
template <typename T>
struct SpectrumBatch {
  Tensor<T> magnitudes;  // (B*N, L_f), constant
  std::size_t batch = 0;
  std::size_t variables = 0;
};

/// |DFT| along the last axis of a (B, N, L) tensor. The result is a graph
/// constant: no gradient flows back into x.
template <typename T>
SpectrumBatch<T> rfft_magnitude(const Tensor<T>& x);

template <typename T>
struct PooledSpectrum {
  Tensor<T> pooled;   // (B, N, C)
  Tensor<T> weights;  // (B*N, L_f), rows on the simplex
};

/// Frequency branch: each bin magnitude becomes a C-dim token through a
/// bias-free ReLU projection, one pre-norm encoder block mixes the bins,
/// and a learned softmax over bins pools them into one vector per variable.
template <typename T>
class FrequencyBranch {
 public:
  FrequencyBranch(ParamRegistry<T>& reg, const std::string& name, const SpectralConfig& cfg,
                  CounterRng& rng);

  /// (B*N, L_f) spectrum -> (B*N, L_f, C) encoded tokens.
  Tensor<T> encode(const SpectrumBatch<T>& spec, const DropoutCtx& drop) const;
  /// Tokens before the encoder block: relu(F W_f).
  Tensor<T> project(const SpectrumBatch<T>& spec) const;
  /// (B*N, L_f, C) tokens -> pooled (B, N, C) plus the pooling weights.
  PooledSpectrum<T> pool(const Tensor<T>& tokens, std::size_t batch, std::size_t variables) const;
  /// x (B, N, L) -> (B, N, C).
  Tensor<T> operator()(const Tensor<T>& x, const DropoutCtx& drop) const;

  const SpectralConfig& config() const { return cfg_; }
  void collect(std::vector<Tensor<T>>& out) const;

  Tensor<T> bin_projection;  // W_f, (1, C)
  EncoderBlock<T> encoder;
  Linear<T> pool_hidden;     // W_1, (C, d)
  Linear<T> pool_score;      // W_2, (d, 1)

 private:
  SpectralConfig cfg_;
};

extern template class FrequencyBranch<float>;
extern template class FrequencyBranch<double>;

}  // namespace t3time
