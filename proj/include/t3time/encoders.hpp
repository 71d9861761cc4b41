#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "t3time/layers.hpp"

namespace t3time {

// ------------------------------------------------------------ time branch

struct TimeEncoderConfig {
  std::size_t lookback = 96;
  std::size_t channels = 64;
  std::size_t layers = 1;
  std::size_t heads = 4;
  std::size_t ffn_hidden = 256;
  bool positional_encoding = false;  // sinusoidal code over the variable axis
};

/// Linear embedding of each variable's whole lookback (no bias), then a
/// stack of pre-norm encoder blocks with variables as tokens.
template <typename T>
class TimeEncoder {
 public:
  TimeEncoder(ParamRegistry<T>& reg, const std::string& name, const TimeEncoderConfig& cfg,
              CounterRng& rng);

  /// x (B, N, L) -> Z_t = x W_t, (B, N, C).
  Tensor<T> project(const Tensor<T>& x) const;
  /// x (B, N, L) -> encoded (B, N, C).
  Tensor<T> operator()(const Tensor<T>& x, const DropoutCtx& drop) const;

  void collect(std::vector<Tensor<T>>& out) const;

  Tensor<T> projection;  // (L, C)
  std::vector<EncoderBlock<T>> blocks;

 private:
  TimeEncoderConfig cfg_;
};

/// Standard sinusoidal position code, (tokens, dim).
template <typename T>
Tensor<T> sinusoidal_positions(std::size_t tokens, std::size_t dim);

// ------------------------------------------------------------ embedding store

/// Per-(window, variable) prompt embeddings, immutable after construction.
///
/// On-disk layout, little-endian:
///   bytes 0..5   magic "T3EMB\0"
///   bytes 6..7   u16 version (1)
///   bytes 8..19  u32 num_windows, u32 num_variables, u32 dim
///   then num_windows * num_variables * dim f32 values, row-major
///   (window, variable, dim).
/// Window ids count stride-1 windows of one split segment from 0.
class EmbeddingStore {
 public:
  static constexpr std::uint16_t kVersion = 1;
  static constexpr std::size_t kHeaderBytes = 20;

  EmbeddingStore() = default;
  EmbeddingStore(std::uint32_t num_windows, std::uint32_t num_variables, std::uint32_t dim,
                 std::vector<float> values);

  static EmbeddingStore load(const std::filesystem::path& path);
  static EmbeddingStore parse(std::span<const std::uint8_t> bytes);
  std::vector<std::uint8_t> serialize() const;
  void save(const std::filesystem::path& path) const;

  std::uint32_t num_windows() const { return num_windows_; }
  std::uint32_t num_variables() const { return num_variables_; }
  std::uint32_t dim() const { return dim_; }

  /// Throws std::out_of_range for ids outside the header grid.
  std::span<const float> lookup(std::size_t window, std::size_t variable) const;

  /// FNV-1a 64 over the serialized bytes.
  std::uint64_t checksum() const;

 private:
  std::uint32_t num_windows_ = 0;
  std::uint32_t num_variables_ = 0;
  std::uint32_t dim_ = 0;
  std::vector<float> values_;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

// ------------------------------------------------------------ stub embedder

/// Deterministic stand-in for language-model prompt embeddings. Each
/// variable's window is summarized by (first, last, min, max, last - first)
/// plus, when supplied, the calendar markers of its first and last step;
/// the summary goes through a fixed random projection with a bias row.
class StubEmbedder {
 public:
  static constexpr std::size_t kValueFeatures = 5;
  static constexpr std::size_t kMarkerFeatures = 5;
  static constexpr std::size_t kFeatures = kValueFeatures + 2 * kMarkerFeatures;

  StubEmbedder(std::size_t dim, std::uint64_t seed);

  std::size_t dim() const { return dim_; }

  /// window: N x L values (row per variable); markers: L x 5 or empty.
  /// Writes N x dim values into `out`.
  void embed(std::span<const double> window, std::size_t variables, std::size_t lookback,
             std::span<const double> markers, std::span<float> out) const;

  /// Row added to every embedding; the output for an all-zero window
  /// without markers.
  std::span<const float> bias_row() const { return {weights_.data() + kFeatures * dim_, dim_}; }

 private:
  std::size_t dim_;
  std::vector<float> weights_;  // (kFeatures + 1) x dim, last row is the bias
};

/// Functional form: N x L window (+ optional L x 5 markers) -> (N, dim).
template <typename T>
Tensor<T> stub_embed(std::span<const double> window, std::size_t variables, std::size_t lookback,
                     std::span<const double> markers, std::size_t dim, std::uint64_t seed = 0);

// ------------------------------------------------------------ prompt encoder

struct PromptEncoderConfig {
  std::size_t llm_dim = 768;
  std::size_t prompt_dim = 64;  // E_p
  std::size_t layers = 1;
  std::size_t heads = 4;
  std::size_t ffn_hidden = 256;
};

/// Projects frozen prompt embeddings to E_p, encodes them with variables
/// as tokens and returns them channel-major for cross-modal attention.
template <typename T>
class PromptEncoder {
 public:
  PromptEncoder(ParamRegistry<T>& reg, const std::string& name, const PromptEncoderConfig& cfg,
                CounterRng& rng);

  /// z_llm (B, N, d_LLM) -> (B, E_p, N).
  Tensor<T> operator()(const Tensor<T>& z_llm, const DropoutCtx& drop) const;

  void collect(std::vector<Tensor<T>>& out) const;

  Linear<T> projection;
  std::vector<EncoderBlock<T>> blocks;

 private:
  PromptEncoderConfig cfg_;
};

extern template class TimeEncoder<float>;
extern template class TimeEncoder<double>;
extern template class PromptEncoder<float>;
extern template class PromptEncoder<double>;

}  // namespace t3time
