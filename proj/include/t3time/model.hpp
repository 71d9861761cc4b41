#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "t3time/encoders.hpp"
#include "t3time/fusion.hpp"
#include "t3time/layers.hpp"
#include "t3time/spectral.hpp"

namespace t3time {

/// Architecture switches for the design-variant study.
struct Ablation {
  bool use_frequency = true;
  bool use_multihead_cma = true;
  bool use_residual = true;
  bool use_gating = true;

  bool operator==(const Ablation&) const = default;
};

struct ModelConfig {
  std::size_t seq_len = 96;        // L
  std::size_t pred_len = 96;       // L_p
  std::size_t variables = 7;       // N
  std::size_t channels = 64;       // C
  std::size_t cma_heads = 4;       // H
  std::size_t encoder_layers = 1;
  std::size_t decoder_layers = 1;
  std::size_t attention_heads = 4; // per encoder/decoder attention block
  double dropout = 0.1;
  std::size_t llm_dim = 768;       // d_LLM
  std::size_t prompt_dim = 0;      // E_p, 0 -> channels
  std::size_t ffn_hidden = 0;      // 0 -> 4 * channels
  std::size_t pool_hidden = 0;     // 0 -> channels
  std::size_t gate_hidden = 0;     // 0 -> channels
  double horizon_norm = 720.0;
  bool time_positional_encoding = false;
  Ablation ablation;
  std::uint64_t seed = 1;

  /// Copy with defaults filled in and ablations applied (H = 1 without
  /// multi-head alignment).
  ModelConfig resolved() const;
  /// Throws ConfigError on inconsistent values.
  void validate() const;

  /// Flat key=value lines; round-trips through parse().
  std::string serialize() const;
  static ModelConfig parse(const std::string& text);
  /// Applies one key=value setting; returns false for unknown keys.
  bool set(const std::string& key, const std::string& value);
};

/// Rows of the model-configuration table for the benchmark datasets.
struct PresetRow {
  std::string dataset;
  std::size_t encoder_layers, decoder_layers, seq_len, channels, heads;
  double dropout, learning_rate, weight_decay;
  std::size_t batch_size, epochs, variables;
};
const std::vector<PresetRow>& preset_table();
const PresetRow* find_preset(const std::string& dataset);
ModelConfig config_from_preset(const PresetRow& row, std::size_t pred_len);

/// Intermediate tensors of one forward pass.
template <typename T>
struct ForwardTrace {
  Tensor<T> f_tilde;        // (B, N, C) or undefined without the frequency branch
  Tensor<T> z_t;            // (B, N, C)
  Tensor<T> gate;           // (B, C) or undefined
  Tensor<T> z_g;            // (B, C, N)
  Tensor<T> prompt;         // (B, E_p, N)
  std::vector<Tensor<T>> heads;
  Tensor<T> head_weights;   // (B, N, H) or undefined
  Tensor<T> lambda;         // (B, C, N)
  Tensor<T> theta;          // (B, C, N)
  Tensor<T> z_d;            // (B, N, C)
  Tensor<T> forecast;       // (B, L_p, N)
};

/// Tri-modal forecaster: frequency and time encodings blended by a
/// horizon-aware gate, aligned with prompt encodings by several
/// cross-attention heads, mixed back per channel and decoded into a direct
/// multi-horizon forecast.
template <typename T>
class T3TimeModel {
  ModelConfig cfg_;
  ParamRegistry<T> registry_;
  CounterRng dropout_rng_;

 public:
  explicit T3TimeModel(const ModelConfig& cfg);

  T3TimeModel(const T3TimeModel&) = delete;
  T3TimeModel& operator=(const T3TimeModel&) = delete;

  /// x_norm (B, N, L), prompt_emb (B, N, d_LLM) -> (B, L_p, N).
  Tensor<T> forward(const Tensor<T>& x_norm, const Tensor<T>& prompt_emb, bool training = false,
                    ForwardTrace<T>* trace = nullptr);

  // Stages, in forward order.
  Tensor<T> encode_frequency(const Tensor<T>& x_norm, const DropoutCtx& drop) const;
  Tensor<T> encode_time(const Tensor<T>& x_norm, const DropoutCtx& drop) const;
  Tensor<T> encode_prompt(const Tensor<T>& prompt_emb, const DropoutCtx& drop) const;
  /// f_tilde may be undefined when the frequency branch is ablated.
  Tensor<T> fuse(const Tensor<T>& f_tilde, const Tensor<T>& z_t, ForwardTrace<T>* trace = nullptr) const;
  /// z_g (B, C, N), prompt (B, E_p, N) -> forecast (B, L_p, N).
  Tensor<T> align_and_decode(const Tensor<T>& z_g, const Tensor<T>& prompt, const DropoutCtx& drop,
                             ForwardTrace<T>* trace = nullptr) const;
  /// Theta (B, C, N) -> (B, L_p, N).
  Tensor<T> decode(const Tensor<T>& theta, const DropoutCtx& drop, ForwardTrace<T>* trace = nullptr) const;

  const ModelConfig& config() const { return cfg_; }
  ParamRegistry<T>& registry() { return registry_; }
  const ParamRegistry<T>& registry() const { return registry_; }
  std::size_t parameter_count() const { return registry_.element_count(); }

  /// Every stored tensor found by walking the components directly, without
  /// consulting the registry.
  std::vector<Tensor<T>> stored_tensors() const;

  /// Parameter totals per component, by the same direct walk.
  std::map<std::string, std::size_t> component_counts() const;

  void reseed_dropout(std::uint64_t seed);

  std::optional<FrequencyBranch<T>> frequency;
  TimeEncoder<T> time;
  PromptEncoder<T> prompt;
  std::optional<HorizonGate<T>> gate;
  std::vector<CmaHead<T>> heads;
  std::optional<HeadGate<T>> head_gate;
  std::optional<ChannelResidual<T>> residual;
  std::vector<DecoderBlock<T>> decoder;
  Linear<T> projection;  // W_p, b_p: (C, L_p)
};

// ------------------------------------------------------------ checkpoints

struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct Checkpoint {
  ModelConfig config;
  std::vector<CheckpointTensor> tensors;
};

/// Layout, little-endian: magic "T3CKPT", u16 version, u32 config length,
/// config text (key=value lines), u32 tensor count, then per tensor
/// u32 name length, name, u32 rank, u32 dims..., f32 payload.
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes);
Checkpoint read_checkpoint(const std::filesystem::path& path);
void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

template <typename T>
Checkpoint make_checkpoint(const T3TimeModel<T>& model);
/// Copies checkpoint values into the model; throws CheckpointError on any
/// name, order or shape mismatch.
template <typename T>
void load_parameters(T3TimeModel<T>& model, const Checkpoint& ckpt);

extern template class T3TimeModel<float>;
extern template class T3TimeModel<double>;

}  // namespace t3time
