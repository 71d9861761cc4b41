#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "t3time/data.hpp"
#include "t3time/encoders.hpp"
#include "t3time/model.hpp"

namespace t3time {

// ------------------------------------------------------------ loss and metrics

/// Mean of squared differences over all elements.
template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// Pairwise (cascade) summation; blocks of 8 are summed left to right.
double pairwise_sum(std::span<const double> values);

double mse_metric(std::span<const double> pred, std::span<const double> target);
double mae_metric(std::span<const double> pred, std::span<const double> target);

// ------------------------------------------------------------ optimizer

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-3;
};

/// Adam with decoupled weight decay: p <- p - lr * wd * p, then the
/// bias-corrected Adam update.
template <typename T>
class Adam {
 public:
  Adam(ParamRegistry<T>& params, AdamConfig cfg);

  /// Throws ContractError naming the first registered parameter without a
  /// gradient.
  void step();
  std::size_t steps() const { return steps_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  ParamRegistry<T>* params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t steps_ = 0;
};

// ------------------------------------------------------------ prompt source

/// Where prompt embeddings for a batch come from: a precomputed store
/// indexed by window id, or the deterministic stub embedder.
class PromptSource {
 public:
  static PromptSource stub(std::size_t dim, std::uint64_t seed = 0);
  static PromptSource store(EmbeddingStore store);

  bool is_stub() const { return !store_.has_value(); }
  std::size_t dim() const;

  /// (B, N, d_LLM) embeddings for the windows of a batch. Throws
  /// DimensionError if a store's grid does not cover the batch.
  template <typename T>
  Tensor<T> embeddings(const WindowBatch& batch) const;

 private:
  std::optional<StubEmbedder> stub_;
  std::optional<EmbeddingStore> store_;
};

// ------------------------------------------------------------ training

struct TrainConfig {
  std::size_t batch_size = 32;
  std::size_t epochs = 10;
  std::size_t max_steps = 0;  // 0: no cap
  std::size_t patience = 10;  // 0: early stopping off
  std::size_t eval_batch = 256;
  AdamConfig adam;
  std::uint64_t seed = 1;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_mse = 0;  // NaN without a validation set
};

struct TrainResult {
  std::vector<double> step_losses;
  std::vector<EpochRecord> epochs;
  std::size_t steps = 0;
  std::size_t best_epoch = 0;
  double best_val_mse = 0;
  bool early_stopped = false;
  Checkpoint best;
};

using StepCallback = std::function<void(std::size_t step, double loss)>;

/// Minibatch MSE training with per-epoch shuffling from the seed. After
/// each epoch the validation MSE is measured; the best epoch's parameters
/// are restored at the end. Throws InsufficientDataError when the training
/// set has no windows.
template <typename T>
TrainResult train_model(T3TimeModel<T>& model, const WindowDataset& train, const WindowDataset* val,
                        const PromptSource& prompts, const TrainConfig& cfg, const StepCallback& on_step = {});

struct EvalResult {
  std::size_t windows = 0;
  double mse = 0, mae = 0;          // normalized scale
  double mse_raw = 0, mae_raw = 0;  // original scale
  std::vector<double> forecast_raw; // (windows, L_p, N) when requested
};

/// Eval-mode pass over every window in order.
template <typename T>
EvalResult evaluate(T3TimeModel<T>& model, const WindowDataset& data, const PromptSource& prompts,
                    std::size_t batch_size = 256, bool keep_forecasts = false);

// ------------------------------------------------------------ reports

struct SeedResult {
  std::uint64_t seed = 0;
  EvalResult test;
  std::size_t steps = 0;
  std::size_t best_epoch = 0;
  double best_val_mse = 0;
};

struct HorizonReport {
  std::size_t horizon = 0;
  std::vector<SeedResult> seeds;

  double mean_mse() const;
  double mean_mae() const;
  double mean_mse_raw() const;
  double mean_mae_raw() const;
};

struct ForecastReport {
  std::string command;
  std::string dataset;
  std::string config_echo;
  std::vector<HorizonReport> horizons;
  double wall_seconds = 0;

  /// Deterministic key=value lines (no timing).
  std::string to_text() const;
  /// Per-horizon table with a final average row.
  std::string table() const;
  /// JSON summary including wall-clock time.
  std::string to_json() const;
};

extern template class Adam<float>;
extern template class Adam<double>;

}  // namespace t3time
