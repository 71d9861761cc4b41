#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "t3time/tensor.hpp"

namespace t3time {

// ------------------------------------------------------------ tables

/// Multivariate series: one timestamp (seconds since the Unix epoch, UTC)
/// per row and `names.size()` numeric columns stored row-major.
struct SeriesTable {
  std::vector<std::int64_t> timestamps;
  std::vector<std::string> names;
  std::vector<double> values;

  std::size_t rows() const { return timestamps.size(); }
  std::size_t variables() const { return names.size(); }
  double at(std::size_t row, std::size_t var) const { return values[row * names.size() + var]; }

  /// Contiguous copy of rows [start, start + count).
  SeriesTable slice_rows(std::size_t start, std::size_t count) const;
};

/// Accepts "YYYY-MM-DD", "YYYY-MM-DD HH:MM[:SS]" (or with 'T'), or a plain
/// integer count of seconds.
std::optional<std::int64_t> parse_timestamp(std::string_view text);
std::string format_timestamp(std::int64_t seconds);

/// Header row, then one row per time step: timestamp, N numeric cells.
/// Throws DataError naming the row and column of the first bad cell, or
/// the first row whose timestamp does not increase.
SeriesTable parse_csv(std::string_view text, const std::string& source = "<memory>");
SeriesTable load_csv(const std::filesystem::path& path);
std::string to_csv(const SeriesTable& table);

/// Calendar features of one timestamp in [-0.5, 0.5]:
/// month, day of month, weekday, hour, minute.
inline constexpr std::size_t kMarkerDim = 5;
std::array<double, kMarkerDim> time_marker(std::int64_t seconds);

// ------------------------------------------------------------ splits

/// Rows assigned to each segment before any context is shared.
struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0;
};

/// train = floor(r_train * T), test = floor(r_test * T), val takes the rest.
SplitCounts split_by_ratio(std::size_t total_rows, double train_ratio, double test_ratio);

/// Benchmark conventions: ETTh* 12/4/4 months of hourly rows, ETTm* the
/// same months at 15-minute resolution, anything else 70/10/20 by ratio.
SplitCounts standard_split(const std::string& dataset, std::size_t total_rows);

struct Segment {
  SeriesTable table;
  std::size_t context_rows = 0;  // leading rows borrowed from the previous segment
};

/// Chronological train/val/test segments. With `share_context`, val and
/// test start `lookback` rows early so their first window can draw its
/// lookback from the preceding segment. Throws DataError when the counts
/// exceed the table.
std::array<Segment, 3> split(const SeriesTable& table, const SplitCounts& counts, std::size_t lookback,
                             bool share_context = true);

/// Window start positions admitting a full lookback: rows - L + 1.
std::size_t anchor_count(std::size_t rows, std::size_t lookback);
/// Complete (lookback, target) windows at stride 1: rows - L - L_p + 1.
std::size_t window_count(std::size_t rows, std::size_t lookback, std::size_t horizon);

/// Number of training anchors kept for a few-shot fraction.
std::size_t few_shot_steps(std::size_t train_rows, std::size_t lookback, double fraction);

/// Leading part of the training segment holding the first
/// few_shot_steps(...) anchors. Throws ConfigError for fractions outside
/// (0, 1] and InsufficientDataError when no complete window remains.
SeriesTable few_shot_subset(const SeriesTable& train, double fraction, std::size_t lookback,
                            std::size_t horizon);

// ------------------------------------------------------------ normalization

enum class NormMode { instance, global };
NormMode parse_norm_mode(const std::string& text);
std::string norm_mode_name(NormMode mode);

/// Per-variable z-scores of an N x L window (row per variable), in place.
/// Population statistics; a zero spread is clamped to 1.
void normalize_window(std::span<double> window, std::size_t variables, std::size_t lookback,
                      std::span<double> mean, std::span<double> std_dev);

/// y (B, L_p, N) -> y * std + mean with stats (B, N). Throws DataError on
/// mismatched sizes.
std::vector<double> denormalize_forecast(std::span<const double> y_norm, std::size_t batch,
                                         std::size_t horizon, std::size_t variables,
                                         std::span<const double> mean, std::span<const double> std_dev);

struct GlobalStats {
  std::vector<double> mean, std_dev;
};
/// Per-variable statistics over every row of a table.
GlobalStats column_stats(const SeriesTable& table);

// ------------------------------------------------------------ windows

struct WindowBatch {
  std::size_t batch = 0, variables = 0, lookback = 0, horizon = 0;
  std::vector<double> x_norm;       // (B, N, L)
  std::vector<double> target_norm;  // (B, L_p, N)
  std::vector<double> target_raw;   // (B, L_p, N)
  std::vector<double> mean;         // (B, N)
  std::vector<double> std_dev;      // (B, N)
  std::vector<std::size_t> window_indices;
  std::vector<double> time_markers;  // (B, L, 5)

  template <typename T>
  Tensor<T> x_tensor() const;
  template <typename T>
  Tensor<T> target_tensor() const;
};

/// Stride-1 windows over one segment. Window i covers lookback rows
/// [i, i + L) and targets [i + L, i + L + L_p); i is also the window's id
/// in a prompt-embedding store built for the segment.
class WindowDataset {
 public:
  WindowDataset(SeriesTable table, std::size_t lookback, std::size_t horizon, NormMode mode = NormMode::instance,
                std::optional<GlobalStats> stats = std::nullopt);

  std::size_t size() const { return count_; }
  std::size_t lookback() const { return lookback_; }
  std::size_t horizon() const { return horizon_; }
  std::size_t variables() const { return table_.variables(); }
  const SeriesTable& table() const { return table_; }

  WindowBatch batch(std::span<const std::size_t> indices) const;
  /// Consecutive windows [start, start + count).
  WindowBatch range(std::size_t start, std::size_t count) const;

 private:
  SeriesTable table_;
  std::size_t lookback_, horizon_, count_;
  NormMode mode_;
  GlobalStats stats_;
};

}  // namespace t3time
