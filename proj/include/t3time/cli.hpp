#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "t3time/data.hpp"
#include "t3time/model.hpp"
#include "t3time/train.hpp"

namespace t3time {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitCheckpoint = 4,
  kExitStore = 5,
};

/// Everything one command needs. Built from defaults, the dataset's preset
/// row, an optional key=value file and finally command-line flags.
struct RunConfig {
  std::string command;
  std::string path;  // emb-info target
  std::string data;
  std::string dataset_name;
  ModelConfig model;  // pred_len and seed are taken from the lists below
  std::vector<std::size_t> horizons;
  std::vector<std::uint64_t> seeds{1};
  std::string embeddings = "stub";  // "stub" or "store:PATH"
  std::optional<double> few_shot;
  NormMode norm = NormMode::instance;
  TrainConfig train;
  std::string out = "t3time_out";
  std::vector<std::string> checkpoints;

  /// Applies one setting; throws ConfigError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Flat key=value lines accepted back by set().
  std::string serialize() const;
  /// Throws ConfigError when the configuration cannot run.
  void validate() const;
};

/// Non-empty, non-comment lines of a key=value file.
std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text,
                                                                  const std::string& source);

/// Horizons evaluated by default for a dataset.
std::vector<std::size_t> default_horizons(const std::string& dataset);

/// Store path for one split: "{split}" is substituted, a directory resolves
/// to "<dir>/<split>.t3emb".
std::string store_path_for(const std::string& pattern, const std::string& split);

/// Labels of the design-variant rows, full model first.
const std::vector<std::string>& ablation_labels();
Ablation ablation_for_row(std::size_t row);

/// Entry point shared by the executable and tests.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace t3time
