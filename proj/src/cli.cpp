#include "t3time/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "t3time/errors.hpp"

namespace fs = std::filesystem;

namespace t3time {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(v);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

std::string fmt_real(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, p);
}

template <typename V>
std::string join(const std::vector<V>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? "," : "") << xs[i];
  return os.str();
}

Ablation parse_ablation(const std::string& v) {
  Ablation a;
  for (const auto& raw : split_list(lower(v))) {
    if (raw == "none") continue;
    if (raw == "frequency") a.use_frequency = false;
    else if (raw == "multihead_cma" || raw == "cma") a.use_multihead_cma = false;
    else if (raw == "residual") a.use_residual = false;
    else if (raw == "gating") a.use_gating = false;
    else throw ConfigError("ablate: unknown component '" + raw + "' (frequency, multihead_cma, residual, gating)");
  }
  return a;
}

std::string ablation_text(const Ablation& a) {
  std::vector<std::string> off;
  if (!a.use_frequency) off.emplace_back("frequency");
  if (!a.use_multihead_cma) off.emplace_back("multihead_cma");
  if (!a.use_residual) off.emplace_back("residual");
  if (!a.use_gating) off.emplace_back("gating");
  return off.empty() ? "none" : join(off);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

fs::path ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir);
  return fs::path(dir);
}

std::string checkpoint_name(std::size_t horizon, std::uint64_t seed) {
  return "h" + std::to_string(horizon) + "_seed" + std::to_string(seed) + ".t3ckpt";
}

void apply_preset(RunConfig& run, const PresetRow& row) {
  run.model.seq_len = row.seq_len;
  run.model.channels = row.channels;
  run.model.cma_heads = row.heads;
  run.model.attention_heads = row.heads;
  run.model.encoder_layers = row.encoder_layers;
  run.model.decoder_layers = row.decoder_layers;
  run.model.dropout = row.dropout;
  run.train.batch_size = row.batch_size;
  run.train.epochs = row.epochs;
  run.train.adam.lr = row.learning_rate;
  run.train.adam.weight_decay = row.weight_decay;
}

// ------------------------------------------------------------ data plumbing

struct Splits {
  SeriesTable table;
  std::array<Segment, 3> segments;
};

Splits load_splits(const RunConfig& run, std::size_t lookback) {
  if (!fs::exists(run.data)) throw ConfigError("data file not found: " + run.data);
  Splits s;
  s.table = load_csv(run.data);
  const auto counts = standard_split(run.dataset_name, s.table.rows());
  s.segments = split(s.table, counts, lookback);
  return s;
}

struct Datasets {
  std::optional<WindowDataset> train, val, test;
};

Datasets make_datasets(const RunConfig& run, const Splits& s, std::size_t lookback, std::size_t horizon,
                       bool with_train) {
  std::optional<GlobalStats> stats;
  if (run.norm == NormMode::global) stats = column_stats(s.segments[0].table);
  Datasets d;
  if (with_train) {
    SeriesTable train = s.segments[0].table;
    if (run.few_shot) train = few_shot_subset(train, *run.few_shot, lookback, horizon);
    d.train.emplace(std::move(train), lookback, horizon, run.norm, stats);
    if (d.train->size() == 0) {
      throw InsufficientDataError("training segment has no complete window for L=" + std::to_string(lookback) +
                                  ", L_p=" + std::to_string(horizon));
    }
    d.val.emplace(s.segments[1].table, lookback, horizon, run.norm, stats);
  }
  d.test.emplace(s.segments[2].table, lookback, horizon, run.norm, stats);
  return d;
}

EmbeddingStore load_store(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("embedding store not found: " + path);
  return EmbeddingStore::load(path);
}

struct Prompts {
  std::optional<PromptSource> train, val, test;
};

Prompts make_prompts(const RunConfig& run, std::size_t llm_dim, bool with_train) {
  Prompts p;
  if (run.embeddings == "stub") {
    p.train = p.val = p.test = PromptSource::stub(llm_dim);
    return p;
  }
  const std::string pattern = run.embeddings.substr(6);
  auto get = [&](const char* split) {
    auto store = load_store(store_path_for(pattern, split));
    if (store.dim() != llm_dim) {
      throw ConfigError(std::string("embedding store for ") + split + " has dimension " +
                        std::to_string(store.dim()) + ", model expects llm_dim=" + std::to_string(llm_dim));
    }
    return PromptSource::store(std::move(store));
  };
  if (with_train) {
    p.train = get("train");
    p.val = get("val");
  }
  p.test = get("test");
  return p;
}

ModelConfig model_for(const RunConfig& run, std::size_t variables, std::size_t horizon, std::uint64_t seed) {
  ModelConfig cfg = run.model;
  cfg.variables = variables;
  cfg.pred_len = horizon;
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

void log_epochs(std::ostream& err, const std::string& tag, const TrainResult& res) {
  for (const auto& e : res.epochs) {
    char line[160];
    std::snprintf(line, sizeof(line), "%s epoch %zu train_loss=%.6f val_mse=%.6f\n", tag.c_str(), e.epoch,
                  e.train_loss, e.val_mse);
    err << line;
  }
  if (res.early_stopped) err << tag << " early stop, best epoch " << res.best_epoch << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

SeedResult train_one(const RunConfig& run, const ModelConfig& cfg, const Datasets& d, const Prompts& p,
                     std::ostream& err, const fs::path* ckpt_path) {
  T3TimeModel<float> model(cfg);
  TrainConfig tc = run.train;
  tc.seed = cfg.seed;
  const auto res = train_model(model, *d.train, d.val->size() > 0 ? &*d.val : nullptr, *p.train, tc);
  log_epochs(err, "h=" + std::to_string(cfg.pred_len) + " seed=" + std::to_string(cfg.seed), res);
  if (ckpt_path) write_checkpoint(make_checkpoint(model), *ckpt_path);
  SeedResult sr;
  sr.seed = cfg.seed;
  sr.steps = res.steps;
  sr.best_epoch = res.best_epoch;
  sr.best_val_mse = res.best_val_mse;
  sr.test = evaluate(model, *d.test, *p.test, run.train.eval_batch);
  return sr;
}

// ------------------------------------------------------------ commands

void echo_config(const RunConfig& run, const fs::path& dir) {
  write_text(dir / (run.command + "_config.txt"), run.serialize());
}

int cmd_train(RunConfig& run, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const Splits s = load_splits(run, run.model.seq_len);
  run.model.variables = s.table.variables();
  for (auto h : run.horizons) model_for(run, s.table.variables(), h, run.seeds.front());
  const fs::path dir = ensure_out_dir(run.out);
  echo_config(run, dir);

  const Prompts p = make_prompts(run, run.model.llm_dim, true);
  ForecastReport report;
  report.command = "train";
  report.dataset = run.dataset_name;
  report.config_echo = run.serialize();
  for (auto h : run.horizons) {
    const Datasets d = make_datasets(run, s, run.model.seq_len, h, true);
    HorizonReport hr;
    hr.horizon = h;
    for (auto seed : run.seeds) {
      const ModelConfig cfg = model_for(run, s.table.variables(), h, seed);
      const fs::path ckpt = dir / checkpoint_name(h, seed);
      hr.seeds.push_back(train_one(run, cfg, d, p, err, &ckpt));
    }
    report.horizons.push_back(std::move(hr));
  }
  report.wall_seconds = seconds_since(t0);
  write_text(dir / "report.txt", report.to_text() + report.table());
  write_text(dir / "summary.json", report.to_json());
  out << report.table();
  return kExitOk;
}

int cmd_eval(RunConfig& run, const std::set<std::string>& explicit_keys, std::ostream& out, std::ostream&) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::string> paths = run.checkpoints;
  if (paths.empty()) {
    for (auto h : run.horizons) {
      for (auto seed : run.seeds) paths.push_back((fs::path(run.out) / checkpoint_name(h, seed)).string());
    }
  }
  std::vector<Checkpoint> ckpts;
  for (const auto& path : paths) {
    if (!fs::exists(path)) throw CheckpointError("checkpoint not found: " + path);
    ckpts.push_back(read_checkpoint(path));
  }
  if (!fs::exists(run.data)) throw ConfigError("data file not found: " + run.data);
  const fs::path dir = ensure_out_dir(run.out);
  echo_config(run, dir);
  const SeriesTable table = load_csv(run.data);

  ForecastReport report;
  report.command = "eval";
  report.dataset = run.dataset_name;
  report.config_echo = run.serialize();
  for (std::size_t i = 0; i < ckpts.size(); ++i) {
    const ModelConfig& cfg = ckpts[i].config;
    if (cfg.variables != table.variables()) {
      throw CheckpointError(paths[i] + ": checkpoint has " + std::to_string(cfg.variables) + " variables, data has " +
                            std::to_string(table.variables()));
    }
    if (explicit_keys.count("seq_len") && cfg.seq_len != run.model.seq_len) {
      throw CheckpointError(paths[i] + ": checkpoint lookback " + std::to_string(cfg.seq_len) +
                            " differs from requested " + std::to_string(run.model.seq_len));
    }
    if (explicit_keys.count("pred_len") &&
        std::find(run.horizons.begin(), run.horizons.end(), cfg.pred_len) == run.horizons.end()) {
      throw CheckpointError(paths[i] + ": checkpoint horizon " + std::to_string(cfg.pred_len) +
                            " is not among the requested horizons");
    }
    T3TimeModel<float> model(cfg);
    load_parameters(model, ckpts[i]);
    const auto counts = standard_split(run.dataset_name, table.rows());
    Splits s{table, split(table, counts, cfg.seq_len)};
    const Datasets d = make_datasets(run, s, cfg.seq_len, cfg.pred_len, false);
    const Prompts p = make_prompts(run, cfg.llm_dim, false);
    SeedResult sr;
    sr.seed = cfg.seed;
    sr.test = evaluate(model, *d.test, *p.test, run.train.eval_batch);
    auto it = std::find_if(report.horizons.begin(), report.horizons.end(),
                           [&](const HorizonReport& h) { return h.horizon == cfg.pred_len; });
    if (it == report.horizons.end()) {
      report.horizons.push_back({cfg.pred_len, {}});
      it = std::prev(report.horizons.end());
    }
    it->seeds.push_back(sr);
  }
  report.wall_seconds = seconds_since(t0);
  write_text(dir / "eval_report.txt", report.to_text() + report.table());
  write_text(dir / "eval_summary.json", report.to_json());
  out << report.table();
  return kExitOk;
}

int cmd_ablate(RunConfig& run, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  const Splits s = load_splits(run, run.model.seq_len);
  run.model.variables = s.table.variables();
  const std::size_t h = run.horizons.front();
  for (std::size_t row = 0; row < ablation_labels().size(); ++row) {
    RunConfig variant = run;
    variant.model.ablation = ablation_for_row(row);
    model_for(variant, s.table.variables(), h, run.seeds.front());
  }
  const fs::path dir = ensure_out_dir(run.out);
  echo_config(run, dir);

  const Prompts p = make_prompts(run, run.model.llm_dim, true);
  const Datasets d = make_datasets(run, s, run.model.seq_len, h, true);
  std::ostringstream table;
  char line[160];
  std::snprintf(line, sizeof(line), "%-26s %12s %12s %12s\n", "variant", "params", "mse", "mae");
  table << line;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t row = 0; row < ablation_labels().size(); ++row) {
    RunConfig variant = run;
    variant.model.ablation = ablation_for_row(row);
    HorizonReport hr;
    hr.horizon = h;
    std::size_t params = 0;
    for (auto seed : run.seeds) {
      const ModelConfig cfg = model_for(variant, s.table.variables(), h, seed);
      params = T3TimeModel<float>(cfg).parameter_count();
      hr.seeds.push_back(train_one(variant, cfg, d, p, err, nullptr));
    }
    const auto& label = ablation_labels()[row];
    std::snprintf(line, sizeof(line), "%-26s %12zu %12.6f %12.6f\n", label.c_str(), params, hr.mean_mse(),
                  hr.mean_mae());
    table << line;
    rows.push_back({{"variant", label},
                    {"ablate", ablation_text(variant.model.ablation)},
                    {"params", params},
                    {"mse", hr.mean_mse()},
                    {"mae", hr.mean_mae()}});
  }
  nlohmann::ordered_json j;
  j["command"] = "ablate";
  j["dataset"] = run.dataset_name;
  j["horizon"] = h;
  j["seeds"] = run.seeds;
  j["variants"] = rows;
  j["wall_seconds"] = seconds_since(t0);
  write_text(dir / "ablation.txt", table.str());
  write_text(dir / "ablation.json", j.dump(2) + "\n");
  out << table.str();
  return kExitOk;
}

double row_norm(std::span<const float> v) {
  double s = 0;
  for (float x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s);
}

int cmd_emb_info(const RunConfig& run, std::ostream& out) {
  std::string path = run.path;
  if (path.empty() && run.embeddings.rfind("store:", 0) == 0) path = run.embeddings.substr(6);
  if (path.empty()) throw ConfigError("emb-info needs a store path");
  const auto store = load_store(path);
  out << "magic=T3EMB\n"
      << "version=" << EmbeddingStore::kVersion << '\n'
      << "windows=" << store.num_windows() << '\n'
      << "variables=" << store.num_variables() << '\n'
      << "dim=" << store.dim() << '\n'
      << "payload_bytes=" << std::uint64_t{store.num_windows()} * store.num_variables() * store.dim() * 4 << '\n';
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(store.checksum()));
  out << "checksum=fnv1a64:" << buf << '\n';
  if (store.num_windows() == 0 || store.num_variables() == 0) {
    out << "first_norm=none\nlast_norm=none\n";
  } else {
    std::snprintf(buf, sizeof(buf), "%.6f", row_norm(store.lookup(0, 0)));
    out << "first_norm=" << buf << '\n';
    std::snprintf(buf, sizeof(buf), "%.6f",
                  row_norm(store.lookup(store.num_windows() - 1, store.num_variables() - 1)));
    out << "last_norm=" << buf << '\n';
  }
  return kExitOk;
}

struct FlagKey {
  std::string flag, key, help;
};

const std::vector<FlagKey>& flag_keys() {
  static const std::vector<FlagKey> k = {
      {"--data", "data", "CSV file: timestamp column then one column per variable"},
      {"--dataset-name", "dataset_name", "preset and split rules to use (default: data file stem)"},
      {"--seq-len", "seq_len", "lookback length L"},
      {"--pred-len", "pred_len", "horizon(s), comma separated"},
      {"--channel", "channels", "model width C"},
      {"--heads", "heads", "cross-modal and attention head count"},
      {"--cma-heads", "cma_heads", "cross-modal head count only"},
      {"--enc-layers", "encoder_layers", "encoder blocks per branch"},
      {"--dec-layers", "decoder_layers", "decoder blocks"},
      {"--dropout", "dropout", "dropout rate in [0, 1)"},
      {"--batch", "batch_size", "training batch size"},
      {"--epochs", "epochs", "maximum epochs"},
      {"--lr", "lr", "Adam learning rate"},
      {"--weight-decay", "weight_decay", "decoupled weight decay"},
      {"--seed", "seed", "seed(s), comma separated"},
      {"--emb", "emb", "stub | store:PATH (file, directory or pattern with {split})"},
      {"--few-shot", "few_shot", "fraction of training windows to keep"},
      {"--ablate", "ablate", "none | frequency | multihead_cma | residual | gating"},
      {"--out", "out", "output directory"},
      {"--max-steps", "max_steps", "optimizer step cap (0: none)"},
      {"--patience", "patience", "early-stopping patience in epochs (0: off)"},
      {"--norm", "norm", "instance | global"},
      {"--ckpt", "ckpt", "checkpoint file(s) for eval, comma separated"},
  };
  return k;
}

}  // namespace

// ------------------------------------------------------------ RunConfig

void RunConfig::set(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "data") data = v;
  else if (key == "dataset_name") dataset_name = v;
  else if (key == "pred_len") {
    horizons.clear();
    for (const auto& x : split_list(v)) horizons.push_back(static_cast<std::size_t>(to_u64(key, x)));
    if (horizons.empty()) throw ConfigError("pred_len: at least one horizon is required");
  } else if (key == "seed") {
    seeds.clear();
    for (const auto& x : split_list(v)) seeds.push_back(to_u64(key, x));
    if (seeds.empty()) throw ConfigError("seed: at least one seed is required");
  } else if (key == "heads") {
    model.cma_heads = model.attention_heads = static_cast<std::size_t>(to_u64(key, v));
  } else if (key == "emb") embeddings = v;
  else if (key == "few_shot") {
    if (v.empty() || v == "none") few_shot.reset();
    else few_shot = to_real(key, v);
  } else if (key == "ablate") model.ablation = parse_ablation(v);
  else if (key == "norm") {
    try {
      norm = parse_norm_mode(v);
    } catch (const std::exception& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "batch_size") train.batch_size = static_cast<std::size_t>(to_u64(key, v));
  else if (key == "epochs") train.epochs = static_cast<std::size_t>(to_u64(key, v));
  else if (key == "max_steps") train.max_steps = static_cast<std::size_t>(to_u64(key, v));
  else if (key == "patience") train.patience = static_cast<std::size_t>(to_u64(key, v));
  else if (key == "eval_batch") train.eval_batch = static_cast<std::size_t>(to_u64(key, v));
  else if (key == "lr") train.adam.lr = to_real(key, v);
  else if (key == "weight_decay") train.adam.weight_decay = to_real(key, v);
  else if (key == "out") out = v;
  else if (key == "ckpt") checkpoints = split_list(v);
  else if (!model.set(key, v)) throw ConfigError("unknown setting '" + key + "'");
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  os << "# t3time " << command << '\n'
     << "data=" << data << '\n'
     << "dataset_name=" << dataset_name << '\n'
     << "pred_len=" << join(horizons) << '\n'
     << "seed=" << join(seeds) << '\n'
     << "emb=" << embeddings << '\n'
     << "few_shot=" << (few_shot ? fmt_real(*few_shot) : std::string("none")) << '\n'
     << "norm=" << norm_mode_name(norm) << '\n'
     << "batch_size=" << train.batch_size << '\n'
     << "epochs=" << train.epochs << '\n'
     << "max_steps=" << train.max_steps << '\n'
     << "patience=" << train.patience << '\n'
     << "eval_batch=" << train.eval_batch << '\n'
     << "lr=" << fmt_real(train.adam.lr) << '\n'
     << "weight_decay=" << fmt_real(train.adam.weight_decay) << '\n'
     << "out=" << out << '\n'
     << "ckpt=" << join(checkpoints) << '\n';
  std::istringstream model_lines(model.serialize());
  for (std::string line; std::getline(model_lines, line);) {
    if (line.rfind("pred_len=", 0) == 0 || line.rfind("seed=", 0) == 0) continue;
    os << line << '\n';
  }
  return os.str();
}

void RunConfig::validate() const {
  if (command == "emb-info") return;
  if (data.empty()) throw ConfigError("--data is required");
  if (horizons.empty()) throw ConfigError("at least one horizon is required");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (embeddings != "stub" && (embeddings.rfind("store:", 0) != 0 || embeddings.size() <= 6)) {
    throw ConfigError("emb must be 'stub' or 'store:PATH', got '" + embeddings + "'");
  }
  if (few_shot && !(*few_shot > 0.0 && *few_shot <= 1.0)) {
    throw ConfigError("few-shot fraction must lie in (0, 1]");
  }
  if (train.batch_size == 0) throw ConfigError("batch size must be positive");
  if (train.epochs == 0) throw ConfigError("epochs must be positive");
  if (train.eval_batch == 0) throw ConfigError("eval_batch must be positive");
  if (!(train.adam.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (train.adam.weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
  for (auto h : horizons) {
    if (h == 0) throw ConfigError("horizons must be positive");
  }
}

std::vector<std::pair<std::string, std::string>> parse_key_values(const std::string& text,
                                                                  const std::string& source) {
  std::vector<std::pair<std::string, std::string>> out;
  std::istringstream is(text);
  std::size_t lineno = 0;
  for (std::string line; std::getline(is, line);) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key=value");
    }
    out.emplace_back(trim(std::string_view(t).substr(0, eq)), trim(std::string_view(t).substr(eq + 1)));
  }
  return out;
}

std::vector<std::size_t> default_horizons(const std::string& dataset) {
  if (lower(dataset) == "ili") return {24, 36, 48, 60};
  return {96, 192, 336, 720};
}

std::string store_path_for(const std::string& pattern, const std::string& split) {
  const auto at = pattern.find("{split}");
  if (at != std::string::npos) {
    std::string p = pattern;
    p.replace(at, 7, split);
    return p;
  }
  if (fs::is_directory(pattern)) return (fs::path(pattern) / (split + ".t3emb")).string();
  return pattern;
}

const std::vector<std::string>& ablation_labels() {
  static const std::vector<std::string> labels = {"T3Time", "w/o Frequency Module", "w/o Multihead CMA",
                                                  "w/o Residual Connection", "w/o Gating Mechanism"};
  return labels;
}

Ablation ablation_for_row(std::size_t row) {
  Ablation a;
  switch (row) {
    case 1: a.use_frequency = false; break;
    case 2: a.use_multihead_cma = false; break;
    case 3: a.use_residual = false; break;
    case 4: a.use_gating = false; break;
    default: break;
  }
  return a;
}

// ------------------------------------------------------------ entry point

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tri-modal time-series forecaster", "t3time"};
  std::string command, path, config_file;
  app.add_option("command", command, "train | eval | ablate | emb-info")
      ->required()
      ->check(CLI::IsMember({"train", "eval", "ablate", "emb-info"}));
  app.add_option("path", path, "store file for emb-info");
  app.add_option("--config", config_file, "key=value file; flags override its values");
  std::map<std::string, std::string> flag_values;
  for (const auto& f : flag_keys()) app.add_option(f.flag, flag_values[f.key], f.help);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitConfig;
  }

  try {
    std::vector<std::pair<std::string, std::string>> settings;
    if (!config_file.empty()) {
      std::ifstream in(config_file, std::ios::binary);
      if (!in) throw ConfigError("config file not found: " + config_file);
      std::ostringstream ss;
      ss << in.rdbuf();
      settings = parse_key_values(ss.str(), config_file);
    }
    for (const auto& f : flag_keys()) {
      if (app.get_option(f.flag)->count() > 0) settings.emplace_back(f.key, flag_values[f.key]);
    }
    std::set<std::string> explicit_keys;
    std::string data, name;
    for (const auto& [k, v] : settings) {
      explicit_keys.insert(k);
      if (k == "data") data = v;
      if (k == "dataset_name") name = v;
    }
    if (name.empty() && !data.empty()) name = fs::path(data).stem().string();

    RunConfig run;
    run.command = command;
    run.path = path;
    run.dataset_name = name;
    if (const PresetRow* row = find_preset(name)) apply_preset(run, *row);
    run.horizons = default_horizons(name);
    for (const auto& [k, v] : settings) run.set(k, v);
    run.validate();

    if (command == "train") return cmd_train(run, out, err);
    if (command == "eval") return cmd_eval(run, explicit_keys, out, err);
    if (command == "ablate") return cmd_ablate(run, out, err);
    return cmd_emb_info(run, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DimensionError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kExitCheckpoint;
  } catch (const FormatError& e) {
    err << "store format error: " << e.what() << '\n';
    return kExitStore;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace t3time
