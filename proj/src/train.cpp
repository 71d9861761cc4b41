#include "t3time/train.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "t3time/errors.hpp"

namespace t3time {

// ------------------------------------------------------------ loss and metrics

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError("mse_loss: prediction " + shape_str(pred.shape()) + " vs target " +
                         shape_str(target.shape()));
  }
  auto d = sub(pred, target);
  return mean_all(mul(d, d));
}

template Tensor<float> mse_loss(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> mse_loss(const Tensor<double>&, const Tensor<double>&);

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double s = 0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

namespace {

void require_same_size(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(what) + ": " + std::to_string(a.size()) + " predictions vs " +
                         std::to_string(b.size()) + " targets");
  }
  if (a.empty()) throw DimensionError(std::string(what) + ": empty input");
}

}  // namespace

double mse_metric(std::span<const double> pred, std::span<const double> target) {
  require_same_size(pred, target, "mse");
  std::vector<double> sq(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) sq[i] = (pred[i] - target[i]) * (pred[i] - target[i]);
  return pairwise_sum(sq) / static_cast<double>(sq.size());
}

double mae_metric(std::span<const double> pred, std::span<const double> target) {
  require_same_size(pred, target, "mae");
  std::vector<double> ab(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) ab[i] = std::abs(pred[i] - target[i]);
  return pairwise_sum(ab) / static_cast<double>(ab.size());
}

// ------------------------------------------------------------ optimizer

template <typename T>
Adam<T>::Adam(ParamRegistry<T>& params, AdamConfig cfg) : params_(&params), cfg_(cfg) {
  for (const auto& p : params.params()) {
    m_.emplace_back(p.tensor.numel(), 0.0);
    v_.emplace_back(p.tensor.numel(), 0.0);
  }
}

template <typename T>
void Adam<T>::step() {
  auto& ps = params_->params();
  if (ps.size() != m_.size()) throw ContractError("parameter set changed after the optimizer was built");
  for (const auto& p : ps) {
    if (!p.tensor.has_grad()) throw ContractError("parameter '" + p.name + "' has no gradient");
  }
  ++steps_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
  const double shrink = 1.0 - cfg_.lr * cfg_.weight_decay;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    auto w = ps[i].tensor.mutable_values();
    auto g = ps[i].tensor.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      const double gk = static_cast<double>(g[k]);
      m[k] = cfg_.beta1 * m[k] + (1.0 - cfg_.beta1) * gk;
      v[k] = cfg_.beta2 * v[k] + (1.0 - cfg_.beta2) * gk * gk;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      const double updated = static_cast<double>(w[k]) * shrink - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      w[k] = static_cast<T>(updated);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

// ------------------------------------------------------------ prompt source

PromptSource PromptSource::stub(std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw ConfigError("prompt embedding dimension must be positive");
  PromptSource s;
  s.stub_.emplace(dim, seed);
  return s;
}

PromptSource PromptSource::store(EmbeddingStore store) {
  PromptSource s;
  s.store_.emplace(std::move(store));
  return s;
}

std::size_t PromptSource::dim() const { return store_ ? store_->dim() : stub_->dim(); }

template <typename T>
Tensor<T> PromptSource::embeddings(const WindowBatch& batch) const {
  const std::size_t b = batch.batch, n = batch.variables, d = dim();
  std::vector<T> out(b * n * d);
  if (store_) {
    if (store_->num_variables() != n) {
      throw DimensionError("embedding store has " + std::to_string(store_->num_variables()) +
                           " variables, data has " + std::to_string(n));
    }
    for (std::size_t i = 0; i < b; ++i) {
      const std::size_t w = batch.window_indices[i];
      if (w >= store_->num_windows()) {
        throw DimensionError("embedding store holds " + std::to_string(store_->num_windows()) +
                             " windows, window " + std::to_string(w) + " requested");
      }
      for (std::size_t v = 0; v < n; ++v) {
        auto row = store_->lookup(w, v);
        std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>((i * n + v) * d));
      }
    }
  } else {
    const std::size_t l = batch.lookback;
    std::vector<float> buf(n * d);
    for (std::size_t i = 0; i < b; ++i) {
      std::span<const double> window(batch.x_norm.data() + i * n * l, n * l);
      std::span<const double> markers;
      if (!batch.time_markers.empty()) markers = {batch.time_markers.data() + i * l * kMarkerDim, l * kMarkerDim};
      stub_->embed(window, n, l, markers, buf);
      std::copy(buf.begin(), buf.end(), out.begin() + static_cast<std::ptrdiff_t>(i * n * d));
    }
  }
  return Tensor<T>({b, n, d}, std::move(out));
}

template Tensor<float> PromptSource::embeddings<float>(const WindowBatch&) const;
template Tensor<double> PromptSource::embeddings<double>(const WindowBatch&) const;

// ------------------------------------------------------------ training

template <typename T>
EvalResult evaluate(T3TimeModel<T>& model, const WindowDataset& data, const PromptSource& prompts,
                    std::size_t batch_size, bool keep_forecasts) {
  if (data.horizon() != model.config().pred_len || data.lookback() != model.config().seq_len) {
    throw CheckpointError("model expects L=" + std::to_string(model.config().seq_len) +
                          ", L_p=" + std::to_string(model.config().pred_len) + "; data windows are L=" +
                          std::to_string(data.lookback()) + ", L_p=" + std::to_string(data.horizon()));
  }
  EvalResult r;
  r.windows = data.size();
  if (r.windows == 0) throw InsufficientDataError("evaluation set has no complete window");
  if (batch_size == 0) batch_size = 1;
  NoGradGuard no_grad;
  std::vector<double> sq, ab, sq_raw, ab_raw;
  std::size_t count = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, data.size() - start);
    const auto wb = data.range(start, len);
    const auto pred = model.forward(wb.x_tensor<T>(), prompts.embeddings<T>(wb), false);
    std::vector<double> y(pred.values().begin(), pred.values().end());
    const auto raw = denormalize_forecast(y, wb.batch, wb.horizon, wb.variables, wb.mean, wb.std_dev);
    std::vector<double> e2(y.size()), e1(y.size()), r2(y.size()), r1(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double d = y[i] - wb.target_norm[i];
      const double dr = raw[i] - wb.target_raw[i];
      e2[i] = d * d;
      e1[i] = std::abs(d);
      r2[i] = dr * dr;
      r1[i] = std::abs(dr);
    }
    sq.push_back(pairwise_sum(e2));
    ab.push_back(pairwise_sum(e1));
    sq_raw.push_back(pairwise_sum(r2));
    ab_raw.push_back(pairwise_sum(r1));
    count += y.size();
    if (keep_forecasts) r.forecast_raw.insert(r.forecast_raw.end(), raw.begin(), raw.end());
  }
  const double c = static_cast<double>(count);
  r.mse = pairwise_sum(sq) / c;
  r.mae = pairwise_sum(ab) / c;
  r.mse_raw = pairwise_sum(sq_raw) / c;
  r.mae_raw = pairwise_sum(ab_raw) / c;
  return r;
}

template <typename T>
TrainResult train_model(T3TimeModel<T>& model, const WindowDataset& train, const WindowDataset* val,
                        const PromptSource& prompts, const TrainConfig& cfg, const StepCallback& on_step) {
  if (train.size() == 0) throw InsufficientDataError("training set has no complete window");
  if (cfg.batch_size == 0) throw ConfigError("batch size must be positive");
  if (train.horizon() != model.config().pred_len || train.lookback() != model.config().seq_len) {
    throw ConfigError("training windows do not match the model's lookback/horizon");
  }
  const bool has_val = val != nullptr && val->size() > 0;
  model.reseed_dropout(cfg.seed);
  Adam<T> opt(model.registry(), cfg.adam);
  const CounterRng shuffle_root = CounterRng(cfg.seed).split("shuffle");

  TrainResult res;
  res.best_val_mse = std::numeric_limits<double>::infinity();
  res.best = make_checkpoint(model);
  std::size_t since_best = 0;
  std::vector<std::size_t> order(train.size());
  bool out_of_steps = false;

  for (std::size_t epoch = 1; epoch <= cfg.epochs && !out_of_steps; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    CounterRng rng = shuffle_root.split(epoch);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    std::vector<double> epoch_losses;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      if (cfg.max_steps > 0 && res.steps >= cfg.max_steps) {
        out_of_steps = true;
        break;
      }
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const auto wb = train.batch(std::span<const std::size_t>(order.data() + start, len));
      model.registry().zero_grad();
      auto pred = model.forward(wb.x_tensor<T>(), prompts.embeddings<T>(wb), true);
      auto loss = mse_loss(pred, wb.target_tensor<T>());
      loss.backward();
      opt.step();
      const double l = static_cast<double>(loss.item());
      if (!std::isfinite(l)) throw ContractError("training loss became non-finite at step " + std::to_string(res.steps + 1));
      res.step_losses.push_back(l);
      epoch_losses.push_back(l);
      ++res.steps;
      if (on_step) on_step(res.steps, l);
    }
    if (epoch_losses.empty()) break;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = pairwise_sum(epoch_losses) / static_cast<double>(epoch_losses.size());
    rec.val_mse = has_val ? evaluate(model, *val, prompts, cfg.eval_batch).mse
                          : std::numeric_limits<double>::quiet_NaN();
    res.epochs.push_back(rec);

    const bool improved = !has_val || rec.val_mse < res.best_val_mse;
    if (improved) {
      res.best_val_mse = has_val ? rec.val_mse : res.best_val_mse;
      res.best_epoch = epoch;
      res.best = make_checkpoint(model);
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      res.early_stopped = true;
      break;
    }
  }
  if (!has_val) res.best_val_mse = std::numeric_limits<double>::quiet_NaN();
  load_parameters(model, res.best);
  return res;
}

template EvalResult evaluate(T3TimeModel<float>&, const WindowDataset&, const PromptSource&, std::size_t, bool);
template EvalResult evaluate(T3TimeModel<double>&, const WindowDataset&, const PromptSource&, std::size_t, bool);
template TrainResult train_model(T3TimeModel<float>&, const WindowDataset&, const WindowDataset*,
                                 const PromptSource&, const TrainConfig&, const StepCallback&);
template TrainResult train_model(T3TimeModel<double>&, const WindowDataset&, const WindowDataset*,
                                 const PromptSource&, const TrainConfig&, const StepCallback&);

// ------------------------------------------------------------ reports

namespace {

double mean_of(const std::vector<SeedResult>& seeds, double EvalResult::*field) {
  if (seeds.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0;
  for (const auto& r : seeds) s += r.test.*field;
  return s / static_cast<double>(seeds.size());
}

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

double HorizonReport::mean_mse() const { return mean_of(seeds, &EvalResult::mse); }
double HorizonReport::mean_mae() const { return mean_of(seeds, &EvalResult::mae); }
double HorizonReport::mean_mse_raw() const { return mean_of(seeds, &EvalResult::mse_raw); }
double HorizonReport::mean_mae_raw() const { return mean_of(seeds, &EvalResult::mae_raw); }

std::string ForecastReport::to_text() const {
  std::ostringstream os;
  os << "command=" << command << '\n' << "dataset=" << dataset << '\n';
  std::istringstream cfg(config_echo);
  for (std::string line; std::getline(cfg, line);) {
    if (!line.empty() && line[0] != '#') os << "config." << line << '\n';
  }
  for (const auto& h : horizons) {
    for (const auto& s : h.seeds) {
      os << "horizon=" << h.horizon << " seed=" << s.seed << " mse=" << num(s.test.mse)
         << " mae=" << num(s.test.mae) << " mse_raw=" << num(s.test.mse_raw) << " mae_raw=" << num(s.test.mae_raw)
         << " windows=" << s.test.windows << " steps=" << s.steps << " best_epoch=" << s.best_epoch << '\n';
    }
    os << "horizon=" << h.horizon << " mean_mse=" << num(h.mean_mse()) << " mean_mae=" << num(h.mean_mae())
       << " mean_mse_raw=" << num(h.mean_mse_raw()) << " mean_mae_raw=" << num(h.mean_mae_raw()) << '\n';
  }
  return os.str();
}

std::string ForecastReport::table() const {
  std::ostringstream os;
  char line[128];
  std::snprintf(line, sizeof(line), "%-10s %12s %12s\n", "horizon", "mse", "mae");
  os << line;
  double sum_mse = 0, sum_mae = 0;
  for (const auto& h : horizons) {
    std::snprintf(line, sizeof(line), "%-10zu %12.6f %12.6f\n", h.horizon, h.mean_mse(), h.mean_mae());
    os << line;
    sum_mse += h.mean_mse();
    sum_mae += h.mean_mae();
  }
  if (!horizons.empty()) {
    const double k = static_cast<double>(horizons.size());
    std::snprintf(line, sizeof(line), "%-10s %12.6f %12.6f\n", "avg", sum_mse / k, sum_mae / k);
    os << line;
  }
  return os.str();
}

std::string ForecastReport::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["dataset"] = dataset;
  j["config"] = config_echo;
  j["wall_seconds"] = wall_seconds;
  auto& hs = j["horizons"] = nlohmann::ordered_json::array();
  for (const auto& h : horizons) {
    nlohmann::ordered_json hj;
    hj["horizon"] = h.horizon;
    hj["mean_mse"] = h.mean_mse();
    hj["mean_mae"] = h.mean_mae();
    hj["mean_mse_raw"] = h.mean_mse_raw();
    hj["mean_mae_raw"] = h.mean_mae_raw();
    for (const auto& s : h.seeds) {
      hj["seeds"].push_back({{"seed", s.seed},
                             {"mse", s.test.mse},
                             {"mae", s.test.mae},
                             {"mse_raw", s.test.mse_raw},
                             {"mae_raw", s.test.mae_raw},
                             {"windows", s.test.windows},
                             {"steps", s.steps},
                             {"best_epoch", s.best_epoch},
                             {"best_val_mse", std::isfinite(s.best_val_mse) ? nlohmann::ordered_json(s.best_val_mse)
                                                                           : nlohmann::ordered_json(nullptr)}});
    }
    hs.push_back(std::move(hj));
  }
  return j.dump(2) + "\n";
}

}  // namespace t3time
