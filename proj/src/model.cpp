#include "t3time/model.hpp"

#include <bit>
#include <cctype>
#include <charconv>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "t3time/errors.hpp"

namespace t3time {

// ------------------------------------------------------------ config

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

std::string fmt_real(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, p);
}

}  // namespace

ModelConfig ModelConfig::resolved() const {
  ModelConfig r = *this;
  if (r.prompt_dim == 0) r.prompt_dim = r.channels;
  if (r.ffn_hidden == 0) r.ffn_hidden = 4 * r.channels;
  if (r.pool_hidden == 0) r.pool_hidden = r.channels;
  if (r.gate_hidden == 0) r.gate_hidden = r.channels;
  if (!r.ablation.use_multihead_cma) r.cma_heads = 1;
  return r;
}

void ModelConfig::validate() const {
  const ModelConfig r = resolved();
  auto positive = [](std::size_t v, const char* what) {
    if (v == 0) throw ConfigError(std::string(what) + " must be positive");
  };
  positive(r.pred_len, "pred_len");
  positive(r.variables, "variables");
  positive(r.channels, "channels");
  positive(r.cma_heads, "cma_heads");
  positive(r.decoder_layers, "decoder_layers");
  positive(r.attention_heads, "attention_heads");
  positive(r.llm_dim, "llm_dim");
  if (r.seq_len < 2) throw ConfigError("seq_len must be at least 2");
  if (r.channels % r.attention_heads != 0) {
    throw ConfigError("channels (" + std::to_string(r.channels) + ") must be divisible by attention_heads (" +
                      std::to_string(r.attention_heads) + ")");
  }
  if (r.prompt_dim % r.attention_heads != 0) {
    throw ConfigError("prompt_dim must be divisible by attention_heads");
  }
  if (!(r.dropout >= 0.0 && r.dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(r.horizon_norm > 0.0)) throw ConfigError("horizon_norm must be positive");
}

std::string ModelConfig::serialize() const {
  std::ostringstream os;
  os << "seq_len=" << seq_len << '\n'
     << "pred_len=" << pred_len << '\n'
     << "variables=" << variables << '\n'
     << "channels=" << channels << '\n'
     << "cma_heads=" << cma_heads << '\n'
     << "encoder_layers=" << encoder_layers << '\n'
     << "decoder_layers=" << decoder_layers << '\n'
     << "attention_heads=" << attention_heads << '\n'
     << "dropout=" << fmt_real(dropout) << '\n'
     << "llm_dim=" << llm_dim << '\n'
     << "prompt_dim=" << prompt_dim << '\n'
     << "ffn_hidden=" << ffn_hidden << '\n'
     << "pool_hidden=" << pool_hidden << '\n'
     << "gate_hidden=" << gate_hidden << '\n'
     << "horizon_norm=" << fmt_real(horizon_norm) << '\n'
     << "time_positional_encoding=" << (time_positional_encoding ? 1 : 0) << '\n'
     << "use_frequency=" << (ablation.use_frequency ? 1 : 0) << '\n'
     << "use_multihead_cma=" << (ablation.use_multihead_cma ? 1 : 0) << '\n'
     << "use_residual=" << (ablation.use_residual ? 1 : 0) << '\n'
     << "use_gating=" << (ablation.use_gating ? 1 : 0) << '\n'
     << "seed=" << seed << '\n';
  return os.str();
}

bool ModelConfig::set(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (key == "seq_len") seq_len = parse_size(key, v);
  else if (key == "pred_len") pred_len = parse_size(key, v);
  else if (key == "variables") variables = parse_size(key, v);
  else if (key == "channels") channels = parse_size(key, v);
  else if (key == "cma_heads") cma_heads = parse_size(key, v);
  else if (key == "encoder_layers") encoder_layers = parse_size(key, v);
  else if (key == "decoder_layers") decoder_layers = parse_size(key, v);
  else if (key == "attention_heads") attention_heads = parse_size(key, v);
  else if (key == "dropout") dropout = parse_real(key, v);
  else if (key == "llm_dim") llm_dim = parse_size(key, v);
  else if (key == "prompt_dim") prompt_dim = parse_size(key, v);
  else if (key == "ffn_hidden") ffn_hidden = parse_size(key, v);
  else if (key == "pool_hidden") pool_hidden = parse_size(key, v);
  else if (key == "gate_hidden") gate_hidden = parse_size(key, v);
  else if (key == "horizon_norm") horizon_norm = parse_real(key, v);
  else if (key == "time_positional_encoding") time_positional_encoding = parse_bool(key, v);
  else if (key == "use_frequency") ablation.use_frequency = parse_bool(key, v);
  else if (key == "use_multihead_cma") ablation.use_multihead_cma = parse_bool(key, v);
  else if (key == "use_residual") ablation.use_residual = parse_bool(key, v);
  else if (key == "use_gating") ablation.use_gating = parse_bool(key, v);
  else if (key == "seed") seed = parse_size(key, v);
  else return false;
  return true;
}

ModelConfig ModelConfig::parse(const std::string& text) {
  ModelConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("model config line " + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (!cfg.set(key, t.substr(eq + 1))) {
      throw ConfigError("model config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

// ------------------------------------------------------------ presets

const std::vector<PresetRow>& preset_table() {
  // dataset, enc, dec, L, C, heads, dropout, lr, wd, batch, epochs, N
  static const std::vector<PresetRow> rows = {
      {"ETTm1", 1, 2, 96, 128, 4, 0.5, 1e-4, 1e-3, 64, 150, 7},
      {"ETTm2", 1, 1, 96, 64, 4, 0.6, 1e-4, 1e-3, 16, 150, 7},
      {"ETTh1", 1, 1, 96, 256, 4, 0.4, 1e-4, 1e-3, 256, 150, 7},
      {"ETTh2", 1, 1, 96, 64, 4, 0.25, 1e-4, 1e-3, 256, 150, 7},
      {"ECL", 1, 2, 96, 128, 4, 0.3, 1e-4, 1e-3, 128, 50, 321},
      {"Weather", 6, 2, 96, 64, 4, 0.1, 1e-4, 1e-3, 32, 150, 21},
      // The table lists 96 here, but ILI runs use a 36-step lookback.
      {"ILI", 1, 1, 36, 32, 4, 0.1, 1e-4, 1e-3, 16, 100, 7},
  };
  return rows;
}

const PresetRow* find_preset(const std::string& dataset) {
  auto lower = [](std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  const std::string key = lower(dataset);
  for (const auto& row : preset_table()) {
    if (lower(row.dataset) == key) return &row;
  }
  return nullptr;
}

ModelConfig config_from_preset(const PresetRow& row, std::size_t pred_len) {
  ModelConfig cfg;
  cfg.seq_len = row.seq_len;
  cfg.pred_len = pred_len;
  cfg.variables = row.variables;
  cfg.channels = row.channels;
  cfg.cma_heads = row.heads;
  cfg.attention_heads = row.heads;
  cfg.encoder_layers = row.encoder_layers;
  cfg.decoder_layers = row.decoder_layers;
  cfg.dropout = row.dropout;
  return cfg;
}

// ------------------------------------------------------------ model

namespace {

template <typename X>
X& lvalue(X&& x) {
  return x;
}

ModelConfig checked(const ModelConfig& cfg) {
  cfg.validate();
  return cfg.resolved();
}

TimeEncoderConfig time_config(const ModelConfig& c) {
  return {c.seq_len, c.channels, c.encoder_layers, c.attention_heads, c.ffn_hidden, c.time_positional_encoding};
}

PromptEncoderConfig prompt_config(const ModelConfig& c) {
  return {c.llm_dim, c.prompt_dim, c.encoder_layers, c.attention_heads, c.ffn_hidden};
}

}  // namespace

template <typename T>
T3TimeModel<T>::T3TimeModel(const ModelConfig& cfg)
    : cfg_(checked(cfg)),
      dropout_rng_(CounterRng(cfg_.seed).split("dropout")),
      time(registry_, "time", time_config(cfg_), lvalue(CounterRng(cfg_.seed))),
      prompt(registry_, "prompt", prompt_config(cfg_), lvalue(CounterRng(cfg_.seed))) {
  CounterRng rng(cfg_.seed);
  const std::size_t c = cfg_.channels;
  if (cfg_.ablation.use_frequency) {
    SpectralConfig sc{cfg_.seq_len, c, cfg_.attention_heads, cfg_.ffn_hidden, cfg_.pool_hidden, cfg_.dropout};
    frequency.emplace(registry_, "frequency", sc, rng);
    if (cfg_.ablation.use_gating) gate.emplace(registry_, "gate", c, cfg_.gate_hidden, cfg_.horizon_norm, rng);
  }
  for (std::size_t h = 0; h < cfg_.cma_heads; ++h) {
    heads.push_back(CmaHead<T>::create(registry_, "cma.head" + std::to_string(h), c, cfg_.prompt_dim, rng));
  }
  if (cfg_.cma_heads > 1) head_gate.emplace(registry_, "head_gate", c, cfg_.cma_heads, rng);
  if (cfg_.ablation.use_residual) residual.emplace(registry_, "residual", c);
  for (std::size_t i = 0; i < cfg_.decoder_layers; ++i) {
    decoder.push_back(DecoderBlock<T>::create(registry_, "decoder.block" + std::to_string(i), c,
                                              cfg_.attention_heads, cfg_.ffn_hidden, rng));
  }
  projection = Linear<T>::create(registry_, "projection", c, cfg_.pred_len, true, rng);
}

template <typename T>
Tensor<T> T3TimeModel<T>::forward(const Tensor<T>& x_norm, const Tensor<T>& prompt_emb, bool training,
                                  ForwardTrace<T>* trace) {
  const Shape expect_x{x_norm.rank() == 3 ? x_norm.dim(0) : 0, cfg_.variables, cfg_.seq_len};
  if (x_norm.rank() != 3 || x_norm.shape() != expect_x) {
    throw DimensionError("model input: expected (B, " + std::to_string(cfg_.variables) + ", " +
                         std::to_string(cfg_.seq_len) + "), got " + shape_str(x_norm.shape()));
  }
  const Shape expect_p{x_norm.dim(0), cfg_.variables, cfg_.llm_dim};
  if (prompt_emb.shape() != expect_p) {
    throw DimensionError("prompt embeddings: expected " + shape_str(expect_p) + ", got " +
                         shape_str(prompt_emb.shape()));
  }
  DropoutCtx drop{cfg_.dropout, training, &dropout_rng_};
  Tensor<T> f_tilde;
  if (frequency) f_tilde = encode_frequency(x_norm, drop);
  auto z_t = encode_time(x_norm, drop);
  auto z_llm = encode_prompt(prompt_emb, drop);
  if (trace) {
    trace->f_tilde = f_tilde;
    trace->z_t = z_t;
    trace->prompt = z_llm;
  }
  auto z_g = fuse(f_tilde, z_t, trace);
  return align_and_decode(z_g, z_llm, drop, trace);
}

template <typename T>
Tensor<T> T3TimeModel<T>::encode_frequency(const Tensor<T>& x_norm, const DropoutCtx& drop) const {
  if (!frequency) throw ContractError("frequency branch is disabled in this model");
  return (*frequency)(x_norm, drop);
}

template <typename T>
Tensor<T> T3TimeModel<T>::encode_time(const Tensor<T>& x_norm, const DropoutCtx& drop) const {
  return time(x_norm, drop);
}

template <typename T>
Tensor<T> T3TimeModel<T>::encode_prompt(const Tensor<T>& prompt_emb, const DropoutCtx& drop) const {
  return prompt(prompt_emb, drop);
}

template <typename T>
Tensor<T> T3TimeModel<T>::fuse(const Tensor<T>& f_tilde, const Tensor<T>& z_t, ForwardTrace<T>* trace) const {
  Tensor<T> z_g;
  if (!cfg_.ablation.use_frequency) {
    z_g = transpose(z_t, 1, 2);
  } else {
    if (!f_tilde.defined()) throw ContractError("fusion stage needs frequency features");
    if (gate) {
      auto out = (*gate)(f_tilde, z_t, cfg_.pred_len);
      if (trace) trace->gate = out.gate;
      z_g = out.fused;
    } else {
      auto half = Tensor<T>::full({z_t.dim(0), cfg_.channels}, static_cast<T>(0.5));
      if (trace) trace->gate = half;
      z_g = gated_mix(half, f_tilde, z_t);
    }
  }
  if (trace) trace->z_g = z_g;
  return z_g;
}

template <typename T>
Tensor<T> T3TimeModel<T>::align_and_decode(const Tensor<T>& z_g, const Tensor<T>& z_llm, const DropoutCtx& drop,
                                           ForwardTrace<T>* trace) const {
  std::vector<Tensor<T>> outs;
  outs.reserve(heads.size());
  for (const auto& h : heads) outs.push_back(drop.apply(h(z_g, z_llm, drop)));
  Tensor<T> lambda;
  if (head_gate) {
    auto fused = (*head_gate)(outs);
    lambda = fused.fused;
    if (trace) trace->head_weights = fused.weights;
  } else {
    lambda = outs.front();
  }
  auto theta = residual ? (*residual)(lambda, z_g) : lambda;
  if (trace) {
    trace->heads = outs;
    trace->lambda = lambda;
    trace->theta = theta;
  }
  return decode(theta, drop, trace);
}

template <typename T>
Tensor<T> T3TimeModel<T>::decode(const Tensor<T>& theta, const DropoutCtx& drop, ForwardTrace<T>* trace) const {
  if (theta.rank() != 3 || theta.dim(1) != cfg_.channels) {
    throw DimensionError("decoder expects (B, " + std::to_string(cfg_.channels) + ", N), got " +
                         shape_str(theta.shape()));
  }
  const auto memory = transpose(theta, 1, 2);  // (B, N, C)
  auto z = memory;
  for (const auto& blk : decoder) z = blk(z, memory, drop);
  auto y = transpose(projection(z), 1, 2);  // (B, L_p, N)
  if (trace) {
    trace->z_d = z;
    trace->forecast = y;
  }
  return y;
}

template <typename T>
std::vector<Tensor<T>> T3TimeModel<T>::stored_tensors() const {
  std::vector<Tensor<T>> out;
  if (frequency) frequency->collect(out);
  time.collect(out);
  prompt.collect(out);
  if (gate) gate->collect(out);
  for (const auto& h : heads) h.collect(out);
  if (head_gate) head_gate->collect(out);
  if (residual) residual->collect(out);
  for (const auto& d : decoder) d.collect(out);
  projection.collect(out);
  return out;
}

template <typename T>
std::map<std::string, std::size_t> T3TimeModel<T>::component_counts() const {
  auto count = [](auto&& fill) {
    std::vector<Tensor<T>> ts;
    fill(ts);
    std::size_t n = 0;
    for (const auto& t : ts) n += t.numel();
    return n;
  };
  std::map<std::string, std::size_t> out;
  out["frequency"] = frequency ? count([&](auto& v) { frequency->collect(v); }) : 0;
  out["time"] = count([&](auto& v) { time.collect(v); });
  out["prompt"] = count([&](auto& v) { prompt.collect(v); });
  out["gate"] = gate ? count([&](auto& v) { gate->collect(v); }) : 0;
  out["cma"] = count([&](auto& v) {
    for (const auto& h : heads) h.collect(v);
  });
  out["head_gate"] = head_gate ? count([&](auto& v) { head_gate->collect(v); }) : 0;
  out["residual"] = residual ? count([&](auto& v) { residual->collect(v); }) : 0;
  out["decoder"] = count([&](auto& v) {
    for (const auto& d : decoder) d.collect(v);
  });
  out["projection"] = count([&](auto& v) { projection.collect(v); });
  return out;
}

template <typename T>
void T3TimeModel<T>::reseed_dropout(std::uint64_t seed) {
  dropout_rng_ = CounterRng(seed).split("dropout");
}

// ------------------------------------------------------------ checkpoints

namespace {

constexpr char kCkptMagic[6] = {'T', '3', 'C', 'K', 'P', 'T'};
constexpr std::uint16_t kCkptVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  void need(std::size_t n, const char* what) const {
    if (b_.size() - pos_ < n) {
      throw CheckpointError(std::string("checkpoint truncated while reading ") + what + " at byte " +
                            std::to_string(pos_));
    }
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const auto v = static_cast<std::uint16_t>(b_[pos_] | (b_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
  bool done() const { return pos_ == b_.size(); }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(kCkptMagic, kCkptMagic + 6);
  out.push_back(static_cast<std::uint8_t>(kCkptVersion & 0xFF));
  out.push_back(static_cast<std::uint8_t>(kCkptVersion >> 8));
  const std::string cfg = ckpt.config.serialize();
  put_u32(out, static_cast<std::uint32_t>(cfg.size()));
  out.insert(out.end(), cfg.begin(), cfg.end());
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : t.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  if (r.str(6, "magic") != std::string(kCkptMagic, 6)) throw CheckpointError("not a checkpoint file (bad magic)");
  const auto version = r.u16("version");
  if (version != kCkptVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  const auto cfg_len = r.u32("config length");
  try {
    ckpt.config = ModelConfig::parse(r.str(cfg_len, "config"));
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  const auto count = r.u32("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    t.name = r.str(r.u32("name length"), "name");
    const auto rank = r.u32("rank");
    std::size_t numel = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      t.shape.push_back(r.u32("shape"));
      numel *= t.shape.back();
    }
    r.need(numel * 4, "payload");
    t.values.resize(numel);
    for (auto& v : t.values) v = r.f32("payload");
    ckpt.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint payload at byte " + std::to_string(r.pos()));
  return ckpt;
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

template <typename T>
Checkpoint make_checkpoint(const T3TimeModel<T>& model) {
  Checkpoint ckpt{model.config(), {}};
  for (const auto& p : model.registry().params()) {
    CheckpointTensor t{p.name, p.tensor.shape(), {}};
    t.values.reserve(p.tensor.numel());
    for (T v : p.tensor.values()) t.values.push_back(static_cast<float>(v));
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

template <typename T>
void load_parameters(T3TimeModel<T>& model, const Checkpoint& ckpt) {
  if (ckpt.config.resolved().serialize() != model.config().serialize()) {
    throw CheckpointError("checkpoint was saved for a different model configuration");
  }
  auto& params = model.registry().params();
  if (params.size() != ckpt.tensors.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " tensors, model has " +
                          std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& src = ckpt.tensors[i];
    if (src.name != params[i].name || src.shape != params[i].tensor.shape()) {
      throw CheckpointError("checkpoint tensor " + std::to_string(i) + " (" + src.name + " " +
                            shape_str(src.shape) + ") does not match " + params[i].name + " " +
                            shape_str(params[i].tensor.shape()));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_values();
    const auto& src = ckpt.tensors[i].values;
    for (std::size_t k = 0; k < src.size(); ++k) dst[k] = static_cast<T>(src[k]);
  }
}

template class T3TimeModel<float>;
template class T3TimeModel<double>;
template Checkpoint make_checkpoint(const T3TimeModel<float>&);
template Checkpoint make_checkpoint(const T3TimeModel<double>&);
template void load_parameters(T3TimeModel<float>&, const Checkpoint&);
template void load_parameters(T3TimeModel<double>&, const Checkpoint&);

}  // namespace t3time
