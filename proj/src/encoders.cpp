#include "t3time/encoders.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "t3time/errors.hpp"

namespace t3time {

// ------------------------------------------------------------ time branch

template <typename T>
Tensor<T> sinusoidal_positions(std::size_t tokens, std::size_t dim) {
  std::vector<T> v(tokens * dim);
  for (std::size_t p = 0; p < tokens; ++p) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double a = static_cast<double>(p) * freq;
      v[p * dim + i] = static_cast<T>(i % 2 == 0 ? std::sin(a) : std::cos(a));
    }
  }
  return Tensor<T>({tokens, dim}, std::move(v));
}

template <typename T>
TimeEncoder<T>::TimeEncoder(ParamRegistry<T>& reg, const std::string& name,
                            const TimeEncoderConfig& cfg, CounterRng& rng)
    : cfg_(cfg) {
  auto stream = rng.split(name + ".projection");
  projection = reg.add(name + ".projection", glorot_uniform<T>(cfg.lookback, cfg.channels, stream));
  for (std::size_t i = 0; i < cfg.layers; ++i) {
    blocks.push_back(EncoderBlock<T>::create(reg, name + ".block" + std::to_string(i), cfg.channels,
                                             cfg.heads, cfg.ffn_hidden, rng));
  }
}

template <typename T>
Tensor<T> TimeEncoder<T>::project(const Tensor<T>& x) const {
  if (x.rank() != 3 || x.dim(2) != cfg_.lookback) {
    throw DimensionError("time encoder expects (B, N, " + std::to_string(cfg_.lookback) +
                         ") input, got " + shape_str(x.shape()));
  }
  return matmul(x, projection);
}

template <typename T>
Tensor<T> TimeEncoder<T>::operator()(const Tensor<T>& x, const DropoutCtx& drop) const {
  auto z = project(x);
  if (cfg_.positional_encoding) z = add(z, sinusoidal_positions<T>(x.dim(1), cfg_.channels));
  return run_encoder(blocks, z, drop);
}

template <typename T>
void TimeEncoder<T>::collect(std::vector<Tensor<T>>& out) const {
  out.push_back(projection);
  for (const auto& b : blocks) b.collect(out);
}

// ------------------------------------------------------------ embedding store

namespace {

constexpr char kMagic[6] = {'T', '3', 'E', 'M', 'B', '\0'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[off + i]) << (8 * i);
  return v;
}

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (auto c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

EmbeddingStore::EmbeddingStore(std::uint32_t num_windows, std::uint32_t num_variables,
                               std::uint32_t dim, std::vector<float> values)
    : num_windows_(num_windows), num_variables_(num_variables), dim_(dim), values_(std::move(values)) {
  if (dim == 0) throw ConfigError("embedding dimension must be positive");
  if (values_.size() != static_cast<std::size_t>(num_windows) * num_variables * dim) {
    throw DimensionError("embedding store expects " +
                         std::to_string(static_cast<std::size_t>(num_windows) * num_variables * dim) +
                         " values, got " + std::to_string(values_.size()));
  }
}

EmbeddingStore EmbeddingStore::parse(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kMagic)) throw FormatError("truncated embedding store magic", bytes.size());
  if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
    throw FormatError("bad embedding store magic", 0);
  }
  if (bytes.size() < kHeaderBytes) throw FormatError("truncated embedding store header", bytes.size());
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[6] | (bytes[7] << 8));
  if (version != kVersion) {
    throw FormatError("unsupported embedding store version " + std::to_string(version), 6);
  }
  const std::uint32_t windows = get_u32(bytes, 8);
  const std::uint32_t vars = get_u32(bytes, 12);
  const std::uint32_t dim = get_u32(bytes, 16);
  if (dim == 0) throw FormatError("embedding dimension is zero", 16);
  const std::uint64_t payload = static_cast<std::uint64_t>(windows) * vars * dim * 4;
  const std::uint64_t expected = kHeaderBytes + payload;
  if (bytes.size() != expected) {
    throw FormatError("embedding store length " + std::to_string(bytes.size()) +
                          " does not match header (expected " + std::to_string(expected) + ")",
                      std::min<std::uint64_t>(bytes.size(), expected));
  }
  std::vector<float> values(static_cast<std::size_t>(payload / 4));
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<float>(get_u32(bytes, kHeaderBytes + 4 * i));
  }
  return EmbeddingStore(windows, vars, dim, std::move(values));
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open embedding store " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(bytes);
}

std::vector<std::uint8_t> EmbeddingStore::serialize() const {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(kHeaderBytes + values_.size() * 4);
  put_u16(out, kVersion);
  put_u32(out, num_windows_);
  put_u32(out, num_variables_);
  put_u32(out, dim_);
  for (float v : values_) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

void EmbeddingStore::save(const std::filesystem::path& path) const {
  const auto bytes = serialize();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write embedding store " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::span<const float> EmbeddingStore::lookup(std::size_t window, std::size_t variable) const {
  if (window >= num_windows_ || variable >= num_variables_) {
    throw std::out_of_range("embedding lookup (" + std::to_string(window) + ", " +
                            std::to_string(variable) + ") outside store of " +
                            std::to_string(num_windows_) + " windows x " +
                            std::to_string(num_variables_) + " variables");
  }
  return {values_.data() + (window * num_variables_ + variable) * dim_, dim_};
}

std::uint64_t EmbeddingStore::checksum() const { return fnv1a64(serialize()); }

// ------------------------------------------------------------ stub embedder

StubEmbedder::StubEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim) {
  if (dim == 0) throw ConfigError("stub embedding dimension must be positive");
  CounterRng rng = CounterRng(seed).split("stub_embedder");
  weights_.resize((kFeatures + 1) * dim);
  const double limit = 1.0 / std::sqrt(static_cast<double>(kFeatures));
  for (auto& w : weights_) w = static_cast<float>(rng.uniform(-limit, limit));
}

void StubEmbedder::embed(std::span<const double> window, std::size_t variables, std::size_t lookback,
                         std::span<const double> markers, std::span<float> out) const {
  if (window.size() != variables * lookback || lookback == 0) {
    throw DimensionError("stub embedder window holds " + std::to_string(window.size()) +
                         " values, expected " + std::to_string(variables * lookback));
  }
  if (!markers.empty() && markers.size() != lookback * kMarkerFeatures) {
    throw DimensionError("time markers must be L x 5");
  }
  if (out.size() != variables * dim_) throw DimensionError("stub embedder output buffer size");
  double feat[kFeatures] = {};
  if (!markers.empty()) {
    for (std::size_t f = 0; f < kMarkerFeatures; ++f) {
      feat[kValueFeatures + f] = markers[f];
      feat[kValueFeatures + kMarkerFeatures + f] = markers[(lookback - 1) * kMarkerFeatures + f];
    }
  }
  for (std::size_t v = 0; v < variables; ++v) {
    const auto row = window.subspan(v * lookback, lookback);
    const auto [mn, mx] = std::minmax_element(row.begin(), row.end());
    feat[0] = row.front();
    feat[1] = row.back();
    feat[2] = *mn;
    feat[3] = *mx;
    feat[4] = row.back() - row.front();
    float* o = out.data() + v * dim_;
    for (std::size_t d = 0; d < dim_; ++d) {
      double acc = weights_[kFeatures * dim_ + d];
      for (std::size_t f = 0; f < kFeatures; ++f) acc += feat[f] * weights_[f * dim_ + d];
      o[d] = static_cast<float>(acc);
    }
  }
}

template <typename T>
Tensor<T> stub_embed(std::span<const double> window, std::size_t variables, std::size_t lookback,
                     std::span<const double> markers, std::size_t dim, std::uint64_t seed) {
  StubEmbedder embedder(dim, seed);
  std::vector<float> buf(variables * dim);
  embedder.embed(window, variables, lookback, markers, buf);
  return Tensor<T>({variables, dim}, std::vector<T>(buf.begin(), buf.end()));
}

// ------------------------------------------------------------ prompt encoder

template <typename T>
PromptEncoder<T>::PromptEncoder(ParamRegistry<T>& reg, const std::string& name,
                                const PromptEncoderConfig& cfg, CounterRng& rng)
    : cfg_(cfg) {
  if (cfg.prompt_dim == 0 || cfg.llm_dim == 0) throw ConfigError("prompt dims must be positive");
  projection = Linear<T>::create(reg, name + ".projection", cfg.llm_dim, cfg.prompt_dim, true, rng);
  for (std::size_t i = 0; i < cfg.layers; ++i) {
    blocks.push_back(EncoderBlock<T>::create(reg, name + ".block" + std::to_string(i), cfg.prompt_dim,
                                             cfg.heads, cfg.ffn_hidden, rng));
  }
}

template <typename T>
Tensor<T> PromptEncoder<T>::operator()(const Tensor<T>& z_llm, const DropoutCtx& drop) const {
  if (z_llm.rank() != 3 || z_llm.dim(2) != cfg_.llm_dim) {
    throw DimensionError("prompt encoder expects (B, N, " + std::to_string(cfg_.llm_dim) +
                         ") embeddings, got " + shape_str(z_llm.shape()));
  }
  return transpose(run_encoder(blocks, projection(z_llm), drop), 1, 2);
}

template <typename T>
void PromptEncoder<T>::collect(std::vector<Tensor<T>>& out) const {
  projection.collect(out);
  for (const auto& b : blocks) b.collect(out);
}

template Tensor<float> sinusoidal_positions<float>(std::size_t, std::size_t);
template Tensor<double> sinusoidal_positions<double>(std::size_t, std::size_t);
template Tensor<float> stub_embed<float>(std::span<const double>, std::size_t, std::size_t,
                                         std::span<const double>, std::size_t, std::uint64_t);
template Tensor<double> stub_embed<double>(std::span<const double>, std::size_t, std::size_t,
                                           std::span<const double>, std::size_t, std::uint64_t);
template class TimeEncoder<float>;
template class TimeEncoder<double>;
template class PromptEncoder<float>;
template class PromptEncoder<double>;

}  // namespace t3time
