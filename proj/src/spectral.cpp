#include "t3time/spectral.hpp"

#include <cmath>
#include <numbers>

#include "t3time/errors.hpp"

namespace t3time {

namespace {

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace

void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (!is_pow2(n)) throw DimensionError("radix-2 FFT needs a power-of-two length, got " + std::to_string(n));
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    for (std::size_t k = 0; k < half; ++k) {
      // Twiddles computed directly rather than by repeated multiplication.
      const std::complex<double> w(std::cos(ang * static_cast<double>(k)),
                                   std::sin(ang * static_cast<double>(k)));
      for (std::size_t i = 0; i < n; i += len) {
        const auto u = a[i + k];
        const auto v = a[i + k + half] * w;
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
  if (inverse) {
    for (auto& v : a) v /= static_cast<double>(n);
  }
}

RealFft::RealFft(std::size_t n) : n_(n) {
  if (n < 2) throw ConfigError("FFT length must be at least 2, got " + std::to_string(n));
  if (is_pow2(n)) return;
  padded_ = next_pow2(2 * n - 1);
  chirp_.resize(n);
  const std::size_t two_n = 2 * n;
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle small for large k.
    const std::size_t k2 = (k * k) % two_n;
    const double ang = -std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
    chirp_[k] = {std::cos(ang), std::sin(ang)};
  }
  std::vector<std::complex<double>> b(padded_, {0.0, 0.0});
  b[0] = std::conj(chirp_[0]);
  for (std::size_t k = 1; k < n; ++k) {
    b[k] = std::conj(chirp_[k]);
    b[padded_ - k] = std::conj(chirp_[k]);
  }
  fft_radix2(b, false);
  kernel_fft_ = std::move(b);
}

std::vector<std::complex<double>> RealFft::transform(std::span<const double> x) const {
  if (x.size() != n_) {
    throw DimensionError("FFT of length " + std::to_string(n_) + " given " + std::to_string(x.size()) +
                         " samples");
  }
  std::vector<std::complex<double>> out;
  if (padded_ == 0) {
    out.assign(x.begin(), x.end());
    fft_radix2(out, false);
  } else {
    std::vector<std::complex<double>> a(padded_, {0.0, 0.0});
    for (std::size_t k = 0; k < n_; ++k) a[k] = x[k] * chirp_[k];
    fft_radix2(a, false);
    for (std::size_t i = 0; i < padded_; ++i) a[i] *= kernel_fft_[i];
    fft_radix2(a, true);
    out.resize(n_);
    for (std::size_t k = 0; k < n_; ++k) out[k] = a[k] * chirp_[k];
  }
  out.resize(bins());
  return out;
}

std::vector<double> RealFft::magnitude(std::span<const double> x) const {
  const auto spec = transform(x);
  std::vector<double> mag(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) mag[i] = std::abs(spec[i]);
  return mag;
}

void SpectralConfig::validate() const {
  if (lookback < 2) throw ConfigError("lookback must be at least 2, got " + std::to_string(lookback));
  if (channels == 0 || encoder_heads == 0 || channels % encoder_heads != 0) {
    throw ConfigError("channel dim " + std::to_string(channels) +
                      " must be a positive multiple of encoder heads " + std::to_string(encoder_heads));
  }
  if (ffn_hidden == 0 || pool_hidden == 0) throw ConfigError("hidden widths must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
}

template <typename T>
SpectrumBatch<T> rfft_magnitude(const Tensor<T>& x) {
  if (x.rank() != 3) {
    throw DimensionError("rfft_magnitude expects (B, N, L), got " + shape_str(x.shape()));
  }
  const std::size_t b = x.dim(0), n = x.dim(1), l = x.dim(2);
  const RealFft fft(l);
  const std::size_t bins = fft.bins();
  auto xv = x.values();
  std::vector<T> mags(b * n * bins);
  std::vector<double> row(l);
  for (std::size_t r = 0; r < b * n; ++r) {
    for (std::size_t i = 0; i < l; ++i) row[i] = static_cast<double>(xv[r * l + i]);
    const auto m = fft.magnitude(row);
    for (std::size_t k = 0; k < bins; ++k) mags[r * bins + k] = static_cast<T>(m[k]);
  }
  return {Tensor<T>({b * n, bins}, std::move(mags)), b, n};
}

template <typename T>
FrequencyBranch<T>::FrequencyBranch(ParamRegistry<T>& reg, const std::string& name,
                                    const SpectralConfig& cfg, CounterRng& rng)
    : cfg_(cfg) {
  cfg_.validate();
  auto stream = rng.split(name + ".bin_projection");
  bin_projection = reg.add(name + ".bin_projection", glorot_uniform<T>(1, cfg.channels, stream));
  encoder = EncoderBlock<T>::create(reg, name + ".encoder", cfg.channels, cfg.encoder_heads,
                                    cfg.ffn_hidden, rng);
  pool_hidden = Linear<T>::create(reg, name + ".pool_hidden", cfg.channels, cfg.pool_hidden, false, rng);
  pool_score = Linear<T>::create(reg, name + ".pool_score", cfg.pool_hidden, 1, false, rng);
}

template <typename T>
Tensor<T> FrequencyBranch<T>::project(const SpectrumBatch<T>& spec) const {
  const auto& m = spec.magnitudes;
  if (m.rank() != 2 || m.dim(1) != cfg_.bins()) {
    throw DimensionError("frequency branch expects (B*N, " + std::to_string(cfg_.bins()) +
                         ") spectra, got " + shape_str(m.shape()));
  }
  return relu(matmul(reshape(m, {m.dim(0), m.dim(1), 1}), bin_projection));
}

template <typename T>
Tensor<T> FrequencyBranch<T>::encode(const SpectrumBatch<T>& spec, const DropoutCtx& drop) const {
  return encoder(project(spec), drop);
}

template <typename T>
PooledSpectrum<T> FrequencyBranch<T>::pool(const Tensor<T>& tokens, std::size_t batch,
                                           std::size_t variables) const {
  if (tokens.rank() != 3 || tokens.dim(0) != batch * variables) {
    throw DimensionError("attention pool expects (" + std::to_string(batch * variables) +
                         ", L_f, C) tokens, got " + shape_str(tokens.shape()));
  }
  const std::size_t rows = tokens.dim(0), bins = tokens.dim(1), c = tokens.dim(2);
  auto logits = pool_score(relu(pool_hidden(tokens)));        // (rows, bins, 1)
  auto alpha = softmax(reshape(logits, {rows, bins}), -1);    // (rows, bins)
  auto pooled = matmul(reshape(alpha, {rows, 1, bins}), tokens);  // (rows, 1, C)
  return {reshape(pooled, {batch, variables, c}), alpha};
}

template <typename T>
Tensor<T> FrequencyBranch<T>::operator()(const Tensor<T>& x, const DropoutCtx& drop) const {
  const auto spec = rfft_magnitude(x);
  return pool(encode(spec, drop), spec.batch, spec.variables).pooled;
}

template <typename T>
void FrequencyBranch<T>::collect(std::vector<Tensor<T>>& out) const {
  out.push_back(bin_projection);
  encoder.collect(out);
  pool_hidden.collect(out);
  pool_score.collect(out);
}

template SpectrumBatch<float> rfft_magnitude(const Tensor<float>&);
template SpectrumBatch<double> rfft_magnitude(const Tensor<double>&);
template class FrequencyBranch<float>;
template class FrequencyBranch<double>;

}  // namespace t3time
