#pragma once

// Independent reference implementations and fixtures shared by the unit
// tests and the acceptance runner. Oracles work on plain vectors with
// textbook loops so they share no code with the library kernels.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "t3time/data.hpp"
#include "t3time/model.hpp"
#include "t3time/rng.hpp"
#include "t3time/tensor.hpp"

namespace t3test {

using t3time::Shape;
using t3time::Tensor;

template <typename T>
Tensor<T> random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0,
                        bool requires_grad = false) {
  t3time::CounterRng rng(seed);
  std::vector<T> v(t3time::shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return Tensor<T>(shape, std::move(v), requires_grad);
}

template <typename T>
double max_abs_diff(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
  return m;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  return max_abs_diff<double>(std::span<const double>(a), std::span<const double>(b));
}

/// C = A B for row-major (m x k) and (k x n).
inline std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                        std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0;
      for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
      c[i * n + j] = s;
    }
  return c;
}

/// |X_k| for k = 0 .. floor(L/2) by the O(L^2) definition.
inline std::vector<double> naive_dft_magnitude(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    long double re = 0, im = 0;
    for (std::size_t t = 0; t < n; ++t) {
      const long double ang = -2.0L * std::numbers::pi_v<long double> * static_cast<long double>((k * t) % n) /
                              static_cast<long double>(n);
      re += x[t] * std::cos(ang);
      im += x[t] * std::sin(ang);
    }
    out[k] = static_cast<double>(std::sqrt(re * re + im * im));
  }
  return out;
}

inline std::vector<double> softmax_row(const std::vector<double>& z) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  std::vector<double> e(z.size());
  double s = 0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (e[i] = std::exp(z[i] - mx));
  for (auto& v : e) v /= s;
  return e;
}

/// Single-head attention for one batch element: q (tq x d), k (tk x d), v (tk x dv).
inline std::vector<double> naive_attention(const std::vector<double>& q, const std::vector<double>& k,
                                           const std::vector<double>& v, std::size_t tq, std::size_t tk,
                                           std::size_t d, std::size_t dv) {
  std::vector<double> out(tq * dv, 0.0);
  for (std::size_t i = 0; i < tq; ++i) {
    std::vector<double> s(tk);
    for (std::size_t j = 0; j < tk; ++j) {
      double dot = 0;
      for (std::size_t p = 0; p < d; ++p) dot += q[i * d + p] * k[j * d + p];
      s[j] = dot / std::sqrt(static_cast<double>(d));
    }
    const auto w = softmax_row(s);
    for (std::size_t j = 0; j < tk; ++j)
      for (std::size_t c = 0; c < dv; ++c) out[i * dv + c] += w[j] * v[j * dv + c];
  }
  return out;
}

/// x W (+ b) for x (rows x in), W (in x out).
inline std::vector<double> naive_linear(const std::vector<double>& x, const std::vector<double>& w,
                                        const std::vector<double>* b, std::size_t rows, std::size_t in,
                                        std::size_t out) {
  auto y = naive_matmul(x, w, rows, in, out);
  if (b) {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < out; ++c) y[r * out + c] += (*b)[c];
  }
  return y;
}

template <typename T>
std::vector<double> to_vec(const Tensor<T>& t) {
  return std::vector<double>(t.values().begin(), t.values().end());
}

/// Two-variable sinusoid table: sin(2 pi i / 24) and cos(2 pi i / 48 + 0.3),
/// hourly timestamps from 2020-01-01.
inline t3time::SeriesTable sinusoid_table(std::size_t rows = 2000) {
  t3time::SeriesTable t;
  t.names = {"s0", "s1"};
  const std::int64_t t0 = 1577836800;
  for (std::size_t i = 0; i < rows; ++i) {
    t.timestamps.push_back(t0 + static_cast<std::int64_t>(i) * 3600);
    const double x = static_cast<double>(i);
    t.values.push_back(std::sin(2.0 * std::numbers::pi * x / 24.0));
    t.values.push_back(std::cos(2.0 * std::numbers::pi * x / 48.0 + 0.3));
  }
  return t;
}

/// Smooth random-walk style table with `vars` columns.
inline t3time::SeriesTable toy_table(std::size_t rows, std::size_t vars, std::uint64_t seed = 3,
                                     std::int64_t step = 3600) {
  t3time::SeriesTable t;
  for (std::size_t v = 0; v < vars; ++v) t.names.push_back("v" + std::to_string(v));
  t3time::CounterRng rng(seed);
  std::vector<double> level(vars, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    t.timestamps.push_back(1577836800 + static_cast<std::int64_t>(i) * step);
    for (std::size_t v = 0; v < vars; ++v) {
      level[v] += 0.1 * rng.normal();
      t.values.push_back(level[v] + std::sin(0.2 * static_cast<double>(i) + static_cast<double>(v)));
    }
  }
  return t;
}

/// The tiny configuration used for end-to-end gradient checks.
inline t3time::ModelConfig tiny_config() {
  t3time::ModelConfig c;
  c.seq_len = 8;
  c.pred_len = 4;
  c.variables = 2;
  c.channels = 4;
  c.cma_heads = 2;
  c.attention_heads = 2;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.dropout = 0.0;
  c.llm_dim = 6;
  c.seed = 11;
  return c;
}

// Closed-form parameter totals per component.
struct ParamCounts {
  std::size_t c, f, p, g, e, d, l, lp, h, le, ld;
  std::size_t lin(std::size_t in, std::size_t out, bool bias = true) const { return in * out + (bias ? out : 0); }
  std::size_t mha(std::size_t dim) const { return 4 * lin(dim, dim); }
  std::size_t ffn(std::size_t dim) const { return lin(dim, f) + lin(f, dim); }
  std::size_t enc_block(std::size_t dim) const { return 2 * 2 * dim + mha(dim) + ffn(dim); }
  std::size_t dec_block() const { return 3 * 2 * c + 2 * mha(c) + ffn(c); }
  std::size_t frequency() const { return c + enc_block(c) + lin(c, p, false) + lin(p, 1, false); }
  std::size_t gate() const { return lin(c + 1, g) + lin(g, c); }
  std::size_t time() const { return l * c + le * enc_block(c); }
  std::size_t prompt() const { return lin(d, e) + le * enc_block(e); }
  std::size_t head() const { return lin(c, c) + 2 * lin(e, c); }
  std::size_t head_gate() const { return lin(h * c, 128) + 2 * 128 + lin(128, h); }
  std::size_t decoder() const { return ld * dec_block(); }
  std::size_t projection() const { return lin(c, lp); }
};

inline ParamCounts counts_for(const t3time::ModelConfig& raw) {
  const auto r = raw.resolved();
  return {r.channels, r.ffn_hidden, r.pool_hidden, r.gate_hidden, r.prompt_dim, r.llm_dim, r.seq_len,
          r.pred_len, r.cma_heads, r.encoder_layers, r.decoder_layers};
}

}  // namespace t3test
