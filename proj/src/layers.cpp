#include "t3time/layers.hpp"

#include <cmath>

#include "t3time/errors.hpp"

namespace t3time {

template <typename T>
Tensor<T> ParamRegistry<T>::add(std::string name, Tensor<T> tensor) {
  if (find(name) != nullptr) throw ContractError("duplicate parameter name: " + name);
  for (const auto& p : params_) {
    if (p.tensor.node() == tensor.node()) {
      throw ContractError("tensor registered twice: " + p.name + " and " + name);
    }
  }
  tensor.set_requires_grad(true);
  params_.push_back({std::move(name), tensor});
  return tensor;
}

template <typename T>
const Tensor<T>* ParamRegistry<T>::find(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.name == name) return &p.tensor;
  }
  return nullptr;
}

template <typename T>
std::size_t ParamRegistry<T>::element_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.tensor.numel();
  return n;
}

template <typename T>
void ParamRegistry<T>::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

template <typename T>
Tensor<T> glorot_uniform(std::size_t fan_in, std::size_t fan_out, CounterRng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<T> v(fan_in * fan_out);
  for (auto& x : v) x = static_cast<T>(rng.uniform(-limit, limit));
  return Tensor<T>({fan_in, fan_out}, std::move(v));
}

template <typename T>
Linear<T> Linear<T>::create(ParamRegistry<T>& reg, const std::string& name, std::size_t in,
                            std::size_t out, bool with_bias, CounterRng& rng) {
  Linear l;
  auto stream = rng.split(name);
  l.weight = reg.add(name + ".weight", glorot_uniform<T>(in, out, stream));
  if (with_bias) l.bias = reg.add(name + ".bias", Tensor<T>::zeros({out}));
  return l;
}

template <typename T>
Tensor<T> Linear<T>::operator()(const Tensor<T>& x) const {
  auto y = matmul(x, weight);
  return bias.defined() ? add(y, bias) : y;
}

template <typename T>
void Linear<T>::collect(std::vector<Tensor<T>>& out) const {
  out.push_back(weight);
  if (bias.defined()) out.push_back(bias);
}

template <typename T>
LayerNorm<T> LayerNorm<T>::create(ParamRegistry<T>& reg, const std::string& name, std::size_t dim) {
  LayerNorm n;
  n.gain = reg.add(name + ".gain", Tensor<T>::full({dim}, T(1)));
  n.bias = reg.add(name + ".bias", Tensor<T>::zeros({dim}));
  return n;
}

template <typename T>
void LayerNorm<T>::collect(std::vector<Tensor<T>>& out) const {
  out.push_back(gain);
  out.push_back(bias);
}

template <typename T>
MultiHeadAttention<T> MultiHeadAttention<T>::create(ParamRegistry<T>& reg, const std::string& name,
                                                    std::size_t dim, std::size_t heads,
                                                    CounterRng& rng) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError(name + ": dimension " + std::to_string(dim) +
                      " is not divisible by head count " + std::to_string(heads));
  }
  MultiHeadAttention m;
  m.heads = heads;
  m.query = Linear<T>::create(reg, name + ".query", dim, dim, true, rng);
  m.key = Linear<T>::create(reg, name + ".key", dim, dim, true, rng);
  m.value = Linear<T>::create(reg, name + ".value", dim, dim, true, rng);
  m.output = Linear<T>::create(reg, name + ".output", dim, dim, true, rng);
  return m;
}

template <typename T>
Tensor<T> MultiHeadAttention<T>::operator()(const Tensor<T>& q_in, const Tensor<T>& kv_in,
                                            const DropoutCtx& drop) const {
  if (q_in.rank() != 3 || kv_in.rank() != 3 || q_in.dim(0) != kv_in.dim(0)) {
    throw DimensionError("attention block expects (batch, tokens, dim) inputs, got " +
                         shape_str(q_in.shape()) + " and " + shape_str(kv_in.shape()));
  }
  const std::size_t b = q_in.dim(0), tq = q_in.dim(1), tk = kv_in.dim(1), d = q_in.dim(2);
  const std::size_t dh = d / heads;
  auto split = [&](const Tensor<T>& x, std::size_t t) {
    return transpose(reshape(x, {b, t, heads, dh}), 1, 2);  // (b, heads, t, dh)
  };
  auto ctx = scaled_dot_attention(split(query(q_in), tq), split(key(kv_in), tk),
                                  split(value(kv_in), tk), drop);
  return output(reshape(transpose(ctx, 1, 2), {b, tq, d}));
}

template <typename T>
void MultiHeadAttention<T>::collect(std::vector<Tensor<T>>& out) const {
  for (const auto* l : {&query, &key, &value, &output}) l->collect(out);
}

template <typename T>
FeedForward<T> FeedForward<T>::create(ParamRegistry<T>& reg, const std::string& name,
                                      std::size_t dim, std::size_t hidden, CounterRng& rng) {
  FeedForward f;
  f.in = Linear<T>::create(reg, name + ".in", dim, hidden, true, rng);
  f.out = Linear<T>::create(reg, name + ".out", hidden, dim, true, rng);
  return f;
}

template <typename T>
Tensor<T> FeedForward<T>::operator()(const Tensor<T>& x, const DropoutCtx& drop) const {
  return out(drop.apply(relu(in(x))));
}

template <typename T>
void FeedForward<T>::collect(std::vector<Tensor<T>>& o) const {
  in.collect(o);
  out.collect(o);
}

template <typename T>
EncoderBlock<T> EncoderBlock<T>::create(ParamRegistry<T>& reg, const std::string& name,
                                        std::size_t dim, std::size_t heads, std::size_t ffn_hidden,
                                        CounterRng& rng) {
  EncoderBlock e;
  e.attn_norm = LayerNorm<T>::create(reg, name + ".attn_norm", dim);
  e.attn = MultiHeadAttention<T>::create(reg, name + ".attn", dim, heads, rng);
  e.ffn_norm = LayerNorm<T>::create(reg, name + ".ffn_norm", dim);
  e.ffn = FeedForward<T>::create(reg, name + ".ffn", dim, ffn_hidden, rng);
  return e;
}

template <typename T>
Tensor<T> EncoderBlock<T>::operator()(const Tensor<T>& x, const DropoutCtx& drop) const {
  auto h = attn_norm(x);
  auto y = add(x, attn(h, h, drop));
  return add(y, ffn(ffn_norm(y), drop));
}

template <typename T>
void EncoderBlock<T>::collect(std::vector<Tensor<T>>& out) const {
  attn_norm.collect(out);
  attn.collect(out);
  ffn_norm.collect(out);
  ffn.collect(out);
}

template <typename T>
DecoderBlock<T> DecoderBlock<T>::create(ParamRegistry<T>& reg, const std::string& name,
                                        std::size_t dim, std::size_t heads, std::size_t ffn_hidden,
                                        CounterRng& rng) {
  DecoderBlock d;
  d.self_norm = LayerNorm<T>::create(reg, name + ".self_norm", dim);
  d.self_attn = MultiHeadAttention<T>::create(reg, name + ".self_attn", dim, heads, rng);
  d.cross_norm = LayerNorm<T>::create(reg, name + ".cross_norm", dim);
  d.cross_attn = MultiHeadAttention<T>::create(reg, name + ".cross_attn", dim, heads, rng);
  d.ffn_norm = LayerNorm<T>::create(reg, name + ".ffn_norm", dim);
  d.ffn = FeedForward<T>::create(reg, name + ".ffn", dim, ffn_hidden, rng);
  return d;
}

template <typename T>
Tensor<T> DecoderBlock<T>::operator()(const Tensor<T>& x, const Tensor<T>& memory,
                                      const DropoutCtx& drop) const {
  auto h = self_norm(x);
  auto y = add(x, self_attn(h, h, drop));
  y = add(y, cross_attn(cross_norm(y), memory, drop));
  return add(y, ffn(ffn_norm(y), drop));
}

template <typename T>
void DecoderBlock<T>::collect(std::vector<Tensor<T>>& out) const {
  self_norm.collect(out);
  self_attn.collect(out);
  cross_norm.collect(out);
  cross_attn.collect(out);
  ffn_norm.collect(out);
  ffn.collect(out);
}

#define T3TIME_INSTANTIATE_LAYERS(T)                                        \
  template class ParamRegistry<T>;                                           \
  template Tensor<T> glorot_uniform<T>(std::size_t, std::size_t, CounterRng&); \
  template struct Linear<T>;                                                 \
  template struct LayerNorm<T>;                                              \
  template struct MultiHeadAttention<T>;                                     \
  template struct FeedForward<T>;                                            \
  template struct EncoderBlock<T>;                                           \
  template struct DecoderBlock<T>;

T3TIME_INSTANTIATE_LAYERS(float)
T3TIME_INSTANTIATE_LAYERS(double)
#undef T3TIME_INSTANTIATE_LAYERS

}  // namespace t3time
