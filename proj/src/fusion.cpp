#include "t3time/fusion.hpp"

#include "t3time/errors.hpp"

namespace t3time {

namespace {

template <typename T>
void require_same(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + ": shapes " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()) + " differ");
  }
}

}  // namespace

template <typename T>
Tensor<T> gated_mix(const Tensor<T>& gate, const Tensor<T>& f_tilde, const Tensor<T>& z_t) {
  require_same(f_tilde, z_t, "gated mix");
  if (f_tilde.rank() != 3 || gate.rank() != 2 || gate.dim(0) != f_tilde.dim(0) ||
      gate.dim(1) != f_tilde.dim(2)) {
    throw DimensionError("gated mix: gate " + shape_str(gate.shape()) + " does not fit features " +
                         shape_str(f_tilde.shape()));
  }
  auto g = expand(gate, 1, f_tilde.dim(1));  // (B, N, C)
  auto mixed = add(mul(g, f_tilde), mul(affine(g, -1.0, 1.0), z_t));
  return transpose(mixed, 1, 2);
}

template <typename T>
HorizonGate<T>::HorizonGate(ParamRegistry<T>& reg, const std::string& name, std::size_t channels,
                            std::size_t hidden_dim, double norm, CounterRng& rng)
    : horizon_norm(norm) {
  if (!(norm > 0.0)) throw ConfigError("horizon normalization constant must be positive");
  hidden = Linear<T>::create(reg, name + ".hidden", channels + 1, hidden_dim, true, rng);
  output = Linear<T>::create(reg, name + ".output", hidden_dim, channels, true, rng);
}

template <typename T>
Tensor<T> HorizonGate<T>::gate(const Tensor<T>& z_t, std::size_t horizon) const {
  if (horizon == 0) throw ConfigError("forecast horizon must be at least 1");
  if (z_t.rank() != 3) throw DimensionError("horizon gate expects (B, N, C), got " + shape_str(z_t.shape()));
  const std::size_t b = z_t.dim(0);
  auto summary = mean(z_t, 1);  // (B, C)
  auto h = Tensor<T>::full({b, 1}, static_cast<T>(static_cast<double>(horizon) / horizon_norm));
  auto g_in = concat<T>({summary, h}, 1);  // (B, C+1)
  return sigmoid(output(relu(hidden(g_in))));
}

template <typename T>
GateOutput<T> HorizonGate<T>::operator()(const Tensor<T>& f_tilde, const Tensor<T>& z_t,
                                         std::size_t horizon) const {
  auto g = gate(z_t, horizon);
  return {g, gated_mix(g, f_tilde, z_t)};
}

template <typename T>
void HorizonGate<T>::collect(std::vector<Tensor<T>>& out) const {
  hidden.collect(out);
  output.collect(out);
}

template <typename T>
CmaHead<T> CmaHead<T>::create(ParamRegistry<T>& reg, const std::string& name, std::size_t channels,
                              std::size_t prompt_dim, CounterRng& rng) {
  CmaHead h;
  h.query = Linear<T>::create(reg, name + ".query", channels, channels, true, rng);
  h.key = Linear<T>::create(reg, name + ".key", prompt_dim, channels, true, rng);
  h.value = Linear<T>::create(reg, name + ".value", prompt_dim, channels, true, rng);
  return h;
}

template <typename T>
Tensor<T> CmaHead<T>::operator()(const Tensor<T>& z_g, const Tensor<T>& z_llm,
                                 const DropoutCtx& drop) const {
  if (z_g.rank() != 3 || z_llm.rank() != 3 || z_g.dim(0) != z_llm.dim(0) || z_g.dim(2) != z_llm.dim(2)) {
    throw DimensionError("cross-modal head: variable axes of " + shape_str(z_g.shape()) + " and " +
                         shape_str(z_llm.shape()) + " disagree");
  }
  auto tokens = transpose(z_g, 1, 2);     // (B, N, C)
  auto prompt = transpose(z_llm, 1, 2);   // (B, N, E_p)
  auto out = scaled_dot_attention(query(tokens), key(prompt), value(prompt), drop);
  return transpose(out, 1, 2);
}

template <typename T>
void CmaHead<T>::collect(std::vector<Tensor<T>>& out) const {
  query.collect(out);
  key.collect(out);
  value.collect(out);
}

template <typename T>
Tensor<T> combine_heads(const std::vector<Tensor<T>>& heads, const Tensor<T>& weights) {
  if (heads.empty()) throw ContractError("head fusion needs at least one head");
  for (const auto& h : heads) require_same(h, heads.front(), "head fusion");
  const auto& s = heads.front().shape();
  if (s.size() != 3) throw DimensionError("heads must be (B, C, N), got " + shape_str(s));
  const std::size_t b = s[0], c = s[1], n = s[2], hcount = heads.size();
  if (weights.shape() != Shape{b, n, hcount}) {
    throw DimensionError("head weights " + shape_str(weights.shape()) + " do not match " +
                         std::to_string(hcount) + " heads of shape " + shape_str(s));
  }
  std::vector<Tensor<T>> tokens;
  for (const auto& h : heads) tokens.push_back(transpose(h, 1, 2));  // (B, N, C)
  auto stacked = reshape(concat(tokens, 2), {b, n, hcount, c});
  auto mixed = matmul(reshape(weights, {b, n, 1, hcount}), stacked);  // (B, N, 1, C)
  return transpose(reshape(mixed, {b, n, c}), 1, 2);
}

template <typename T>
HeadGate<T>::HeadGate(ParamRegistry<T>& reg, const std::string& name, std::size_t channels,
                      std::size_t head_count, CounterRng& rng)
    : heads(head_count) {
  if (head_count == 0) throw ConfigError("head gate needs at least one head");
  hidden = Linear<T>::create(reg, name + ".hidden", head_count * channels, kHeadGateHidden, true, rng);
  norm = LayerNorm<T>::create(reg, name + ".norm", kHeadGateHidden);
  score = Linear<T>::create(reg, name + ".score", kHeadGateHidden, head_count, true, rng);
}

template <typename T>
HeadFusionOutput<T> HeadGate<T>::operator()(const std::vector<Tensor<T>>& head_outputs) const {
  if (head_outputs.empty()) throw ContractError("head fusion needs at least one head");
  if (head_outputs.size() != heads) {
    throw DimensionError("head gate built for " + std::to_string(heads) + " heads, given " +
                         std::to_string(head_outputs.size()));
  }
  std::vector<Tensor<T>> tokens;
  for (const auto& h : head_outputs) tokens.push_back(transpose(h, 1, 2));
  auto u = concat(tokens, 2);  // (B, N, H*C)
  auto pi = softmax(score(relu(norm(hidden(u)))), -1);  // (B, N, H)
  return {combine_heads(head_outputs, pi), pi};
}

template <typename T>
void HeadGate<T>::collect(std::vector<Tensor<T>>& out) const {
  hidden.collect(out);
  norm.collect(out);
  score.collect(out);
}

template <typename T>
ChannelResidual<T>::ChannelResidual(ParamRegistry<T>& reg, const std::string& name, std::size_t channels) {
  gamma_raw = reg.add(name + ".gamma_raw", Tensor<T>::zeros({channels}));
}

template <typename T>
Tensor<T> ChannelResidual<T>::operator()(const Tensor<T>& lambda, const Tensor<T>& z_g) const {
  require_same(lambda, z_g, "channel residual");
  if (lambda.rank() != 3 || lambda.dim(1) != gamma_raw.numel()) {
    throw DimensionError("channel residual expects (B, " + std::to_string(gamma_raw.numel()) +
                         ", N), got " + shape_str(lambda.shape()));
  }
  // Channels moved last so gamma broadcasts over the leading axes.
  auto g = gamma();
  auto mixed = add(mul(transpose(lambda, 1, 2), g), mul(transpose(z_g, 1, 2), affine(g, -1.0, 1.0)));
  return transpose(mixed, 1, 2);
}

template Tensor<float> gated_mix(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&);
template Tensor<double> gated_mix(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&);
template Tensor<float> combine_heads(const std::vector<Tensor<float>>&, const Tensor<float>&);
template Tensor<double> combine_heads(const std::vector<Tensor<double>>&, const Tensor<double>&);
template class HorizonGate<float>;
template class HorizonGate<double>;
template struct CmaHead<float>;
template struct CmaHead<double>;
template class HeadGate<float>;
template class HeadGate<double>;
template class ChannelResidual<float>;
template class ChannelResidual<double>;

}  // namespace t3time
