#include <gtest/gtest.h>

#include <set>

#include "support.hpp"
#include "t3time/errors.hpp"
#include "t3time/grad_check.hpp"
#include "t3time/model.hpp"

using namespace t3time;
using t3test::random_tensor;
using t3test::to_vec;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.seq_len = 16;
  c.pred_len = 8;
  c.variables = 3;
  c.channels = 8;
  c.cma_heads = 4;
  c.attention_heads = 2;
  c.encoder_layers = 2;
  c.decoder_layers = 2;
  c.dropout = 0.2;
  c.llm_dim = 12;
  c.seed = 5;
  return c;
}

template <typename T>
Tensor<T> prompts_for(const ModelConfig& c, std::size_t b, std::uint64_t seed) {
  return random_tensor<T>({b, c.variables, c.llm_dim}, seed);
}

}  // namespace

TEST(Model, ShapeContract) {
  ModelConfig c;
  c.seq_len = 96;
  c.pred_len = 96;
  c.variables = 7;
  c.channels = 16;
  c.cma_heads = 4;
  c.attention_heads = 4;
  c.dropout = 0.1;
  T3TimeModel<float> m(c);
  const auto y = m.forward(random_tensor<float>({2, 7, 96}, 1), prompts_for<float>(c, 2, 2));
  EXPECT_EQ(y.shape(), (Shape{2, 96, 7}));
  EXPECT_THROW(m.forward(random_tensor<float>({2, 6, 96}, 1), prompts_for<float>(c, 2, 2)), DimensionError);
  EXPECT_THROW(m.forward(random_tensor<float>({2, 7, 96}, 1), random_tensor<float>({2, 7, 5}, 2)), DimensionError);
}

TEST(Model, IliHorizons) {
  const PresetRow* ili = find_preset("ILI");
  ASSERT_NE(ili, nullptr);
  EXPECT_EQ(ili->seq_len, 36u);
  for (std::size_t h : {24u, 36u, 48u, 60u}) {
    T3TimeModel<float> m(config_from_preset(*ili, h));
    EXPECT_EQ(m.forward(random_tensor<float>({1, 7, 36}, h), prompts_for<float>(m.config(), 1, 3)).shape(),
              (Shape{1, h, 7}));
  }
}

TEST(Model, DeterministicWithoutDropout) {
  const auto c = small_config();
  T3TimeModel<float> a(c), b(c);
  auto x = random_tensor<float>({3, 3, 16}, 1);
  auto p = prompts_for<float>(c, 3, 2);
  EXPECT_EQ(to_vec(a.forward(x, p)), to_vec(b.forward(x, p)));
  EXPECT_EQ(to_vec(a.forward(x, p)), to_vec(a.forward(x, p)));
  // Training mode draws dropout masks; evaluation mode is unaffected by them.
  EXPECT_NE(to_vec(a.forward(x, p, true)), to_vec(a.forward(x, p)));
  EXPECT_EQ(to_vec(a.forward(x, p)), to_vec(b.forward(x, p)));
}

TEST(Model, SeedChangesInitialization) {
  auto c = small_config();
  T3TimeModel<float> a(c);
  c.seed = 6;
  T3TimeModel<float> b(c);
  EXPECT_NE(to_vec(a.projection.weight), to_vec(b.projection.weight));
}

TEST(Model, AblationStructure) {
  auto c = small_config();
  c.ablation.use_residual = false;
  T3TimeModel<float> no_res(c);
  for (const auto& p : no_res.registry().params()) EXPECT_EQ(p.name.find("residual"), std::string::npos);
  EXPECT_FALSE(no_res.residual.has_value());

  c = small_config();
  c.ablation.use_multihead_cma = false;
  T3TimeModel<float> one_head(c);
  EXPECT_EQ(one_head.heads.size(), 1u);
  EXPECT_FALSE(one_head.head_gate.has_value());
  std::set<std::string> prefixes;
  for (const auto& p : one_head.registry().params()) {
    EXPECT_EQ(p.name.find("head_gate"), std::string::npos);
    if (p.name.starts_with("cma.")) prefixes.insert(p.name.substr(0, p.name.find('.', 4)));
  }
  EXPECT_EQ(prefixes, (std::set<std::string>{"cma.head0"}));

  c = small_config();
  c.ablation.use_frequency = false;
  T3TimeModel<float> no_freq(c);
  EXPECT_FALSE(no_freq.frequency.has_value());
  EXPECT_FALSE(no_freq.gate.has_value());

  c = small_config();
  c.ablation.use_gating = false;
  T3TimeModel<float> no_gate(c);
  EXPECT_TRUE(no_gate.frequency.has_value());
  EXPECT_FALSE(no_gate.gate.has_value());
}

TEST(ParameterCount, SingleLinear) {
  ParamRegistry<double> reg;
  CounterRng rng(1);
  Linear<double>::create(reg, "lin", 4, 2, true, rng);
  EXPECT_EQ(reg.element_count(), 10u);
}

TEST(ParameterCount, MatchesClosedFormPerComponent) {
  const auto c = small_config();
  const t3test::ParamCounts k = t3test::counts_for(c);
  T3TimeModel<float> m(c);
  const auto comp = m.component_counts();
  EXPECT_EQ(comp.at("frequency"), k.frequency());
  EXPECT_EQ(comp.at("gate"), k.gate());
  EXPECT_EQ(comp.at("time"), k.time());
  EXPECT_EQ(comp.at("prompt"), k.prompt());
  EXPECT_EQ(comp.at("cma"), k.h * k.head());
  EXPECT_EQ(comp.at("head_gate"), k.head_gate());
  EXPECT_EQ(comp.at("residual"), k.c);
  EXPECT_EQ(comp.at("decoder"), k.decoder());
  EXPECT_EQ(comp.at("projection"), k.projection());
  const std::size_t total = k.frequency() + k.gate() + k.time() + k.prompt() + k.h * k.head() + k.head_gate() + k.c +
                            k.decoder() + k.projection();
  EXPECT_EQ(m.parameter_count(), total);
}

TEST(ParameterCount, RegistryEqualsDirectTraversal) {
  for (auto flip : {0, 1, 2, 3, 4}) {
    auto c = small_config();
    if (flip == 1) c.ablation.use_frequency = false;
    if (flip == 2) c.ablation.use_multihead_cma = false;
    if (flip == 3) c.ablation.use_residual = false;
    if (flip == 4) c.ablation.use_gating = false;
    T3TimeModel<float> m(c);
    const auto stored = m.stored_tensors();
    std::size_t total = 0;
    std::set<const void*> nodes;
    for (const auto& t : stored) {
      total += t.numel();
      nodes.insert(t.node().get());
    }
    EXPECT_EQ(nodes.size(), stored.size()) << "a tensor was visited twice";
    EXPECT_EQ(stored.size(), m.registry().size());
    EXPECT_EQ(total, m.parameter_count());
    for (const auto& p : m.registry().params()) EXPECT_TRUE(nodes.count(p.tensor.node().get())) << p.name;
  }
}

TEST(ParameterCount, MonotoneInChannels) {
  auto c = small_config();
  const std::size_t a = T3TimeModel<float>(c).parameter_count();
  c.channels *= 2;
  EXPECT_GT(T3TimeModel<float>(c).parameter_count(), a);
}

TEST(ParameterCount, AblationDeltasAreStructural) {
  const auto base = small_config();
  const t3test::ParamCounts k = t3test::counts_for(base);
  const std::size_t full = T3TimeModel<float>(base).parameter_count();
  auto variant = [&](auto edit) {
    auto c = base;
    edit(c.ablation);
    return T3TimeModel<float>(c).parameter_count();
  };
  EXPECT_EQ(full - variant([](Ablation& a) { a.use_frequency = false; }), k.frequency() + k.gate());
  EXPECT_EQ(full - variant([](Ablation& a) { a.use_multihead_cma = false; }), (k.h - 1) * k.head() + k.head_gate());
  EXPECT_EQ(full - variant([](Ablation& a) { a.use_residual = false; }), k.c);
  EXPECT_EQ(full - variant([](Ablation& a) { a.use_gating = false; }), k.gate());
}

TEST(Model, UngatedFusionIsEqualMix) {
  auto c = small_config();
  c.ablation.use_gating = false;
  T3TimeModel<double> m(c);
  auto x = random_tensor<double>({2, 3, 16}, 1);
  auto p = prompts_for<double>(c, 2, 2);
  const auto f = m.encode_frequency(x, {});
  const auto z = m.encode_time(x, {});
  std::vector<double> mix(2 * 8 * 3);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t ch = 0; ch < 8; ++ch) {
        const std::size_t src = (b * 3 + n) * 8 + ch;
        mix[(b * 8 + ch) * 3 + n] = 0.5 * f.values()[src] + 0.5 * z.values()[src];
      }
  const auto manual = m.align_and_decode(TensorD({2, 8, 3}, mix), m.encode_prompt(p, {}), {});
  EXPECT_LT(t3test::max_abs_diff(to_vec(m.forward(x, p)), to_vec(manual)), 1e-12);
}

TEST(Model, WithoutFrequencyFusionIsTimeEncoding) {
  auto c = small_config();
  c.ablation.use_frequency = false;
  T3TimeModel<double> m(c);
  auto x = random_tensor<double>({1, 3, 16}, 1);
  ForwardTrace<double> tr;
  m.forward(x, prompts_for<double>(c, 1, 2), false, &tr);
  EXPECT_FALSE(tr.f_tilde.defined());
  EXPECT_EQ(to_vec(tr.z_g), to_vec(transpose(tr.z_t, 1, 2)));
}

TEST(Model, TraceStagesAreConsistent) {
  const auto c = small_config();
  T3TimeModel<double> m(c);
  auto x = random_tensor<double>({2, 3, 16}, 1);
  ForwardTrace<double> tr;
  const auto y = m.forward(x, prompts_for<double>(c, 2, 2), false, &tr);
  EXPECT_EQ(tr.f_tilde.shape(), (Shape{2, 3, 8}));
  EXPECT_EQ(tr.gate.shape(), (Shape{2, 8}));
  EXPECT_EQ(tr.z_g.shape(), (Shape{2, 8, 3}));
  EXPECT_EQ(tr.prompt.shape(), (Shape{2, 8, 3}));
  EXPECT_EQ(tr.heads.size(), 4u);
  EXPECT_EQ(tr.head_weights.shape(), (Shape{2, 3, 4}));
  EXPECT_EQ(tr.theta.shape(), (Shape{2, 8, 3}));
  EXPECT_EQ(tr.z_d.shape(), (Shape{2, 3, 8}));
  EXPECT_EQ(to_vec(tr.forecast), to_vec(y));
  EXPECT_EQ(to_vec(m.decode(tr.theta, {})), to_vec(y));
}

TEST(Model, DecoderPassthroughWithZeroedBranches) {
  const auto c = small_config();
  T3TimeModel<double> m(c);
  auto zero = [](Tensor<double> t) {
    if (!t.defined()) return;
    auto v = t.mutable_values();
    std::fill(v.begin(), v.end(), 0.0);
  };
  for (auto& blk : m.decoder) {
    for (auto* attn : {&blk.self_attn, &blk.cross_attn}) {
      zero(attn->value.weight);
      zero(attn->value.bias);
      zero(attn->output.weight);
      zero(attn->output.bias);
    }
    zero(blk.ffn.out.weight);
    zero(blk.ffn.out.bias);
  }
  auto theta = random_tensor<double>({2, 8, 3}, 4);
  ForwardTrace<double> tr;
  m.decode(theta, {}, &tr);
  EXPECT_LT(t3test::max_abs_diff(to_vec(tr.z_d), to_vec(transpose(theta, 1, 2))), 1e-15);
}

TEST(Model, EndToEndGradientCheck) {
  const auto c = t3test::tiny_config();
  T3TimeModel<double> m(c);
  CounterRng r(8);
  for (auto& p : m.registry().params())
    for (auto& v : p.tensor.mutable_values()) v += r.uniform(-0.2, 0.2);  // move off symmetric init
  auto x = random_tensor<double>({1, 2, 8}, 1, -2, 2);
  auto p = prompts_for<double>(c, 1, 2);
  auto w = random_tensor<double>({1, 4, 2}, 3);
  std::vector<TensorD> params;
  for (auto& q : m.registry().params()) params.push_back(q.tensor);
  const auto res = finite_diff_check<double>([&] { return sum_all(mul(m.forward(x, p), w)); }, params, 1e-5);
  EXPECT_LT(res.max_rel_error, 1e-4) << "worst input " << m.registry().params()[res.worst_input].name;
  EXPECT_GT(res.coordinates, 500u);
}

TEST(Config, SerializeRoundTrip) {
  auto c = small_config();
  c.dropout = 0.35;
  c.horizon_norm = 336.5;
  c.ablation.use_gating = false;
  c.time_positional_encoding = true;
  const auto back = ModelConfig::parse(c.serialize());
  EXPECT_EQ(back.serialize(), c.serialize());
  EXPECT_EQ(back.dropout, 0.35);
  EXPECT_THROW(ModelConfig::parse("nope=1\n"), ConfigError);
  EXPECT_THROW(ModelConfig::parse("channels=abc\n"), ConfigError);
  EXPECT_THROW(ModelConfig::parse("channels\n"), ConfigError);
  EXPECT_EQ(ModelConfig::parse("# comment\n\nchannels=32\n").channels, 32u);
}

TEST(Config, Validation) {
  auto c = small_config();
  c.channels = 9;
  EXPECT_THROW(T3TimeModel<float>{c}, ConfigError);
  c = small_config();
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.pred_len = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = small_config();
  c.ablation.use_multihead_cma = false;
  EXPECT_EQ(c.resolved().cma_heads, 1u);
  EXPECT_EQ(small_config().resolved().ffn_hidden, 32u);
  EXPECT_EQ(small_config().resolved().prompt_dim, 8u);
}

TEST(Presets, BenchmarkRows) {
  const PresetRow* h1 = find_preset("etth1");
  ASSERT_NE(h1, nullptr);
  EXPECT_EQ(h1->batch_size, 256u);
  EXPECT_EQ(h1->dropout, 0.4);
  EXPECT_EQ(h1->channels, 256u);
  EXPECT_EQ(h1->learning_rate, 1e-4);
  EXPECT_EQ(find_preset("Weather")->encoder_layers, 6u);
  EXPECT_EQ(find_preset("Weather")->variables, 21u);
  EXPECT_EQ(find_preset("ECL")->epochs, 50u);
  EXPECT_EQ(find_preset("nope"), nullptr);
  EXPECT_EQ(preset_table().size(), 7u);
  const auto c = config_from_preset(*h1, 192);
  EXPECT_EQ(c.pred_len, 192u);
  EXPECT_EQ(c.cma_heads, 4u);
  EXPECT_EQ(c.channels, 256u);
}

TEST(Checkpoint, RoundTripRestoresOutputs) {
  const auto c = small_config();
  T3TimeModel<float> a(c), b(c);
  CounterRng r(3);
  for (auto& p : a.registry().params())
    for (auto& v : p.tensor.mutable_values()) v += static_cast<float>(r.uniform(-0.1, 0.1));
  auto x = random_tensor<float>({2, 3, 16}, 1);
  auto p = prompts_for<float>(c, 2, 2);
  EXPECT_NE(to_vec(a.forward(x, p)), to_vec(b.forward(x, p)));
  const auto bytes = serialize_checkpoint(make_checkpoint(a));
  load_parameters(b, parse_checkpoint(bytes));
  EXPECT_EQ(to_vec(a.forward(x, p)), to_vec(b.forward(x, p)));
  EXPECT_EQ(serialize_checkpoint(make_checkpoint(b)), bytes);
}

TEST(Checkpoint, Errors) {
  const auto c = small_config();
  T3TimeModel<float> a(c);
  auto bytes = serialize_checkpoint(make_checkpoint(a));
  EXPECT_THROW(parse_checkpoint(std::span(bytes).first(bytes.size() - 3)), CheckpointError);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(parse_checkpoint(bad), CheckpointError);
  auto longer = bytes;
  longer.push_back(1);
  EXPECT_THROW(parse_checkpoint(longer), CheckpointError);
  auto other = c;
  other.channels = 16;
  T3TimeModel<float> wide(other);
  EXPECT_THROW(load_parameters(wide, parse_checkpoint(bytes)), CheckpointError);
  EXPECT_THROW(read_checkpoint("/nonexistent/ckpt.t3ckpt"), CheckpointError);
}
