#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "support.hpp"
#include "t3time/errors.hpp"
#include "t3time/grad_check.hpp"
#include "t3time/train.hpp"

using namespace t3time;
using t3test::random_tensor;
using t3test::to_vec;

namespace {

ModelConfig train_config() {
  auto c = t3test::tiny_config();
  c.seq_len = 24;
  c.pred_len = 8;
  c.channels = 8;
  c.dropout = 0.1;
  c.llm_dim = 16;
  return c;
}

struct Fixture {
  WindowDataset train, val;
};

Fixture sinusoid_data(std::size_t l, std::size_t lp) {
  const auto t = t3test::sinusoid_table(400);
  const auto segs = split(t, {280, 60, 60}, l);
  return {WindowDataset(segs[0].table, l, lp), WindowDataset(segs[1].table, l, lp)};
}

}  // namespace

TEST(Loss, MseValueAndGradient) {
  TensorD p({2, 2}, {1, 2, 3, 4}, true);
  TensorD y({2, 2}, {0, 2, 5, 4});
  auto l = mse_loss(p, y);
  EXPECT_DOUBLE_EQ(l.item(), (1.0 + 0 + 4 + 0) / 4);
  l.backward();
  EXPECT_EQ(std::vector<double>(p.grad().begin(), p.grad().end()), (std::vector<double>{0.5, 0, -1, 0}));
  auto q = random_tensor<double>({3, 4}, 1, -1, 1, true);
  auto t = random_tensor<double>({3, 4}, 2);
  EXPECT_LT(finite_diff_check<double>([=] { return mse_loss(q, t); }, q).max_rel_error, 1e-8);
  EXPECT_THROW(mse_loss(q, random_tensor<double>({4, 3}, 2)), DimensionError);
}

TEST(Metrics, HandValues) {
  const std::vector<double> p = {1, 2, 3}, y = {1, 4, 0};
  EXPECT_DOUBLE_EQ(mse_metric(p, y), 13.0 / 3.0);
  EXPECT_DOUBLE_EQ(mae_metric(p, y), 5.0 / 3.0);
  EXPECT_EQ(mse_metric(p, p), 0.0);
  EXPECT_THROW(mse_metric(p, std::vector<double>{1}), DimensionError);
}

TEST(Metrics, MatchLongDoubleOracle) {
  const auto p = to_vec(random_tensor<double>({10007}, 3, -100, 100));
  const auto y = to_vec(random_tensor<double>({10007}, 4, -100, 100));
  long double se = 0, ae = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const long double d = static_cast<long double>(p[i]) - y[i];
    se += d * d;
    ae += d < 0 ? -d : d;
  }
  const double mse = static_cast<double>(se / p.size()), mae = static_cast<double>(ae / p.size());
  EXPECT_LT(std::abs(mse_metric(p, y) - mse) / mse, 1e-12);
  EXPECT_LT(std::abs(mae_metric(p, y) - mae) / mae, 1e-12);
}

TEST(Metrics, PairwiseSum) {
  EXPECT_EQ(pairwise_sum(std::vector<double>{}), 0.0);
  std::vector<double> v(1000, 0.1);
  EXPECT_NEAR(pairwise_sum(v), 100.0, 1e-12);
  EXPECT_EQ(pairwise_sum(std::vector<double>{3, 4, 5}), 12.0);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamRegistry<double> reg;
  auto p = reg.add("p", TensorD({3}, {1.0, -2.0, 0.5}));
  Adam<double> opt(reg, {.lr = 0.01, .weight_decay = 0.0});
  auto loss = sum_all(mul(p, TensorD({3}, {3.0, -0.2, 1e-3})));
  loss.backward();
  opt.step();
  const std::vector<double> want = {1.0 - 0.01, -2.0 + 0.01, 0.5 - 0.01};
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p.values()[i], want[i], 1e-7);
  EXPECT_EQ(opt.steps(), 1u);
}

TEST(Adam, ZeroGradientOnlyDecays) {
  ParamRegistry<double> reg;
  auto p = reg.add("p", TensorD({2}, {1.0, -4.0}));
  Adam<double> opt(reg, {.lr = 0.1, .weight_decay = 0.0});
  reg.zero_grad();
  sum_all(scale(p, 0.0)).backward();
  opt.step();
  EXPECT_EQ(to_vec(p), (std::vector<double>{1.0, -4.0}));

  Adam<double> decaying(reg, {.lr = 0.1, .weight_decay = 0.5});
  reg.zero_grad();
  sum_all(scale(p, 0.0)).backward();
  decaying.step();
  EXPECT_NEAR(p.values()[0], 1.0 - 0.1 * 0.5, 1e-12);
}

TEST(Adam, MinimizesQuadratic) {
  ParamRegistry<double> reg;
  auto x = reg.add("x", TensorD({1}, {3.0}));
  Adam<double> opt(reg, {.lr = 0.1, .weight_decay = 0.0});
  for (int i = 0; i < 100; ++i) {
    reg.zero_grad();
    sum_all(mul(x, x)).backward();
    opt.step();
  }
  EXPECT_LT(std::abs(x.values()[0]), 0.1);
}

TEST(Adam, MissingGradientIsAContractError) {
  ParamRegistry<double> reg;
  reg.add("a", TensorD({1}, {1.0}));
  Adam<double> opt(reg, {});
  EXPECT_THROW(opt.step(), ContractError);
}

TEST(PromptSources, StubAndStore) {
  const auto d = sinusoid_data(24, 8);
  const auto b = d.train.range(3, 2);
  const auto stub = PromptSource::stub(16, 0);
  EXPECT_TRUE(stub.is_stub());
  const auto e = stub.embeddings<double>(b);
  EXPECT_EQ(e.shape(), (Shape{2, 2, 16}));
  EXPECT_EQ(to_vec(e), to_vec(stub.embeddings<double>(b)));

  std::vector<float> vals(10 * 2 * 4);
  for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<float>(i);
  const auto store = PromptSource::store(EmbeddingStore(10, 2, 4, vals));
  EXPECT_EQ(store.dim(), 4u);
  const auto s = store.embeddings<float>(b);
  EXPECT_EQ(s.values()[0], static_cast<float>(3 * 8));
  EXPECT_EQ(s.values()[8], static_cast<float>(4 * 8));
  EXPECT_THROW(store.embeddings<float>(d.train.range(20, 1)), DimensionError);
}

TEST(Training, DeterministicForAFixedSeed) {
  const auto d = sinusoid_data(24, 8);
  const auto prompts = PromptSource::stub(16);
  TrainConfig tc;
  tc.batch_size = 16;
  tc.epochs = 2;
  tc.max_steps = 12;
  tc.adam.lr = 1e-3;
  tc.seed = 4;
  T3TimeModel<float> a(train_config()), b(train_config());
  const auto ra = train_model(a, d.train, &d.val, prompts, tc);
  const auto rb = train_model(b, d.train, &d.val, prompts, tc);
  EXPECT_EQ(ra.step_losses, rb.step_losses);
  EXPECT_EQ(ra.steps, 12u);
  EXPECT_EQ(serialize_checkpoint(make_checkpoint(a)), serialize_checkpoint(make_checkpoint(b)));
  tc.seed = 5;
  T3TimeModel<float> c(train_config());
  EXPECT_NE(train_model(c, d.train, &d.val, prompts, tc).step_losses, ra.step_losses);
}

TEST(Training, EarlyStoppingRestoresBestEpoch) {
  const auto d = sinusoid_data(24, 8);
  const auto prompts = PromptSource::stub(16);
  TrainConfig tc;
  tc.batch_size = 64;
  tc.epochs = 12;
  tc.patience = 2;
  tc.adam.lr = 3e-2;  // large enough that validation loss stalls
  T3TimeModel<float> m(train_config());
  const auto r = train_model(m, d.train, &d.val, prompts, tc);
  ASSERT_FALSE(r.epochs.empty());
  double best = INFINITY;
  std::size_t best_epoch = 0;
  for (const auto& e : r.epochs) {
    if (e.val_mse < best) {
      best = e.val_mse;
      best_epoch = e.epoch;
    }
  }
  EXPECT_EQ(r.best_epoch, best_epoch);
  EXPECT_EQ(r.best_val_mse, best);
  if (r.early_stopped) EXPECT_EQ(r.epochs.size(), r.best_epoch + tc.patience);
  else EXPECT_EQ(r.epochs.size(), tc.epochs);
  EXPECT_NEAR(evaluate(m, d.val, prompts, 256).mse, best, 1e-9);
}

TEST(Training, LossDecreasesOnSinusoid) {
  const auto d = sinusoid_data(24, 8);
  auto cfg = train_config();
  cfg.dropout = 0.0;
  T3TimeModel<float> m(cfg);
  TrainConfig tc;
  tc.batch_size = 16;
  tc.epochs = 10;
  tc.max_steps = 60;
  tc.adam.lr = 3e-3;
  tc.adam.weight_decay = 0;
  const auto r = train_model(m, d.train, nullptr, PromptSource::stub(16), tc);
  ASSERT_EQ(r.step_losses.size(), 60u);
  auto avg = [&](std::size_t from) {
    double s = 0;
    for (std::size_t i = from; i < from + 10; ++i) s += r.step_losses[i];
    return s / 10;
  };
  EXPECT_LT(avg(50), 0.5 * avg(0));
  for (double l : r.step_losses) EXPECT_TRUE(std::isfinite(l));
}

TEST(Training, EarlyLossTrendOnOverfitSet) {
  // Loss on a fixed eval-mode batch after each of the first 20 steps at lr 1e-4.
  const PresetRow* row = find_preset("ETTm2");
  auto cfg = config_from_preset(*row, 24);
  cfg.variables = 2;
  const WindowDataset ds(t3test::sinusoid_table(2000), 96, 24);
  const auto prompts = PromptSource::stub(cfg.llm_dim);
  T3TimeModel<float> m(cfg);
  const auto probe = ds.range(0, 64);
  auto probe_loss = [&] {
    NoGradGuard ng;
    return static_cast<double>(mse_loss(m.forward(probe.x_tensor<float>(), prompts.embeddings<float>(probe)),
                                        probe.target_tensor<float>())
                                   .item());
  };
  std::vector<double> losses = {probe_loss()};
  TrainConfig tc;
  tc.batch_size = row->batch_size;
  tc.max_steps = 20;
  tc.adam.lr = 1e-4;
  train_model(m, ds, nullptr, prompts, tc, [&](std::size_t, double) { losses.push_back(probe_loss()); });
  ASSERT_EQ(losses.size(), 21u);
  for (std::size_t i = 1; i < losses.size(); ++i) EXPECT_LE(losses[i], 1.1 * losses[i - 1]) << "step " << i;
  EXPECT_LT(losses.back(), losses.front());
}

TEST(Training, RejectsMismatchedWindows) {
  const auto d = sinusoid_data(24, 4);
  T3TimeModel<float> m(train_config());
  EXPECT_THROW(train_model(m, d.train, nullptr, PromptSource::stub(16), {}), ConfigError);
}

TEST(Evaluation, ZeroPredictorScoresAboutOne) {
  // With instance normalization over whole periods the normalized target has
  // unit mean square, so predicting zero gives MSE close to 1.
  const auto t = t3test::sinusoid_table(600);
  WindowDataset ds(t, 96, 96);
  const auto b = ds.range(0, ds.size());
  EXPECT_NEAR(mse_metric(std::vector<double>(b.target_norm.size(), 0.0), b.target_norm), 1.0, 0.02);
}

TEST(Evaluation, ReportsBothScalesAndIsDeterministic) {
  const auto d = sinusoid_data(24, 8);
  T3TimeModel<double> m(train_config());
  const auto prompts = PromptSource::stub(16);
  const auto a = evaluate(m, d.val, prompts, 7, true);
  const auto b = evaluate(m, d.val, prompts, 256);
  EXPECT_EQ(a.windows, d.val.size());
  EXPECT_NEAR(a.mse, b.mse, 1e-12);
  EXPECT_EQ(a.forecast_raw.size(), d.val.size() * 8 * 2);
  const auto all = d.val.range(0, d.val.size());
  EXPECT_NEAR(mse_metric(a.forecast_raw, all.target_raw), a.mse_raw, 1e-9);
  EXPECT_NEAR(mae_metric(a.forecast_raw, all.target_raw), a.mae_raw, 1e-9);
}

TEST(Reports, SeedMeansAndTable) {
  HorizonReport h;
  h.horizon = 96;
  for (double v : {0.3, 0.5, 0.7}) {
    SeedResult s;
    s.test.mse = v;
    s.test.mae = 2 * v;
    h.seeds.push_back(s);
  }
  EXPECT_NEAR(h.mean_mse(), 0.5, 1e-15);
  EXPECT_NEAR(h.mean_mae(), 1.0, 1e-15);
  ForecastReport r;
  r.horizons = {h};
  const auto table = r.table();
  EXPECT_NE(table.find("avg"), std::string::npos);
  EXPECT_NE(table.find("0.500000"), std::string::npos);
  EXPECT_EQ(r.to_text(), r.to_text());
}
