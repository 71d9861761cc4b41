#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "support.hpp"
#include "t3time/cli.hpp"
#include "t3time/data.hpp"
#include "t3time/errors.hpp"
#include "t3time/encoders.hpp"
#include "t3time/model.hpp"

namespace fs = std::filesystem;
using namespace t3time;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

class Cli : public ::testing::Test {
 protected:
  fs::path dir;
  std::ostringstream out, err;

  void SetUp() override {
    dir = fs::temp_directory_path() / ("t3time_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::ofstream(dir / "toy.csv") << to_csv(t3test::toy_table(400, 3));
    std::ofstream(dir / "small.cfg") << "# tiny model for fast runs\n"
                                        "llm_dim=16\nchannels=8\nheads=2\nencoder_layers=1\ndecoder_layers=1\n"
                                        "seq_len=16\ndropout=0\nbatch_size=32\nepochs=1\nmax_steps=3\n";
  }
  void TearDown() override { fs::remove_all(dir); }

  int run(std::vector<std::string> args) {
    out.str("");
    err.str("");
    return run_cli(args, out, err);
  }
  std::vector<std::string> base(const std::string& cmd, const std::string& out_dir = "out") {
    return {cmd, "--config", (dir / "small.cfg").string(), "--data", (dir / "toy.csv").string(), "--out",
            (dir / out_dir).string()};
  }
  static std::vector<std::string> with(std::vector<std::string> v, std::initializer_list<std::string> extra) {
    v.insert(v.end(), extra);
    return v;
  }
};

}  // namespace

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run({}), kExitConfig);
  EXPECT_EQ(run({"fly"}), kExitConfig);
  EXPECT_EQ(run({"train", "--bogus", "1"}), kExitConfig);
  EXPECT_EQ(run({"--help"}), kExitOk);
  EXPECT_EQ(run({"train"}), kExitConfig);  // no data
  EXPECT_EQ(run(with(base("train"), {"--pred-len", "8", "--dropout", "1.5"})), kExitConfig);
  EXPECT_EQ(run(with(base("train"), {"--pred-len", "8", "--ablate", "everything"})), kExitConfig);
  EXPECT_EQ(run({"train", "--data", (dir / "none.csv").string()}), kExitConfig);
  EXPECT_EQ(run({"train", "--config", (dir / "none.cfg").string()}), kExitConfig);
}

TEST_F(Cli, DataErrors) {
  std::ofstream(dir / "bad.csv") << "date,a\n2020-01-01,1\n2020-01-02,oops\n";
  EXPECT_EQ(run({"train", "--data", (dir / "bad.csv").string(), "--out", (dir / "o").string()}), kExitData);
  EXPECT_NE(err.str().find("data error"), std::string::npos);
  EXPECT_EQ(run(with(base("train"), {"--seq-len", "390", "--pred-len", "8"})), kExitData);
}

TEST_F(Cli, TrainThreeSeedsThenEvalIsReproducible) {
  ASSERT_EQ(run(with(base("train"), {"--pred-len", "8", "--seed", "1,2,3"})), kExitOk) << err.str();
  const auto report = slurp(dir / "out" / "report.txt");
  for (const char* s : {"seed=1 ", "seed=2 ", "seed=3 "})
    EXPECT_NE(report.find(std::string("horizon=8 ") + s), std::string::npos) << s;
  EXPECT_NE(report.find("horizon=8 mean_mse="), std::string::npos);
  EXPECT_EQ(report.find("config.#"), std::string::npos);
  for (int s = 1; s <= 3; ++s) EXPECT_TRUE(fs::exists(dir / "out" / ("h8_seed" + std::to_string(s) + ".t3ckpt")));
  const auto j = nlohmann::json::parse(slurp(dir / "out" / "summary.json"));
  EXPECT_EQ(j["horizons"][0]["seeds"].size(), 3u);
  // A single horizon still gets its average row.
  EXPECT_EQ(count_lines(out.str()), 3u);
  EXPECT_NE(out.str().find("avg"), std::string::npos);

  const auto eval_args = with(base("eval"), {"--pred-len", "8", "--seed", "1,2,3"});
  ASSERT_EQ(run(eval_args), kExitOk) << err.str();
  const auto first = out.str();
  const auto first_report = slurp(dir / "out" / "eval_report.txt");
  ASSERT_EQ(run(eval_args), kExitOk);
  EXPECT_EQ(out.str(), first);
  EXPECT_EQ(slurp(dir / "out" / "eval_report.txt"), first_report);
  // Evaluating the restored checkpoint reproduces the test MSE from training.
  const auto mse_line = [](const std::string& text) { return text.substr(text.find("seed=1 mse="), 24); };
  EXPECT_EQ(mse_line(first_report), mse_line(report));
}

TEST_F(Cli, EvalTableHasOneRowPerHorizonAndAverage) {
  ASSERT_EQ(run(with(base("train"), {"--pred-len", "4,8,12,16"})), kExitOk) << err.str();
  ASSERT_EQ(run(with(base("eval"), {"--pred-len", "4,8,12,16"})), kExitOk) << err.str();
  std::istringstream lines(out.str());
  std::vector<std::string> rows;
  for (std::string l; std::getline(lines, l);) rows.push_back(l);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].substr(0, 7), "horizon");
  for (int i = 0; i < 4; ++i) EXPECT_EQ(std::stoul(rows[1 + i]), 4u * (i + 1));
  EXPECT_EQ(rows[5].substr(0, 3), "avg");
}

TEST_F(Cli, EvalCheckpointErrors) {
  EXPECT_EQ(run(with(base("eval"), {"--pred-len", "8"})), kExitCheckpoint);  // nothing trained yet
  ASSERT_EQ(run(with(base("train"), {"--pred-len", "8"})), kExitOk) << err.str();
  EXPECT_EQ(run(with(base("eval"), {"--pred-len", "8", "--seq-len", "24"})), kExitCheckpoint);
  std::ofstream(dir / "junk.t3ckpt") << "not a checkpoint";
  EXPECT_EQ(run(with(base("eval"), {"--ckpt", (dir / "junk.t3ckpt").string()})), kExitCheckpoint);
  std::ofstream(dir / "wide.csv") << to_csv(t3test::toy_table(400, 4));
  EXPECT_EQ(run({"eval", "--data", (dir / "wide.csv").string(), "--ckpt", (dir / "out" / "h8_seed1.t3ckpt").string(),
                 "--out", (dir / "o2").string()}),
            kExitCheckpoint);
}

TEST_F(Cli, ConfigEchoIsWrittenBeforeComputeAndRoundTrips) {
  // The store is missing, so the run fails after the echo is written.
  EXPECT_EQ(run(with(base("train"), {"--pred-len", "8", "--emb", "store:" + (dir / "missing").string()})),
            kExitConfig);
  const auto echo = dir / "out" / "train_config.txt";
  ASSERT_TRUE(fs::exists(echo));
  const auto text = slurp(echo);
  EXPECT_NE(text.find("channels=8"), std::string::npos);
  EXPECT_NE(text.find("pred_len=8"), std::string::npos);
  EXPECT_EQ(run({"train", "--config", echo.string(), "--out", (dir / "again").string(), "--emb", "stub"}), kExitOk)
      << err.str();
  auto redo = slurp(dir / "again" / "train_config.txt");
  auto strip = [](std::string s, const std::string& key) {
    const auto at = s.find(key);
    return s.erase(at, s.find('\n', at) - at + 1);
  };
  EXPECT_EQ(strip(strip(redo, "out="), "emb="), strip(strip(text, "out="), "emb="));
}

TEST_F(Cli, AblateWritesFiveVariants) {
  ASSERT_EQ(run(with(base("ablate"), {"--pred-len", "8"})), kExitOk) << err.str();
  std::istringstream lines(out.str());
  std::vector<std::string> rows;
  for (std::string l; std::getline(lines, l);) rows.push_back(l);
  ASSERT_EQ(rows.size(), 6u);
  std::vector<std::size_t> params;
  for (std::size_t i = 0; i < 5; ++i) {
    const auto& label = ablation_labels()[i];
    EXPECT_EQ(rows[i + 1].substr(0, label.size()), label);
    std::istringstream cells(rows[i + 1].substr(26));
    std::size_t p;
    cells >> p;
    params.push_back(p);
  }
  for (std::size_t i = 1; i < 5; ++i) EXPECT_LT(params[i], params[0]) << ablation_labels()[i];
  EXPECT_TRUE(fs::exists(dir / "out" / "ablation.json"));
  EXPECT_TRUE(fs::exists(dir / "out" / "ablate_config.txt"));
}

TEST_F(Cli, EmbInfoEchoesHeaderAndChecksum) {
  std::vector<float> v(5 * 3 * 4);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(i) * 0.25f;
  EmbeddingStore store(5, 3, 4, v);
  store.save(dir / "e.t3emb");
  ASSERT_EQ(run({"emb-info", (dir / "e.t3emb").string()}), kExitOk) << err.str();
  const auto text = out.str();
  EXPECT_NE(text.find("windows=5\n"), std::string::npos);
  EXPECT_NE(text.find("variables=3\n"), std::string::npos);
  EXPECT_NE(text.find("dim=4\n"), std::string::npos);
  EXPECT_NE(text.find("payload_bytes=240\n"), std::string::npos);
  char want[64];
  std::snprintf(want, sizeof(want), "checksum=fnv1a64:%016llx\n", static_cast<unsigned long long>(store.checksum()));
  EXPECT_NE(text.find(want), std::string::npos);
  EXPECT_NE(text.find("first_norm=0.935414\n"), std::string::npos);  // |(0, .25, .5, .75)|
  EXPECT_FALSE(fs::exists(dir / "t3time_out"));
}

TEST_F(Cli, TruncatedStoreReportsOffset) {
  EmbeddingStore store(5, 3, 4, std::vector<float>(60, 1.0f));
  auto bytes = store.serialize();
  bytes.resize(bytes.size() - 10);
  std::ofstream(dir / "cut.t3emb", std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                          static_cast<std::streamsize>(bytes.size()));
  EXPECT_EQ(run({"emb-info", (dir / "cut.t3emb").string()}), kExitStore);
  EXPECT_NE(err.str().find("byte offset " + std::to_string(bytes.size())), std::string::npos) << err.str();
  std::ofstream(dir / "bad.t3emb") << "NOTEMB-and-more-bytes-here";
  EXPECT_EQ(run({"emb-info", (dir / "bad.t3emb").string()}), kExitStore);
  EXPECT_NE(err.str().find("byte offset 0"), std::string::npos);
}

TEST_F(Cli, StoreBackedTraining) {
  // Stores per split sized to the segment grids.
  const auto table = t3test::toy_table(400, 3);
  const auto segs = split(table, standard_split("toy", 400), 16);
  fs::create_directories(dir / "emb");
  const char* names[] = {"train", "val", "test"};
  for (int s = 0; s < 3; ++s) {
    const std::size_t w = anchor_count(segs[s].table.rows(), 16);
    EmbeddingStore(w, 3, 16, std::vector<float>(w * 3 * 16, 0.1f)).save(dir / "emb" / (std::string(names[s]) + ".t3emb"));
  }
  EXPECT_EQ(run(with(base("train"), {"--pred-len", "8", "--emb", "store:" + (dir / "emb").string()})), kExitOk)
      << err.str();
  EXPECT_EQ(run(with(base("train", "o2"), {"--pred-len", "8", "--emb", "store:" + (dir / "emb").string(),
                                            "--channel", "16"})),
            kExitOk);
  std::ofstream(dir / "wrongdim.cfg") << slurp(dir / "small.cfg") << "llm_dim=32\n";
  EXPECT_NE(run({"train", "--config", (dir / "wrongdim.cfg").string(), "--data", (dir / "toy.csv").string(), "--out",
                 (dir / "o3").string(), "--pred-len", "8", "--emb", "store:" + (dir / "emb").string()}),
            kExitOk);
}

TEST(CliHelpers, DefaultsAndPaths) {
  EXPECT_EQ(default_horizons("ILI"), (std::vector<std::size_t>{24, 36, 48, 60}));
  EXPECT_EQ(default_horizons("ETTh1"), (std::vector<std::size_t>{96, 192, 336, 720}));
  EXPECT_EQ(store_path_for("x/{split}.bin", "val"), "x/val.bin");
  EXPECT_EQ(store_path_for("one.t3emb", "test"), "one.t3emb");
  EXPECT_EQ(ablation_labels().size(), 5u);
  EXPECT_FALSE(ablation_for_row(1).use_frequency);
  EXPECT_FALSE(ablation_for_row(4).use_gating);
  EXPECT_THROW(parse_key_values("novalue\n", "cfg"), ConfigError);
  const auto kv = parse_key_values("# c\n a = 1 \n\nb=x,y\n", "cfg");
  ASSERT_EQ(kv.size(), 2u);
  EXPECT_EQ(kv[0].first, "a");
  EXPECT_EQ(kv[0].second, "1");
}
