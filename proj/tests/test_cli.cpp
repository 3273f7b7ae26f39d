#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "imba_ids/cli.hpp"

using namespace imba_ids;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Fresh scratch directory per test, removed afterwards.
class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("imba_ids_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // 300 separable rows plus their schema; fast enough for a 1x8 net.
  void write_small_dataset() {
    auto spec = separable_benchmark(1, 100);
    Rng rng(spec.seed);
    std::ofstream csv(path("data.csv"));
    write_csv(synth_generate(spec, rng), csv);
    std::ofstream(path("schema.ini")) << spec.schema().to_ini();
  }

  std::vector<std::string> small_train_args(const std::string& out) {
    return {"train", "--dataset", path("data.csv"), "--schema", path("schema.ini"), "--hidden-layers", "1",
            "--hidden-width", "8", "--epochs", "2", "--learning-rate", "1e-2", "--batch-size", "32", "--out", out};
  }

  fs::path only_run_dir(const std::string& base) {
    std::vector<fs::path> dirs;
    for (const auto& e : fs::directory_iterator(base)) dirs.push_back(e.path());
    EXPECT_EQ(dirs.size(), 1u);
    return dirs.empty() ? fs::path() : dirs.front();
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, HelpAndVersionExitZero) {
  EXPECT_EQ(run({"--help"}).code, 0);
  const auto v = run({"--version"});
  EXPECT_EQ(v.code, 0);
  EXPECT_EQ(v.out, std::string(cli::kVersion) + "\n");
  EXPECT_NE(run({"train", "--help"}).out.find("--learning-rate"), std::string::npos);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({"train", "--no-such-flag", "1"}).code, 2);
  EXPECT_EQ(run({"synth", "--preset", "separable"}).code, 2);  // --out is required
  EXPECT_EQ(run({"gradcheck", "--trials", "0"}).code, 2);
}

TEST_F(CliTest, MissingDatasetKeyExitsTwoAndNamesIt) {
  write_small_dataset();
  const auto r = run({"train", "--schema", path("schema.ini")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("data.train"), std::string::npos) << r.err;
  const auto s = run({"train", "--dataset", path("data.csv")});
  EXPECT_EQ(s.code, 2);
  EXPECT_NE(s.err.find("data.schema"), std::string::npos) << s.err;
}

TEST_F(CliTest, InvalidConfigValueExitsTwo) {
  write_small_dataset();
  auto args = small_train_args(path("runs"));
  args[14] = "0";  // --batch-size value
  const auto r = run(args);
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("train.batch_size"), std::string::npos) << r.err;
  std::ofstream(path("bad.ini")) << "[train]\nepoch = 3\n";
  const auto t = run({"train", "--config", path("bad.ini"), "--dataset", path("data.csv"), "--schema", path("schema.ini")});
  EXPECT_EQ(t.code, 2);
  EXPECT_NE(t.err.find("train.epoch"), std::string::npos) << t.err;
}

TEST_F(CliTest, MissingDataFileExitsOne) {
  write_small_dataset();
  const auto r = run({"train", "--dataset", path("nope.csv"), "--schema", path("schema.ini")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("nope.csv"), std::string::npos);
}

TEST_F(CliTest, TrainWritesRunDirectoryWithManifest) {
  write_small_dataset();
  auto args = small_train_args(path("runs"));
  args.insert(args.end(), {"--seed", "17"});
  const auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("CBA:"), std::string::npos);
  const fs::path run_dir = only_run_dir(path("runs"));
  for (const char* f : {"manifest.json", "config.ini", "model.ckpt", "preprocessor.json", "schema.ini",
                        "history.jsonl", "report.jsonl"})
    EXPECT_TRUE(fs::exists(run_dir / f)) << f;
  const auto manifest = nlohmann::json::parse(slurp(run_dir / "manifest.json"));
  EXPECT_EQ(manifest["config"]["train"]["seed"], 17);
  EXPECT_EQ(manifest["config"]["model"]["keep_prob"], 0.8);  // untouched default
  EXPECT_EQ(manifest["config"]["loss"]["kind"], "attack_sharing");
  EXPECT_EQ(manifest["config"]["loss"]["lambda"], 10.0);
  EXPECT_EQ(manifest["data"]["train"]["rows"], 300);
  EXPECT_EQ(manifest["data"]["train"]["sha256"], sha256_file(path("data.csv")));
  // round(100 / 6) = 17 test rows per class.
  EXPECT_EQ(manifest["data"]["train_rows_used"], 249);
  EXPECT_EQ(manifest["data"]["test_rows_used"], 51);
  EXPECT_EQ(run_dir.filename().string(), "run-" + manifest["run"].get<std::string>());
  EXPECT_EQ(manifest["version"], cli::kVersion);

  std::istringstream history(slurp(run_dir / "history.jsonl"));
  std::string line;
  std::size_t epochs = 0;
  while (std::getline(history, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["epoch"], ++epochs);
  }
  EXPECT_EQ(epochs, 2u);
  // config.ini reloads to the same hyperparameters.
  EXPECT_EQ(to_ini(run_config_from(ini::load((run_dir / "config.ini").string())).train), slurp(run_dir / "config.ini"));
}

TEST_F(CliTest, DifferentSeedsGiveDifferentRunDirectories) {
  write_small_dataset();
  auto a = small_train_args(path("runs"));
  auto b = a;
  b.insert(b.end(), {"--seed", "1"});
  ASSERT_EQ(run(a).code, 0);
  ASSERT_EQ(run(b).code, 0);
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(path("runs"))) ++n;
  EXPECT_EQ(n, 2u);
}

TEST_F(CliTest, RepeatedTrainIsByteIdentical) {
  write_small_dataset();
  ASSERT_EQ(run(small_train_args(path("a"))).code, 0);
  ASSERT_EQ(run(small_train_args(path("b"))).code, 0);
  const fs::path ra = only_run_dir(path("a")), rb = only_run_dir(path("b"));
  EXPECT_EQ(ra.filename(), rb.filename());
  for (const char* f : {"model.ckpt", "report.jsonl", "history.jsonl", "preprocessor.json", "config.ini"})
    EXPECT_EQ(slurp(ra / f), slurp(rb / f)) << f;
}

TEST_F(CliTest, EvaluateReloadsRunAndMatchesTrainReport) {
  write_small_dataset();
  std::ofstream(path("test.csv")) << slurp(path("data.csv"));
  auto args = small_train_args(path("runs"));
  args.insert(args.end(), {"--test", path("test.csv")});
  const auto t = run(args);
  ASSERT_EQ(t.code, 0) << t.err;
  const fs::path run_dir = only_run_dir(path("runs"));
  const auto e = run({"evaluate", "--run", run_dir.string(), "--dataset", path("test.csv"), "--out", path("eval.jsonl")});
  ASSERT_EQ(e.code, 0) << e.err;
  const auto trained = nlohmann::json::parse(slurp(run_dir / "report.jsonl"));
  const auto evaluated = nlohmann::json::parse(slurp(path("eval.jsonl")));
  EXPECT_EQ(trained["cba"], evaluated["cba"]);
  EXPECT_EQ(trained["confusion"], evaluated["confusion"]);
  EXPECT_EQ(run({"evaluate", "--run", path("nowhere"), "--dataset", path("test.csv")}).code, 1);
}

TEST_F(CliTest, CompareEmitsOneRowPerStrategy) {
  write_small_dataset();
  auto args = small_train_args(path("runs"));
  args[0] = "compare";
  args.insert(args.end(), {"--jsonl", path("cmp.jsonl"), "--strategies", "ce,as,under"});
  const auto r = run(args);
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(slurp(path("cmp.jsonl")));
  std::vector<std::string> names;
  std::string line;
  while (std::getline(lines, line)) names.push_back(nlohmann::json::parse(line)["strategy"]);
  EXPECT_EQ(names, (std::vector<std::string>{"ce", "as", "under"}));
  EXPECT_NE(r.out.find("*best"), std::string::npos);
  args.back() = "ce,nonsense";
  EXPECT_EQ(run(args).code, 2);
}

TEST_F(CliTest, GradcheckPassesForReluAndFailsForFlippedDerivative) {
  const auto ok = run({"gradcheck", "--seed", "3"});
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_NE(ok.out.find("PASS"), std::string::npos);

  struct FlippedRelu {
    static double apply(double z) noexcept { return Relu::apply(z); }
    static double derivative(double z) noexcept { return -Relu::derivative(z); }
  };
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_gradcheck<FlippedRelu>({}, out, err), 1);
  EXPECT_NE(out.str().find("FAIL"), std::string::npos);
  EXPECT_NE(out.str().find("worst coordinate"), std::string::npos);
}

TEST_F(CliTest, SynthIsDeterministicAndLoadsCleanly) {
  ASSERT_EQ(run({"synth", "--preset", "long-tail", "--seed", "4", "--out", path("a.csv"), "--schema-out", path("s.ini")}).code, 0);
  ASSERT_EQ(run({"synth", "--preset", "long-tail", "--seed", "4", "--out", path("b.csv")}).code, 0);
  ASSERT_EQ(run({"synth", "--preset", "long-tail", "--seed", "5", "--out", path("c.csv")}).code, 0);
  EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
  EXPECT_NE(slurp(path("a.csv")), slurp(path("c.csv")));
  const auto table = load_csv(path("a.csv"), DatasetSchema::load(path("s.ini")));
  EXPECT_EQ(table.rows(), 10000u);
  EXPECT_EQ(table.malformed_rows, 0u);
  const auto stats = run({"stats", "--dataset", path("a.csv"), "--schema", path("s.ini")});
  EXPECT_EQ(stats.code, 0);
  EXPECT_NE(stats.out.find("imbalance (Omega_imb): 3.50"), std::string::npos) << stats.out;
}

TEST_F(CliTest, SynthFromSpecFileAndUnwritablePath) {
  std::ofstream(path("spec.ini")) << "[synth]\ndim = 2\nseed = 8\n[class.A]\ncount = 3\n[class.B]\ncount = 4\nmean = 5, 0\n";
  const auto r = run({"synth", "--spec", path("spec.ini"), "--out", path("x.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("7 rows"), std::string::npos);
  EXPECT_EQ(run({"synth", "--preset", "separable", "--out", path("no/such/dir/x.csv")}).code, 1);
  EXPECT_EQ(run({"synth", "--preset", "banana", "--out", path("y.csv")}).code, 2);
  EXPECT_EQ(run({"synth", "--out", path("y.csv")}).code, 2);
}

TEST_F(CliTest, StatsOnPublishedCountTables) {
  const std::string configs = IMBA_IDS_SOURCE_DIR "/configs/";
  const auto kdd = run({"stats", "--counts", configs + "kdd99.counts.csv"});
  ASSERT_EQ(kdd.code, 0) << kdd.err;
  EXPECT_NE(kdd.out.find("imbalance (Omega_imb): 2.96"), std::string::npos);
  EXPECT_NE(kdd.out.find("79.28%"), std::string::npos);
  EXPECT_NE(run({"stats", "--counts", configs + "cicids17.counts.csv"}).out.find("imbalance (Omega_imb): 3.08"),
            std::string::npos);
  EXPECT_NE(run({"stats", "--counts", configs + "cicids18.counts.csv"}).out.find("imbalance (Omega_imb): 2.31"),
            std::string::npos);
}

TEST_F(CliTest, StatsRejectsEmptyInput) {
  std::ofstream(path("empty.csv")) << "class,count\n";
  EXPECT_EQ(run({"stats", "--counts", path("empty.csv")}).code, 1);
  std::ofstream(path("schema.ini")) << "[dataset]\nlabel = label\nclasses = A, B\nbenign = A\ndefault_kind = numeric\n";
  std::ofstream(path("d.csv")) << "x,label\n";
  EXPECT_EQ(run({"stats", "--dataset", path("d.csv"), "--schema", path("schema.ini")}).code, 1);
  EXPECT_EQ(run({"stats"}).code, 2);
}
