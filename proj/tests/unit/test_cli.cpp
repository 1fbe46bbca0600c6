#include <gtest/gtest.h>

#include <sstream>

#include "cli.hpp"
#include "json.hpp"
#include "smoe/checkpoint.hpp"
#include "smoe/dataset.hpp"
#include "smoe/synthetic.hpp"
#include "test_support.hpp"

using namespace smoe;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "smoe");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// A tiny trained model shared by the inference-side tests.
class CliWorkspace : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new smoe::testing::TempDir("cli");
    SyntheticOptions o;
    o.height = o.width = 16;
    write_synthetic_split(dir_->path(), "train", 2, 1, o);
    write_synthetic_split(dir_->path(), "test", 2, 500, o);
    const auto r = run_cli({"train", "--data", dir_->path().string(), "--out", (*dir_ / "run").string(), "--epochs",
                            "1", "--depth", "2", "--base-channels", "4", "--batch-size", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::string path(const std::string& rel) { return (*dir_ / rel).string(); }
  static smoe::testing::TempDir* dir_;
};

smoe::testing::TempDir* CliWorkspace::dir_ = nullptr;

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run_cli({}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"train", "--out", "x"}).code, cli::kUsage);
  EXPECT_EQ(run_cli({"infer", "--ckpt", "a", "--image", "b", "--out", "c", "--fuzzy", "--unet-head"}).code,
            cli::kUsage);
  EXPECT_EQ(run_cli({"gradcheck", "--seeds", "0"}).code, cli::kUsage);
}

TEST(Cli, HelpForEverySubcommand) {
  for (const char* sub : {"train", "infer", "eval", "explain", "export-rules", "gradcheck"}) {
    const auto r = run_cli({sub, "--help"});
    EXPECT_EQ(r.code, cli::kOk) << sub;
    EXPECT_NE(r.out.find("--"), std::string::npos) << sub;
  }
}

TEST(Cli, MissingFilesAreDataErrors) {
  smoe::testing::TempDir dir("cli_missing");
  EXPECT_EQ(run_cli({"train", "--data", (dir / "none").string(), "--out", (dir / "o").string()}).code,
            cli::kDataError);
  EXPECT_EQ(run_cli({"infer", "--ckpt", (dir / "x.ckpt").string(), "--image", "y.png", "--out", "z"}).code,
            cli::kDataError);
  smoe::testing::write_text(dir / "bad.ckpt", "not a checkpoint");
  const auto r = run_cli({"export-rules", "--ckpt", (dir / "bad.ckpt").string(), "--out", (dir / "r.json").string()});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST(Cli, BadConfigKeyIsAUsageError) {
  smoe::testing::TempDir dir("cli_cfg");
  smoe::testing::write_text(dir / "c.txt", "speed = 3\n");
  const auto r = run_cli({"train", "--data", dir.path().string(), "--config", (dir / "c.txt").string(), "--out",
                          (dir / "o").string()});
  EXPECT_EQ(r.code, cli::kUsage);
  EXPECT_NE(r.err.find("speed"), std::string::npos);
}

TEST_F(CliWorkspace, TrainWritesLogAndCheckpoints) {
  const auto log = smoe::testing::read_text(path("run/log.csv"));
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 2);
  EXPECT_TRUE(std::filesystem::exists(path("run/last.ckpt")));
  EXPECT_TRUE(std::filesystem::exists(path("run/best.ckpt")));
  EXPECT_EQ(load_checkpoint(path("run/last.ckpt")).model.config().base_channels, 4u);
}

TEST_F(CliWorkspace, InferWritesMapOfInputSizeDeterministically) {
  const auto image = path("test/images/") + png_stems(path("test/images"))[0] + ".png";
  ASSERT_EQ(run_cli({"infer", "--ckpt", path("run/last.ckpt"), "--image", image, "--out", path("inf1")}).code, 0);
  ASSERT_EQ(run_cli({"infer", "--ckpt", path("run/last.ckpt"), "--image", image, "--out", path("inf2")}).code, 0);
  const auto name = std::filesystem::path(image).filename().string();
  const Image prob = read_png(path("inf1/") + name);
  EXPECT_EQ(prob.height, 16u);
  EXPECT_EQ(prob.width, 16u);
  EXPECT_EQ(smoe::testing::read_bytes(path("inf1/") + name), smoe::testing::read_bytes(path("inf2/") + name));
  ASSERT_EQ(run_cli({"infer", "--ckpt", path("run/last.ckpt"), "--image", image, "--out", path("inf3"), "--unet-head"})
                .code,
            0);
}

TEST_F(CliWorkspace, EvalScoresGroundTruthAsPerfect) {
  const auto r = run_cli({"eval", "--pred-dir", path("test/gt"), "--gt-dir", path("test/gt"), "--out",
                          path("eval/perfect.json"), "--thresholds", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("ODS 1.0000"), std::string::npos) << r.out;
  const auto j = nlohmann::json::parse(smoe::testing::read_text(path("eval/perfect.json")));
  EXPECT_EQ(j.at("ods").at("f").get<double>(), 1.0);
  EXPECT_EQ(j.at("ap").get<double>(), 1.0);
  EXPECT_TRUE(std::filesystem::exists(path("eval/perfect.csv")));
  EXPECT_TRUE(std::filesystem::exists(path("eval/perfect_pr.png")));
}

TEST_F(CliWorkspace, EvalBaselinesAndModel) {
  for (const char* method : {"sobel", "canny"}) {
    const auto r = run_cli({"eval", "--pred-dir", path("test/images"), "--gt-dir", path("test/gt"), "--out",
                            path(std::string("eval/") + method + ".json"), "--method", method, "--thresholds", "5"});
    EXPECT_EQ(r.code, 0) << method << r.err;
  }
  EXPECT_EQ(run_cli({"eval", "--pred-dir", path("test/images"), "--gt-dir", path("test/gt"), "--out",
                     path("eval/model.json"), "--method", "model"})
                .code,
            cli::kUsage);
  const auto r = run_cli({"eval", "--pred-dir", path("test/images"), "--gt-dir", path("test/gt"), "--out",
                          path("eval/model.json"), "--method", "model", "--ckpt", path("run/last.ckpt"),
                          "--thresholds", "5"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(run_cli({"eval", "--pred-dir", path("test/gt"), "--gt-dir", path("test/gt"), "--out", path("eval/z.json"),
                     "--thresholds", "0"})
                .code,
            cli::kUsage);
}

TEST_F(CliWorkspace, ExplainAndExportRules) {
  const auto image = path("test/images/") + png_stems(path("test/images"))[0] + ".png";
  const auto r = run_cli({"explain", "--ckpt", path("run/last.ckpt"), "--image", image, "--out", path("explain")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 2 + 4 + 1 + 2);
  ASSERT_EQ(run_cli({"export-rules", "--ckpt", path("run/last.ckpt"), "--out", path("rules/r.json")}).code, 0);
  EXPECT_EQ(smoe::testing::read_text(path("rules/r.json")), smoe::testing::read_text(path("explain/rulebase.json")));
  EXPECT_TRUE(std::filesystem::exists(path("rules/r_mf_curves.csv")));
}

TEST(Cli, GradcheckSingleSeed) {
  const auto r = run_cli({"gradcheck", "--seed", "3", "--seeds", "1"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("gradient checks passed over 1 seeds"), std::string::npos);
}
