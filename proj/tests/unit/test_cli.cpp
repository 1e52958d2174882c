#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "asu/checkpoint.hpp"
#include "asu/manifest.hpp"
#include "test_support.hpp"

namespace asu {
namespace {

using testing::TempDir;
namespace fs = std::filesystem;

struct Outcome {
  int status;
  std::string out;
};

Outcome cli(const std::string& args, const fs::path& scratch) {
  const auto out = scratch / "stdout.txt";
  const std::string cmd = fmt::format("'{}' {} > '{}' 2> '{}'", ASU_CLI_PATH, args, out.string(),
                                      (scratch / "stderr.txt").string());
  const int raw = std::system(cmd.c_str());
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, ss.str()};
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string l; std::getline(in, l);) n += !l.empty();
  return n;
}

TEST(Cli, SyntheticPipeline) {
  TempDir dir;
  testing::write_text(dir / "task.json", R"({"task": {"kind": "emotion", "per_label_count": 3}})");
  ASSERT_EQ(cli(fmt::format("generate-text --task '{}' --seed 4 --out '{}'", (dir / "task.json").string(),
                            (dir / "texts.jsonl").string()),
                dir.path())
                .status,
            0);
  EXPECT_EQ(count_lines(dir / "texts.jsonl"), 12U);
  ASSERT_EQ(cli(fmt::format("random-speakers --count 5 --dim 16 --seed 2 --out '{}'", (dir / "spk.jsonl").string()),
                dir.path())
                .status,
            0);
  EXPECT_EQ(count_lines(dir / "spk.jsonl"), 5U);
  ASSERT_EQ(cli(fmt::format("synthesize --texts '{}' --speakers '{}' --seed 3 --workers 2 --out-dir '{}'",
                            (dir / "texts.jsonl").string(), (dir / "spk.jsonl").string(), (dir / "syn").string()),
                dir.path())
                .status,
            0);
  const auto m = read_manifest(dir / "syn" / "manifest.jsonl");
  EXPECT_EQ(m.size(), 12U);
  EXPECT_EQ(m.labels().size(), 4U);
  for (const auto& r : m.records()) {
    const auto info = read_wav_info(m.resolve_audio(r));
    EXPECT_EQ(info.sample_rate, 16000);
    EXPECT_EQ(info.channels, 1);
  }
}

TEST(Cli, IngestSubsampleFolds) {
  TempDir dir;
  testing::build_iemocap_fixture(dir / "iemocap", testing::iemocap_layout(4, {"neu", "hap", "sad", "ang", "fru"}));
  ASSERT_EQ(cli(fmt::format("ingest --dataset iemocap --source '{}' --out '{}'", (dir / "iemocap").string(),
                            (dir / "real.jsonl").string()),
                dir.path())
                .status,
            0);
  const auto real = read_manifest(dir / "real.jsonl");
  EXPECT_EQ(real.size(), 32U);
  EXPECT_TRUE(fs::exists(real.resolve_audio(real.records()[0])));
  ASSERT_EQ(cli(fmt::format("subsample --manifest '{}' --ratio 0.25 --seed 1 --out '{}'", (dir / "real.jsonl").string(),
                            (dir / "sub.jsonl").string()),
                dir.path())
                .status,
            0);
  EXPECT_EQ(read_manifest(dir / "sub.jsonl").size(), 8U);
  ASSERT_EQ(cli(fmt::format("folds --manifest '{}' --dataset iemocap --out '{}'", (dir / "real.jsonl").string(),
                            (dir / "folds.json").string()),
                dir.path())
                .status,
            0);
  std::ifstream in(dir / "folds.json");
  const auto plan = nlohmann::json::parse(in);
  ASSERT_TRUE(plan.is_array());
  EXPECT_EQ(plan.size(), 5U);
  EXPECT_EQ(cli(fmt::format("subsample --manifest '{}' --ratio 1.5 --out '{}'", (dir / "real.jsonl").string(),
                            (dir / "bad.jsonl").string()),
                dir.path())
                .status,
            2);
}

TEST(Cli, TrainEvaluateRunReport) {
  TempDir dir;
  testing::MatrixSpec spec;
  spec.regimes = {"real_baseline", "low_resource"};
  spec.ratios = {0.5};
  spec.seeds = {1};
  spec.folds = {0};
  spec.max_epochs = 2;
  const auto cfg = testing::build_matrix_fixture(dir.path(), spec).string();

  const auto trained = cli(fmt::format("train --config '{}' --regime real_baseline --fold 1 --seed 3 --out '{}'", cfg,
                                       (dir / "train").string()),
                           dir.path());
  ASSERT_EQ(trained.status, 0);
  EXPECT_EQ(count_lines(dir / "train" / "epochs.jsonl"), 3U);
  EXPECT_NE(trained.out.find("\"epoch\":0"), std::string::npos);
  EXPECT_NE(trained.out.find("\"train_loss\":null"), std::string::npos);
  const auto ckpt = load_checkpoint(dir / "train" / "checkpoint.json");
  EXPECT_EQ(ckpt.seed, 3U);

  const auto evaluated = cli(fmt::format("evaluate --config '{}' --checkpoint '{}' --fold 1", cfg,
                                         (dir / "train" / "checkpoint.json").string()),
                             dir.path());
  ASSERT_EQ(evaluated.status, 0);
  const auto metrics = nlohmann::json::parse(evaluated.out);
  EXPECT_EQ(metrics["n"], 8);

  EXPECT_EQ(cli(fmt::format("train --config '{}' --regime synthetic_init_low_resource --out '{}'", cfg,
                            (dir / "x").string()),
                dir.path())
                .status,
            2);

  ASSERT_EQ(cli(fmt::format("run --config '{}' --render", cfg), dir.path()).status, 0);
  const auto out = dir / "out";
  EXPECT_TRUE(fs::exists(out / "report" / "results.csv"));
  EXPECT_TRUE(fs::exists(out / "report" / "curves.svg"));
  ASSERT_EQ(cli(fmt::format("report --results '{}' --out '{}'", out.string(), (dir / "rep").string()), dir.path()).status,
            0);
  std::ifstream a(out / "report" / "results.csv"), b(dir / "rep" / "results.csv");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(cli(fmt::format("run --config '{}'", cfg), dir.path()).status, 2);
}

TEST(Cli, UsageErrors) {
  TempDir dir;
  EXPECT_NE(cli("", dir.path()).status, 0);
  EXPECT_NE(cli("train --regime real_baseline", dir.path()).status, 0);
  EXPECT_NE(cli("frobnicate", dir.path()).status, 0);
  EXPECT_EQ(cli("--help", dir.path()).status, 0);
}

}  // namespace
}  // namespace asu
