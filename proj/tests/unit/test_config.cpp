#include <gtest/gtest.h>

#include "asu/config.hpp"
#include "asu/error.hpp"
#include "asu/experiments.hpp"
#include "test_support.hpp"

namespace asu {
namespace {

using testing::TempDir;

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an asu::Error";
  return ErrorCode::io;
}

TEST(Config, DefaultsFromEmptyObject) {
  const auto c = config_from_json(nlohmann::json::object());
  EXPECT_EQ(c.task.kind(), TaskKind::emotion);
  EXPECT_EQ(c.task.labels().size(), 4U);
  EXPECT_EQ(c.experiment.ratios, (std::vector<double>{0.05, 0.1, 0.2, 0.5, 1.0}));
  EXPECT_EQ(c.experiment.regimes, (std::vector<Regime>{Regime::real_baseline}));
  EXPECT_FALSE(c.lora.has_value());
  EXPECT_EQ(c.llm.id, "stub");
  EXPECT_EQ(c.tts.backend.id, "stub");
  EXPECT_EQ(c.resolved_head().n_classes, 4);
  EXPECT_EQ(c.resolved_head().input_dim, 768);
}

TEST(Config, LoadsFileWithCommentsAndRelativePaths) {
  TempDir dir;
  testing::write_text(dir / "cfg" / "exp.json", R"({
    // intent task
    "task": {"kind": "intent", "labels": ["set alarm", "play music"], "per_label_count": 10},
    "generation": {"backend": "http", "endpoint": "http://localhost:8080", "temperature": 0.5},
    "tts": {"backend": "stub", "speaker_pool": "pool.json", "workers": 3},
    "corpus": {"dataset": "slurp", "source": "../data/slurp", "intent_phrases": {"alarm_set": "set alarm"}},
    "encoder": {"n_layers": 4, "hidden_dim": 16},
    "lora": {"rank": 4, "alpha": 8},
    "head": {"conv_channels": 32, "fc_hidden": 16},
    "train": {"batch_size": 16, "regimes": {"low_resource": {"learning_rate": 0.001}}},
    "experiment": {"regimes": ["real_baseline", "low_resource"], "ratios": [0.2, 1.0], "seeds": [1, 2],
                   "output_dir": "runs/a"}
  })");
  const auto c = load_config(dir / "cfg" / "exp.json");
  EXPECT_EQ(c.task.kind(), TaskKind::intent);
  EXPECT_EQ(c.llm.id, "http");
  EXPECT_EQ(c.llm.endpoint, "http://localhost:8080");
  EXPECT_EQ(c.generation.temperature, 0.5);
  EXPECT_EQ(c.tts.speaker_pool, dir / "cfg" / "pool.json");
  EXPECT_EQ(c.corpus.source, dir / "cfg" / "../data/slurp");
  EXPECT_EQ(c.corpus.dataset, DatasetKind::slurp);
  EXPECT_EQ(c.corpus.ingest.intent_phrases.at("alarm_set"), "set alarm");
  EXPECT_EQ(c.experiment.output_dir, dir / "cfg" / "runs/a");
  ASSERT_TRUE(c.lora.has_value());
  EXPECT_EQ(c.lora->rank, 4);
  EXPECT_EQ(c.resolved_head().input_dim, 16);
  EXPECT_EQ(c.resolved_head().n_classes, 2);

  const auto base = c.train_config(Regime::real_baseline);
  EXPECT_EQ(base.batch_size, 16U);
  EXPECT_EQ(base.learning_rate, 5e-3);
  EXPECT_EQ(base.max_epochs, 50);
  const auto low = c.train_config(Regime::low_resource);
  EXPECT_EQ(low.learning_rate, 1e-3);
  EXPECT_EQ(low.batch_size, 16U);
  EXPECT_EQ(low.regime, Regime::low_resource);
}

TEST(Config, EmotionLowResourceUsesReducedRate) {
  const auto c = config_from_json({{"experiment", {{"regimes", {"low_resource"}}}}});
  EXPECT_EQ(c.train_config(Regime::low_resource).learning_rate, 1e-4);
  EXPECT_EQ(c.train_config(Regime::real_baseline).learning_rate, 5e-4);
}

TEST(Config, LoraCanBeDisabledExplicitly) {
  EXPECT_FALSE(config_from_json({{"lora", {{"enabled", false}, {"rank", 4}}}}).lora.has_value());
  EXPECT_TRUE(config_from_json({{"lora", {{"enabled", true}}}}).lora.has_value());
}

TEST(Config, Rejections) {
  EXPECT_EQ(code_of([] { config_from_json({{"experiment", {{"ratios", {0.0}}}}}); }), ErrorCode::ratio_out_of_range);
  EXPECT_EQ(code_of([] { config_from_json({{"experiment", {{"seeds", nlohmann::json::array()}}}}); }),
            ErrorCode::invalid_config);
  EXPECT_EQ(code_of([] { config_from_json({{"experiment", {{"regimes", {"bogus"}}}}}); }), ErrorCode::invalid_config);
  EXPECT_EQ(code_of([] { config_from_json({{"train", 3}}); }), ErrorCode::invalid_config);
  EXPECT_EQ(code_of([] { config_from_json({{"head", {{"conv_kernel", 3}}}}); }), ErrorCode::invalid_config);
  EXPECT_EQ(code_of([] { config_from_json({{"task", {{"kind", "intent"}}}}); }), ErrorCode::invalid_task);
  EXPECT_EQ(code_of([] { load_config("/nonexistent/asu.json"); }), ErrorCode::io);
  TempDir dir;
  testing::write_text(dir / "bad.json", "{ not json");
  EXPECT_EQ(code_of([&] { load_config(dir / "bad.json"); }), ErrorCode::parse);
}

TEST(Config, FingerprintTracksResultAffectingSettings) {
  const auto a = config_from_json({{"experiment", {{"seeds", {1}}}}});
  auto b = a;
  b.experiment.workers = 8;
  b.experiment.output_dir = "/elsewhere";
  EXPECT_EQ(experiment_fingerprint(a), experiment_fingerprint(b));
  b.experiment.seeds = {2};
  EXPECT_NE(experiment_fingerprint(a), experiment_fingerprint(b));
  auto c = a;
  c.train["learning_rate"] = 0.1;
  EXPECT_NE(experiment_fingerprint(a), experiment_fingerprint(c));
}

TEST(Config, ShippedGridConfigsLoad) {
  const std::filesystem::path dir(ASU_CONFIGS_DIR);
  const auto iemocap = load_config(dir / "emotion_iemocap_full.json");
  EXPECT_EQ(iemocap.encoder.backend_id, "http");
  EXPECT_FALSE(iemocap.lora.has_value());
  // 2 ratio-free regimes x 5 folds x 3 seeds + 2 ratio regimes x 5 folds x 5 ratios x 3 seeds
  EXPECT_EQ(expected_cells(iemocap.experiment, 5).size(), 180U);
  const auto msp = load_config(dir / "emotion_msp_improv_full.json");
  EXPECT_EQ(expected_cells(msp.experiment, 6).size(), 216U);
  const auto slurp = load_config(dir / "intent_slurp.json");
  EXPECT_EQ(slurp.task.kind(), TaskKind::intent);
  EXPECT_EQ(slurp.train_config(Regime::low_resource).learning_rate, 5e-3);
  EXPECT_EQ(slurp.train_config(Regime::real_baseline).max_epochs, 50);
}

}  // namespace
}  // namespace asu
