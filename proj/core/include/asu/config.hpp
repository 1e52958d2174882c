#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "asu/backends.hpp"
#include "asu/corpus.hpp"
#include "asu/downstream.hpp"
#include "asu/encoder.hpp"
#include "asu/task_registry.hpp"
#include "asu/textgen.hpp"
#include "asu/trainer.hpp"

namespace asu {

std::vector<double> default_ratio_grid();

struct ExperimentConfig {
  std::vector<Regime> regimes{Regime::real_baseline};
  std::vector<double> ratios = default_ratio_grid();
  std::vector<std::uint64_t> seeds{0};
  // Restricts the fold plan to these indices; all folds when absent.
  std::optional<std::vector<std::size_t>> folds;
  std::filesystem::path output_dir;
  std::size_t workers = 1;
  // Held-out share of the synthetic corpus used for validation.
  double synthetic_val_fraction = 0.1;
  // Aggregate by pooling confusion matrices rather than averaging cells.
  bool pooled = false;

  void validate() const;
};

struct CorpusConfig {
  DatasetKind dataset = DatasetKind::iemocap;
  // Raw corpus root, ingested on demand.
  std::filesystem::path source;
  // Already-ingested real manifest; takes precedence over `source`.
  std::optional<std::filesystem::path> manifest;
  // Synthetic manifest for the synthetic regimes.
  std::optional<std::filesystem::path> synthetic;
  IngestOptions ingest;
};

struct TtsConfig {
  BackendSpec backend;
  std::optional<std::filesystem::path> speaker_pool;
  std::size_t workers = 1;
  int retries = 2;
};

/// One config file with sections task, generation, tts, corpus, encoder,
/// lora, head, train and experiment. Relative paths resolve against the
/// file's directory.
struct AppConfig {
  TaskSpec task = TaskSpec::default_emotion();
  GenerationConfig generation;
  BackendSpec llm;
  TtsConfig tts;
  CorpusConfig corpus;
  EncoderConfig encoder;
  std::optional<LoraConfig> lora;
  HeadConfig head;
  // Flat keys apply to every regime; "regimes": {name: {...}} overrides per regime.
  nlohmann::json train = nlohmann::json::object();
  ExperimentConfig experiment;

  TrainConfig train_config(Regime regime) const;
  /// Head config with n_classes and input_dim derived from task and encoder.
  HeadConfig resolved_head() const;
};

AppConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
AppConfig load_config(const std::filesystem::path& path);
/// Canonical form of the settings that determine experiment results.
nlohmann::json experiment_fingerprint(const AppConfig& config);

}  // namespace asu
