#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "asu/checkpoint.hpp"
#include "asu/manifest.hpp"
#include "asu/metrics.hpp"
#include "asu/model.hpp"
#include "asu/task_registry.hpp"

namespace asu {

enum class Regime { real_baseline, synthetic_zero_shot, low_resource, synthetic_init_low_resource };

std::string_view to_string(Regime regime);
Regime parse_regime(std::string_view text);
/// Regimes that train on a fraction of the real training set.
bool uses_ratio(Regime regime);

struct TrainConfig {
  TaskKind task_kind = TaskKind::emotion;
  std::size_t batch_size = 64;
  double learning_rate = 5e-4;
  int max_epochs = 30;
  std::uint64_t seed = 0;
  Regime regime = Regime::real_baseline;
  std::optional<std::filesystem::path> init_checkpoint;

  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Encoder outputs are computed once when the encoder is fully frozen.
  bool cache_encoder_outputs = true;
  // Parallel feature extraction and evaluation; never changes results.
  std::size_t workers = 1;

  /// Batch 64; emotion lr 5e-4 for 30 epochs (1e-4 in low-resource regimes);
  /// intent lr 5e-3 for 50 epochs.
  static TrainConfig defaults(TaskKind task, Regime regime = Regime::real_baseline);
  void validate() const;
};

/// Applies keys present in `section` on top of `base`.
TrainConfig train_config_from_json(const nlohmann::json& section, TrainConfig base);
nlohmann::json to_json(const TrainConfig& config);

/// Adam without weight decay or schedule.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, double lr, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);
  void step();
  long long steps() const { return t_; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
};

/// Decoded, task-standardized audio and class indices.
struct Dataset {
  std::vector<std::vector<float>> audio;
  std::vector<std::size_t> labels;
  std::vector<std::string> ids;

  std::size_t size() const { return labels.size(); }
};

/// Throws empty_manifest, label_mismatch on labels outside the task.
Dataset load_dataset(const Manifest& manifest, const TaskSpec& task);

/// UAR for emotion, macro-F1 for intent.
double primary_metric(const Metrics& metrics, TaskKind task);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // NaN for epoch 0
  double val_metric = 0.0;
  bool improved = false;
};

nlohmann::json to_json(const EpochRecord& record);

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Evaluates the initial model as epoch 0, then trains up to max_epochs and
/// keeps the state with the strictly best validation metric. On return the
/// model holds the best state.
TrainResult train(AsuModel& model, const TaskSpec& task, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});
TrainResult train(AsuModel& model, const TaskSpec& task, const Manifest& train_manifest,
                  const Manifest& val_manifest, const TrainConfig& config, const EpochCallback& on_epoch = {});

void init_from_checkpoint(AsuModel& model, const Checkpoint& checkpoint, const TaskSpec& task);

std::vector<std::size_t> predict_all(const AsuModel& model, const Dataset& data, std::size_t workers = 1);
Metrics evaluate(const AsuModel& model, const Dataset& data, std::size_t n_classes, std::size_t workers = 1);
Metrics evaluate(const AsuModel& model, const Manifest& manifest, const TaskSpec& task, std::size_t workers = 1);

}  // namespace asu
