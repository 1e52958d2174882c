#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "asu/model.hpp"
#include "asu/task_registry.hpp"

namespace asu {

inline constexpr int kCheckpointVersion = 1;

/// Trainable state plus everything needed to check that a receiving model is
/// structurally identical. Base encoder weights are referenced by digest only.
struct Checkpoint {
  TaskKind task = TaskKind::emotion;
  std::vector<std::string> labels;
  EncoderConfig encoder;
  std::string encoder_digest;
  HeadConfig head;
  std::optional<LoraConfig> lora;
  std::string config_digest;
  double best_val_metric = 0.0;
  int epoch = 0;
  std::uint64_t seed = 0;
  std::vector<NamedTensor> tensors;
};

Checkpoint make_checkpoint(const AsuModel& model, const TaskSpec& task, double best_val_metric, int epoch,
                           std::uint64_t seed);

nlohmann::json to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const nlohmann::json& j);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Throws incompatible_checkpoint naming the first mismatched component:
/// task, labels, encoder, encoder weights, head, lora.
void check_compatible(const Checkpoint& checkpoint, const AsuModel& model, const TaskSpec& task);

}  // namespace asu
