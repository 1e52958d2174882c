#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace asu {

enum class TaskKind { emotion, intent };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view text);

inline constexpr std::string_view kLabelPlaceholder = "{label}";
inline constexpr std::string_view kEmotionTemplate = "Generate a spoken utterance with {label} emotion";
inline constexpr std::string_view kIntentTemplate = "Generate a spoken utterance with intent to {label}";

/// Lowercases ASCII letters and trims surrounding whitespace; inner spacing is kept.
std::string normalize_label(std::string_view label);

std::vector<std::string> default_emotion_labels();

class TaskSpec {
 public:
  /// Validates and normalizes. Throws invalid_task on empty or duplicate labels,
  /// zero quota, or a template without exactly one placeholder.
  TaskSpec(TaskKind kind, std::vector<std::string> labels, std::size_t per_label_count,
           std::optional<std::string> prompt_template = std::nullopt);

  static TaskSpec default_emotion(std::size_t per_label_count = 1000);

  TaskKind kind() const { return kind_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t per_label_count() const { return per_label_count_; }
  const std::string& prompt_template() const { return template_; }

  bool contains(std::string_view label) const;
  /// Index of the normalized label; throws unknown_label.
  std::size_t label_index(std::string_view label) const;

 private:
  TaskKind kind_;
  std::vector<std::string> labels_;
  std::size_t per_label_count_;
  std::string template_;
};

struct PlanItem {
  std::string label;
  std::size_t count = 0;
};

struct GenerationPlan {
  std::vector<PlanItem> items;
  std::size_t total = 0;
};

std::string build_prompt(const TaskSpec& task, std::string_view label);
GenerationPlan plan_generation(const TaskSpec& task);

/// Reads a `task` config section: {kind, labels[], per_label_count, template?}.
/// `labels` may be omitted for emotion tasks (defaults to the four classes).
TaskSpec task_from_json(const nlohmann::json& section);
nlohmann::json task_to_json(const TaskSpec& task);

}  // namespace asu
