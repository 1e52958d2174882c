#include "asu/task_registry.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include <fmt/format.h>

#include "asu/error.hpp"

namespace asu {

namespace {

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t count = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

}  // namespace

std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::emotion ? "emotion" : "intent";
}

TaskKind parse_task_kind(std::string_view text) {
  if (text == "emotion") return TaskKind::emotion;
  if (text == "intent") return TaskKind::intent;
  throw Error(ErrorCode::invalid_config, fmt::format("unknown task kind '{}'", text));
}

std::string normalize_label(std::string_view label) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  auto begin = std::find_if_not(label.begin(), label.end(), is_space);
  auto end = std::find_if_not(label.rbegin(), std::make_reverse_iterator(begin), is_space).base();
  std::string out(begin, end);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string> default_emotion_labels() { return {"neutral", "happy", "sad", "angry"}; }

TaskSpec::TaskSpec(TaskKind kind, std::vector<std::string> labels, std::size_t per_label_count,
                   std::optional<std::string> prompt_template)
    : kind_(kind), per_label_count_(per_label_count) {
  if (labels.empty()) throw Error(ErrorCode::invalid_task, "label set is empty");
  if (per_label_count == 0) throw Error(ErrorCode::invalid_task, "per_label_count must be >= 1");
  std::unordered_set<std::string> seen;
  for (const auto& raw : labels) {
    auto label = normalize_label(raw);
    if (label.empty()) throw Error(ErrorCode::invalid_task, "empty label");
    if (!seen.insert(label).second) {
      throw Error(ErrorCode::invalid_task, fmt::format("duplicate label '{}'", label));
    }
    labels_.push_back(std::move(label));
  }
  template_ = prompt_template.value_or(
      std::string(kind == TaskKind::emotion ? kEmotionTemplate : kIntentTemplate));
  if (count_occurrences(template_, kLabelPlaceholder) != 1) {
    throw Error(ErrorCode::invalid_task,
                fmt::format("prompt template must contain '{}' exactly once", kLabelPlaceholder));
  }
}

TaskSpec TaskSpec::default_emotion(std::size_t per_label_count) {
  return TaskSpec(TaskKind::emotion, default_emotion_labels(), per_label_count);
}

bool TaskSpec::contains(std::string_view label) const {
  const auto normalized = normalize_label(label);
  return std::find(labels_.begin(), labels_.end(), normalized) != labels_.end();
}

std::size_t TaskSpec::label_index(std::string_view label) const {
  const auto normalized = normalize_label(label);
  const auto it = std::find(labels_.begin(), labels_.end(), normalized);
  if (it == labels_.end()) {
    throw Error(ErrorCode::unknown_label,
                fmt::format("'{}' is not a {} label", label, to_string(kind_)));
  }
  return static_cast<std::size_t>(it - labels_.begin());
}

std::string build_prompt(const TaskSpec& task, std::string_view label) {
  const auto& chosen = task.labels()[task.label_index(label)];
  std::string prompt = task.prompt_template();
  prompt.replace(prompt.find(kLabelPlaceholder), kLabelPlaceholder.size(), chosen);
  return prompt;
}

GenerationPlan plan_generation(const TaskSpec& task) {
  GenerationPlan plan;
  plan.items.reserve(task.labels().size());
  for (const auto& label : task.labels()) {
    plan.items.push_back({label, task.per_label_count()});
    plan.total += task.per_label_count();
  }
  return plan;
}

TaskSpec task_from_json(const nlohmann::json& section) {
  try {
    const auto kind = parse_task_kind(section.at("kind").get<std::string>());
    std::vector<std::string> labels;
    if (section.contains("labels")) {
      labels = section.at("labels").get<std::vector<std::string>>();
    } else if (kind == TaskKind::emotion) {
      labels = default_emotion_labels();
    } else {
      throw Error(ErrorCode::invalid_task, "intent tasks require an explicit label list");
    }
    const auto count = section.value("per_label_count", std::size_t{kind == TaskKind::emotion ? 1000U : 100U});
    std::optional<std::string> tmpl;
    if (section.contains("template")) tmpl = section.at("template").get<std::string>();
    return TaskSpec(kind, std::move(labels), count, std::move(tmpl));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_config, fmt::format("task section: {}", e.what()));
  }
}

nlohmann::json task_to_json(const TaskSpec& task) {
  return {{"kind", to_string(task.kind())},
          {"labels", task.labels()},
          {"per_label_count", task.per_label_count()},
          {"template", task.prompt_template()}};
}

}  // namespace asu
