#include <gtest/gtest.h>

#include <string>

#include "asu/error.hpp"
#include "asu/rng.hpp"
#include "asu/task_registry.hpp"

namespace asu {
namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an asu::Error";
  return ErrorCode::io;
}

TEST(TaskSpec, DefaultEmotionLabels) {
  const auto t = TaskSpec::default_emotion();
  EXPECT_EQ(t.kind(), TaskKind::emotion);
  EXPECT_EQ(t.labels(), (std::vector<std::string>{"neutral", "happy", "sad", "angry"}));
  EXPECT_EQ(t.per_label_count(), 1000U);
}

TEST(TaskSpec, NormalizesAndValidates) {
  const TaskSpec t(TaskKind::intent, {"  Set Alarms ", "play  music"}, 3);
  EXPECT_EQ(t.labels(), (std::vector<std::string>{"set alarms", "play  music"}));
  EXPECT_EQ(t.label_index("SET ALARMS"), 0U);
  EXPECT_EQ(code_of([] { TaskSpec(TaskKind::intent, {}, 1); }), ErrorCode::invalid_task);
  EXPECT_EQ(code_of([] { TaskSpec(TaskKind::intent, {"a", "A "}, 1); }), ErrorCode::invalid_task);
  EXPECT_EQ(code_of([] { TaskSpec(TaskKind::intent, {"a"}, 0); }), ErrorCode::invalid_task);
  EXPECT_EQ(code_of([] { TaskSpec(TaskKind::intent, {"a"}, 1, std::string("no placeholder")); }),
            ErrorCode::invalid_task);
  EXPECT_EQ(code_of([] { TaskSpec(TaskKind::intent, {"a"}, 1, std::string("{label} {label}")); }),
            ErrorCode::invalid_task);
}

TEST(BuildPrompt, PaperTemplates) {
  EXPECT_EQ(build_prompt(TaskSpec::default_emotion(), "happy"), "Generate a spoken utterance with happy emotion");
  const TaskSpec intents(TaskKind::intent, {"set alarms", "play music"}, 100);
  EXPECT_EQ(build_prompt(intents, "set alarms"), "Generate a spoken utterance with intent to set alarms");
}

TEST(BuildPrompt, UnknownLabel) {
  EXPECT_EQ(code_of([] { build_prompt(TaskSpec::default_emotion(), "bored"); }), ErrorCode::unknown_label);
}

TEST(BuildPrompt, TemplateOverride) {
  const TaskSpec t(TaskKind::emotion, {"happy", "sad"}, 1, std::string("Say something {label}."));
  EXPECT_EQ(build_prompt(t, "sad"), "Say something sad.");
}

TEST(PlanGeneration, PaperTotals) {
  EXPECT_EQ(plan_generation(TaskSpec::default_emotion()).total, 4000U);
  std::vector<std::string> intents;
  for (int i = 0; i < 46; ++i) intents.push_back("intent " + std::to_string(i));
  EXPECT_EQ(plan_generation(TaskSpec(TaskKind::intent, intents, 100)).total, 4600U);
  const auto single = plan_generation(TaskSpec(TaskKind::intent, {"x"}, 1));
  ASSERT_EQ(single.items.size(), 1U);
  EXPECT_EQ(single.items[0].label, "x");
  EXPECT_EQ(single.items[0].count, 1U);
  EXPECT_EQ(single.total, 1U);
}

std::string random_label(Engine& rng) {
  static const std::string alphabet = "abcdefghijklmnopqrstuvwxyz ";
  std::string s;
  const auto len = 1 + uniform_index(rng, 12);
  for (std::uint64_t i = 0; i < len; ++i) s += alphabet[uniform_index(rng, alphabet.size())];
  if (s.front() == ' ') s.front() = 'q';
  if (s.back() == ' ') s.back() = 'z';
  return s;
}

TEST(TaskRegistryProperty, PlanTotalsAndPromptsContainLabel) {
  Engine rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::string> labels;
    const auto n = 1 + uniform_index(rng, 20);
    while (labels.size() < n) {
      auto l = random_label(rng);
      if (std::find(labels.begin(), labels.end(), l) == labels.end()) labels.push_back(l);
    }
    const auto count = 1 + uniform_index(rng, 50);
    const TaskSpec t(uniform_index(rng, 2) == 0 ? TaskKind::emotion : TaskKind::intent, labels, count);
    const auto plan = plan_generation(t);
    EXPECT_EQ(plan.total, labels.size() * count);
    ASSERT_EQ(plan.items.size(), labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      EXPECT_EQ(plan.items[i].label, t.labels()[i]);
      // The label occupies exactly the single placeholder slot.
      const auto& tmpl = t.prompt_template();
      const auto slot = tmpl.find("{label}");
      const auto prompt = build_prompt(t, labels[i]);
      EXPECT_EQ(prompt, tmpl.substr(0, slot) + t.labels()[i] + tmpl.substr(slot + 7));
      EXPECT_EQ(tmpl.find("{label}", slot + 1), std::string::npos);
    }
  }
}

TEST(TaskJson, RoundTripAndDefaults) {
  const auto t = task_from_json({{"kind", "emotion"}});
  EXPECT_EQ(t.labels().size(), 4U);
  EXPECT_EQ(t.per_label_count(), 1000U);
  const auto i = task_from_json({{"kind", "intent"}, {"labels", {"set alarms", "tell a joke"}}});
  EXPECT_EQ(i.per_label_count(), 100U);
  const auto back = task_from_json(task_to_json(i));
  EXPECT_EQ(back.labels(), i.labels());
  EXPECT_EQ(back.prompt_template(), i.prompt_template());
  EXPECT_EQ(code_of([] { task_from_json({{"kind", "intent"}}); }), ErrorCode::invalid_task);
  EXPECT_EQ(code_of([] { task_from_json({{"kind", "sentiment"}}); }), ErrorCode::invalid_config);
}

}  // namespace
}  // namespace asu
