#include "asu/textgen.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <future>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "asu/rng.hpp"

namespace asu {

namespace {

using QuotePair = std::array<std::string_view, 2>;
constexpr std::array<QuotePair, 6> kQuotePairs{{{"\"", "\""},
                                                {"'", "'"},
                                                {"`", "`"},
                                                {"\xe2\x80\x9c", "\xe2\x80\x9d"},
                                                {"\xe2\x80\x98", "\xe2\x80\x99"},
                                                {"\xc2\xab", "\xc2\xbb"}}};

std::string_view trim(std::string_view s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0U) != 0x80U; }));
}

struct LabelOutcome {
  std::vector<SpokenText> accepted;
  std::size_t shortfall = 0;
};

LabelOutcome generate_for_label(const TaskSpec& task, const PlanItem& item, LlmBackend& backend,
                                const GenerationConfig& config) {
  LabelOutcome outcome;
  if (item.count == 0) return outcome;
  const std::string prompt = build_prompt(task, item.label);
  const std::string label = normalize_label(item.label);
  const std::size_t budget = item.count * config.overgeneration_factor;
  std::unordered_set<std::string> seen;

  for (std::size_t attempt = 0; attempt < budget && outcome.accepted.size() < item.count; ++attempt) {
    LlmRequest request{prompt, config.max_output_tokens, config.temperature, config.seed + attempt, attempt};
    std::string raw;
    for (int tries = 0;; ++tries) {
      try {
        raw = backend.generate(request);
        break;
      } catch (const std::exception& e) {
        if (tries >= config.backend_retries) {
          throw Error(ErrorCode::backend_failure,
                      fmt::format("backend '{}' failed for label '{}' after {} tries: {}", backend.id(), label,
                                  tries + 1, e.what()));
        }
      }
    }
    auto filtered = filter_text(raw, config.char_cap);
    if (!filtered.accepted() || !seen.insert(filtered.text).second) continue;
    outcome.accepted.push_back({std::move(filtered.text), label, prompt, backend.id(), outcome.accepted.size()});
  }
  outcome.shortfall = item.count - outcome.accepted.size();
  return outcome;
}

}  // namespace

void GenerationConfig::validate() const {
  if (max_output_tokens < 1) throw Error(ErrorCode::invalid_config, "max_output_tokens must be >= 1");
  if (!(temperature >= 0.0)) throw Error(ErrorCode::invalid_config, "temperature must be >= 0");
  if (char_cap == 0) throw Error(ErrorCode::invalid_config, "char_cap must be >= 1");
  if (overgeneration_factor == 0) throw Error(ErrorCode::invalid_config, "overgeneration_factor must be >= 1");
  if (backend_retries < 0) throw Error(ErrorCode::invalid_config, "backend_retries must be >= 0");
}

CannedLlmBackend::CannedLlmBackend(std::vector<std::string> fallback,
                                   std::map<std::string, std::vector<std::string>> by_prompt)
    : fallback_(std::move(fallback)), by_prompt_(std::move(by_prompt)) {}

std::string CannedLlmBackend::generate(const LlmRequest& request) {
  const auto it = by_prompt_.find(request.prompt);
  const auto& outputs = it != by_prompt_.end() ? it->second : fallback_;
  if (outputs.empty()) throw Error(ErrorCode::backend_failure, "no canned output for prompt");
  return outputs[request.index % outputs.size()];
}

std::string PhrasebookLlmBackend::generate(const LlmRequest& request) {
  static constexpr std::array<std::string_view, 8> kOpeners{
      "Honestly,", "Well,", "You know,", "Listen,", "So", "Okay,", "I think", "Right now"};
  static constexpr std::array<std::string_view, 10> kSubjects{
      "we", "my sister", "the neighbors", "our team", "my friend", "the kids", "everyone", "my boss", "they", "I"};
  static constexpr std::array<std::string_view, 10> kVerbs{
      "talked about", "waited for", "remembered", "planned", "cleaned up", "asked about", "finished", "missed",
      "laughed at", "thought about"};
  static constexpr std::array<std::string_view, 12> kObjects{
      "the trip to Florida", "the broken car", "dinner tonight", "the old photos", "the alarm", "the meeting",
      "the weather", "the new apartment", "that phone call", "the garden", "the concert", "the game"};
  static constexpr std::array<std::string_view, 8> kEndings{
      "again.", "this morning.", "all week.", "last night.", "for hours.", "yesterday.", "just now.", "today."};

  Engine engine(derive_seed(request.seed, request.prompt));
  const auto pick = [&engine](const auto& table) { return table[uniform_index(engine, table.size())]; };
  std::string sentence = fmt::format("{} {} {} {} {}", pick(kOpeners), pick(kSubjects), pick(kVerbs),
                                     pick(kObjects), pick(kEndings));
  // Output length is bounded by max_output_tokens, one whitespace token each.
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    if (sentence[i] == ' ' && ++tokens >= static_cast<std::size_t>(request.max_output_tokens)) {
      sentence.resize(i);
      break;
    }
  }
  return sentence;
}

std::string_view to_string(Rejection reason) {
  switch (reason) {
    case Rejection::empty: return "empty";
    case Rejection::too_long: return "too-long";
    case Rejection::duplicate: return "duplicate";
  }
  return "unknown";
}

FilterOutcome filter_text(std::string_view raw, std::size_t char_cap) {
  std::string_view s = trim(raw);
  for (bool stripped = true; stripped;) {
    stripped = false;
    for (const auto& pair : kQuotePairs) {
      const auto open = pair[0];
      const auto close = pair[1];
      if (s.size() >= open.size() + close.size() && s.starts_with(open) && s.ends_with(close)) {
        s = trim(s.substr(open.size(), s.size() - open.size() - close.size()));
        stripped = true;
        break;
      }
    }
  }
  if (s.empty()) return {std::string(), Rejection::empty};
  if (utf8_length(s) > char_cap) return {std::string(s), Rejection::too_long};
  return {std::string(s), std::nullopt};
}

std::vector<FilterOutcome> filter_batch(const std::vector<std::string>& raws, std::size_t char_cap) {
  std::vector<FilterOutcome> out;
  out.reserve(raws.size());
  std::unordered_set<std::string> seen;
  for (const auto& raw : raws) {
    auto outcome = filter_text(raw, char_cap);
    if (outcome.accepted() && !seen.insert(outcome.text).second) outcome.rejection = Rejection::duplicate;
    out.push_back(std::move(outcome));
  }
  return out;
}

std::vector<SpokenText> generate_texts(const TaskSpec& task, const GenerationPlan& plan, LlmBackend& backend,
                                       const GenerationConfig& config) {
  config.validate();
  std::vector<LabelOutcome> outcomes(plan.items.size());
  if (config.workers <= 1) {
    for (std::size_t i = 0; i < plan.items.size(); ++i) {
      outcomes[i] = generate_for_label(task, plan.items[i], backend, config);
    }
  } else {
    // Labels are sharded across workers; merge order is the plan order.
    for (std::size_t start = 0; start < plan.items.size(); start += config.workers) {
      std::vector<std::future<LabelOutcome>> running;
      const auto stop = std::min(plan.items.size(), start + config.workers);
      for (std::size_t i = start; i < stop; ++i) {
        running.push_back(std::async(std::launch::async, generate_for_label, std::cref(task),
                                     std::cref(plan.items[i]), std::ref(backend), std::cref(config)));
      }
      for (std::size_t i = start; i < stop; ++i) outcomes[i] = running[i - start].get();
    }
  }

  std::map<std::string, std::size_t> shortfall;
  std::vector<SpokenText> texts;
  texts.reserve(plan.total);
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].shortfall > 0) shortfall[normalize_label(plan.items[i].label)] = outcomes[i].shortfall;
    for (auto& t : outcomes[i].accepted) texts.push_back(std::move(t));
  }
  if (!shortfall.empty()) {
    std::string detail;
    for (const auto& [label, missing] : shortfall) detail += fmt::format(" {}:{}", label, missing);
    throw QuotaUnmetError(fmt::format("retry budget exhausted; missing per label:{}", detail), shortfall);
  }
  return texts;
}

void write_spoken_texts(const std::filesystem::path& path, const std::vector<SpokenText>& texts) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, fmt::format("cannot write '{}'", path.string()));
  for (const auto& t : texts) {
    nlohmann::ordered_json j;
    j["text"] = t.text;
    j["label"] = t.label;
    j["prompt"] = t.prompt;
    j["backend_id"] = t.backend_id;
    j["index"] = t.index;
    out << j.dump() << '\n';
  }
}

std::vector<SpokenText> read_spoken_texts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, fmt::format("cannot read '{}'", path.string()));
  std::vector<SpokenText> texts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      texts.push_back({j.at("text").get<std::string>(), j.at("label").get<std::string>(),
                       j.at("prompt").get<std::string>(), j.at("backend_id").get<std::string>(),
                       j.at("index").get<std::size_t>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  return texts;
}

}  // namespace asu
