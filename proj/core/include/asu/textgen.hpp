#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "asu/error.hpp"
#include "asu/task_registry.hpp"

namespace asu {

struct GenerationConfig {
  int max_output_tokens = 32;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  std::size_t char_cap = 200;
  // Attempts per label are capped at overgeneration_factor * quota.
  std::size_t overgeneration_factor = 5;
  // Extra tries for one request after the backend throws.
  int backend_retries = 2;
  std::size_t workers = 1;

  void validate() const;
};

struct LlmRequest {
  std::string prompt;
  int max_output_tokens = 32;
  double temperature = 1.0;
  // Sampling seed for this request: config seed + per-label attempt index.
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
};

/// Implementations must be safe to call concurrently when workers > 1.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  virtual std::string id() const = 0;
  virtual std::string generate(const LlmRequest& request) = 0;
};

/// Fixture backend: returns outputs[index % size] for the prompt's list, or the
/// fallback list when the prompt has no entry.
class CannedLlmBackend final : public LlmBackend {
 public:
  explicit CannedLlmBackend(std::vector<std::string> fallback,
                            std::map<std::string, std::vector<std::string>> by_prompt = {});
  std::string id() const override { return "canned"; }
  std::string generate(const LlmRequest& request) override;

 private:
  std::vector<std::string> fallback_;
  std::map<std::string, std::vector<std::string>> by_prompt_;
};

/// Deterministic offline generator: composes short sentences from fixed word
/// tables keyed by a hash of (prompt, seed). Used by the `stub` backend id.
class PhrasebookLlmBackend final : public LlmBackend {
 public:
  std::string id() const override { return "stub"; }
  std::string generate(const LlmRequest& request) override;
};

struct SpokenText {
  std::string text;
  std::string label;
  std::string prompt;
  std::string backend_id;
  std::size_t index = 0;
};

enum class Rejection { empty, too_long, duplicate };
std::string_view to_string(Rejection reason);

struct FilterOutcome {
  std::string text;
  std::optional<Rejection> rejection;
  bool accepted() const { return !rejection.has_value(); }
};

/// Trims whitespace and matched surrounding quotes. Rejects empty results and
/// anything longer than `char_cap` code points.
FilterOutcome filter_text(std::string_view raw, std::size_t char_cap = 200);

/// filter_text over a batch from one label, additionally rejecting exact
/// duplicates of earlier accepted entries.
std::vector<FilterOutcome> filter_batch(const std::vector<std::string>& raws, std::size_t char_cap = 200);

class QuotaUnmetError : public Error {
 public:
  QuotaUnmetError(const std::string& message, std::map<std::string, std::size_t> shortfall)
      : Error(ErrorCode::quota_unmet, message), shortfall_(std::move(shortfall)) {}
  const std::map<std::string, std::size_t>& shortfall() const { return shortfall_; }

 private:
  std::map<std::string, std::size_t> shortfall_;
};

/// Returns plan.total records ordered by (plan item, index).
std::vector<SpokenText> generate_texts(const TaskSpec& task, const GenerationPlan& plan, LlmBackend& backend,
                                       const GenerationConfig& config);

void write_spoken_texts(const std::filesystem::path& path, const std::vector<SpokenText>& texts);
std::vector<SpokenText> read_spoken_texts(const std::filesystem::path& path);

}  // namespace asu
