#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "asu/audio.hpp"
#include "asu/error.hpp"
#include "asu/manifest.hpp"
#include "asu/textgen.hpp"

namespace asu {

inline constexpr std::size_t kXVectorDim = 512;

struct SpeakerEmbedding {
  std::string id;
  std::vector<double> vector;
};

/// Non-empty pool of finite, equal-dimension embeddings with unique ids.
class SpeakerPool {
 public:
  explicit SpeakerPool(std::vector<SpeakerEmbedding> speakers);

  std::size_t size() const { return speakers_.size(); }
  std::size_t dim() const { return speakers_.front().vector.size(); }
  const SpeakerEmbedding& operator[](std::size_t i) const { return speakers_[i]; }
  const std::vector<SpeakerEmbedding>& speakers() const { return speakers_; }

 private:
  std::vector<SpeakerEmbedding> speakers_;
};

/// Accepts a JSON array or line-delimited records of {"id": str, "vector": [..]}.
SpeakerPool load_speaker_pool(const std::filesystem::path& source);

/// Implementations must be safe to call concurrently when workers > 1.
class TtsBackend {
 public:
  virtual ~TtsBackend() = default;
  virtual std::string id() const = 0;
  virtual Waveform synthesize(const std::string& text, const SpeakerEmbedding& speaker) = 0;
};

/// Tone-sequence stand-in for a neural TTS: one tone segment per character,
/// pitch and timbre keyed on (character, speaker) hashes.
class StubTtsBackend final : public TtsBackend {
 public:
  explicit StubTtsBackend(int sample_rate = kTargetSampleRate, double seconds_per_char = 0.04);
  std::string id() const override { return "stub"; }
  Waveform synthesize(const std::string& text, const SpeakerEmbedding& speaker) override;

 private:
  int sample_rate_;
  double seconds_per_char_;
};

struct SyntheticUtterance {
  SpokenText text;
  std::string utt_id;
  std::string speaker_id;
  std::string audio_ref;
  int sample_rate = kTargetSampleRate;
  double duration = 0.0;
};

struct SynthesisOptions {
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;
  TaskKind task = TaskKind::emotion;
  std::size_t workers = 1;
  int backend_retries = 2;
  bool persist_partial = true;
};

struct SynthesisResult {
  Manifest manifest;
  std::vector<SyntheticUtterance> utterances;
};

struct FailedItem {
  std::size_t index = 0;
  std::string message;
};

class SynthesisError : public Error {
 public:
  SynthesisError(const std::string& message, std::vector<FailedItem> failed, std::optional<Manifest> partial)
      : Error(ErrorCode::backend_failure, message), failed_(std::move(failed)), partial_(std::move(partial)) {}
  const std::vector<FailedItem>& failed() const { return failed_; }
  const std::optional<Manifest>& partial() const { return partial_; }

 private:
  std::vector<FailedItem> failed_;
  std::optional<Manifest> partial_;
};

/// Uniform with-replacement speaker draws, sequential from the seed.
std::vector<std::size_t> assign_speakers(std::size_t n_utterances, std::size_t pool_size, std::uint64_t seed);

/// Writes wav/<utt_id>.wav plus manifest.jsonl and utterances.jsonl under
/// options.out_dir.
SynthesisResult synthesize_corpus(const std::vector<SpokenText>& texts, const SpeakerPool& pool, TtsBackend& backend,
                                  const SynthesisOptions& options);

}  // namespace asu
