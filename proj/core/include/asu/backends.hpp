#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "asu/encoder.hpp"
#include "asu/speechsynth.hpp"
#include "asu/textgen.hpp"

namespace asu {

/// Environment variable naming a directory for cached HTTP backend responses.
inline constexpr const char* kBackendCacheEnv = "ASU_BACKEND_CACHE";

struct BackendSpec {
  std::string id = "stub";  // "stub" or "http"
  std::string endpoint;     // http://host:port[/prefix]
  int timeout_seconds = 120;
};

/// Text-generation-inference style: POST {endpoint}/generate with
/// {"inputs", "parameters": {"max_new_tokens", "temperature", "seed", "do_sample"}},
/// reading "generated_text" from the reply.
class HttpLlmBackend final : public LlmBackend {
 public:
  explicit HttpLlmBackend(BackendSpec spec);
  std::string id() const override { return "http:" + spec_.endpoint; }
  std::string generate(const LlmRequest& request) override;

 private:
  BackendSpec spec_;
};

/// POST {endpoint}/synthesize with {"text", "speaker_id", "speaker_embedding"};
/// the reply body is a WAV file.
class HttpTtsBackend final : public TtsBackend {
 public:
  explicit HttpTtsBackend(BackendSpec spec);
  std::string id() const override { return "http:" + spec_.endpoint; }
  Waveform synthesize(const std::string& text, const SpeakerEmbedding& speaker) override;

 private:
  BackendSpec spec_;
};

/// POST {endpoint}/encode with {"sample_rate", "samples"}; the reply holds
/// "hidden_states" as states x frames x dim. Exports no projections, so it
/// cannot carry LoRA.
class HttpEncoder final : public SpeechEncoder {
 public:
  HttpEncoder(EncoderConfig config, BackendSpec spec);
  const EncoderConfig& config() const override { return config_; }
  HiddenStack encode(std::span<const float> samples, std::size_t valid_samples) const override;
  std::string parameter_digest() const override;

 private:
  EncoderConfig config_;
  BackendSpec spec_;
};

/// POSTs a JSON body and returns the raw reply, consulting the response cache
/// when kBackendCacheEnv is set. Throws backend_failure.
std::string http_post(const BackendSpec& spec, const std::string& path, const std::string& body);

std::optional<std::filesystem::path> backend_cache_dir();

std::unique_ptr<LlmBackend> make_llm_backend(const BackendSpec& spec);
std::unique_ptr<TtsBackend> make_tts_backend(const BackendSpec& spec);
std::shared_ptr<const SpeechEncoder> make_encoder(const EncoderConfig& config);

}  // namespace asu
