#include "asu/backends.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "asu/digest.hpp"
#include "asu/error.hpp"

namespace asu {

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

Url split_endpoint(const std::string& endpoint) {
  const auto scheme = endpoint.find("://");
  if (endpoint.empty() || scheme == std::string::npos) {
    throw Error(ErrorCode::invalid_config, fmt::format("endpoint '{}' is not an http URL", endpoint));
  }
  const auto slash = endpoint.find('/', scheme + 3);
  Url url;
  url.origin = endpoint.substr(0, slash);
  if (slash != std::string::npos) url.prefix = endpoint.substr(slash);
  while (!url.prefix.empty() && url.prefix.back() == '/') url.prefix.pop_back();
  return url;
}

std::optional<std::string> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const std::filesystem::path& path, const std::string& data) {
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

std::optional<std::filesystem::path> backend_cache_dir() {
  const char* dir = std::getenv(kBackendCacheEnv);
  if (dir == nullptr || *dir == '\0') return std::nullopt;
  return std::filesystem::path(dir);
}

std::string http_post(const BackendSpec& spec, const std::string& path, const std::string& body) {
  const Url url = split_endpoint(spec.endpoint);
  const auto cache = backend_cache_dir();
  std::filesystem::path cache_file;
  if (cache) {
    Sha256 key;
    key.update(spec.endpoint);
    key.update(std::string_view("\n"));
    key.update(path);
    key.update(std::string_view("\n"));
    key.update(body);
    cache_file = *cache / (key.hex() + ".bin");
    if (auto hit = read_file(cache_file)) return *hit;
  }
  httplib::Client client(url.origin);
  client.set_connection_timeout(spec.timeout_seconds, 0);
  client.set_read_timeout(spec.timeout_seconds, 0);
  client.set_write_timeout(spec.timeout_seconds, 0);
  const auto res = client.Post(url.prefix + path, body, "application/json");
  if (!res) {
    throw Error(ErrorCode::backend_failure,
                fmt::format("POST {}{}: {}", spec.endpoint, path, httplib::to_string(res.error())));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::backend_failure, fmt::format("POST {}{}: HTTP {}", spec.endpoint, path, res->status));
  }
  if (cache) write_atomic(cache_file, res->body);
  return res->body;
}

HttpLlmBackend::HttpLlmBackend(BackendSpec spec) : spec_(std::move(spec)) { split_endpoint(spec_.endpoint); }

std::string HttpLlmBackend::generate(const LlmRequest& request) {
  nlohmann::json body{{"inputs", request.prompt},
                      {"parameters",
                       {{"max_new_tokens", request.max_output_tokens},
                        {"temperature", request.temperature},
                        {"seed", request.seed},
                        {"do_sample", request.temperature > 0.0}}}};
  const auto reply = http_post(spec_, "/generate", body.dump());
  try {
    const auto j = nlohmann::json::parse(reply);
    if (j.is_array()) return j.at(0).at("generated_text").get<std::string>();
    return j.at("generated_text").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::backend_failure, fmt::format("malformed generation reply: {}", e.what()));
  }
}

HttpTtsBackend::HttpTtsBackend(BackendSpec spec) : spec_(std::move(spec)) { split_endpoint(spec_.endpoint); }

Waveform HttpTtsBackend::synthesize(const std::string& text, const SpeakerEmbedding& speaker) {
  nlohmann::json body{{"text", text}, {"speaker_id", speaker.id}, {"speaker_embedding", speaker.vector}};
  const auto reply = http_post(spec_, "/synthesize", body.dump());
  try {
    return decode_wav(std::span(reinterpret_cast<const std::uint8_t*>(reply.data()), reply.size()));
  } catch (const Error& e) {
    throw Error(ErrorCode::backend_failure, fmt::format("TTS reply is not a WAV file: {}", e.what()));
  }
}

HttpEncoder::HttpEncoder(EncoderConfig config, BackendSpec spec) : config_(std::move(config)), spec_(std::move(spec)) {
  config_.validate();
  split_endpoint(spec_.endpoint);
}

HiddenStack HttpEncoder::encode(std::span<const float> samples, std::size_t valid_samples) const {
  const std::size_t frames = config_.frames_for(valid_samples);
  if (frames == 0) throw Error(ErrorCode::input_too_short, fmt::format("{} samples yield no frame", valid_samples));
  const std::size_t total = std::max(frames, config_.frames_for(samples.size()));
  const nlohmann::json body{{"sample_rate", kTargetSampleRate},
                            {"samples", std::vector<float>(samples.begin(), samples.begin() +
                                                                                static_cast<std::ptrdiff_t>(valid_samples))}};
  const auto reply = http_post(spec_, "/encode", body.dump());
  HiddenStack stack;
  try {
    const auto j = nlohmann::json::parse(reply);
    const auto& states = j.at("hidden_states");
    if (states.size() != static_cast<std::size_t>(config_.n_states())) {
      throw Error(ErrorCode::backend_failure,
                  fmt::format("encoder returned {} states, expected {}", states.size(), config_.n_states()));
    }
    // Frames beyond the valid count (e.g. from padding) are dropped; fewer is an error.
    for (const auto& state : states) {
      if (state.size() < frames) {
        throw Error(ErrorCode::backend_failure, fmt::format("encoder returned {} frames, expected {}", state.size(), frames));
      }
      Matrix m = Matrix::Zero(static_cast<Eigen::Index>(total), config_.hidden_dim);
      for (std::size_t t = 0; t < frames; ++t) {
        const auto& row = state[t];
        if (row.size() != static_cast<std::size_t>(config_.hidden_dim)) {
          throw Error(ErrorCode::backend_failure,
                      fmt::format("encoder returned width {}, expected {}", row.size(), config_.hidden_dim));
        }
        for (int d = 0; d < config_.hidden_dim; ++d) m(static_cast<Eigen::Index>(t), d) = row[d].get<double>();
      }
      stack.states.push_back(std::move(m));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::backend_failure, fmt::format("malformed encoder reply: {}", e.what()));
  }
  stack.frame_mask.assign(total, 0);
  std::fill_n(stack.frame_mask.begin(), frames, std::uint8_t{1});
  return stack;
}

std::string HttpEncoder::parameter_digest() const {
  // The remote model's weights are opaque; the endpoint and config identify it.
  return sha256_hex(fmt::format("http-encoder\n{}\n{}", spec_.endpoint, to_json(config_).dump()));
}

std::unique_ptr<LlmBackend> make_llm_backend(const BackendSpec& spec) {
  if (spec.id == "stub") return std::make_unique<PhrasebookLlmBackend>();
  if (spec.id == "http") return std::make_unique<HttpLlmBackend>(spec);
  throw Error(ErrorCode::invalid_config, fmt::format("unknown LLM backend '{}'", spec.id));
}

std::unique_ptr<TtsBackend> make_tts_backend(const BackendSpec& spec) {
  if (spec.id == "stub") return std::make_unique<StubTtsBackend>();
  if (spec.id == "http") return std::make_unique<HttpTtsBackend>(spec);
  throw Error(ErrorCode::invalid_config, fmt::format("unknown TTS backend '{}'", spec.id));
}

std::shared_ptr<const SpeechEncoder> make_encoder(const EncoderConfig& config) {
  if (config.backend_id == "stub") return std::make_shared<StubEncoder>(config);
  if (config.backend_id == "http") return std::make_shared<HttpEncoder>(config, BackendSpec{"http", config.endpoint});
  throw Error(ErrorCode::invalid_config, fmt::format("unknown encoder backend '{}'", config.backend_id));
}

}  // namespace asu
