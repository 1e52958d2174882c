#include "asu/speechsynth.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <thread>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "asu/rng.hpp"

namespace asu {

namespace fs = std::filesystem;

namespace {

SpeakerEmbedding parse_speaker(const nlohmann::json& j) {
  SpeakerEmbedding s;
  s.id = j.at("id").get<std::string>();
  s.vector = j.at("vector").get<std::vector<double>>();
  return s;
}

}  // namespace

SpeakerPool::SpeakerPool(std::vector<SpeakerEmbedding> speakers) : speakers_(std::move(speakers)) {
  if (speakers_.empty()) throw Error(ErrorCode::empty_pool, "speaker pool is empty");
  const std::size_t dim = speakers_.front().vector.size();
  std::unordered_set<std::string> ids;
  for (const auto& s : speakers_) {
    if (s.vector.size() != dim) {
      throw Error(ErrorCode::dimension_mismatch,
                  fmt::format("speaker '{}' has dimension {}, pool dimension is {}", s.id, s.vector.size(), dim));
    }
    if (dim == 0) throw Error(ErrorCode::dimension_mismatch, "speaker embeddings have dimension 0");
    for (double v : s.vector) {
      if (!std::isfinite(v)) throw Error(ErrorCode::invalid_config, fmt::format("speaker '{}' has non-finite values", s.id));
    }
    if (!ids.insert(s.id).second) throw Error(ErrorCode::invalid_config, fmt::format("duplicate speaker id '{}'", s.id));
  }
}

SpeakerPool load_speaker_pool(const fs::path& source) {
  std::ifstream in(source);
  if (!in) throw Error(ErrorCode::io, fmt::format("cannot read speaker pool '{}'", source.string()));
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<SpeakerEmbedding> speakers;
  try {
    const auto first = content.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && content[first] == '[') {
      for (const auto& j : nlohmann::json::parse(content)) speakers.push_back(parse_speaker(j));
    } else {
      std::size_t start = 0;
      while (start < content.size()) {
        auto end = content.find('\n', start);
        if (end == std::string::npos) end = content.size();
        const std::string_view line(content.data() + start, end - start);
        if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
          speakers.push_back(parse_speaker(nlohmann::json::parse(line)));
        }
        start = end + 1;
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, fmt::format("{}: {}", source.string(), e.what()));
  }
  return SpeakerPool(std::move(speakers));
}

StubTtsBackend::StubTtsBackend(int sample_rate, double seconds_per_char)
    : sample_rate_(sample_rate), seconds_per_char_(seconds_per_char) {
  if (sample_rate <= 0 || !(seconds_per_char > 0.0)) {
    throw Error(ErrorCode::invalid_config, "stub TTS needs a positive rate and segment length");
  }
}

Waveform StubTtsBackend::synthesize(const std::string& text, const SpeakerEmbedding& speaker) {
  const std::uint64_t voice = derive_seed(0, speaker.id);
  const double base_pitch = 90.0 + static_cast<double>(voice % 120);
  const double brightness = 0.2 + static_cast<double>((voice >> 8) % 50) / 100.0;
  const auto segment = static_cast<std::size_t>(std::lround(seconds_per_char_ * sample_rate_));

  Waveform wave;
  wave.sample_rate = sample_rate_;
  wave.channels = 1;
  wave.samples.reserve(segment * std::max<std::size_t>(text.size(), 1));
  double phase = 0.0;
  for (unsigned char c : text) {
    const bool silent = std::isspace(c) != 0;
    const double pitch = base_pitch * (1.0 + static_cast<double>(derive_seed(voice, c) % 100) / 100.0);
    for (std::size_t i = 0; i < segment; ++i) {
      // Raised-cosine envelope per segment avoids clicks at boundaries.
      const double env = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * (static_cast<double>(i) + 0.5) / segment);
      phase += 2.0 * std::numbers::pi * pitch / sample_rate_;
      const double tone = std::sin(phase) + brightness * std::sin(2.0 * phase);
      wave.samples.push_back(silent ? 0.0F : static_cast<float>(0.3 * env * tone / (1.0 + brightness)));
    }
  }
  if (wave.samples.empty()) wave.samples.assign(segment, 0.0F);
  return wave;
}

std::vector<std::size_t> assign_speakers(std::size_t n_utterances, std::size_t pool_size, std::uint64_t seed) {
  if (pool_size == 0) throw Error(ErrorCode::empty_pool, "cannot assign speakers from an empty pool");
  Engine engine(seed);
  std::vector<std::size_t> assignment(n_utterances);
  for (auto& a : assignment) a = static_cast<std::size_t>(uniform_index(engine, pool_size));
  return assignment;
}

SynthesisResult synthesize_corpus(const std::vector<SpokenText>& texts, const SpeakerPool& pool, TtsBackend& backend,
                                  const SynthesisOptions& options) {
  const fs::path wav_dir = options.out_dir / "wav";
  fs::create_directories(wav_dir);
  const auto speakers = assign_speakers(texts.size(), pool.size(), options.seed);

  std::vector<std::optional<SyntheticUtterance>> slots(texts.size());
  std::vector<FailedItem> failed;
  std::mutex failed_mutex;
  std::atomic<std::size_t> next{0};

  const auto work = [&] {
    for (std::size_t i = next++; i < texts.size(); i = next++) {
      const auto& speaker = pool[speakers[i]];
      const auto utt_id = fmt::format("syn_{:06d}", i);
      try {
        Waveform raw;
        for (int tries = 0;; ++tries) {
          try {
            raw = backend.synthesize(texts[i].text, speaker);
            break;
          } catch (const std::exception&) {
            if (tries >= options.backend_retries) throw;
          }
        }
        const Waveform wave = postprocess_waveform(raw);
        const std::string audio_ref = fmt::format("wav/{}.wav", utt_id);
        write_wav_pcm16(options.out_dir / audio_ref, wave);
        slots[i] = SyntheticUtterance{texts[i], utt_id, speaker.id, audio_ref, wave.sample_rate, wave.duration()};
      } catch (const std::exception& e) {
        std::lock_guard lock(failed_mutex);
        failed.push_back({i, e.what()});
      }
    }
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(options.workers, texts.size()));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool_threads;
    for (std::size_t w = 0; w < workers; ++w) pool_threads.emplace_back(work);
    for (auto& t : pool_threads) t.join();
  }

  std::vector<SyntheticUtterance> utterances;
  std::vector<UtteranceRecord> records;
  for (auto& slot : slots) {
    if (!slot) continue;
    records.push_back({slot->utt_id, slot->audio_ref, slot->text.label, slot->speaker_id, "synthetic",
                       slot->duration, Origin::synthetic});
    utterances.push_back(std::move(*slot));
  }
  Manifest manifest(options.task, std::move(records), options.out_dir);

  const auto persist = [&] {
    write_manifest(options.out_dir / "manifest.jsonl", manifest,
                   {{"backend_id", backend.id()}, {"speaker_pool_size", pool.size()}, {"seed", options.seed}});
    std::ofstream out(options.out_dir / "utterances.jsonl", std::ios::trunc);
    for (const auto& u : utterances) {
      nlohmann::ordered_json j;
      j["utt_id"] = u.utt_id;
      j["text"] = u.text.text;
      j["label"] = u.text.label;
      j["prompt"] = u.text.prompt;
      j["text_backend_id"] = u.text.backend_id;
      j["index"] = u.text.index;
      j["speaker_id"] = u.speaker_id;
      out << j.dump() << '\n';
    }
  };

  if (!failed.empty()) {
    std::sort(failed.begin(), failed.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
    if (options.persist_partial) persist();
    auto message = fmt::format("{} of {} utterances failed to synthesize (first: #{}: {})", failed.size(),
                               texts.size(), failed.front().index, failed.front().message);
    throw SynthesisError(message, std::move(failed),
                         options.persist_partial ? std::optional<Manifest>(manifest) : std::nullopt);
  }
  persist();
  return {std::move(manifest), std::move(utterances)};
}

}  // namespace asu
