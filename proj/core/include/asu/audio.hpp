#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace asu {

inline constexpr int kTargetSampleRate = 16000;

/// Interleaved PCM samples in [-1, 1].
struct Waveform {
  int sample_rate = kTargetSampleRate;
  int channels = 1;
  std::vector<float> samples;

  std::size_t frames() const { return channels > 0 ? samples.size() / static_cast<std::size_t>(channels) : 0; }
  double duration() const { return sample_rate > 0 ? static_cast<double>(frames()) / sample_rate : 0.0; }
};

struct WavInfo {
  int sample_rate = 0;
  int channels = 0;
  int bits_per_sample = 0;
  std::size_t frames = 0;
  double duration() const { return sample_rate > 0 ? static_cast<double>(frames) / sample_rate : 0.0; }
};

// Reads PCM 8/16/24/32-bit and IEEE float32 RIFF/WAVE, including
// WAVE_FORMAT_EXTENSIBLE headers.
Waveform decode_wav(std::span<const std::uint8_t> bytes);
Waveform read_wav(const std::filesystem::path& path);
WavInfo read_wav_info(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_wav_pcm16(const Waveform& wave);
void write_wav_pcm16(const std::filesystem::path& path, const Waveform& wave);

std::vector<float> downmix_to_mono(const Waveform& wave);

/// Band-limited (windowed-sinc) resampling of a mono signal. Output length is
/// round(n * target_rate / source_rate).
std::vector<float> resample(std::span<const float> mono, int source_rate, int target_rate);

/// Mono 16 kHz output, clipped to [-1, 1]. Throws empty_waveform on empty input.
Waveform postprocess_waveform(const Waveform& wave);

}  // namespace asu
