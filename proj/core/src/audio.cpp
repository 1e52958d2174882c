#include "asu/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include <fmt/format.h>

#include "asu/error.hpp"

namespace asu {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

struct FmtChunk {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

struct ParsedWav {
  FmtChunk fmt;
  std::size_t data_offset = 0;
  std::size_t data_size = 0;
};

// Header-only parse. `available` may be shorter than the file when only the
// header was read; the data chunk size is then taken from the header.
ParsedWav parse_header(std::span<const std::uint8_t> bytes, bool require_data) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw Error(ErrorCode::unreadable_audio, "not a RIFF/WAVE stream");
  }
  ParsedWav parsed;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (pos + 8 + 16 > bytes.size()) break;
      const std::uint8_t* body = chunk + 8;
      parsed.fmt.format = read_u16(body);
      parsed.fmt.channels = read_u16(body + 2);
      parsed.fmt.sample_rate = read_u32(body + 4);
      parsed.fmt.bits = read_u16(body + 14);
      if (parsed.fmt.format == kFormatExtensible && size >= 40 && pos + 8 + 26 <= bytes.size()) {
        parsed.fmt.format = read_u16(body + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      parsed.data_offset = pos + 8;
      parsed.data_size = size;
      if (require_data) {
        parsed.data_size = std::min<std::size_t>(size, bytes.size() - parsed.data_offset);
      }
      break;
    }
    pos += 8 + size + (size & 1U);
  }
  if (!have_fmt || parsed.data_offset == 0) {
    throw Error(ErrorCode::unreadable_audio, "missing fmt or data chunk");
  }
  const auto& f = parsed.fmt;
  const bool pcm_ok = f.format == kFormatPcm && (f.bits == 8 || f.bits == 16 || f.bits == 24 || f.bits == 32);
  const bool float_ok = f.format == kFormatFloat && f.bits == 32;
  if (!(pcm_ok || float_ok) || f.channels == 0 || f.sample_rate == 0) {
    throw Error(ErrorCode::unreadable_audio,
                fmt::format("unsupported WAV encoding (format {}, {} bits, {} channels)", f.format, f.bits,
                            f.channels));
  }
  return parsed;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path, std::size_t max_bytes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::unreadable_audio, fmt::format("cannot open '{}'", path.string()));
  std::vector<std::uint8_t> bytes;
  if (max_bytes == 0) {
    bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  } else {
    bytes.resize(max_bytes);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(max_bytes));
    bytes.resize(static_cast<std::size_t>(in.gcount()));
  }
  return bytes;
}

double blackman(double x) {
  // x in [-1, 1]
  const double a = std::numbers::pi * (x + 1.0);
  return 0.42 - 0.5 * std::cos(a) + 0.08 * std::cos(2.0 * a);
}

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

Waveform decode_wav(std::span<const std::uint8_t> bytes) {
  const ParsedWav parsed = parse_header(bytes, true);
  const auto& f = parsed.fmt;
  const std::size_t bytes_per_sample = f.bits / 8U;
  const std::size_t n = parsed.data_size / bytes_per_sample;
  Waveform wave;
  wave.sample_rate = static_cast<int>(f.sample_rate);
  wave.channels = f.channels;
  wave.samples.resize(n - n % f.channels);
  const std::uint8_t* p = bytes.data() + parsed.data_offset;
  for (std::size_t i = 0; i < wave.samples.size(); ++i, p += bytes_per_sample) {
    float v = 0.0F;
    if (f.format == kFormatFloat) {
      std::uint32_t raw = read_u32(p);
      std::memcpy(&v, &raw, sizeof(v));
    } else {
      switch (f.bits) {
        case 8: v = (static_cast<float>(p[0]) - 128.0F) / 128.0F; break;
        case 16: v = static_cast<float>(static_cast<std::int16_t>(read_u16(p))) / 32768.0F; break;
        case 24: {
          std::int32_t s = static_cast<std::int32_t>(static_cast<std::uint32_t>(p[0]) << 8 |
                                                     static_cast<std::uint32_t>(p[1]) << 16 |
                                                     static_cast<std::uint32_t>(p[2]) << 24);
          v = static_cast<float>(s >> 8) / 8388608.0F;
          break;
        }
        default: v = static_cast<float>(static_cast<double>(static_cast<std::int32_t>(read_u32(p))) / 2147483648.0); break;
      }
    }
    wave.samples[i] = v;
  }
  return wave;
}

Waveform read_wav(const std::filesystem::path& path) {
  const auto bytes = read_file(path, 0);
  try {
    return decode_wav(bytes);
  } catch (const Error& e) {
    throw Error(ErrorCode::unreadable_audio, fmt::format("'{}': {}", path.string(), e.what()));
  }
}

WavInfo read_wav_info(const std::filesystem::path& path) {
  const auto bytes = read_file(path, 4096);
  ParsedWav parsed;
  try {
    parsed = parse_header(bytes, false);
  } catch (const Error& e) {
    throw Error(ErrorCode::unreadable_audio, fmt::format("'{}': {}", path.string(), e.what()));
  }
  std::error_code ec;
  const auto file_size = std::filesystem::file_size(path, ec);
  std::size_t data_size = parsed.data_size;
  if (!ec && parsed.data_offset + data_size > file_size) data_size = file_size - parsed.data_offset;
  WavInfo info;
  info.sample_rate = static_cast<int>(parsed.fmt.sample_rate);
  info.channels = parsed.fmt.channels;
  info.bits_per_sample = parsed.fmt.bits;
  info.frames = data_size / (static_cast<std::size_t>(parsed.fmt.bits / 8U) * parsed.fmt.channels);
  return info;
}

std::vector<std::uint8_t> encode_wav_pcm16(const Waveform& wave) {
  const auto data_bytes = static_cast<std::uint32_t>(wave.samples.size() * 2);
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, static_cast<std::uint16_t>(wave.channels));
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate * wave.channels * 2));
  put_u16(out, static_cast<std::uint16_t>(wave.channels * 2));
  put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_bytes);
  for (float s : wave.samples) {
    const float clipped = std::clamp(s, -1.0F, 1.0F);
    const auto q = static_cast<std::int16_t>(std::clamp(std::lrint(clipped * 32768.0F), -32768L, 32767L));
    put_u16(out, static_cast<std::uint16_t>(q));
  }
  return out;
}

void write_wav_pcm16(const std::filesystem::path& path, const Waveform& wave) {
  const auto bytes = encode_wav_pcm16(wave);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, fmt::format("cannot write '{}'", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::io, fmt::format("short write to '{}'", path.string()));
}

std::vector<float> downmix_to_mono(const Waveform& wave) {
  if (wave.channels <= 1) return wave.samples;
  const auto channels = static_cast<std::size_t>(wave.channels);
  std::vector<float> mono(wave.frames());
  for (std::size_t i = 0; i < mono.size(); ++i) {
    double sum = 0.0;
    for (std::size_t c = 0; c < channels; ++c) sum += wave.samples[i * channels + c];
    mono[i] = static_cast<float>(sum / static_cast<double>(channels));
  }
  return mono;
}

std::vector<float> resample(std::span<const float> mono, int source_rate, int target_rate) {
  if (source_rate <= 0 || target_rate <= 0) {
    throw Error(ErrorCode::invalid_config, "sample rates must be positive");
  }
  if (source_rate == target_rate) return {mono.begin(), mono.end()};

  constexpr double kZeroCrossings = 16.0;
  const double step = static_cast<double>(source_rate) / target_rate;
  const double cutoff = std::min(1.0, static_cast<double>(target_rate) / source_rate);
  const double half_width = kZeroCrossings / cutoff;
  const auto n_in = static_cast<std::ptrdiff_t>(mono.size());
  const auto n_out = static_cast<std::size_t>(
      std::llround(static_cast<double>(mono.size()) * target_rate / source_rate));

  std::vector<float> out(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    const double t = static_cast<double>(i) * step;
    const auto first = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(t - half_width)));
    const auto last = std::min<std::ptrdiff_t>(n_in - 1, static_cast<std::ptrdiff_t>(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::ptrdiff_t k = first; k <= last; ++k) {
      const double x = t - static_cast<double>(k);
      acc += mono[static_cast<std::size_t>(k)] * cutoff * sinc(cutoff * x) * blackman(x / half_width);
    }
    out[i] = static_cast<float>(acc);
  }
  return out;
}

Waveform postprocess_waveform(const Waveform& wave) {
  if (wave.samples.empty() || wave.channels <= 0) {
    throw Error(ErrorCode::empty_waveform, "waveform has no samples");
  }
  if (wave.sample_rate <= 0) throw Error(ErrorCode::invalid_config, "source sample rate must be positive");
  Waveform out;
  out.sample_rate = kTargetSampleRate;
  out.channels = 1;
  const auto mono = downmix_to_mono(wave);
  out.samples = resample(mono, wave.sample_rate, kTargetSampleRate);
  for (float& s : out.samples) {
    if (!std::isfinite(s)) s = 0.0F;
    s = std::clamp(s, -1.0F, 1.0F);
  }
  return out;
}

}  // namespace asu
