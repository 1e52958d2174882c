#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "asu/rng.hpp"

namespace asu {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct EncoderConfig {
  std::string backend_id = "stub";
  int n_layers = 12;
  int hidden_dim = 768;
  int frame_length = 400;  // 25 ms at 16 kHz
  int frame_shift = 320;   // 20 ms, i.e. 50 frames per second
  std::uint64_t seed = 0;
  // Prepends the pre-transformer (filterbank) output as an extra state.
  bool include_embedding = false;
  std::string endpoint;

  double frame_rate() const { return 16000.0 / frame_shift; }
  int n_states() const { return n_layers + (include_embedding ? 1 : 0); }
  std::size_t frames_for(std::size_t samples) const;
  void validate() const;

  bool operator==(const EncoderConfig&) const = default;
};

nlohmann::json to_json(const EncoderConfig& config);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

/// L states of T x D (rows are frames). Masked frames carry no information.
struct HiddenStack {
  std::vector<Matrix> states;
  std::vector<std::uint8_t> frame_mask;

  std::size_t layers() const { return states.size(); }
  std::size_t frames() const { return frame_mask.size(); }
  std::size_t dim() const { return states.empty() ? 0 : static_cast<std::size_t>(states.front().cols()); }
  std::size_t valid_frames() const;
};

struct LoraConfig {
  int rank = 8;
  double alpha = 16.0;
  std::vector<std::string> targets{"query", "value"};
  double dropout = 0.0;

  double scale() const { return alpha / rank; }
  void validate() const;
  bool operator==(const LoraConfig&) const = default;
};

nlohmann::json to_json(const LoraConfig& config);
LoraConfig lora_config_from_json(const nlohmann::json& j);

struct ProjectionShape {
  int layer = 0;
  std::string kind;
  int d_out = 0;
  int d_in = 0;
};

/// Named trainable tensor with its gradient accumulator. Vectors are n x 1.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(); }
};

/// Trainable low-rank delta (alpha / rank) * B * A on one frozen projection.
struct LoraPair {
  int layer = 0;
  std::string kind;
  Parameter a;  // rank x d_in
  Parameter b;  // d_out x rank
};

class LoraAdapter {
 public:
  /// A ~ U(-1/sqrt(d_in), 1/sqrt(d_in)), B = 0. Throws unknown_target when a
  /// target kind matches none of `available`.
  LoraAdapter(const LoraConfig& config, const std::vector<ProjectionShape>& available, std::uint64_t seed);

  const LoraConfig& config() const { return config_; }
  std::vector<LoraPair>& pairs() { return pairs_; }
  const std::vector<LoraPair>& pairs() const { return pairs_; }
  const LoraPair* find(int layer, const std::string& kind) const;
  LoraPair* find(int layer, const std::string& kind);
  std::size_t parameter_count() const;
  void zero_grad();

 private:
  LoraConfig config_;
  std::vector<LoraPair> pairs_;
};

/// Activations cached by an adapted forward pass for the backward pass.
struct EncoderTrace {
  std::size_t valid_frames = 0;
  std::vector<Matrix> cache;
  std::vector<Matrix> dropout_masks;
};

class SpeechEncoder {
 public:
  virtual ~SpeechEncoder() = default;

  virtual const EncoderConfig& config() const = 0;

  /// `samples` may be zero-padded; only the first `valid_samples` are audio.
  /// Throws input_too_short when those yield no complete frame.
  virtual HiddenStack encode(std::span<const float> samples, std::size_t valid_samples) const = 0;

  /// Digest of the frozen base parameters.
  virtual std::string parameter_digest() const = 0;

  /// Projections that accept LoRA deltas. Empty for encoders that only export
  /// hidden states.
  virtual std::vector<ProjectionShape> projections() const { return {}; }

  virtual HiddenStack encode_adapted(std::span<const float> samples, std::size_t valid_samples,
                                     const LoraAdapter& adapter, EncoderTrace* trace, Engine* dropout_rng) const;

  /// Accumulates LoRA gradients given d(loss)/d(state) for every state.
  virtual void backward_adapted(const EncoderTrace& trace, const std::vector<Matrix>& state_grads,
                                LoraAdapter& adapter) const;
};

/// Seeded random filterbank followed by L gated residual layers, each with
/// query, value and output projections. Frame-local throughout.
class StubEncoder final : public SpeechEncoder {
 public:
  explicit StubEncoder(EncoderConfig config);

  const EncoderConfig& config() const override { return config_; }
  HiddenStack encode(std::span<const float> samples, std::size_t valid_samples) const override;
  std::string parameter_digest() const override;
  std::vector<ProjectionShape> projections() const override;
  HiddenStack encode_adapted(std::span<const float> samples, std::size_t valid_samples, const LoraAdapter& adapter,
                             EncoderTrace* trace, Engine* dropout_rng) const override;
  void backward_adapted(const EncoderTrace& trace, const std::vector<Matrix>& state_grads,
                        LoraAdapter& adapter) const override;

 private:
  struct Layer {
    Matrix w_query;
    Vector b_query;
    Matrix w_value;
    Vector b_value;
    Matrix w_output;
  };

  HiddenStack run(std::span<const float> samples, std::size_t valid_samples, const LoraAdapter* adapter,
                  EncoderTrace* trace, Engine* dropout_rng) const;

  EncoderConfig config_;
  Matrix filterbank_;  // D x frame_length
  std::vector<Layer> layers_;
};

/// Encoder plus its LoRA adapter; base weights stay shared and immutable.
struct AdaptedEncoder {
  std::shared_ptr<const SpeechEncoder> base;
  LoraAdapter adapter;

  HiddenStack encode(std::span<const float> samples, std::size_t valid_samples) const {
    return base->encode_adapted(samples, valid_samples, adapter, nullptr, nullptr);
  }
};

AdaptedEncoder apply_lora(std::shared_ptr<const SpeechEncoder> encoder, const LoraConfig& config,
                          std::uint64_t seed);

}  // namespace asu
