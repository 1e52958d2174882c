#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "asu/downstream.hpp"
#include "asu/encoder.hpp"

namespace asu {

/// Zero-padded audio batch; row i holds lengths[i] valid samples.
struct Batch {
  std::size_t width = 0;
  std::vector<float> samples;
  std::vector<std::size_t> lengths;
  std::vector<std::size_t> labels;

  std::size_t size() const { return lengths.size(); }
  std::span<const float> row(std::size_t i) const { return {samples.data() + i * width, width}; }
};

Batch make_batch(const std::vector<std::vector<float>>& audio, std::span<const std::size_t> indices,
                 std::span<const std::size_t> labels);

struct NamedTensor {
  std::string name;
  Matrix value;
};

/// Frozen encoder, optional LoRA adapter, layer weights and classifier head.
/// Copies share the immutable encoder and deep-copy all trainable state.
class AsuModel {
 public:
  AsuModel(std::shared_ptr<const SpeechEncoder> encoder, HeadConfig head, std::optional<LoraConfig> lora,
           std::uint64_t seed);

  const SpeechEncoder& encoder() const { return *encoder_; }
  std::shared_ptr<const SpeechEncoder> shared_encoder() const { return encoder_; }
  const HeadConfig& head_config() const { return head_.config(); }
  const std::optional<LoraConfig>& lora_config() const { return lora_config_; }
  bool has_lora() const { return adapter_.has_value(); }
  const LoraAdapter* adapter() const { return adapter_ ? &*adapter_ : nullptr; }
  const LayerWeights& layer_weights() const { return layer_weights_; }
  LayerWeights& layer_weights() { return layer_weights_; }
  const ClassifierHead& head() const { return head_; }
  ClassifierHead& head() { return head_; }

  HiddenStack encode(std::span<const float> samples, std::size_t valid_samples) const;
  Vector logits_from_stack(const HiddenStack& stack) const;
  Vector logits(std::span<const float> samples, std::size_t valid_samples) const;
  /// B x K
  Matrix batch_logits(const Batch& batch) const;

  /// Forward + backward of cross-entropy for one utterance; gradients are
  /// scaled by `weight` and accumulated. Returns the unscaled loss.
  double accumulate(std::span<const float> samples, std::size_t valid_samples, std::size_t label, double weight,
                    Engine* dropout_rng);
  /// Same, from a precomputed stack. Only valid without LoRA.
  double accumulate_from_stack(const HiddenStack& stack, std::size_t label, double weight);

  /// Mean loss over the batch; gradients accumulate as the batch mean.
  double accumulate_batch(const Batch& batch, Engine* dropout_rng);

  /// Layer-weight logits, head parameters, and LoRA A/B matrices. Never any
  /// base encoder parameter.
  std::vector<Parameter*> trainable_state();
  std::vector<const Parameter*> trainable_state() const;
  std::vector<NamedTensor> snapshot() const;
  /// Throws incompatible_checkpoint on a missing name or a shape mismatch.
  void restore(const std::vector<NamedTensor>& tensors);
  void zero_grad();

  std::string base_digest() const { return encoder_->parameter_digest(); }
  /// Digest of encoder config + base digest, head config, and LoRA config.
  std::string config_digest() const;

 private:
  double accumulate_impl(const HiddenStack& stack, std::size_t label, double weight, const EncoderTrace* trace);

  std::shared_ptr<const SpeechEncoder> encoder_;
  std::optional<LoraConfig> lora_config_;
  std::optional<LoraAdapter> adapter_;
  LayerWeights layer_weights_;
  ClassifierHead head_;
};

}  // namespace asu
