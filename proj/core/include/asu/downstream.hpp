#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "asu/encoder.hpp"

namespace asu {

/// Softmax-normalized layer mixing weights over raw trainable logits.
class LayerWeights {
 public:
  explicit LayerWeights(std::size_t n_layers);
  explicit LayerWeights(const Vector& raw_logits);

  std::size_t size() const { return static_cast<std::size_t>(raw_.value.rows()); }
  Vector normalized() const;
  Parameter& raw() { return raw_; }
  const Parameter& raw() const { return raw_; }

 private:
  Parameter raw_;
};

/// out[t] = sum_l softmax(raw)[l] * states[l][t]. Throws length_mismatch.
Matrix weighted_layer_average(const HiddenStack& stack, const LayerWeights& weights);

/// Accumulates d(loss)/d(raw logits) into weights.raw().grad and returns
/// d(loss)/d(state_l) for each layer.
std::vector<Matrix> weighted_layer_average_backward(const HiddenStack& stack, LayerWeights& weights,
                                                    const Matrix& grad_features);

struct HeadConfig {
  int input_dim = 768;
  int conv_channels = 256;
  int conv_kernel = 1;
  int pooled_dim = 256;
  int fc_hidden = 256;
  int n_classes = 4;

  void validate() const;
  bool operator==(const HeadConfig&) const = default;
};

nlohmann::json to_json(const HeadConfig& config);
HeadConfig head_config_from_json(const nlohmann::json& j);

struct HeadTrace {
  std::vector<Eigen::Index> rows;  // valid frame indices
  Matrix input;                    // valid frames only
  Matrix conv1_pre, conv1_out, conv2_pre, conv2_out;
  Vector pooled, fc1_pre, fc1_out;
  Eigen::Index total_frames = 0;
};

/// pointwise conv -> ReLU -> pointwise conv -> ReLU -> masked mean pool ->
/// FC -> ReLU -> FC.
class ClassifierHead {
 public:
  ClassifierHead(const HeadConfig& config, std::uint64_t seed);

  const HeadConfig& config() const { return config_; }

  /// Throws empty_frame when the mask admits no frame.
  Vector forward(const Matrix& features, std::span<const std::uint8_t> mask, HeadTrace* trace = nullptr) const;

  /// Accumulates parameter gradients; returns d(loss)/d(features) (masked rows zero).
  Matrix backward(const HeadTrace& trace, const Vector& grad_logits);

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  Parameter conv1_weight, conv1_bias, conv2_weight, conv2_bias;
  Parameter fc1_weight, fc1_bias, fc2_weight, fc2_bias;

 private:
  HeadConfig config_;
};

Vector forward_head(const Matrix& features, std::span<const std::uint8_t> mask, const ClassifierHead& head);

/// Argmax with ties to the lowest index. Throws non_finite_logits.
std::size_t predict(const Vector& logits);

/// Cross-entropy of softmax(logits) against `label`; writes d/d(logits) when
/// `grad` is non-null.
double softmax_cross_entropy(const Vector& logits, std::size_t label, Vector* grad);

}  // namespace asu
