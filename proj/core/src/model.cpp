#include "asu/model.hpp"

#include <algorithm>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "asu/digest.hpp"
#include "asu/error.hpp"

namespace asu {

namespace {

HeadConfig with_input_dim(HeadConfig config, int dim) {
  config.input_dim = dim;
  return config;
}

}  // namespace

Batch make_batch(const std::vector<std::vector<float>>& audio, std::span<const std::size_t> indices,
                 std::span<const std::size_t> labels) {
  Batch batch;
  for (auto i : indices) batch.width = std::max(batch.width, audio[i].size());
  batch.samples.assign(batch.width * indices.size(), 0.0F);
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const auto& clip = audio[indices[r]];
    std::copy(clip.begin(), clip.end(), batch.samples.begin() + static_cast<std::ptrdiff_t>(r * batch.width));
    batch.lengths.push_back(clip.size());
    batch.labels.push_back(labels[indices[r]]);
  }
  return batch;
}

AsuModel::AsuModel(std::shared_ptr<const SpeechEncoder> encoder, HeadConfig head, std::optional<LoraConfig> lora,
                   std::uint64_t seed)
    : encoder_(std::move(encoder)),
      lora_config_(std::move(lora)),
      layer_weights_(static_cast<std::size_t>(encoder_->config().n_states())),
      head_(with_input_dim(head, encoder_->config().hidden_dim), seed) {
  if (lora_config_) adapter_.emplace(*lora_config_, encoder_->projections(), seed);
}

HiddenStack AsuModel::encode(std::span<const float> samples, std::size_t valid_samples) const {
  if (adapter_) return encoder_->encode_adapted(samples, valid_samples, *adapter_, nullptr, nullptr);
  return encoder_->encode(samples, valid_samples);
}

Vector AsuModel::logits_from_stack(const HiddenStack& stack) const {
  return head_.forward(weighted_layer_average(stack, layer_weights_), stack.frame_mask);
}

Vector AsuModel::logits(std::span<const float> samples, std::size_t valid_samples) const {
  return logits_from_stack(encode(samples, valid_samples));
}

Matrix AsuModel::batch_logits(const Batch& batch) const {
  Matrix out(static_cast<Eigen::Index>(batch.size()), head_.config().n_classes);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = logits(batch.row(i), batch.lengths[i]).transpose();
  }
  return out;
}

double AsuModel::accumulate_impl(const HiddenStack& stack, std::size_t label, double weight,
                                 const EncoderTrace* trace) {
  const Matrix features = weighted_layer_average(stack, layer_weights_);
  HeadTrace head_trace;
  const Vector logits = head_.forward(features, stack.frame_mask, &head_trace);
  Vector grad;
  const double loss = softmax_cross_entropy(logits, label, &grad);
  const Matrix grad_features = head_.backward(head_trace, weight * grad);
  const auto grad_states = weighted_layer_average_backward(stack, layer_weights_, grad_features);
  if (trace != nullptr) encoder_->backward_adapted(*trace, grad_states, *adapter_);
  return loss;
}

double AsuModel::accumulate(std::span<const float> samples, std::size_t valid_samples, std::size_t label,
                            double weight, Engine* dropout_rng) {
  if (!adapter_) return accumulate_impl(encoder_->encode(samples, valid_samples), label, weight, nullptr);
  EncoderTrace trace;
  const auto stack = encoder_->encode_adapted(samples, valid_samples, *adapter_, &trace, dropout_rng);
  return accumulate_impl(stack, label, weight, &trace);
}

double AsuModel::accumulate_from_stack(const HiddenStack& stack, std::size_t label, double weight) {
  if (adapter_) throw Error(ErrorCode::invalid_config, "precomputed stacks cannot train a LoRA-adapted model");
  return accumulate_impl(stack, label, weight, nullptr);
}

double AsuModel::accumulate_batch(const Batch& batch, Engine* dropout_rng) {
  if (batch.size() == 0) return 0.0;
  const double weight = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    total += accumulate(batch.row(i), batch.lengths[i], batch.labels[i], weight, dropout_rng);
  }
  return total * weight;
}

std::vector<Parameter*> AsuModel::trainable_state() {
  std::vector<Parameter*> out{&layer_weights_.raw()};
  for (auto* p : head_.parameters()) out.push_back(p);
  if (adapter_) {
    for (auto& pair : adapter_->pairs()) {
      out.push_back(&pair.a);
      out.push_back(&pair.b);
    }
  }
  return out;
}

std::vector<const Parameter*> AsuModel::trainable_state() const {
  std::vector<const Parameter*> out;
  for (auto* p : const_cast<AsuModel*>(this)->trainable_state()) out.push_back(p);
  return out;
}

std::vector<NamedTensor> AsuModel::snapshot() const {
  std::vector<NamedTensor> out;
  for (const auto* p : trainable_state()) out.push_back({p->name, p->value});
  return out;
}

void AsuModel::restore(const std::vector<NamedTensor>& tensors) {
  std::unordered_map<std::string, const NamedTensor*> by_name;
  for (const auto& t : tensors) by_name.emplace(t.name, &t);
  auto params = trainable_state();
  if (params.size() != tensors.size()) {
    throw Error(ErrorCode::incompatible_checkpoint,
                fmt::format("trainable state has {} tensors, source has {}", params.size(), tensors.size()));
  }
  for (auto* p : params) {
    const auto it = by_name.find(p->name);
    if (it == by_name.end()) throw Error(ErrorCode::incompatible_checkpoint, fmt::format("missing tensor '{}'", p->name));
    const Matrix& v = it->second->value;
    if (v.rows() != p->value.rows() || v.cols() != p->value.cols()) {
      throw Error(ErrorCode::incompatible_checkpoint,
                  fmt::format("tensor '{}' is {}x{}, expected {}x{}", p->name, v.rows(), v.cols(), p->value.rows(),
                              p->value.cols()));
    }
  }
  for (auto* p : params) p->value = by_name.at(p->name)->value;
}

void AsuModel::zero_grad() {
  for (auto* p : trainable_state()) p->zero_grad();
}

std::string AsuModel::config_digest() const {
  nlohmann::json j;
  j["encoder"] = to_json(encoder_->config());
  j["encoder_digest"] = base_digest();
  j["head"] = to_json(head_.config());
  j["lora"] = lora_config_ ? to_json(*lora_config_) : nlohmann::json(nullptr);
  return sha256_hex(j.dump());
}

}  // namespace asu
