#include "asu/encoder.hpp"

#include <algorithm>
#include <array>
#include <utility>
#include <cmath>

#include <fmt/format.h>

#include "asu/digest.hpp"
#include "asu/error.hpp"

namespace asu {

namespace {

constexpr std::array<const char*, 3> kStubKinds{"query", "value", "output"};
constexpr std::size_t kCachePerLayer = 4;  // layer input, tanh(query), value, gated product

Matrix gaussian(Engine& engine, Eigen::Index rows, Eigen::Index cols, double stddev) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = stddev * standard_normal(engine);
  }
  return m;
}

/// x W^T + b, plus the low-rank path s * (x~ A^T) B^T when `lora` is set.
Matrix project(const Matrix& x, const Matrix& w, const Vector* bias, const LoraPair* lora, double scale,
               double dropout, Engine* rng, Matrix* mask_out) {
  Matrix y = x * w.transpose();
  if (bias != nullptr) y.rowwise() += bias->transpose();
  if (lora != nullptr) {
    if (dropout > 0.0 && rng != nullptr) {
      Matrix mask(x.rows(), x.cols());
      const double keep = 1.0 - dropout;
      for (Eigen::Index j = 0; j < mask.cols(); ++j) {
        for (Eigen::Index i = 0; i < mask.rows(); ++i) mask(i, j) = uniform_unit(*rng) < keep ? 1.0 / keep : 0.0;
      }
      y.noalias() += scale * ((x.cwiseProduct(mask) * lora->a.value.transpose()) * lora->b.value.transpose());
      if (mask_out != nullptr) *mask_out = std::move(mask);
    } else {
      y.noalias() += scale * ((x * lora->a.value.transpose()) * lora->b.value.transpose());
    }
  }
  return y;
}

/// Backward of project() with respect to its input; accumulates LoRA grads.
Matrix project_backward(const Matrix& x, const Matrix& grad_y, const Matrix& w, LoraPair* lora, double scale,
                        const Matrix& mask) {
  Matrix grad_x = grad_y * w;
  if (lora != nullptr) {
    const Matrix x_in = mask.size() > 0 ? Matrix(x.cwiseProduct(mask)) : x;
    const Matrix gy_b = grad_y * lora->b.value;  // T x r
    lora->b.grad.noalias() += scale * (grad_y.transpose() * (x_in * lora->a.value.transpose()));
    lora->a.grad.noalias() += scale * (gy_b.transpose() * x_in);
    Matrix through = scale * (gy_b * lora->a.value);
    if (mask.size() > 0) through = through.cwiseProduct(mask);
    grad_x += through;
  }
  return grad_x;
}

}  // namespace

std::size_t EncoderConfig::frames_for(std::size_t samples) const {
  const auto len = static_cast<std::size_t>(frame_length);
  if (samples < len) return 0;
  return 1 + (samples - len) / static_cast<std::size_t>(frame_shift);
}

void EncoderConfig::validate() const {
  if (n_layers < 1) throw Error(ErrorCode::invalid_config, "encoder n_layers must be >= 1");
  if (hidden_dim < 1) throw Error(ErrorCode::invalid_config, "encoder hidden_dim must be >= 1");
  if (frame_length < 1 || frame_shift < 1) throw Error(ErrorCode::invalid_config, "frame length and shift must be >= 1");
}

nlohmann::json to_json(const EncoderConfig& c) {
  return {{"backend_id", c.backend_id}, {"n_layers", c.n_layers},       {"hidden_dim", c.hidden_dim},
          {"frame_length", c.frame_length}, {"frame_shift", c.frame_shift}, {"seed", c.seed},
          {"include_embedding", c.include_embedding}, {"endpoint", c.endpoint}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  try {
    c.backend_id = j.value("backend_id", c.backend_id);
    c.n_layers = j.value("n_layers", c.n_layers);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.frame_length = j.value("frame_length", c.frame_length);
    c.frame_shift = j.value("frame_shift", c.frame_shift);
    c.seed = j.value("seed", c.seed);
    c.include_embedding = j.value("include_embedding", c.include_embedding);
    c.endpoint = j.value("endpoint", c.endpoint);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_config, fmt::format("encoder section: {}", e.what()));
  }
  c.validate();
  return c;
}

std::size_t HiddenStack::valid_frames() const {
  return static_cast<std::size_t>(std::count(frame_mask.begin(), frame_mask.end(), std::uint8_t{1}));
}

void LoraConfig::validate() const {
  if (rank < 1) throw Error(ErrorCode::invalid_config, "LoRA rank must be >= 1");
  if (!(alpha > 0.0)) throw Error(ErrorCode::invalid_config, "LoRA alpha must be > 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorCode::invalid_config, "LoRA dropout must be in [0, 1)");
  if (targets.empty()) throw Error(ErrorCode::invalid_config, "LoRA needs at least one target kind");
}

nlohmann::json to_json(const LoraConfig& c) {
  return {{"rank", c.rank}, {"alpha", c.alpha}, {"targets", c.targets}, {"dropout", c.dropout}};
}

LoraConfig lora_config_from_json(const nlohmann::json& j) {
  LoraConfig c;
  try {
    c.rank = j.value("rank", c.rank);
    c.alpha = j.value("alpha", c.alpha);
    c.targets = j.value("targets", c.targets);
    c.dropout = j.value("dropout", c.dropout);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_config, fmt::format("lora section: {}", e.what()));
  }
  c.validate();
  return c;
}

LoraAdapter::LoraAdapter(const LoraConfig& config, const std::vector<ProjectionShape>& available, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  for (const auto& target : config_.targets) {
    const bool exists = std::any_of(available.begin(), available.end(), [&](const auto& p) { return p.kind == target; });
    if (!exists) throw Error(ErrorCode::unknown_target, fmt::format("encoder has no '{}' projection", target));
  }
  Engine engine(derive_seed(seed, "lora"));
  for (const auto& p : available) {
    if (std::find(config_.targets.begin(), config_.targets.end(), p.kind) == config_.targets.end()) continue;
    LoraPair pair;
    pair.layer = p.layer;
    pair.kind = p.kind;
    const double bound = 1.0 / std::sqrt(static_cast<double>(p.d_in));
    Matrix a(config_.rank, p.d_in);
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = bound * (2.0 * uniform_unit(engine) - 1.0);
    }
    const auto prefix = fmt::format("lora.layer{}.{}", p.layer, p.kind);
    pair.a = Parameter(prefix + ".A", std::move(a));
    pair.b = Parameter(prefix + ".B", Matrix::Zero(p.d_out, config_.rank));
    pairs_.push_back(std::move(pair));
  }
}

const LoraPair* LoraAdapter::find(int layer, const std::string& kind) const {
  for (const auto& p : pairs_) {
    if (p.layer == layer && p.kind == kind) return &p;
  }
  return nullptr;
}

LoraPair* LoraAdapter::find(int layer, const std::string& kind) {
  return const_cast<LoraPair*>(std::as_const(*this).find(layer, kind));
}

std::size_t LoraAdapter::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : pairs_) n += static_cast<std::size_t>(p.a.value.size() + p.b.value.size());
  return n;
}

void LoraAdapter::zero_grad() {
  for (auto& p : pairs_) {
    p.a.zero_grad();
    p.b.zero_grad();
  }
}

HiddenStack SpeechEncoder::encode_adapted(std::span<const float>, std::size_t, const LoraAdapter&, EncoderTrace*,
                                          Engine*) const {
  throw Error(ErrorCode::unknown_target, fmt::format("encoder '{}' exposes no adaptable projections", config().backend_id));
}

void SpeechEncoder::backward_adapted(const EncoderTrace&, const std::vector<Matrix>&, LoraAdapter&) const {
  throw Error(ErrorCode::unknown_target, fmt::format("encoder '{}' exposes no adaptable projections", config().backend_id));
}

StubEncoder::StubEncoder(EncoderConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto d = static_cast<Eigen::Index>(config_.hidden_dim);
  Engine engine(derive_seed(config_.seed, "stub-encoder"));
  filterbank_ = gaussian(engine, d, config_.frame_length, 3.0 / std::sqrt(static_cast<double>(config_.frame_length)));
  const double stddev = 1.0 / std::sqrt(static_cast<double>(d));
  for (int l = 0; l < config_.n_layers; ++l) {
    Layer layer;
    layer.w_query = gaussian(engine, d, d, stddev);
    layer.b_query = gaussian(engine, d, 1, 0.1);
    layer.w_value = gaussian(engine, d, d, stddev);
    layer.b_value = gaussian(engine, d, 1, 0.1);
    layer.w_output = gaussian(engine, d, d, stddev);
    layers_.push_back(std::move(layer));
  }
}

std::vector<ProjectionShape> StubEncoder::projections() const {
  std::vector<ProjectionShape> out;
  for (int l = 0; l < config_.n_layers; ++l) {
    for (const char* kind : kStubKinds) out.push_back({l, kind, config_.hidden_dim, config_.hidden_dim});
  }
  return out;
}

std::string StubEncoder::parameter_digest() const {
  Sha256 sha;
  sha.update(filterbank_);
  for (const auto& layer : layers_) {
    sha.update(layer.w_query).update(Matrix(layer.b_query)).update(layer.w_value).update(Matrix(layer.b_value));
    sha.update(layer.w_output);
  }
  return sha.hex();
}

HiddenStack StubEncoder::encode(std::span<const float> samples, std::size_t valid_samples) const {
  return run(samples, valid_samples, nullptr, nullptr, nullptr);
}

HiddenStack StubEncoder::encode_adapted(std::span<const float> samples, std::size_t valid_samples,
                                        const LoraAdapter& adapter, EncoderTrace* trace, Engine* dropout_rng) const {
  return run(samples, valid_samples, &adapter, trace, dropout_rng);
}

HiddenStack StubEncoder::run(std::span<const float> samples, std::size_t valid_samples, const LoraAdapter* adapter,
                             EncoderTrace* trace, Engine* dropout_rng) const {
  if (valid_samples > samples.size()) throw Error(ErrorCode::length_mismatch, "valid_samples exceeds buffer length");
  const std::size_t total_frames = config_.frames_for(samples.size());
  const std::size_t valid_frames = config_.frames_for(valid_samples);
  if (valid_frames == 0) {
    throw Error(ErrorCode::input_too_short,
                fmt::format("{} samples is shorter than one {}-sample frame", valid_samples, config_.frame_length));
  }
  const auto tv = static_cast<Eigen::Index>(valid_frames);
  const auto d = static_cast<Eigen::Index>(config_.hidden_dim);

  Matrix frames(tv, config_.frame_length);
  for (Eigen::Index t = 0; t < tv; ++t) {
    const float* start = samples.data() + static_cast<std::size_t>(t) * static_cast<std::size_t>(config_.frame_shift);
    for (int i = 0; i < config_.frame_length; ++i) frames(t, i) = start[i];
  }
  Matrix h = (frames * filterbank_.transpose()).array().tanh().matrix();

  HiddenStack stack;
  stack.frame_mask.assign(total_frames, 0);
  std::fill_n(stack.frame_mask.begin(), valid_frames, std::uint8_t{1});
  const auto emit = [&](const Matrix& state) {
    Matrix padded = Matrix::Zero(static_cast<Eigen::Index>(total_frames), d);
    padded.topRows(tv) = state;
    stack.states.push_back(std::move(padded));
  };
  if (config_.include_embedding) emit(h);

  const double scale = adapter != nullptr ? adapter->config().scale() : 0.0;
  const double dropout = adapter != nullptr ? adapter->config().dropout : 0.0;
  if (trace != nullptr) {
    trace->valid_frames = valid_frames;
    trace->cache.clear();
    trace->dropout_masks.assign(layers_.size() * kStubKinds.size(), Matrix());
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    const int li = static_cast<int>(l);
    const auto pair = [&](const char* kind) { return adapter != nullptr ? adapter->find(li, kind) : nullptr; };
    const auto mask_slot = [&](std::size_t k) {
      return trace != nullptr ? &trace->dropout_masks[l * kStubKinds.size() + k] : nullptr;
    };
    Matrix gate = project(h, layer.w_query, &layer.b_query, pair("query"), scale, dropout, dropout_rng, mask_slot(0))
                      .array()
                      .tanh()
                      .matrix();
    Matrix value = project(h, layer.w_value, &layer.b_value, pair("value"), scale, dropout, dropout_rng, mask_slot(1));
    Matrix gated = gate.cwiseProduct(value);
    Matrix next = h + project(gated, layer.w_output, nullptr, pair("output"), scale, dropout, dropout_rng, mask_slot(2));
    if (trace != nullptr) {
      trace->cache.push_back(std::move(h));
      trace->cache.push_back(std::move(gate));
      trace->cache.push_back(std::move(value));
      trace->cache.push_back(std::move(gated));
    }
    h = std::move(next);
    emit(h);
  }
  return stack;
}

void StubEncoder::backward_adapted(const EncoderTrace& trace, const std::vector<Matrix>& state_grads,
                                   LoraAdapter& adapter) const {
  const auto n_states = static_cast<std::size_t>(config_.n_states());
  if (state_grads.size() != n_states || trace.cache.size() != layers_.size() * kCachePerLayer) {
    throw Error(ErrorCode::length_mismatch, "encoder backward received mismatched state gradients");
  }
  const auto tv = static_cast<Eigen::Index>(trace.valid_frames);
  const std::size_t offset = config_.include_embedding ? 1 : 0;
  const double scale = adapter.config().scale();

  Matrix grad = Matrix::Zero(tv, config_.hidden_dim);
  for (std::size_t l = layers_.size(); l-- > 0;) {
    grad += state_grads[l + offset].topRows(tv);
    const auto& layer = layers_[l];
    const int li = static_cast<int>(l);
    const Matrix& input = trace.cache[l * kCachePerLayer];
    const Matrix& gate = trace.cache[l * kCachePerLayer + 1];
    const Matrix& value = trace.cache[l * kCachePerLayer + 2];
    const Matrix& gated = trace.cache[l * kCachePerLayer + 3];
    const auto& masks = trace.dropout_masks;
    const std::size_t m = l * kStubKinds.size();

    const Matrix grad_gated =
        project_backward(gated, grad, layer.w_output, adapter.find(li, "output"), scale, masks[m + 2]);
    const Matrix grad_value = grad_gated.cwiseProduct(gate);
    const Matrix grad_query =
        grad_gated.cwiseProduct(value).cwiseProduct((1.0 - gate.array().square()).matrix());
    Matrix grad_input = grad;
    grad_input += project_backward(input, grad_query, layer.w_query, adapter.find(li, "query"), scale, masks[m]);
    grad_input += project_backward(input, grad_value, layer.w_value, adapter.find(li, "value"), scale, masks[m + 1]);
    grad = std::move(grad_input);
  }
}

AdaptedEncoder apply_lora(std::shared_ptr<const SpeechEncoder> encoder, const LoraConfig& config, std::uint64_t seed) {
  LoraAdapter adapter(config, encoder->projections(), seed);
  return {std::move(encoder), std::move(adapter)};
}

}  // namespace asu
