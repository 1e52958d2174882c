#include "asu/downstream.hpp"

#include <cmath>

#include <fmt/format.h>

#include "asu/error.hpp"
#include "asu/rng.hpp"

namespace asu {

namespace {

Matrix uniform_init(Engine& engine, Eigen::Index rows, Eigen::Index cols, double bound) {
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = bound * (2.0 * uniform_unit(engine) - 1.0);
  }
  return m;
}

Vector softmax(const Vector& x) {
  const double peak = x.maxCoeff();
  Vector e = (x.array() - peak).exp().matrix();
  return e / e.sum();
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix relu_grad(const Matrix& grad, const Matrix& pre) {
  return grad.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
}

}  // namespace

LayerWeights::LayerWeights(std::size_t n_layers)
    : raw_("layer_weights.raw_logits", Matrix::Zero(static_cast<Eigen::Index>(n_layers), 1)) {}

LayerWeights::LayerWeights(const Vector& raw_logits) : raw_("layer_weights.raw_logits", Matrix(raw_logits)) {}

Vector LayerWeights::normalized() const { return softmax(raw_.value.col(0)); }

Matrix weighted_layer_average(const HiddenStack& stack, const LayerWeights& weights) {
  if (stack.layers() != weights.size() || stack.layers() == 0) {
    throw Error(ErrorCode::length_mismatch,
                fmt::format("{} layer weights for a stack of {} layers", weights.size(), stack.layers()));
  }
  const Vector w = weights.normalized();
  Matrix out = w(0) * stack.states[0];
  for (std::size_t l = 1; l < stack.layers(); ++l) out.noalias() += w(static_cast<Eigen::Index>(l)) * stack.states[l];
  return out;
}

std::vector<Matrix> weighted_layer_average_backward(const HiddenStack& stack, LayerWeights& weights,
                                                    const Matrix& grad_features) {
  const Vector w = weights.normalized();
  const auto n = static_cast<Eigen::Index>(stack.layers());
  Vector grad_w(n);
  std::vector<Matrix> grad_states;
  grad_states.reserve(stack.layers());
  for (Eigen::Index l = 0; l < n; ++l) {
    grad_w(l) = grad_features.cwiseProduct(stack.states[static_cast<std::size_t>(l)]).sum();
    grad_states.push_back(w(l) * grad_features);
  }
  // Softmax Jacobian: d raw_k = w_k (g_k - sum_j w_j g_j).
  weights.raw().grad.col(0) += w.cwiseProduct((grad_w.array() - w.dot(grad_w)).matrix());
  return grad_states;
}

void HeadConfig::validate() const {
  if (conv_kernel != 1) throw Error(ErrorCode::invalid_config, "convolutions are pointwise; conv_kernel must be 1");
  if (n_classes < 2) throw Error(ErrorCode::invalid_config, "n_classes must be >= 2");
  if (input_dim < 1 || conv_channels < 1 || fc_hidden < 1) {
    throw Error(ErrorCode::invalid_config, "head dimensions must be >= 1");
  }
  if (pooled_dim != conv_channels) {
    throw Error(ErrorCode::invalid_config, "pooled_dim must equal conv_channels (global average pooling)");
  }
}

nlohmann::json to_json(const HeadConfig& c) {
  return {{"input_dim", c.input_dim},   {"conv_channels", c.conv_channels}, {"conv_kernel", c.conv_kernel},
          {"pooled_dim", c.pooled_dim}, {"fc_hidden", c.fc_hidden},         {"n_classes", c.n_classes}};
}

HeadConfig head_config_from_json(const nlohmann::json& j) {
  HeadConfig c;
  try {
    c.input_dim = j.value("input_dim", c.input_dim);
    c.conv_channels = j.value("conv_channels", c.conv_channels);
    c.conv_kernel = j.value("conv_kernel", c.conv_kernel);
    c.pooled_dim = j.value("pooled_dim", c.conv_channels);
    c.fc_hidden = j.value("fc_hidden", c.fc_hidden);
    c.n_classes = j.value("n_classes", c.n_classes);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_config, fmt::format("head section: {}", e.what()));
  }
  c.validate();
  return c;
}

ClassifierHead::ClassifierHead(const HeadConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Engine engine(derive_seed(seed, "head"));
  const auto layer = [&](const std::string& name, int out, int in, Parameter& w, Parameter& b) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    w = Parameter(name + ".weight", uniform_init(engine, out, in, bound));
    b = Parameter(name + ".bias", uniform_init(engine, out, 1, bound));
  };
  layer("head.conv1", config_.conv_channels, config_.input_dim, conv1_weight, conv1_bias);
  layer("head.conv2", config_.conv_channels, config_.conv_channels, conv2_weight, conv2_bias);
  layer("head.fc1", config_.fc_hidden, config_.pooled_dim, fc1_weight, fc1_bias);
  layer("head.fc2", config_.n_classes, config_.fc_hidden, fc2_weight, fc2_bias);
}

std::vector<Parameter*> ClassifierHead::parameters() {
  return {&conv1_weight, &conv1_bias, &conv2_weight, &conv2_bias, &fc1_weight, &fc1_bias, &fc2_weight, &fc2_bias};
}

std::vector<const Parameter*> ClassifierHead::parameters() const {
  return {&conv1_weight, &conv1_bias, &conv2_weight, &conv2_bias, &fc1_weight, &fc1_bias, &fc2_weight, &fc2_bias};
}

Vector ClassifierHead::forward(const Matrix& features, std::span<const std::uint8_t> mask, HeadTrace* trace) const {
  if (features.cols() != config_.input_dim) {
    throw Error(ErrorCode::length_mismatch,
                fmt::format("head expects {} input channels, got {}", config_.input_dim, features.cols()));
  }
  if (static_cast<Eigen::Index>(mask.size()) != features.rows()) {
    throw Error(ErrorCode::length_mismatch, "frame mask length differs from frame count");
  }
  std::vector<Eigen::Index> rows;
  for (Eigen::Index t = 0; t < features.rows(); ++t) {
    if (mask[static_cast<std::size_t>(t)] != 0) rows.push_back(t);
  }
  if (rows.empty()) throw Error(ErrorCode::empty_frame, "frame mask admits no frames");

  Matrix input(static_cast<Eigen::Index>(rows.size()), features.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) input.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);

  Matrix conv1_pre = input * conv1_weight.value.transpose();
  conv1_pre.rowwise() += conv1_bias.value.col(0).transpose();
  Matrix conv1_out = relu(conv1_pre);
  Matrix conv2_pre = conv1_out * conv2_weight.value.transpose();
  conv2_pre.rowwise() += conv2_bias.value.col(0).transpose();
  Matrix conv2_out = relu(conv2_pre);
  Vector pooled = conv2_out.colwise().mean().transpose();
  Vector fc1_pre = fc1_weight.value * pooled + fc1_bias.value.col(0);
  Vector fc1_out = fc1_pre.cwiseMax(0.0);
  Vector logits = fc2_weight.value * fc1_out + fc2_bias.value.col(0);

  if (trace != nullptr) {
    trace->rows = std::move(rows);
    trace->input = std::move(input);
    trace->conv1_pre = std::move(conv1_pre);
    trace->conv1_out = std::move(conv1_out);
    trace->conv2_pre = std::move(conv2_pre);
    trace->conv2_out = std::move(conv2_out);
    trace->pooled = std::move(pooled);
    trace->fc1_pre = std::move(fc1_pre);
    trace->fc1_out = std::move(fc1_out);
    trace->total_frames = features.rows();
  }
  return logits;
}

Matrix ClassifierHead::backward(const HeadTrace& trace, const Vector& grad_logits) {
  fc2_weight.grad.noalias() += grad_logits * trace.fc1_out.transpose();
  fc2_bias.grad.col(0) += grad_logits;
  const Vector grad_fc1_out = fc2_weight.value.transpose() * grad_logits;
  const Vector grad_fc1_pre = relu_grad(grad_fc1_out, trace.fc1_pre);
  fc1_weight.grad.noalias() += grad_fc1_pre * trace.pooled.transpose();
  fc1_bias.grad.col(0) += grad_fc1_pre;
  const Vector grad_pooled = fc1_weight.value.transpose() * grad_fc1_pre;

  const auto n_valid = static_cast<double>(trace.input.rows());
  const Matrix grad_conv2_out = (grad_pooled / n_valid).transpose().replicate(trace.input.rows(), 1);
  const Matrix grad_conv2_pre = relu_grad(grad_conv2_out, trace.conv2_pre);
  conv2_weight.grad.noalias() += grad_conv2_pre.transpose() * trace.conv1_out;
  conv2_bias.grad.col(0) += grad_conv2_pre.colwise().sum().transpose();
  const Matrix grad_conv1_pre = relu_grad(grad_conv2_pre * conv2_weight.value, trace.conv1_pre);
  conv1_weight.grad.noalias() += grad_conv1_pre.transpose() * trace.input;
  conv1_bias.grad.col(0) += grad_conv1_pre.colwise().sum().transpose();
  const Matrix grad_input = grad_conv1_pre * conv1_weight.value;

  Matrix grad_features = Matrix::Zero(trace.total_frames, trace.input.cols());
  for (std::size_t i = 0; i < trace.rows.size(); ++i) {
    grad_features.row(trace.rows[i]) = grad_input.row(static_cast<Eigen::Index>(i));
  }
  return grad_features;
}

Vector forward_head(const Matrix& features, std::span<const std::uint8_t> mask, const ClassifierHead& head) {
  return head.forward(features, mask);
}

std::size_t predict(const Vector& logits) {
  if (logits.size() == 0 || !logits.allFinite()) {
    throw Error(ErrorCode::non_finite_logits, "logits are empty or contain non-finite values");
  }
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < logits.size(); ++i) {
    if (logits(i) > logits(best)) best = i;
  }
  return static_cast<std::size_t>(best);
}

double softmax_cross_entropy(const Vector& logits, std::size_t label, Vector* grad) {
  const auto idx = static_cast<Eigen::Index>(label);
  if (idx >= logits.size()) throw Error(ErrorCode::out_of_range, "label index outside logits");
  const double peak = logits.maxCoeff();
  const Vector shifted = logits.array() - peak;
  const double log_sum = std::log(shifted.array().exp().sum());
  if (grad != nullptr) {
    *grad = (shifted.array() - log_sum).exp().matrix();
    (*grad)(idx) -= 1.0;
  }
  return log_sum - shifted(idx);
}

}  // namespace asu
