#include "asu/trainer.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "asu/corpus.hpp"
#include "asu/error.hpp"
#include "asu/parallel.hpp"
#include "asu/rng.hpp"

namespace asu {

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::real_baseline: return "real_baseline";
    case Regime::synthetic_zero_shot: return "synthetic_zero_shot";
    case Regime::low_resource: return "low_resource";
    case Regime::synthetic_init_low_resource: return "synthetic_init_low_resource";
  }
  return "unknown";
}

Regime parse_regime(std::string_view text) {
  for (auto r : {Regime::real_baseline, Regime::synthetic_zero_shot, Regime::low_resource,
                 Regime::synthetic_init_low_resource}) {
    if (text == to_string(r)) return r;
  }
  throw Error(ErrorCode::invalid_config, fmt::format("unknown regime '{}'", text));
}

bool uses_ratio(Regime regime) {
  return regime == Regime::low_resource || regime == Regime::synthetic_init_low_resource;
}

TrainConfig TrainConfig::defaults(TaskKind task, Regime regime) {
  TrainConfig c;
  c.task_kind = task;
  c.regime = regime;
  c.batch_size = 64;
  if (task == TaskKind::emotion) {
    c.learning_rate = uses_ratio(regime) ? 1e-4 : 5e-4;
    c.max_epochs = 30;
  } else {
    c.learning_rate = 5e-3;
    c.max_epochs = 50;
  }
  return c;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw Error(ErrorCode::invalid_config, "batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::invalid_config, "learning_rate must be positive and finite");
  }
  if (max_epochs < 0) throw Error(ErrorCode::invalid_config, "max_epochs must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw Error(ErrorCode::invalid_config, "Adam moments must lie in [0, 1) and epsilon must be positive");
  }
  if (regime == Regime::synthetic_init_low_resource && !init_checkpoint) {
    throw Error(ErrorCode::invalid_config, "synthetic_init_low_resource requires init_checkpoint");
  }
}

TrainConfig train_config_from_json(const nlohmann::json& s, TrainConfig c) {
  try {
    if (s.contains("task_kind")) c.task_kind = parse_task_kind(s["task_kind"].get<std::string>());
    if (s.contains("regime")) c.regime = parse_regime(s["regime"].get<std::string>());
    if (s.contains("batch_size")) c.batch_size = s["batch_size"].get<std::size_t>();
    if (s.contains("learning_rate")) c.learning_rate = s["learning_rate"].get<double>();
    if (s.contains("max_epochs")) c.max_epochs = s["max_epochs"].get<int>();
    if (s.contains("seed")) c.seed = s["seed"].get<std::uint64_t>();
    if (s.contains("init_checkpoint") && !s["init_checkpoint"].is_null()) {
      c.init_checkpoint = s["init_checkpoint"].get<std::string>();
    }
    if (s.contains("beta1")) c.beta1 = s["beta1"].get<double>();
    if (s.contains("beta2")) c.beta2 = s["beta2"].get<double>();
    if (s.contains("epsilon")) c.epsilon = s["epsilon"].get<double>();
    if (s.contains("cache_encoder_outputs")) c.cache_encoder_outputs = s["cache_encoder_outputs"].get<bool>();
    if (s.contains("workers")) c.workers = s["workers"].get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_config, fmt::format("train section: {}", e.what()));
  }
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"task_kind", to_string(c.task_kind)},
          {"regime", to_string(c.regime)},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"max_epochs", c.max_epochs},
          {"seed", c.seed},
          {"init_checkpoint", c.init_checkpoint ? nlohmann::json(c.init_checkpoint->string()) : nlohmann::json()},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"cache_encoder_outputs", c.cache_encoder_outputs},
          {"workers", c.workers}};
}

Adam::Adam(std::vector<Parameter*> params, double lr, double beta1, double beta2, double epsilon)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  for (auto* p : params_) {
    m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = *params_[i];
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

Dataset load_dataset(const Manifest& manifest, const TaskSpec& task) {
  if (manifest.empty()) throw Error(ErrorCode::empty_manifest, "manifest has no records");
  if (manifest.task() != task.kind()) {
    throw Error(ErrorCode::label_mismatch, fmt::format("manifest is for {}, model for {}", to_string(manifest.task()),
                                                       to_string(task.kind())));
  }
  Dataset d;
  for (const auto& r : manifest.records()) {
    if (!task.contains(r.label)) {
      throw Error(ErrorCode::label_mismatch, fmt::format("record '{}' has label '{}' outside the task", r.utt_id, r.label));
    }
  }
  d.audio.resize(manifest.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& r = manifest.records()[i];
    d.audio[i] = standardize_audio(manifest.resolve_audio(r), task.kind());
    d.labels.push_back(task.label_index(r.label));
    d.ids.push_back(r.utt_id);
  }
  return d;
}

double primary_metric(const Metrics& metrics, TaskKind task) {
  return task == TaskKind::emotion ? metrics.uar : metrics.macro_f1;
}

nlohmann::json to_json(const EpochRecord& r) {
  return {{"epoch", r.epoch},
          {"train_loss", std::isfinite(r.train_loss) ? nlohmann::json(r.train_loss) : nlohmann::json()},
          {"val_metric", r.val_metric},
          {"improved", r.improved}};
}

namespace {

void check_labels(const Dataset& data, std::size_t n_classes, std::string_view what) {
  if (data.size() == 0) throw Error(ErrorCode::empty_manifest, fmt::format("{} set is empty", what));
  for (auto l : data.labels) {
    if (l >= n_classes) {
      throw Error(ErrorCode::label_mismatch, fmt::format("{} label {} outside {} classes", what, l, n_classes));
    }
  }
}

std::vector<HiddenStack> encode_all(const AsuModel& model, const Dataset& data, std::size_t workers) {
  std::vector<HiddenStack> out(data.size());
  parallel_for(data.size(), workers, [&](std::size_t i) { out[i] = model.encode(data.audio[i], data.audio[i].size()); });
  return out;
}

Metrics metrics_from_stacks(const AsuModel& model, const std::vector<HiddenStack>& stacks, const Dataset& data,
                            std::size_t n_classes, std::size_t workers) {
  std::vector<std::size_t> preds(stacks.size());
  parallel_for(stacks.size(), workers, [&](std::size_t i) { preds[i] = predict(model.logits_from_stack(stacks[i])); });
  return compute_metrics(preds, data.labels, n_classes);
}

}  // namespace

std::vector<std::size_t> predict_all(const AsuModel& model, const Dataset& data, std::size_t workers) {
  std::vector<std::size_t> preds(data.size());
  parallel_for(data.size(), workers,
               [&](std::size_t i) { preds[i] = predict(model.logits(data.audio[i], data.audio[i].size())); });
  return preds;
}

Metrics evaluate(const AsuModel& model, const Dataset& data, std::size_t n_classes, std::size_t workers) {
  check_labels(data, n_classes, "evaluation");
  return compute_metrics(predict_all(model, data, workers), data.labels, n_classes);
}

Metrics evaluate(const AsuModel& model, const Manifest& manifest, const TaskSpec& task, std::size_t workers) {
  return evaluate(model, load_dataset(manifest, task), task.labels().size(), workers);
}

void init_from_checkpoint(AsuModel& model, const Checkpoint& checkpoint, const TaskSpec& task) {
  check_compatible(checkpoint, model, task);
  model.restore(checkpoint.tensors);
}

TrainResult train(AsuModel& model, const TaskSpec& task, const Dataset& train_set, const Dataset& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const std::size_t n_classes = task.labels().size();
  if (static_cast<std::size_t>(model.head_config().n_classes) != n_classes) {
    throw Error(ErrorCode::label_mismatch,
                fmt::format("model has {} classes, task has {}", model.head_config().n_classes, n_classes));
  }
  check_labels(train_set, n_classes, "training");
  check_labels(val_set, n_classes, "validation");

  const bool cached = config.cache_encoder_outputs && !model.has_lora();
  std::vector<HiddenStack> train_stacks;
  std::vector<HiddenStack> val_stacks;
  if (cached) {
    train_stacks = encode_all(model, train_set, config.workers);
    val_stacks = encode_all(model, val_set, config.workers);
  }
  auto validate = [&] {
    const Metrics m = cached ? metrics_from_stacks(model, val_stacks, val_set, n_classes, config.workers)
                             : evaluate(model, val_set, n_classes, config.workers);
    return primary_metric(m, task.kind());
  };

  TrainResult result;
  EpochRecord first{0, std::numeric_limits<double>::quiet_NaN(), validate(), true};
  result.history.push_back(first);
  if (on_epoch) on_epoch(first);
  double best = first.val_metric;
  int best_epoch = 0;
  auto best_state = model.snapshot();

  Adam optimizer(model.trainable_state(), config.learning_rate, config.beta1, config.beta2, config.epsilon);
  Engine shuffle_rng(derive_seed(config.seed, "shuffle"));
  Engine dropout_rng(derive_seed(config.seed, "dropout"));
  std::vector<std::size_t> order(train_set.size());

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(std::span<std::size_t>(order), shuffle_rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      model.zero_grad();
      const double weight = 1.0 / static_cast<double>(idx.size());
      double batch_loss = 0.0;
      if (cached) {
        for (auto i : idx) batch_loss += model.accumulate_from_stack(train_stacks[i], train_set.labels[i], weight);
      } else {
        for (auto i : idx) {
          batch_loss += model.accumulate(train_set.audio[i], train_set.audio[i].size(), train_set.labels[i], weight,
                                         &dropout_rng);
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw Error(ErrorCode::divergence, fmt::format("non-finite loss at epoch {} batch {}", epoch,
                                                       start / config.batch_size));
      }
      loss_sum += batch_loss;
      optimizer.step();
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(order.size()), validate(), false};
    if (rec.val_metric > best) {
      best = rec.val_metric;
      best_epoch = epoch;
      best_state = model.snapshot();
      rec.improved = true;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  model.restore(best_state);
  result.checkpoint = make_checkpoint(model, task, best, best_epoch, config.seed);
  return result;
}

TrainResult train(AsuModel& model, const TaskSpec& task, const Manifest& train_manifest,
                  const Manifest& val_manifest, const TrainConfig& config, const EpochCallback& on_epoch) {
  return train(model, task, load_dataset(train_manifest, task), load_dataset(val_manifest, task), config, on_epoch);
}

}  // namespace asu
