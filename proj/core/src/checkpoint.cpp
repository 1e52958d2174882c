#include "asu/checkpoint.hpp"

#include <fstream>

#include <fmt/format.h>

#include "asu/error.hpp"

namespace asu {

namespace {

constexpr const char* kFormat = "asu-checkpoint";

nlohmann::json tensor_to_json(const NamedTensor& t) {
  nlohmann::json data = nlohmann::json::array();
  // Row-major so the file reads naturally.
  for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.value.cols(); ++c) data.push_back(t.value(r, c));
  }
  return {{"name", t.name}, {"rows", t.value.rows()}, {"cols", t.value.cols()}, {"data", std::move(data)}};
}

NamedTensor tensor_from_json(const nlohmann::json& j) {
  NamedTensor t;
  t.name = j.at("name").get<std::string>();
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows * cols)) {
    throw Error(ErrorCode::parse, fmt::format("tensor '{}' has {} values for {}x{}", t.name, data.size(), rows, cols));
  }
  t.value.resize(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) t.value(r, c) = data[k++].get<double>();
  }
  return t;
}

[[noreturn]] void mismatch(std::string_view component, const std::string& detail) {
  throw Error(ErrorCode::incompatible_checkpoint, fmt::format("{} mismatch: {}", component, detail));
}

}  // namespace

Checkpoint make_checkpoint(const AsuModel& model, const TaskSpec& task, double best_val_metric, int epoch,
                           std::uint64_t seed) {
  Checkpoint c;
  c.task = task.kind();
  c.labels = task.labels();
  c.encoder = model.encoder().config();
  c.encoder_digest = model.base_digest();
  c.head = model.head_config();
  c.lora = model.lora_config();
  c.config_digest = model.config_digest();
  c.best_val_metric = best_val_metric;
  c.epoch = epoch;
  c.seed = seed;
  c.tensors = model.snapshot();
  return c;
}

nlohmann::json to_json(const Checkpoint& c) {
  nlohmann::json j;
  j["format"] = kFormat;
  j["version"] = kCheckpointVersion;
  j["task"] = to_string(c.task);
  j["labels"] = c.labels;
  j["encoder"] = to_json(c.encoder);
  j["encoder_digest"] = c.encoder_digest;
  j["head"] = to_json(c.head);
  j["lora"] = c.lora ? to_json(*c.lora) : nlohmann::json(nullptr);
  j["config_digest"] = c.config_digest;
  j["best_val_metric"] = c.best_val_metric;
  j["epoch"] = c.epoch;
  j["seed"] = c.seed;
  auto tensors = nlohmann::json::array();
  for (const auto& t : c.tensors) tensors.push_back(tensor_to_json(t));
  j["tensors"] = std::move(tensors);
  return j;
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kFormat) throw Error(ErrorCode::parse, "not a checkpoint file");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw Error(ErrorCode::incompatible_checkpoint, fmt::format("unsupported version {}", j.at("version").dump()));
    }
    Checkpoint c;
    c.task = parse_task_kind(j.at("task").get<std::string>());
    c.labels = j.at("labels").get<std::vector<std::string>>();
    c.encoder = encoder_config_from_json(j.at("encoder"));
    c.encoder_digest = j.at("encoder_digest").get<std::string>();
    c.head = head_config_from_json(j.at("head"));
    if (!j.at("lora").is_null()) c.lora = lora_config_from_json(j.at("lora"));
    c.config_digest = j.at("config_digest").get<std::string>();
    c.best_val_metric = j.at("best_val_metric").get<double>();
    c.epoch = j.at("epoch").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& t : j.at("tensors")) c.tensors.push_back(tensor_from_json(t));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, fmt::format("malformed checkpoint: {}", e.what()));
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, fmt::format("cannot write {}", tmp.string()));
    out << to_json(checkpoint).dump() << '\n';
    if (!out) throw Error(ErrorCode::io, fmt::format("write failed for {}", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, fmt::format("cannot read checkpoint {}", path.string()));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, fmt::format("{}: {}", path.string(), e.what()));
  }
  return checkpoint_from_json(j);
}

void check_compatible(const Checkpoint& c, const AsuModel& model, const TaskSpec& task) {
  if (c.task != task.kind()) {
    mismatch("task", fmt::format("checkpoint {} vs model {}", to_string(c.task), to_string(task.kind())));
  }
  if (c.labels.size() != task.labels().size()) {
    mismatch("n_classes", fmt::format("checkpoint {} vs model {}", c.labels.size(), task.labels().size()));
  }
  if (c.labels != task.labels()) mismatch("labels", "same count, different label order or names");
  if (to_json(c.encoder) != to_json(model.encoder().config())) {
    mismatch("encoder", fmt::format("checkpoint {} vs model {}", to_json(c.encoder).dump(),
                                    to_json(model.encoder().config()).dump()));
  }
  if (c.encoder_digest != model.base_digest()) mismatch("encoder weights", "base parameter digests differ");
  if (to_json(c.head) != to_json(model.head_config())) {
    mismatch("head", fmt::format("checkpoint {} vs model {}", to_json(c.head).dump(), to_json(model.head_config()).dump()));
  }
  const auto lora_json = [](const std::optional<LoraConfig>& l) { return l ? to_json(*l) : nlohmann::json(nullptr); };
  if (lora_json(c.lora) != lora_json(model.lora_config())) {
    mismatch("lora", fmt::format("checkpoint {} vs model {}", lora_json(c.lora).dump(),
                                 lora_json(model.lora_config()).dump()));
  }
}

}  // namespace asu
