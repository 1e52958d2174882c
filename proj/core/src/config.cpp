#include "asu/config.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "asu/error.hpp"

namespace asu {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_absolute() || base.empty()) return path;
  return base / path;
}

BackendSpec backend_from_json(const nlohmann::json& s) {
  BackendSpec b;
  b.id = s.value("backend", b.id);
  b.endpoint = s.value("endpoint", b.endpoint);
  b.timeout_seconds = s.value("timeout_seconds", b.timeout_seconds);
  return b;
}

nlohmann::json section(const nlohmann::json& j, const char* name) {
  if (!j.contains(name) || j[name].is_null()) return nlohmann::json::object();
  if (!j[name].is_object()) throw Error(ErrorCode::invalid_config, fmt::format("section '{}' must be an object", name));
  return j[name];
}

}  // namespace

std::vector<double> default_ratio_grid() { return {0.05, 0.10, 0.20, 0.50, 1.00}; }

void ExperimentConfig::validate() const {
  if (regimes.empty()) throw Error(ErrorCode::invalid_config, "experiment needs at least one regime");
  if (seeds.empty()) throw Error(ErrorCode::invalid_config, "experiment needs at least one seed");
  if (ratios.empty()) throw Error(ErrorCode::invalid_config, "experiment needs at least one ratio");
  for (double r : ratios) {
    if (!(r > 0.0 && r <= 1.0)) throw Error(ErrorCode::ratio_out_of_range, fmt::format("ratio {} not in (0, 1]", r));
  }
  if (!(synthetic_val_fraction > 0.0 && synthetic_val_fraction < 1.0)) {
    throw Error(ErrorCode::invalid_config, "synthetic_val_fraction must lie in (0, 1)");
  }
  if (workers == 0) throw Error(ErrorCode::invalid_config, "workers must be positive");
}

TrainConfig AppConfig::train_config(Regime regime) const {
  TrainConfig c = TrainConfig::defaults(task.kind(), regime);
  nlohmann::json flat = train;
  flat.erase("regimes");
  c = train_config_from_json(flat, c);
  if (train.contains("regimes") && train["regimes"].contains(std::string(to_string(regime)))) {
    c = train_config_from_json(train["regimes"][std::string(to_string(regime))], c);
  }
  c.task_kind = task.kind();
  c.regime = regime;
  return c;
}

HeadConfig AppConfig::resolved_head() const {
  HeadConfig h = head;
  h.n_classes = static_cast<int>(task.labels().size());
  h.input_dim = encoder.hidden_dim;
  return h;
}

AppConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw Error(ErrorCode::invalid_config, "config must be a JSON object");
  AppConfig c;
  try {
    c.task = task_from_json(section(j, "task").empty() ? nlohmann::json{{"kind", "emotion"}} : section(j, "task"));

    const auto gen = section(j, "generation");
    c.generation.max_output_tokens = gen.value("max_output_tokens", c.generation.max_output_tokens);
    c.generation.temperature = gen.value("temperature", c.generation.temperature);
    c.generation.seed = gen.value("seed", c.generation.seed);
    c.generation.char_cap = gen.value("char_cap", c.generation.char_cap);
    c.generation.overgeneration_factor = gen.value("overgeneration_factor", c.generation.overgeneration_factor);
    c.generation.backend_retries = gen.value("backend_retries", c.generation.backend_retries);
    c.generation.workers = gen.value("workers", c.generation.workers);
    c.generation.validate();
    c.llm = backend_from_json(gen);

    const auto tts = section(j, "tts");
    c.tts.backend = backend_from_json(tts);
    if (tts.contains("speaker_pool")) c.tts.speaker_pool = resolve(base_dir, tts["speaker_pool"].get<std::string>());
    c.tts.workers = tts.value("workers", c.tts.workers);
    c.tts.retries = tts.value("retries", c.tts.retries);

    const auto corpus = section(j, "corpus");
    if (corpus.contains("dataset")) c.corpus.dataset = parse_dataset_kind(corpus["dataset"].get<std::string>());
    if (corpus.contains("source")) c.corpus.source = resolve(base_dir, corpus["source"].get<std::string>());
    if (corpus.contains("manifest")) c.corpus.manifest = resolve(base_dir, corpus["manifest"].get<std::string>());
    if (corpus.contains("synthetic")) c.corpus.synthetic = resolve(base_dir, corpus["synthetic"].get<std::string>());
    c.corpus.ingest.merge_excited = corpus.value("merge_excited", c.corpus.ingest.merge_excited);
    if (corpus.contains("intent_phrases")) {
      c.corpus.ingest.intent_phrases = corpus["intent_phrases"].get<std::map<std::string, std::string>>();
    }
    if (corpus.contains("labels")) c.corpus.ingest.labels = corpus["labels"].get<std::vector<std::string>>();

    if (j.contains("encoder")) c.encoder = encoder_config_from_json(j["encoder"]);
    c.encoder.validate();

    const auto lora = section(j, "lora");
    if (!lora.empty() && lora.value("enabled", true)) {
      auto body = lora;
      body.erase("enabled");
      c.lora = lora_config_from_json(body);
    }

    if (j.contains("head")) c.head = head_config_from_json(j["head"]);
    c.train = section(j, "train");

    const auto exp = section(j, "experiment");
    if (exp.contains("regimes")) {
      c.experiment.regimes.clear();
      for (const auto& r : exp["regimes"]) c.experiment.regimes.push_back(parse_regime(r.get<std::string>()));
    }
    c.experiment.ratios = exp.value("ratios", c.experiment.ratios);
    c.experiment.seeds = exp.value("seeds", c.experiment.seeds);
    if (exp.contains("folds")) c.experiment.folds = exp["folds"].get<std::vector<std::size_t>>();
    if (exp.contains("output_dir")) c.experiment.output_dir = resolve(base_dir, exp["output_dir"].get<std::string>());
    c.experiment.workers = exp.value("workers", c.experiment.workers);
    c.experiment.synthetic_val_fraction = exp.value("synthetic_val_fraction", c.experiment.synthetic_val_fraction);
    c.experiment.pooled = exp.value("pooled", c.experiment.pooled);
    c.experiment.validate();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::invalid_config, e.what());
  }
  for (auto r : c.experiment.regimes) c.train_config(r);
  return c;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, fmt::format("cannot read config {}", path.string()));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, fmt::format("{}: {}", path.string(), e.what()));
  }
  return config_from_json(j, std::filesystem::absolute(path).parent_path());
}

nlohmann::json experiment_fingerprint(const AppConfig& c) {
  nlohmann::json regimes = nlohmann::json::array();
  nlohmann::json train = nlohmann::json::object();
  for (auto r : c.experiment.regimes) {
    regimes.push_back(to_string(r));
    auto t = to_json(c.train_config(r));
    t.erase("workers");
    t.erase("init_checkpoint");
    train[std::string(to_string(r))] = t;
  }
  return {{"task", task_to_json(c.task)},
          {"dataset", to_string(c.corpus.dataset)},
          {"encoder", to_json(c.encoder)},
          {"lora", c.lora ? to_json(*c.lora) : nlohmann::json()},
          {"head", to_json(c.resolved_head())},
          {"train", train},
          {"regimes", regimes},
          {"ratios", c.experiment.ratios},
          {"seeds", c.experiment.seeds},
          {"synthetic_val_fraction", c.experiment.synthetic_val_fraction}};
}

}  // namespace asu
