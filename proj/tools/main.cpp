#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "asu/backends.hpp"
#include "asu/checkpoint.hpp"
#include "asu/config.hpp"
#include "asu/corpus.hpp"
#include "asu/error.hpp"
#include "asu/experiments.hpp"
#include "asu/rng.hpp"
#include "asu/speechsynth.hpp"
#include "asu/textgen.hpp"
#include "asu/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw asu::Error(asu::ErrorCode::io, fmt::format("cannot write {}", path.string()));
  out << j.dump(2) << '\n';
}

json metrics_json(const asu::Metrics& m) {
  json confusion = json::array();
  for (Eigen::Index i = 0; i < m.confusion.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.confusion.cols(); ++j) row.push_back(m.confusion(i, j));
    confusion.push_back(row);
  }
  return {{"uar", m.uar}, {"macro_f1", m.macro_f1}, {"accuracy", m.accuracy}, {"n", m.n}, {"confusion", confusion}};
}

asu::Manifest real_manifest(const asu::AppConfig& cfg) {
  if (cfg.corpus.manifest) return asu::read_manifest(*cfg.corpus.manifest);
  return asu::ingest(cfg.corpus.dataset, cfg.corpus.source, cfg.corpus.ingest).manifest;
}

struct GenerateText {
  std::string config;
  std::string backend = "stub";
  std::string endpoint;
  std::uint64_t seed = 0;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("generate-text", "Generate label-guided spoken texts");
    c->add_option("--task", config, "Config file with task and generation sections")->required()->check(CLI::ExistingFile);
    c->add_option("--backend", backend, "LLM backend: stub or http");
    c->add_option("--endpoint", endpoint, "HTTP backend endpoint");
    c->add_option("--seed", seed, "Generation seed");
    c->add_option("--out", out, "Output JSONL")->required();
    c->callback([this] { run(); });
  }

  void run() const {
    auto cfg = asu::load_config(config);
    cfg.generation.seed = seed;
    asu::BackendSpec spec = cfg.llm;
    spec.id = backend;
    if (!endpoint.empty()) spec.endpoint = endpoint;
    auto llm = asu::make_llm_backend(spec);
    const auto plan = asu::plan_generation(cfg.task);
    try {
      const auto texts = asu::generate_texts(cfg.task, plan, *llm, cfg.generation);
      asu::write_spoken_texts(out, texts);
      fmt::print("{} texts for {} labels -> {}\n", texts.size(), plan.items.size(), out);
    } catch (const asu::QuotaUnmetError& e) {
      for (const auto& [label, missing] : e.shortfall()) fmt::print(stderr, "short {} for '{}'\n", missing, label);
      throw;
    }
  }
};

struct Synthesize {
  std::string texts;
  std::string speakers;
  std::string backend = "stub";
  std::string endpoint;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::string task = "emotion";
  std::size_t workers = 1;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("synthesize", "Render texts to speech with sampled speakers");
    c->add_option("--texts", texts, "Spoken-text JSONL")->required()->check(CLI::ExistingFile);
    c->add_option("--speakers", speakers, "Speaker embedding pool (JSON or JSONL)")->required()->check(CLI::ExistingFile);
    c->add_option("--backend", backend, "TTS backend: stub or http");
    c->add_option("--endpoint", endpoint, "HTTP backend endpoint");
    c->add_option("--seed", seed, "Speaker sampling seed");
    c->add_option("--out-dir", out_dir, "Output directory")->required();
    c->add_option("--task", task, "Task kind written to the manifest: emotion or intent");
    c->add_option("--workers", workers, "Concurrent synthesis requests");
    c->callback([this] { run(); });
  }

  void run() const {
    auto tts = asu::make_tts_backend({backend, endpoint});
    const auto pool = asu::load_speaker_pool(speakers);
    asu::SynthesisOptions opts;
    opts.seed = seed;
    opts.out_dir = out_dir;
    opts.task = asu::parse_task_kind(task);
    opts.workers = workers;
    const auto result = asu::synthesize_corpus(asu::read_spoken_texts(texts), pool, *tts, opts);
    fmt::print("{} utterances -> {}\n", result.manifest.size(), (fs::path(out_dir) / "manifest.jsonl").string());
  }
};

struct RandomSpeakers {
  std::size_t count = 0;
  std::size_t dim = asu::kXVectorDim;
  std::uint64_t seed = 0;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("random-speakers", "Write a pool of random unit-norm speaker embeddings");
    c->add_option("--count", count, "Number of speakers")->required()->check(CLI::PositiveNumber);
    c->add_option("--dim", dim, "Embedding dimension")->check(CLI::PositiveNumber);
    c->add_option("--seed", seed, "Seed");
    c->add_option("--out", out, "Output JSONL")->required();
    c->callback([this] { run(); });
  }

  void run() const {
    asu::Engine rng(asu::derive_seed(seed, "speakers"));
    std::ofstream file(out);
    for (std::size_t s = 0; s < count; ++s) {
      std::vector<double> v(dim);
      double norm = 0.0;
      for (auto& x : v) {
        x = asu::standard_normal(rng);
        norm += x * x;
      }
      for (auto& x : v) x /= std::sqrt(norm);
      file << json{{"id", fmt::format("spk{:04d}", s)}, {"vector", v}}.dump() << '\n';
    }
  }
};

struct Ingest {
  std::string dataset;
  std::string source;
  std::string out;
  bool keep_excited = false;
  std::string phrases;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("ingest", "Convert a corpus layout into a manifest");
    c->add_option("--dataset", dataset, "iemocap, msp_improv, slurp or synthetic")->required();
    c->add_option("--source", source, "Corpus root")->required()->check(CLI::ExistingPath);
    c->add_option("--out", out, "Output manifest")->required();
    c->add_flag("--keep-excited", keep_excited, "Do not merge IEMOCAP excited into happy");
    c->add_option("--intent-phrases", phrases, "JSON object mapping intent ids to phrases")->check(CLI::ExistingFile);
    c->callback([this] { run(); });
  }

  void run() const {
    asu::IngestOptions opts;
    opts.merge_excited = !keep_excited;
    if (!phrases.empty()) {
      std::ifstream in(phrases);
      opts.intent_phrases = json::parse(in).get<std::map<std::string, std::string>>();
    }
    const auto kind = asu::parse_dataset_kind(dataset);
    const auto result = asu::ingest(kind, source, opts);
    asu::write_manifest(out, result.manifest.rebased(fs::absolute(fs::path(out)).parent_path()), result.metadata);
    const auto& r = result.report;
    fmt::print("{} utterances, {} speakers, {} classes ({} dropped)\n", r.observed.utterances, r.observed.speakers,
               r.observed.classes, r.dropped);
    if (r.published) {
      fmt::print("published: {} utterances, {} speakers, {} classes{}\n", r.published->utterances,
                 r.published->speakers, r.published->classes, r.matches_published() ? "" : " (differs)");
    }
  }
};

struct Subsample {
  std::string manifest;
  double ratio = 1.0;
  std::uint64_t seed = 0;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("subsample", "Stratified per-label subset of a manifest");
    c->add_option("--manifest", manifest, "Input manifest")->required()->check(CLI::ExistingFile);
    c->add_option("--ratio", ratio, "Fraction in (0, 1]")->required();
    c->add_option("--seed", seed, "Seed");
    c->add_option("--out", out, "Output manifest")->required();
    c->callback([this] { run(); });
  }

  void run() const {
    const auto m = asu::read_manifest(manifest);
    const auto sub = asu::subsample(m, ratio, seed);
    asu::write_manifest(out, sub.rebased(fs::absolute(fs::path(out)).parent_path()));
    fmt::print("{} of {} records\n", sub.size(), m.size());
  }
};

struct Folds {
  std::string manifest;
  std::string dataset;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("folds", "Print the session fold plan");
    c->add_option("--manifest", manifest, "Input manifest")->required()->check(CLI::ExistingFile);
    c->add_option("--dataset", dataset, "iemocap, msp_improv or slurp")->required();
    c->add_option("--out", out, "Write the plan as JSON instead of printing it");
    c->callback([this] { run(); });
  }

  void run() const {
    const auto plan = asu::make_folds(asu::read_manifest(manifest), asu::parse_dataset_kind(dataset));
    json j = json::array();
    for (const auto& f : plan.folds) j.push_back({{"test", f.test}, {"val", f.val}, {"train", f.train}});
    if (out.empty()) {
      fmt::print("{}\n", j.dump(2));
    } else {
      write_json(out, j);
    }
  }
};

struct Train {
  std::string config;
  std::string regime;
  std::string init;
  std::string out;
  std::size_t fold = 0;
  double ratio = 1.0;
  std::optional<std::uint64_t> seed;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("train", "Train one model and write its best checkpoint");
    c->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
    c->add_option("--regime", regime, "real_baseline, synthetic_zero_shot, low_resource or synthetic_init_low_resource")
        ->required();
    c->add_option("--init", init, "Initialization checkpoint")->check(CLI::ExistingFile);
    c->add_option("--out", out, "Output directory")->required();
    c->add_option("--fold", fold, "Fold index for real-data regimes");
    c->add_option("--ratio", ratio, "Training-data ratio for low-resource regimes");
    c->add_option("--seed", seed, "Seed (defaults to the config's train seed)");
    c->callback([this] { run(); });
  }

  void run() const {
    const auto cfg = asu::load_config(config);
    const auto r = asu::parse_regime(regime);
    auto tc = cfg.train_config(r);
    if (seed) tc.seed = *seed;
    if (!init.empty()) tc.init_checkpoint = init;
    tc.validate();

    asu::AsuModel model(asu::make_encoder(cfg.encoder), cfg.resolved_head(), cfg.lora,
                        asu::derive_seed(tc.seed, "init"));
    if (tc.init_checkpoint) asu::init_from_checkpoint(model, asu::load_checkpoint(*tc.init_checkpoint), cfg.task);

    std::optional<asu::Manifest> train_set;
    std::optional<asu::Manifest> val_set;
    if (r == asu::Regime::synthetic_zero_shot) {
      if (!cfg.corpus.synthetic) throw asu::Error(asu::ErrorCode::invalid_config, "corpus.synthetic is required");
      const auto split = asu::holdout_split(asu::read_manifest(*cfg.corpus.synthetic),
                                            cfg.experiment.synthetic_val_fraction, asu::derive_seed(tc.seed, "holdout"));
      train_set.emplace(split.train);
      val_set.emplace(split.val);
    } else {
      const auto real = real_manifest(cfg);
      const auto plan = asu::make_folds(real, cfg.corpus.dataset);
      const auto split = asu::split_fold(real, plan.folds.at(fold));
      train_set.emplace(asu::uses_ratio(r) ? asu::subsample(split.train, ratio, asu::derive_seed(tc.seed, "subsample"))
                                           : split.train);
      val_set.emplace(split.val);
    }

    fs::create_directories(out);
    std::ofstream epochs(fs::path(out) / "epochs.jsonl");
    const auto result = asu::train(model, cfg.task, *train_set, *val_set, tc, [&](const asu::EpochRecord& rec) {
      const auto line = asu::to_json(rec).dump();
      epochs << line << '\n' << std::flush;
      fmt::print("{}\n", line);
      std::fflush(stdout);
    });
    asu::save_checkpoint(fs::path(out) / "checkpoint.json", result.checkpoint);
    fmt::print(stderr, "best epoch {} with validation {}\n", result.checkpoint.epoch, result.checkpoint.best_val_metric);
  }
};

struct Evaluate {
  std::string config;
  std::string checkpoint;
  std::string manifest;
  std::optional<std::size_t> fold;
  std::size_t workers = 1;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("evaluate", "Evaluate a checkpoint on a manifest or a fold's test set");
    c->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
    c->add_option("--checkpoint", checkpoint, "Checkpoint")->required()->check(CLI::ExistingFile);
    auto* m = c->add_option("--manifest", manifest, "Test manifest")->check(CLI::ExistingFile);
    c->add_option("--fold", fold, "Use this fold's test sessions of the configured corpus")->excludes(m);
    c->add_option("--workers", workers, "Inference threads");
    c->callback([this] { run(); });
  }

  void run() const {
    const auto cfg = asu::load_config(config);
    asu::AsuModel model(asu::make_encoder(cfg.encoder), cfg.resolved_head(), cfg.lora, 0);
    asu::init_from_checkpoint(model, asu::load_checkpoint(checkpoint), cfg.task);
    std::optional<asu::Manifest> test;
    if (!manifest.empty()) {
      test.emplace(asu::read_manifest(manifest));
    } else {
      const auto real = real_manifest(cfg);
      const auto plan = asu::make_folds(real, cfg.corpus.dataset);
      test.emplace(asu::split_fold(real, plan.folds.at(fold.value_or(0))).test);
    }
    const auto m = asu::evaluate(model, *test, cfg.task, workers);
    fmt::print("{}\n", metrics_json(m).dump(2));
  }
};

struct Run {
  std::string config;
  std::size_t workers = 1;
  bool resume = false;
  std::optional<std::size_t> max_cells;
  bool render = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("run", "Execute the experiment matrix and write its report");
    c->add_option("--config", config, "Config file")->required()->check(CLI::ExistingFile);
    c->add_option("--workers", workers, "Cells trained in parallel")->check(CLI::PositiveNumber);
    c->add_flag("--resume", resume, "Skip cells already completed in the output directory");
    c->add_option("--max-cells", max_cells, "Stop after this many new cells");
    c->add_flag("--render", render, "Also render SVG charts");
    c->callback([this] { run(); });
  }

  void run() const {
    const auto cfg = asu::load_config(config);
    asu::RunOptions opts;
    opts.workers = workers;
    opts.resume = resume;
    opts.max_cells = max_cells;
    opts.log = [](const std::string& line) { fmt::print(stderr, "{}\n", line); };
    const auto outcome = asu::run_matrix(cfg, opts);
    fmt::print("{} of {} cells complete ({} run now, {} reused, {} failed)\n", outcome.results.size(),
               outcome.expected, outcome.executed, outcome.skipped, outcome.failures.size());
    for (const auto& f : outcome.failures) fmt::print(stderr, "FAILED {}: {}\n", f.key.str(), f.message);
    if (!outcome.results.empty()) {
      asu::emit_report(outcome.results, cfg.experiment.output_dir / "report",
                       {cfg.task.kind(), cfg.experiment.pooled, render});
    }
    if (!outcome.failures.empty()) throw asu::Error(asu::ErrorCode::backend_failure, "some cells failed");
  }
};

struct Report {
  std::string results;
  std::string out;
  std::string task = "emotion";
  bool render = false;
  bool pooled = false;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("report", "Write CSV tables from a results directory");
    c->add_option("--results", results, "Experiment output directory")->required()->check(CLI::ExistingDirectory);
    c->add_option("--out", out, "Report directory")->required();
    c->add_option("--task", task, "emotion (UAR primary) or intent (macro-F1 primary)");
    c->add_flag("--render", render, "Also render SVG charts");
    c->add_flag("--pooled", pooled, "Pool confusion matrices instead of averaging cells");
    c->callback([this] { run(); });
  }

  void run() const {
    const auto written = asu::emit_report(asu::load_results(results), out, {asu::parse_task_kind(task), pooled, render});
    for (const auto& p : written) fmt::print("{}\n", p.string());
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Label-guided synthetic speech data for speech understanding"};
  app.require_subcommand(1);
  GenerateText generate_text;
  Synthesize synthesize;
  RandomSpeakers random_speakers;
  Ingest ingest;
  Subsample subsample;
  Folds folds;
  Train train;
  Evaluate evaluate;
  Run run;
  Report report;
  generate_text.add(app);
  synthesize.add(app);
  random_speakers.add(app);
  ingest.add(app);
  subsample.add(app);
  folds.add(app);
  train.add(app);
  evaluate.add(app);
  run.add(app);
  report.add(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const asu::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
