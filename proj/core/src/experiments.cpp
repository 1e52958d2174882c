#include "asu/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "asu/checkpoint.hpp"
#include "asu/corpus.hpp"
#include "asu/digest.hpp"
#include "asu/error.hpp"
#include "asu/parallel.hpp"
#include "asu/rng.hpp"

namespace asu {

namespace fs = std::filesystem;

std::string CellKey::str() const {
  return fmt::format("{}|fold={}|ratio={}|seed={}", to_string(regime), fold, ratio, seed);
}

std::string CellKey::digest() const { return sha256_hex(str()).substr(0, 20); }

std::vector<CellKey> expected_cells(const ExperimentConfig& config, std::size_t n_folds) {
  config.validate();
  std::vector<std::size_t> folds;
  if (config.folds) {
    for (auto f : *config.folds) {
      if (f >= n_folds) throw Error(ErrorCode::out_of_range, fmt::format("fold {} of {}", f, n_folds));
      folds.push_back(f);
    }
  } else {
    for (std::size_t f = 0; f < n_folds; ++f) folds.push_back(f);
  }
  std::set<CellKey> keys;
  for (auto regime : config.regimes) {
    const std::vector<double> ratios = uses_ratio(regime) ? config.ratios : std::vector<double>{1.0};
    for (auto fold : folds) {
      for (double ratio : ratios) {
        for (auto seed : config.seeds) keys.insert({regime, fold, ratio, seed});
      }
    }
  }
  return {keys.begin(), keys.end()};
}

nlohmann::json to_json(const RunResult& r) {
  nlohmann::json confusion = nlohmann::json::array();
  for (Eigen::Index i = 0; i < r.metrics.confusion.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < r.metrics.confusion.cols(); ++j) row.push_back(r.metrics.confusion(i, j));
    confusion.push_back(std::move(row));
  }
  return {{"regime", to_string(r.key.regime)},
          {"fold", r.key.fold},
          {"ratio", r.key.ratio},
          {"seed", r.key.seed},
          {"metrics",
           {{"uar", r.metrics.uar},
            {"macro_f1", r.metrics.macro_f1},
            {"accuracy", r.metrics.accuracy},
            {"n", r.metrics.n},
            {"confusion", confusion}}},
          {"checkpoint_ref", r.checkpoint_ref},
          {"wall_time", r.wall_time}};
}

RunResult run_result_from_json(const nlohmann::json& j) {
  try {
    RunResult r;
    r.key.regime = parse_regime(j.at("regime").get<std::string>());
    r.key.fold = j.at("fold").get<std::size_t>();
    r.key.ratio = j.at("ratio").get<double>();
    r.key.seed = j.at("seed").get<std::uint64_t>();
    const auto& m = j.at("metrics");
    r.metrics.uar = m.at("uar").get<double>();
    r.metrics.macro_f1 = m.at("macro_f1").get<double>();
    r.metrics.accuracy = m.at("accuracy").get<double>();
    r.metrics.n = m.at("n").get<std::size_t>();
    const auto& c = m.at("confusion");
    const auto k = static_cast<Eigen::Index>(c.size());
    r.metrics.confusion = ConfusionMatrix::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index jj = 0; jj < k; ++jj) r.metrics.confusion(i, jj) = c.at(i).at(jj).get<long long>();
    }
    r.checkpoint_ref = j.at("checkpoint_ref").get<std::string>();
    r.wall_time = j.value("wall_time", 0.0);
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, fmt::format("malformed cell record: {}", e.what()));
  }
}

std::vector<RunResult> load_results(const fs::path& dir) {
  std::vector<RunResult> out;
  const auto cells = dir / "cells";
  if (!fs::exists(cells)) return out;
  for (const auto& entry : fs::directory_iterator(cells)) {
    if (entry.path().extension() != ".json") continue;
    std::ifstream in(entry.path());
    try {
      out.push_back(run_result_from_json(nlohmann::json::parse(in)));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, fmt::format("{}: {}", entry.path().string(), e.what()));
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
  return out;
}

namespace {

void write_atomic(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, fmt::format("cannot write {}", tmp.string()));
    out << text;
    if (!out) throw Error(ErrorCode::io, fmt::format("write failed for {}", tmp.string()));
  }
  fs::rename(tmp, path);
}

std::string relative_ref(const fs::path& path, const fs::path& root) {
  return path.lexically_relative(root).generic_string();
}

class MatrixRunner {
 public:
  MatrixRunner(const AppConfig& config, const RunOptions& options)
      : config_(config), options_(options), out_(config.experiment.output_dir) {}

  MatrixOutcome run() {
    if (out_.empty()) throw Error(ErrorCode::invalid_config, "experiment.output_dir is required");
    prepare_output();
    load_real();
    MatrixOutcome outcome;
    const auto keys = expected_cells(config_.experiment, plan_.n_folds());
    outcome.expected = keys.size();

    std::set<CellKey> done;
    for (const auto& r : load_results(out_)) done.insert(r.key);
    std::vector<CellKey> pending;
    for (const auto& k : keys) {
      if (done.count(k) != 0) {
        ++outcome.skipped;
      } else {
        pending.push_back(k);
      }
    }
    if (options_.max_cells && pending.size() > *options_.max_cells) pending.resize(*options_.max_cells);

    std::set<std::uint64_t> pretrain_seeds;
    for (const auto& k : pending) {
      if (k.regime == Regime::synthetic_zero_shot || k.regime == Regime::synthetic_init_low_resource) {
        pretrain_seeds.insert(k.seed);
      }
    }
    prepare_pretrains({pretrain_seeds.begin(), pretrain_seeds.end()});

    std::mutex mutex;
    parallel_for(pending.size(), std::max<std::size_t>(1, options_.workers), [&](std::size_t i) {
      const auto& key = pending[i];
      try {
        const RunResult r = run_cell(key);
        const auto file = out_ / "cells" / (key.digest() + ".json");
        write_atomic(file, to_json(r).dump(2) + "\n");
        std::lock_guard lock(mutex);
        std::ofstream index(out_ / "index.jsonl", std::ios::app);
        index << nlohmann::json{{"key", key.str()}, {"file", relative_ref(file, out_)}}.dump() << '\n';
        ++outcome.executed;
        log(fmt::format("done {}", key.str()));
      } catch (const std::exception& e) {
        std::lock_guard lock(mutex);
        outcome.failures.push_back({key, e.what()});
        log(fmt::format("failed {}: {}", key.str(), e.what()));
      }
    });
    std::sort(outcome.failures.begin(), outcome.failures.end(),
              [](const auto& a, const auto& b) { return a.key < b.key; });

    const std::set<CellKey> expected(keys.begin(), keys.end());
    for (auto& r : load_results(out_)) {
      if (expected.count(r.key) != 0) outcome.results.push_back(std::move(r));
    }
    return outcome;
  }

 private:
  void log(const std::string& line) const {
    if (options_.log) options_.log(line);
  }

  void prepare_output() {
    fs::create_directories(out_);
    const auto fingerprint = experiment_fingerprint(config_).dump(2) + "\n";
    const auto run_file = out_ / "run.json";
    const bool has_cells = fs::exists(out_ / "cells") && !fs::is_empty(out_ / "cells");
    if (has_cells && !options_.resume) {
      throw Error(ErrorCode::invalid_config,
                  fmt::format("{} already holds results; pass resume to continue it", out_.string()));
    }
    if (fs::exists(run_file)) {
      std::ifstream in(run_file);
      std::stringstream ss;
      ss << in.rdbuf();
      if (ss.str() != fingerprint) {
        throw Error(ErrorCode::invalid_config,
                    fmt::format("{} was produced by a different experiment configuration", out_.string()));
      }
    } else {
      write_atomic(run_file, fingerprint);
    }
  }

  void load_real() {
    if (config_.corpus.manifest) {
      real_.emplace(read_manifest(*config_.corpus.manifest));
    } else {
      real_.emplace(ingest(config_.corpus.dataset, config_.corpus.source, config_.corpus.ingest).manifest);
    }
    if (real_->task() != config_.task.kind()) {
      throw Error(ErrorCode::label_mismatch, "real manifest task differs from the configured task");
    }
    plan_ = make_folds(*real_, config_.corpus.dataset);
  }

  AsuModel fresh_model(std::uint64_t seed) const {
    return AsuModel(encoder_, config_.resolved_head(), config_.lora, derive_seed(seed, "init"));
  }

  void prepare_pretrains(const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) return;
    if (!config_.corpus.synthetic) {
      for (auto s : seeds) pretrain_errors_[s] = "synthetic regimes need corpus.synthetic";
      return;
    }
    std::mutex mutex;
    parallel_for(seeds.size(), std::max<std::size_t>(1, options_.workers), [&](std::size_t i) {
      const auto seed = seeds[i];
      const auto path = out_ / "pretrain" / fmt::format("seed-{}.json", seed);
      try {
        Checkpoint ckpt;
        if (fs::exists(path)) {
          ckpt = load_checkpoint(path);
        } else {
          Manifest syn = read_manifest(*config_.corpus.synthetic);
          const auto split = holdout_split(syn, config_.experiment.synthetic_val_fraction, derive_seed(seed, "holdout"));
          AsuModel model = fresh_model(seed);
          TrainConfig tc = config_.train_config(Regime::synthetic_zero_shot);
          tc.seed = seed;
          ckpt = train(model, config_.task, split.train, split.val, tc).checkpoint;
          save_checkpoint(path, ckpt);
          log(fmt::format("pretrained synthetic seed {}", seed));
        }
        std::lock_guard lock(mutex);
        pretrains_.emplace(seed, std::make_pair(relative_ref(path, out_), std::move(ckpt)));
      } catch (const std::exception& e) {
        std::lock_guard lock(mutex);
        pretrain_errors_[seed] = e.what();
        log(fmt::format("synthetic pretraining for seed {} failed: {}", seed, e.what()));
      }
    });
  }

  const std::pair<std::string, Checkpoint>& pretrain(std::uint64_t seed) const {
    if (auto it = pretrain_errors_.find(seed); it != pretrain_errors_.end()) {
      throw Error(ErrorCode::backend_failure, fmt::format("synthetic pretraining failed: {}", it->second));
    }
    return pretrains_.at(seed);
  }

  RunResult run_cell(const CellKey& key) {
    const auto start = std::chrono::steady_clock::now();
    const auto split = split_fold(*real_, plan_.folds.at(key.fold));
    RunResult result;
    result.key = key;
    AsuModel model = fresh_model(key.seed);
    if (key.regime == Regime::synthetic_zero_shot) {
      const auto& [ref, ckpt] = pretrain(key.seed);
      init_from_checkpoint(model, ckpt, config_.task);
      result.checkpoint_ref = ref;
    } else {
      TrainConfig tc = config_.train_config(key.regime);
      tc.seed = key.seed;
      if (key.regime == Regime::synthetic_init_low_resource) {
        const auto& [ref, ckpt] = pretrain(key.seed);
        init_from_checkpoint(model, ckpt, config_.task);
        tc.init_checkpoint = out_ / ref;
      }
      const Manifest train_set =
          uses_ratio(key.regime) ? subsample(split.train, key.ratio, derive_seed(key.seed, "subsample")) : split.train;
      const auto trained = train(model, config_.task, train_set, split.val, tc);
      const auto path = out_ / "checkpoints" / (key.digest() + ".json");
      save_checkpoint(path, trained.checkpoint);
      result.checkpoint_ref = relative_ref(path, out_);
    }
    result.metrics = evaluate(model, split.test, config_.task);
    result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
  }

  const AppConfig& config_;
  const RunOptions& options_;
  fs::path out_;
  std::shared_ptr<const SpeechEncoder> encoder_ = make_encoder(config_.encoder);
  std::optional<Manifest> real_;
  FoldPlan plan_;
  std::map<std::uint64_t, std::pair<std::string, Checkpoint>> pretrains_;
  std::map<std::uint64_t, std::string> pretrain_errors_;
};

}  // namespace

MatrixOutcome run_matrix(const AppConfig& config, const RunOptions& options) {
  return MatrixRunner(config, options).run();
}

}  // namespace asu
