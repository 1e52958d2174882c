#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "asu/config.hpp"
#include "asu/metrics.hpp"
#include "asu/trainer.hpp"

namespace asu {

struct CellKey {
  Regime regime = Regime::real_baseline;
  std::size_t fold = 0;
  double ratio = 1.0;
  std::uint64_t seed = 0;

  std::string str() const;
  std::string digest() const;
  auto operator<=>(const CellKey&) const = default;
};

/// Ratio-free regimes collapse to ratio 1.0. Returned in sorted order.
std::vector<CellKey> expected_cells(const ExperimentConfig& config, std::size_t n_folds);

struct RunResult {
  CellKey key;
  Metrics metrics;
  std::string checkpoint_ref;  // relative to the output directory
  double wall_time = 0.0;      // seconds; never part of any report
};

nlohmann::json to_json(const RunResult& result);
RunResult run_result_from_json(const nlohmann::json& j);

struct CellFailure {
  CellKey key;
  std::string message;
};

struct RunOptions {
  std::size_t workers = 1;
  bool resume = false;
  // Stop after this many newly executed cells, as an interrupted run would.
  std::optional<std::size_t> max_cells;
  std::function<void(const std::string&)> log;
};

struct MatrixOutcome {
  std::vector<RunResult> results;  // sorted by key
  std::vector<CellFailure> failures;
  std::size_t executed = 0;
  std::size_t skipped = 0;
  std::size_t expected = 0;

  bool complete() const { return results.size() == expected; }
};

/// Executes every pending cell. Each cell's record is written to
/// cells/<key digest>.json by atomic rename and appended to index.jsonl. The
/// synthetic checkpoint for each seed is trained once and shared by all folds.
MatrixOutcome run_matrix(const AppConfig& config, const RunOptions& options = {});

/// Reads all cell records under `dir`, sorted by key.
std::vector<RunResult> load_results(const std::filesystem::path& dir);

struct ReportOptions {
  TaskKind task = TaskKind::emotion;
  bool pooled = false;
  bool render = false;
};

struct GroupSummary {
  Regime regime = Regime::real_baseline;
  double ratio = 1.0;
  std::size_t cells = 0;
  Summary uar;
  Summary macro_f1;
  Summary accuracy;
};

/// One summary per (regime, ratio), sorted.
std::vector<GroupSummary> summarize_groups(const std::vector<RunResult>& results, bool pooled);

/// Writes results.csv, regime_comparison.csv and curve_<regime>.csv (and
/// SVG charts when rendering). Returns the written paths.
std::vector<std::filesystem::path> emit_report(const std::vector<RunResult>& results,
                                               const std::filesystem::path& out_dir,
                                               const ReportOptions& options = {});

}  // namespace asu
