#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "asu/manifest.hpp"
#include "asu/task_registry.hpp"

namespace asu {

enum class DatasetKind { iemocap, msp_improv, slurp, synthetic };

std::string_view to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(std::string_view text);
TaskKind task_kind_of(DatasetKind kind);

struct DatasetStatistics {
  std::size_t speakers = 0;
  std::size_t classes = 0;
  std::size_t utterances = 0;
};

/// Published sizes of the full corpora after label filtering.
std::optional<DatasetStatistics> published_statistics(DatasetKind kind);

struct IngestOptions {
  // IEMOCAP "exc" folds into "happy".
  bool merge_excited = true;
  // SLURP scenario_action id -> human-readable phrase. Missing ids default to
  // the id with underscores replaced by spaces.
  std::map<std::string, std::string> intent_phrases;
  // Restricts kept labels; SER defaults to the four emotion classes, SLURP to all.
  std::optional<std::vector<std::string>> labels;
};

struct IngestReport {
  DatasetStatistics observed;
  std::optional<DatasetStatistics> published;
  std::map<std::string, std::size_t> dropped_by_label;
  std::size_t dropped = 0;

  bool matches_published() const;
};

struct IngestResult {
  Manifest manifest;
  IngestReport report;
  nlohmann::json metadata;
};

/// Source layouts:
///  iemocap    Session{1..5}/dialog/EmoEvaluation/*.txt, Session{k}/sentences/wav/<dialog>/<utt>.wav
///  msp_improv Evaluation.txt plus any tree of <utterance>.wav files
///  slurp      {train,devel,test}.jsonl and audio/<recording>.wav
///  synthetic  a directory holding manifest.jsonl, or the manifest file itself
IngestResult ingest(DatasetKind kind, const std::filesystem::path& source, const IngestOptions& options = {});

struct Fold {
  std::vector<std::string> test;
  std::vector<std::string> val;
  std::vector<std::string> train;
};

struct FoldPlan {
  std::vector<Fold> folds;
  std::size_t n_folds() const { return folds.size(); }
};

/// Leave-one-session-out over sorted sessions: fold k tests session k and
/// validates on its cyclic successor. Needs at least three sessions.
FoldPlan make_session_folds(std::vector<std::string> sessions);

/// iemocap requires 5 sessions, msp_improv 6; slurp yields one fold over the
/// standard train/devel/test split.
FoldPlan make_folds(const Manifest& manifest, DatasetKind kind);

struct FoldSplit {
  Manifest train;
  Manifest val;
  Manifest test;
};

FoldSplit split_fold(const Manifest& manifest, const Fold& fold);

/// Per-label stratified sample of ceil(ratio * n_label) records taken as a
/// prefix of a per-label seeded permutation, so smaller ratios nest inside
/// larger ones. Record order is preserved.
Manifest subsample(const Manifest& manifest, double ratio, std::uint64_t seed);

struct HoldoutSplit {
  Manifest train;
  Manifest val;
};

/// Stratified held-out split; each label with at least two records keeps one
/// on each side.
HoldoutSplit holdout_split(const Manifest& manifest, double val_fraction, std::uint64_t seed);

double max_duration_seconds(TaskKind task);

/// 16 kHz mono samples truncated to the task's duration cap.
std::vector<float> standardize_audio(const std::filesystem::path& audio, TaskKind task);

}  // namespace asu
