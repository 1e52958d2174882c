#include "asu/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include <fmt/format.h>

#include "asu/audio.hpp"
#include "asu/error.hpp"
#include "asu/rng.hpp"

namespace asu {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    parts.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string trimmed(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string iemocap_label(const std::string& code, bool merge_excited) {
  static const std::unordered_map<std::string, std::string> kNames{
      {"neu", "neutral"}, {"hap", "happy"},      {"sad", "sad"},       {"ang", "angry"},
      {"fru", "frustrated"}, {"sur", "surprised"}, {"fea", "fear"},     {"dis", "disgusted"},
      {"oth", "other"},   {"xxx", "unknown"},    {"exc", "excited"}};
  if (code == "exc" && merge_excited) return "happy";
  const auto it = kNames.find(code);
  return it != kNames.end() ? it->second : normalize_label(code);
}

std::string msp_label(const std::string& code) {
  static const std::unordered_map<std::string, std::string> kNames{
      {"N", "neutral"}, {"H", "happy"}, {"S", "sad"}, {"A", "angry"}, {"O", "other"}, {"X", "unknown"}};
  const auto it = kNames.find(code);
  return it != kNames.end() ? it->second : normalize_label(code);
}

std::string intent_phrase(const std::string& id, const IngestOptions& options) {
  const auto it = options.intent_phrases.find(id);
  if (it != options.intent_phrases.end()) return normalize_label(it->second);
  std::string phrase = id;
  std::replace(phrase.begin(), phrase.end(), '_', ' ');
  return normalize_label(phrase);
}

std::string relative_ref(const fs::path& file, const fs::path& root) {
  return file.lexically_relative(root).generic_string();
}

std::vector<UtteranceRecord> read_iemocap(const fs::path& source, const IngestOptions& options) {
  std::vector<fs::path> sessions;
  if (fs::is_directory(source)) {
    for (const auto& entry : fs::directory_iterator(source)) {
      const auto name = entry.path().filename().string();
      if (entry.is_directory() && name.starts_with("Session")) sessions.push_back(entry.path());
    }
  }
  if (sessions.empty()) throw Error(ErrorCode::layout, fmt::format("no Session* directories under '{}'", source.string()));
  std::sort(sessions.begin(), sessions.end());

  std::vector<UtteranceRecord> records;
  for (const auto& session : sessions) {
    const fs::path eval_dir = session / "dialog" / "EmoEvaluation";
    if (!fs::is_directory(eval_dir)) {
      throw Error(ErrorCode::layout, fmt::format("missing '{}'", eval_dir.string()));
    }
    std::vector<fs::path> eval_files;
    for (const auto& entry : fs::directory_iterator(eval_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".txt") eval_files.push_back(entry.path());
    }
    std::sort(eval_files.begin(), eval_files.end());
    for (const auto& file : eval_files) {
      std::ifstream in(file);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty() || line.front() != '[') continue;
        const auto fields = split(line, '\t');
        if (fields.size() < 3) continue;
        double start = 0.0;
        double end = 0.0;
        if (std::sscanf(fields[0].c_str(), "[%lf - %lf]", &start, &end) != 2) {
          throw Error(ErrorCode::layout, fmt::format("{}: bad time span '{}'", file.string(), fields[0]));
        }
        const std::string utt = trimmed(fields[1]);
        const auto last_sep = utt.rfind('_');
        if (utt.size() < 6 || last_sep == std::string::npos || last_sep + 1 >= utt.size()) {
          throw Error(ErrorCode::layout, fmt::format("{}: bad utterance id '{}'", file.string(), utt));
        }
        const fs::path wav = session / "sentences" / "wav" / utt.substr(0, last_sep) / (utt + ".wav");
        if (!fs::exists(wav)) throw Error(ErrorCode::layout, fmt::format("missing audio '{}'", wav.string()));
        records.push_back({utt, relative_ref(wav, source), iemocap_label(trimmed(fields[2]), options.merge_excited),
                           utt.substr(0, 5) + utt[last_sep + 1], utt.substr(0, 5), end - start, Origin::real});
      }
    }
  }
  return records;
}

std::vector<UtteranceRecord> read_msp_improv(const fs::path& source) {
  const fs::path eval = source / "Evaluation.txt";
  if (!fs::exists(eval)) throw Error(ErrorCode::layout, fmt::format("missing '{}'", eval.string()));
  std::unordered_map<std::string, fs::path> wavs;
  for (const auto& entry : fs::recursive_directory_iterator(source)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") {
      wavs.emplace(entry.path().stem().string(), entry.path());
    }
  }

  std::vector<UtteranceRecord> records;
  std::ifstream in(eval);
  std::string line;
  while (std::getline(in, line)) {
    const auto fields = split(line, ';');
    if (fields.size() < 2) continue;
    std::string name = trimmed(fields[0]);
    if (!(name.starts_with("UTD-IMPROV") || name.starts_with("MSP-IMPROV"))) continue;
    std::string stem = fs::path(name).stem().string();
    if (stem.starts_with("UTD-")) stem.replace(0, 3, "MSP");
    const auto tokens = split(stem, '-');
    if (tokens.size() < 6 || tokens[3].size() < 2) {
      throw Error(ErrorCode::layout, fmt::format("{}: bad utterance name '{}'", eval.string(), name));
    }
    const auto it = wavs.find(stem);
    if (it == wavs.end()) throw Error(ErrorCode::layout, fmt::format("missing audio for '{}'", stem));
    const int session = std::stoi(tokens[3].substr(1));
    records.push_back({stem, relative_ref(it->second, source), msp_label(trimmed(fields[1])), tokens[3],
                       fmt::format("session{}", session), read_wav_info(it->second).duration(), Origin::real});
  }
  return records;
}

std::vector<UtteranceRecord> read_slurp(const fs::path& source, const IngestOptions& options,
                                        nlohmann::json& phrase_map) {
  std::vector<UtteranceRecord> records;
  for (const std::string split_name : {"train", "devel", "test"}) {
    const fs::path file = source / (split_name + ".jsonl");
    if (!fs::exists(file)) throw Error(ErrorCode::layout, fmt::format("missing '{}'", file.string()));
    std::ifstream in(file);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trimmed(line).empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        const std::string intent_id = j.at("intent").get<std::string>();
        const std::string label = intent_phrase(intent_id, options);
        phrase_map[intent_id] = label;
        for (const auto& rec : j.at("recordings")) {
          const auto stem = fs::path(rec.at("file").get<std::string>()).stem().string();
          fs::path wav = source / "audio" / (stem + ".wav");
          if (!fs::exists(wav)) wav = source / "slurp_real" / (stem + ".wav");
          if (!fs::exists(wav)) throw Error(ErrorCode::layout, fmt::format("missing audio for recording '{}'", stem));
          const std::string speaker = rec.contains("user_id")  ? rec.at("user_id").get<std::string>()
                                      : j.contains("user_id") ? j.at("user_id").get<std::string>()
                                                              : "unknown";
          records.push_back({stem, relative_ref(wav, source), label, speaker, split_name,
                             read_wav_info(wav).duration(), Origin::real});
        }
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::layout, fmt::format("{}:{}: {}", file.string(), line_no, e.what()));
      }
    }
  }
  return records;
}

}  // namespace

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::iemocap: return "iemocap";
    case DatasetKind::msp_improv: return "msp_improv";
    case DatasetKind::slurp: return "slurp";
    case DatasetKind::synthetic: return "synthetic";
  }
  return "unknown";
}

DatasetKind parse_dataset_kind(std::string_view text) {
  if (text == "iemocap") return DatasetKind::iemocap;
  if (text == "msp_improv" || text == "msp-improv") return DatasetKind::msp_improv;
  if (text == "slurp") return DatasetKind::slurp;
  if (text == "synthetic") return DatasetKind::synthetic;
  throw Error(ErrorCode::invalid_config, fmt::format("unknown dataset kind '{}'", text));
}

TaskKind task_kind_of(DatasetKind kind) {
  return kind == DatasetKind::slurp ? TaskKind::intent : TaskKind::emotion;
}

std::optional<DatasetStatistics> published_statistics(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::iemocap: return DatasetStatistics{10, 4, 5531};
    case DatasetKind::msp_improv: return DatasetStatistics{12, 4, 7798};
    case DatasetKind::slurp: return DatasetStatistics{177, 46, 72277};
    case DatasetKind::synthetic: return std::nullopt;
  }
  return std::nullopt;
}

bool IngestReport::matches_published() const {
  return published && published->speakers == observed.speakers && published->classes == observed.classes &&
         published->utterances == observed.utterances;
}

IngestResult ingest(DatasetKind kind, const fs::path& source, const IngestOptions& options) {
  if (!fs::exists(source)) throw Error(ErrorCode::layout, fmt::format("'{}' does not exist", source.string()));

  nlohmann::json metadata = {{"dataset", to_string(kind)}};
  std::vector<UtteranceRecord> records;
  fs::path root = source;
  TaskKind task = task_kind_of(kind);
  switch (kind) {
    case DatasetKind::iemocap:
      records = read_iemocap(source, options);
      metadata["label_mapping"] = {{"exc", options.merge_excited ? "happy" : "excited"}};
      break;
    case DatasetKind::msp_improv:
      records = read_msp_improv(source);
      break;
    case DatasetKind::slurp: {
      nlohmann::json phrases = nlohmann::json::object();
      records = read_slurp(source, options, phrases);
      metadata["intent_phrases"] = phrases;
      break;
    }
    case DatasetKind::synthetic: {
      const fs::path file = fs::is_directory(source) ? source / "manifest.jsonl" : source;
      if (!fs::exists(file)) throw Error(ErrorCode::layout, fmt::format("missing '{}'", file.string()));
      auto manifest = read_manifest(file);
      task = manifest.task();
      root = manifest.root();
      records = manifest.records();
      break;
    }
  }
  if (records.empty()) throw Error(ErrorCode::layout, fmt::format("no utterances found under '{}'", source.string()));

  std::set<std::string> keep;
  if (options.labels) {
    for (const auto& l : *options.labels) keep.insert(normalize_label(l));
  } else if (task == TaskKind::emotion) {
    for (const auto& l : default_emotion_labels()) keep.insert(l);
  }

  IngestReport report;
  std::vector<UtteranceRecord> kept;
  for (auto& r : records) {
    if (!keep.empty() && !keep.contains(r.label)) {
      ++report.dropped;
      ++report.dropped_by_label[r.label];
      continue;
    }
    kept.push_back(std::move(r));
  }
  if (kept.empty()) throw Error(ErrorCode::empty_after_filtering, "no records survived label filtering");

  Manifest manifest(task, std::move(kept), root);
  report.observed = {manifest.speakers().size(), manifest.labels().size(), manifest.size()};
  report.published = published_statistics(kind);
  return {std::move(manifest), std::move(report), std::move(metadata)};
}

FoldPlan make_session_folds(std::vector<std::string> sessions) {
  std::sort(sessions.begin(), sessions.end());
  sessions.erase(std::unique(sessions.begin(), sessions.end()), sessions.end());
  if (sessions.size() < 3) {
    throw Error(ErrorCode::session_count_mismatch,
                fmt::format("session folds need at least 3 sessions, got {}", sessions.size()));
  }
  FoldPlan plan;
  const std::size_t n = sessions.size();
  for (std::size_t k = 0; k < n; ++k) {
    Fold fold;
    fold.test = {sessions[k]};
    fold.val = {sessions[(k + 1) % n]};
    for (std::size_t j = 0; j < n; ++j) {
      if (j != k && j != (k + 1) % n) fold.train.push_back(sessions[j]);
    }
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

FoldPlan make_folds(const Manifest& manifest, DatasetKind kind) {
  const auto sessions = manifest.sessions();
  const auto expect = [&](std::size_t n) {
    if (sessions.size() != n) {
      throw Error(ErrorCode::session_count_mismatch,
                  fmt::format("{} expects {} sessions, manifest has {}", to_string(kind), n, sessions.size()));
    }
  };
  switch (kind) {
    case DatasetKind::iemocap: expect(5); return make_session_folds(sessions);
    case DatasetKind::msp_improv: expect(6); return make_session_folds(sessions);
    case DatasetKind::slurp: {
      const auto has = [&](const std::string& s) { return std::find(sessions.begin(), sessions.end(), s) != sessions.end(); };
      if (!has("test") || !has("devel")) {
        throw Error(ErrorCode::session_count_mismatch, "slurp manifests need 'devel' and 'test' splits");
      }
      Fold fold{{"test"}, {"devel"}, {}};
      for (const auto& s : sessions) {
        if (s != "test" && s != "devel") fold.train.push_back(s);
      }
      if (fold.train.empty()) throw Error(ErrorCode::session_count_mismatch, "slurp manifest has no training split");
      return FoldPlan{{std::move(fold)}};
    }
    case DatasetKind::synthetic:
      throw Error(ErrorCode::session_count_mismatch, "synthetic manifests have no session structure");
  }
  return {};
}

FoldSplit split_fold(const Manifest& manifest, const Fold& fold) {
  const auto in = [](const std::vector<std::string>& set) {
    return [&set](const UtteranceRecord& r) { return std::find(set.begin(), set.end(), r.session_id) != set.end(); };
  };
  return {manifest.filter(in(fold.train)), manifest.filter(in(fold.val)), manifest.filter(in(fold.test))};
}

Manifest subsample(const Manifest& manifest, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw Error(ErrorCode::ratio_out_of_range, fmt::format("ratio {} outside (0, 1]", ratio));
  }
  std::map<std::string, std::vector<std::size_t>> by_label;
  const auto& records = manifest.records();
  for (std::size_t i = 0; i < records.size(); ++i) by_label[records[i].label].push_back(i);

  std::vector<bool> selected(records.size(), false);
  for (const auto& [label, indices] : by_label) {
    Engine engine(derive_seed(seed, label));
    const auto order = permutation(indices.size(), engine);
    // The epsilon absorbs products like 0.1 * 30 = 3.0000000000000004.
    const auto take = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(indices.size()) - 1e-9));
    for (std::size_t k = 0; k < std::min(take, indices.size()); ++k) selected[indices[order[k]]] = true;
  }
  std::size_t i = 0;
  return manifest.filter([&](const UtteranceRecord&) { return selected[i++]; });
}

HoldoutSplit holdout_split(const Manifest& manifest, double val_fraction, std::uint64_t seed) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw Error(ErrorCode::ratio_out_of_range, fmt::format("validation fraction {} outside (0, 1)", val_fraction));
  }
  std::map<std::string, std::vector<std::size_t>> by_label;
  const auto& records = manifest.records();
  for (std::size_t i = 0; i < records.size(); ++i) by_label[records[i].label].push_back(i);

  std::vector<bool> is_val(records.size(), false);
  for (const auto& [label, indices] : by_label) {
    if (indices.size() < 2) continue;
    Engine engine(derive_seed(seed, "holdout:" + label));
    const auto order = permutation(indices.size(), engine);
    auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(indices.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, indices.size() - 1);
    for (std::size_t k = 0; k < n_val; ++k) is_val[indices[order[k]]] = true;
  }
  std::size_t i = 0;
  std::size_t j = 0;
  return {manifest.filter([&](const UtteranceRecord&) { return !is_val[i++]; }),
          manifest.filter([&](const UtteranceRecord&) { return is_val[j++]; })};
}

double max_duration_seconds(TaskKind task) { return task == TaskKind::emotion ? 6.0 : 3.0; }

std::vector<float> standardize_audio(const fs::path& audio, TaskKind task) {
  const Waveform wave = postprocess_waveform(read_wav(audio));
  auto samples = wave.samples;
  const auto cap = static_cast<std::size_t>(max_duration_seconds(task) * kTargetSampleRate);
  if (samples.size() > cap) samples.resize(cap);
  return samples;
}

}  // namespace asu
