#include "asu/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <fmt/format.h>

#include "asu/error.hpp"

namespace asu {

namespace fs = std::filesystem;

std::string_view to_string(Origin origin) { return origin == Origin::real ? "real" : "synthetic"; }

Origin parse_origin(std::string_view text) {
  if (text == "real") return Origin::real;
  if (text == "synthetic") return Origin::synthetic;
  throw Error(ErrorCode::parse, fmt::format("unknown origin '{}'", text));
}

Manifest::Manifest(TaskKind task, std::vector<UtteranceRecord> records, fs::path root)
    : task_(task), records_(std::move(records)), root_(std::move(root)) {
  std::unordered_set<std::string> ids;
  for (const auto& r : records_) {
    if (!ids.insert(r.utt_id).second) {
      throw Error(ErrorCode::invalid_config, fmt::format("duplicate utt_id '{}'", r.utt_id));
    }
    if (!(r.duration > 0.0) || !std::isfinite(r.duration)) {
      throw Error(ErrorCode::invalid_config, fmt::format("utterance '{}' has non-positive duration", r.utt_id));
    }
  }
}

fs::path Manifest::resolve_audio(const UtteranceRecord& record) const {
  fs::path ref(record.audio_ref);
  if (ref.is_absolute() || root_.empty()) return ref;
  return root_ / ref;
}

std::set<std::string> Manifest::labels() const {
  std::set<std::string> out;
  for (const auto& r : records_) out.insert(r.label);
  return out;
}

std::vector<std::string> Manifest::sessions() const {
  std::set<std::string> unique;
  for (const auto& r : records_) unique.insert(r.session_id);
  return {unique.begin(), unique.end()};
}

std::set<std::string> Manifest::speakers() const {
  std::set<std::string> out;
  for (const auto& r : records_) out.insert(r.speaker_id);
  return out;
}

Manifest Manifest::rebased(const fs::path& new_root) const {
  auto records = records_;
  for (auto& r : records) {
    const auto absolute = fs::absolute(resolve_audio(r)).lexically_normal();
    const auto relative = absolute.lexically_relative(fs::absolute(new_root).lexically_normal());
    r.audio_ref = relative.empty() ? absolute.generic_string() : relative.generic_string();
  }
  return Manifest(task_, std::move(records), new_root);
}

std::string manifest_header_line(TaskKind task) {
  nlohmann::ordered_json header;
  header["schema"] = kManifestSchema;
  header["task"] = to_string(task);
  return header.dump();
}

std::string manifest_record_line(const UtteranceRecord& r) {
  nlohmann::ordered_json j;
  j["utt_id"] = r.utt_id;
  j["audio_ref"] = r.audio_ref;
  j["label"] = r.label;
  j["speaker_id"] = r.speaker_id;
  j["session_id"] = r.session_id;
  j["duration"] = r.duration;
  j["origin"] = to_string(r.origin);
  return j.dump();
}

void write_manifest(const fs::path& path, const Manifest& manifest, const nlohmann::json& metadata) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, fmt::format("cannot write '{}'", path.string()));
  out << manifest_header_line(manifest.task()) << '\n';
  for (const auto& r : manifest.records()) out << manifest_record_line(r) << '\n';
  if (!out) throw Error(ErrorCode::io, fmt::format("short write to '{}'", path.string()));

  const fs::path meta_path = path.string() + ".meta.json";
  if (!metadata.is_null() && !metadata.empty()) {
    std::ofstream meta(meta_path, std::ios::trunc);
    meta << metadata.dump(2) << '\n';
  } else if (fs::exists(meta_path)) {
    fs::remove(meta_path);
  }
}

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, fmt::format("cannot read manifest '{}'", path.string()));
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::parse, fmt::format("'{}' is empty", path.string()));

  TaskKind task = TaskKind::emotion;
  try {
    const auto header = nlohmann::json::parse(line);
    const int schema = header.at("schema").get<int>();
    if (schema != kManifestSchema) {
      throw Error(ErrorCode::parse, fmt::format("unsupported manifest schema {}", schema));
    }
    task = parse_task_kind(header.at("task").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, fmt::format("{}: bad header: {}", path.string(), e.what()));
  }

  std::vector<UtteranceRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      records.push_back({j.at("utt_id").get<std::string>(), j.at("audio_ref").get<std::string>(),
                         j.at("label").get<std::string>(), j.at("speaker_id").get<std::string>(),
                         j.at("session_id").get<std::string>(), j.at("duration").get<double>(),
                         parse_origin(j.at("origin").get<std::string>())});
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::parse, fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  return Manifest(task, std::move(records), path.parent_path());
}

nlohmann::json read_manifest_metadata(const fs::path& path) {
  const fs::path meta_path = path.string() + ".meta.json";
  if (!fs::exists(meta_path)) return nlohmann::json::object();
  std::ifstream in(meta_path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, fmt::format("{}: {}", meta_path.string(), e.what()));
  }
}

}  // namespace asu
