#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "asu/task_registry.hpp"

namespace asu {

inline constexpr int kManifestSchema = 1;

enum class Origin { real, synthetic };
std::string_view to_string(Origin origin);
Origin parse_origin(std::string_view text);

struct UtteranceRecord {
  std::string utt_id;
  std::string audio_ref;
  std::string label;
  std::string speaker_id;
  std::string session_id;
  double duration = 0.0;
  Origin origin = Origin::real;

  bool operator==(const UtteranceRecord&) const = default;
};

/// Immutable-after-construction list of records. Relative audio_ref values
/// resolve against root().
class Manifest {
 public:
  Manifest(TaskKind task, std::vector<UtteranceRecord> records, std::filesystem::path root = {});

  TaskKind task() const { return task_; }
  const std::vector<UtteranceRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::filesystem::path& root() const { return root_; }

  std::filesystem::path resolve_audio(const UtteranceRecord& record) const;
  std::set<std::string> labels() const;
  std::vector<std::string> sessions() const;  // sorted, unique
  std::set<std::string> speakers() const;

  /// Same task and root, records filtered by predicate (order preserved).
  template <typename Pred>
  Manifest filter(Pred&& keep) const {
    std::vector<UtteranceRecord> kept;
    for (const auto& r : records_) {
      if (keep(r)) kept.push_back(r);
    }
    return Manifest(task_, std::move(kept), root_);
  }

  /// Records rebased so audio_ref resolves identically from `new_root`.
  Manifest rebased(const std::filesystem::path& new_root) const;

 private:
  TaskKind task_;
  std::vector<UtteranceRecord> records_;
  std::filesystem::path root_;
};

std::string manifest_header_line(TaskKind task);
std::string manifest_record_line(const UtteranceRecord& record);

/// Writes header + one line per record. Extra metadata, when non-empty, goes to
/// a `<path>.meta.json` sidecar.
void write_manifest(const std::filesystem::path& path, const Manifest& manifest,
                    const nlohmann::json& metadata = nlohmann::json::object());
/// The returned manifest's root is the file's parent directory.
Manifest read_manifest(const std::filesystem::path& path);
nlohmann::json read_manifest_metadata(const std::filesystem::path& path);

}  // namespace asu
