#include "asu/error.hpp"

namespace asu {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_config: return "invalid-config";
    case ErrorCode::unknown_label: return "unknown-label";
    case ErrorCode::invalid_task: return "invalid-task";
    case ErrorCode::backend_failure: return "backend-failure";
    case ErrorCode::quota_unmet: return "quota-unmet";
    case ErrorCode::empty_pool: return "empty-pool";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::empty_waveform: return "empty-waveform";
    case ErrorCode::layout: return "layout";
    case ErrorCode::empty_after_filtering: return "empty-after-filtering";
    case ErrorCode::session_count_mismatch: return "session-count-mismatch";
    case ErrorCode::ratio_out_of_range: return "ratio-out-of-range";
    case ErrorCode::unreadable_audio: return "unreadable-audio";
    case ErrorCode::input_too_short: return "input-too-short";
    case ErrorCode::unknown_target: return "unknown-target";
    case ErrorCode::length_mismatch: return "length-mismatch";
    case ErrorCode::empty_frame: return "empty-frame";
    case ErrorCode::non_finite_logits: return "non-finite-logits";
    case ErrorCode::empty_manifest: return "empty-manifest";
    case ErrorCode::label_mismatch: return "label-mismatch";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::incompatible_checkpoint: return "incompatible-checkpoint";
    case ErrorCode::out_of_range: return "out-of-range";
    case ErrorCode::all_rows_zero: return "all-rows-zero";
    case ErrorCode::empty_list: return "empty-list";
    case ErrorCode::empty_results: return "empty-results";
    case ErrorCode::io: return "io";
    case ErrorCode::parse: return "parse";
  }
  return "unknown";
}

}  // namespace asu
