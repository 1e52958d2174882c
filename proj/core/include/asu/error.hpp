#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace asu {

enum class ErrorCode {
  invalid_config,
  unknown_label,
  invalid_task,
  backend_failure,
  quota_unmet,
  empty_pool,
  dimension_mismatch,
  empty_waveform,
  layout,
  empty_after_filtering,
  session_count_mismatch,
  ratio_out_of_range,
  unreadable_audio,
  input_too_short,
  unknown_target,
  length_mismatch,
  empty_frame,
  non_finite_logits,
  empty_manifest,
  label_mismatch,
  divergence,
  incompatible_checkpoint,
  out_of_range,
  all_rows_zero,
  empty_list,
  empty_results,
  io,
  parse,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace asu
