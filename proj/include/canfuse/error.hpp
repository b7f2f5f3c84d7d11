#pragma once

#include <stdexcept>
#include <string>

namespace canfuse {

// Every failure the library reports, matched by tests on the code rather
// than on message text.
enum class errc {
  // parsing / file formats
  missing_header,
  malformed_line,
  non_finite_value,
  unsupported_format,
  truncated_file,
  bad_maxval,
  bad_magic,
  version_mismatch,
  // series / stream structure
  empty_input,
  empty_series,
  no_initial_value,
  non_monotonic_series,
  non_monotonic_frame_index,
  non_monotonic_timestamps,
  non_consecutive_segments,
  empty_segment,
  zero_factor,
  // sync
  no_landmark,
  too_few_frames,
  empty_frames,
  empty_rows,
  unknown_group,
  empty_split,
  // geometry / tensors
  zero_dimension,
  shape_mismatch,
  kernel_larger_than_input,
  geometry_mismatch,
  config_mismatch,
  // model / experiment
  missing_can_features,
  unexpected_can_features,
  variant_mismatch,
  bad_group_count,
  diverged_loss,
  invalid_argument,
};

class Error : public std::runtime_error {
public:
  Error(errc code, std::string message, long line = -1)
      : std::runtime_error(std::move(message)), code_(code), line_(line) {}

  errc code() const noexcept { return code_; }
  // 1-based source line for parse errors, -1 when not applicable
  long line() const noexcept { return line_; }

private:
  errc code_;
  long line_;
};

[[noreturn]] inline void fail(errc code, const std::string& message, long line = -1) {
  throw Error(code, message, line);
}

}  // namespace canfuse
