#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <vector>

#include "canfuse/canlog.hpp"
#include "canfuse/error.hpp"
#include "canfuse/image.hpp"
#include "canfuse/videostream.hpp"

namespace canfuse {

// One training example after the streams are joined.
struct SyncedSample {
  double timestamp_ms = 0.0;
  Image image;  // model input geometry, pixels in [0,1]
  std::array<double, 5> can_features{};  // voltage, current, power, steering_speed, speed
  double steering_angle = 0.0;           // target, degrees
  int group_id = 0;                      // 1..5

  bool operator==(const SyncedSample&) const = default;
};

inline constexpr int kMinGroupId = 1;
inline constexpr int kMaxGroupId = 5;

struct TimedFrame {
  FrameRecord record;
  Image image;
};

// --------------------------------------------------------------------------
// downsampling
// --------------------------------------------------------------------------

// Block-mean compression: each disjoint block of `factor` rows collapses to
// one row of per-field arithmetic means (timestamp included). A trailing
// partial block is dropped.
inline std::vector<CanFeatureRow> downsample(const std::vector<CanFeatureRow>& rows,
                                             std::size_t factor) {
  if (rows.empty()) fail(errc::empty_input, "downsample: no rows");
  if (factor == 0) fail(errc::zero_factor, "downsample: factor must be >= 1");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].timestamp_ms <= rows[i - 1].timestamp_ms) {
      fail(errc::non_monotonic_series, "downsample: timestamps must strictly increase");
    }
  }
  if (factor == 1) return rows;

  const std::size_t blocks = rows.size() / factor;
  std::vector<CanFeatureRow> out;
  out.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    CanFeatureRow mean{};
    for (std::size_t i = b * factor; i < (b + 1) * factor; ++i) {
      const auto& r = rows[i];
      mean.timestamp_ms += r.timestamp_ms;
      mean.voltage += r.voltage;
      mean.current += r.current;
      mean.power += r.power;
      mean.steering_speed += r.steering_speed;
      mean.speed += r.speed;
      mean.steering_angle += r.steering_angle;
    }
    const double inv = 1.0 / static_cast<double>(factor);
    mean.timestamp_ms *= inv;
    mean.voltage *= inv;
    mean.current *= inv;
    mean.power *= inv;
    mean.steering_speed *= inv;
    mean.speed *= inv;
    mean.steering_angle *= inv;
    out.push_back(mean);
  }
  return out;
}

// --------------------------------------------------------------------------
// landmark detection
// --------------------------------------------------------------------------

namespace detail {

// Longest maximal run of flagged positions with length >= min_run, earliest
// on ties. Returns the run's start index or npos.
inline std::size_t longest_run(const std::vector<bool>& flagged, std::size_t min_run) {
  std::size_t best_start = static_cast<std::size_t>(-1);
  std::size_t best_len = 0;
  std::size_t i = 0;
  while (i < flagged.size()) {
    if (!flagged[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < flagged.size() && flagged[j]) ++j;
    const std::size_t len = j - i;
    if (len >= min_run && len > best_len) {
      best_len = len;
      best_start = i;
    }
    i = j;
  }
  return best_start;
}

}  // namespace detail

// Timestamp of the first row of the longest stationary run (|speed| <= eps,
// at least min_run rows).
inline double detect_zero_speed_landmark(const std::vector<CanFeatureRow>& rows,
                                         double eps, std::size_t min_run) {
  if (rows.empty()) fail(errc::empty_input, "detect_zero_speed_landmark: no rows");
  if (eps < 0.0) fail(errc::invalid_argument, "detect_zero_speed_landmark: eps must be >= 0");
  if (min_run < 1) fail(errc::invalid_argument, "detect_zero_speed_landmark: min_run must be >= 1");

  std::vector<bool> still(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) still[i] = std::abs(rows[i].speed) <= eps;
  const std::size_t start = detail::longest_run(still, min_run);
  if (start == static_cast<std::size_t>(-1)) {
    fail(errc::no_landmark, "no zero-speed run of length >= " + std::to_string(min_run));
  }
  return rows[start].timestamp_ms;
}

// mean absolute pixel difference between two equally shaped frames
inline double frame_difference(const Image& a, const Image& b) {
  if (a.height != b.height || a.width != b.width || a.channels != b.channels) {
    fail(errc::geometry_mismatch, "frame_difference: shape mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) sum += std::abs(a.pixels[i] - b.pixels[i]);
  return sum / static_cast<double>(a.pixels.size());
}

// Timestamp of the first frame of the longest run of consecutive frame
// differences <= delta_thresh (at least min_run differences).
inline double detect_still_frames(const std::vector<TimedFrame>& frames,
                                  double delta_thresh, std::size_t min_run) {
  if (frames.size() < 2) fail(errc::too_few_frames, "detect_still_frames: need >= 2 frames");
  if (delta_thresh <= 0.0) {
    fail(errc::invalid_argument, "detect_still_frames: delta_thresh must be > 0");
  }
  if (min_run < 1) fail(errc::invalid_argument, "detect_still_frames: min_run must be >= 1");

  std::vector<bool> still(frames.size() - 1);
  for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
    still[i] = frame_difference(frames[i].image, frames[i + 1].image) <= delta_thresh;
  }
  const std::size_t start = detail::longest_run(still, min_run);
  if (start == static_cast<std::size_t>(-1)) {
    fail(errc::no_landmark, "no still run of length >= " + std::to_string(min_run));
  }
  return frames[start].record.timestamp_ms;
}

// Offset that maps CAN timestamps onto the video clock:
// video_t = can_t + offset.
inline double align(double can_landmark_ms, double video_landmark_ms) {
  if (!std::isfinite(can_landmark_ms) || !std::isfinite(video_landmark_ms)) {
    fail(errc::invalid_argument, "align: landmarks must be finite");
  }
  return video_landmark_ms - can_landmark_ms;
}

// --------------------------------------------------------------------------
// join and split
// --------------------------------------------------------------------------

struct JoinResult {
  std::vector<SyncedSample> samples;
  std::size_t matched = 0;
  std::size_t dropped = 0;  // frames with no CAN row within tolerance
};

// Attaches to each frame the CAN row nearest on the video clock
// (|frame_t - (row_t + offset)|), provided it lies within tol_ms; ties take
// the earlier row. group_map sends segment_id to a group id in 1..5; an
// empty map is the identity.
inline JoinResult join(const std::vector<TimedFrame>& frames,
                       const std::vector<CanFeatureRow>& rows, double offset_ms,
                       double tol_ms, const std::map<int, int>& group_map = {}) {
  if (frames.empty()) fail(errc::empty_frames, "join: no frames");
  if (rows.empty()) fail(errc::empty_rows, "join: no rows");
  if (tol_ms <= 0.0) fail(errc::invalid_argument, "join: tol_ms must be > 0");

  JoinResult result;
  result.samples.reserve(frames.size());
  std::size_t cursor = 0;
  for (const auto& frame : frames) {
    const double t = frame.record.timestamp_ms;
    // rows sorted: advance while the next row is at least as close
    while (cursor + 1 < rows.size() &&
           std::abs(rows[cursor + 1].timestamp_ms + offset_ms - t) <
               std::abs(rows[cursor].timestamp_ms + offset_ms - t)) {
      ++cursor;
    }
    const CanFeatureRow& row = rows[cursor];
    if (std::abs(row.timestamp_ms + offset_ms - t) > tol_ms) {
      ++result.dropped;
      continue;
    }
    int group = frame.record.segment_id;
    if (!group_map.empty()) {
      const auto it = group_map.find(frame.record.segment_id);
      if (it == group_map.end()) {
        fail(errc::unknown_group,
             "no group mapping for segment " + std::to_string(frame.record.segment_id));
      }
      group = it->second;
    }
    if (group < kMinGroupId || group > kMaxGroupId) {
      fail(errc::unknown_group, "group id " + std::to_string(group) + " outside 1..5");
    }
    SyncedSample s;
    s.timestamp_ms = t;
    s.image = frame.image;
    s.can_features = {row.voltage, row.current, row.power, row.steering_speed, row.speed};
    s.steering_angle = row.steering_angle;
    s.group_id = group;
    result.samples.push_back(std::move(s));
    ++result.matched;
  }
  return result;
}

struct SplitResult {
  std::vector<SyncedSample> train;
  std::vector<SyncedSample> val;
};

// Partition by group membership, preserving order inside each side.
inline SplitResult split_groups(const std::vector<SyncedSample>& samples,
                                const std::set<int>& val_groups) {
  if (samples.empty()) fail(errc::empty_input, "split_groups: no samples");
  if (val_groups.empty()) fail(errc::invalid_argument, "split_groups: empty val_groups");

  std::set<int> present;
  for (const auto& s : samples) present.insert(s.group_id);
  for (const int g : val_groups) {
    if (!present.contains(g)) {
      fail(errc::unknown_group, "val group " + std::to_string(g) + " not present");
    }
  }

  SplitResult result;
  for (const auto& s : samples) {
    (val_groups.contains(s.group_id) ? result.val : result.train).push_back(s);
  }
  if (result.train.empty() || result.val.empty()) {
    fail(errc::empty_split, "split_groups: one side of the split is empty");
  }
  return result;
}

// JSON-facing summary of a sync run.
struct SyncReport {
  double offset_ms = 0.0;
  std::size_t matched = 0;
  std::size_t dropped = 0;
  std::map<int, std::size_t> groups;  // group id -> sample count
};

}  // namespace canfuse
