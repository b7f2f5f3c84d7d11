#pragma once

#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "canfuse/detail/text.hpp"
#include "canfuse/error.hpp"

namespace canfuse {

// One frame reference inside a recording segment. Timestamps are
// segment-local out of load_manifest and unified after concatenate_segments.
struct FrameRecord {
  int segment_id = 0;       // >= 1
  long frame_index = 0;     // >= 0, strictly increasing within a segment
  double timestamp_ms = 0.0;
  std::string path;

  bool operator==(const FrameRecord&) const = default;
};

inline constexpr std::string_view kManifestHeader = "segment_id,frame_index,timestamp_ms,path";

inline std::vector<FrameRecord> load_manifest(std::istream& in) {
  std::string line;
  if (!detail::next_line(in, line) || line != kManifestHeader) {
    fail(errc::missing_header,
         "manifest must start with header '" + std::string(kManifestHeader) + "'", 1);
  }
  std::vector<FrameRecord> records;
  std::map<int, long> last_index;
  long line_no = 1;
  while (detail::next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != 4) {
      fail(errc::malformed_line,
           "line " + std::to_string(line_no) + ": expected 4 fields", line_no);
    }
    const auto seg = detail::parse_real(fields[0]);
    const auto idx = detail::parse_real(fields[1]);
    const auto ts = detail::parse_real(fields[2]);
    if (!seg || !idx || !ts || fields[3].empty() ||
        *seg != static_cast<int>(*seg) || *idx != static_cast<long>(*idx)) {
      fail(errc::malformed_line,
           "line " + std::to_string(line_no) + ": unparsable field", line_no);
    }
    FrameRecord rec{static_cast<int>(*seg), static_cast<long>(*idx), *ts,
                    std::string(fields[3])};
    if (rec.segment_id < 1 || rec.frame_index < 0) {
      fail(errc::malformed_line,
           "line " + std::to_string(line_no) + ": segment_id must be >= 1, frame_index >= 0",
           line_no);
    }
    const auto it = last_index.find(rec.segment_id);
    if (it != last_index.end() && rec.frame_index <= it->second) {
      fail(errc::non_monotonic_frame_index,
           "segment " + std::to_string(rec.segment_id) +
               ": frame_index not strictly increasing at line " + std::to_string(line_no),
           line_no);
    }
    last_index[rec.segment_id] = rec.frame_index;
    records.push_back(std::move(rec));
  }
  return records;
}

inline void write_manifest(std::ostream& out, const std::vector<FrameRecord>& records) {
  out << kManifestHeader << '\n';
  char buf[64];
  for (const auto& r : records) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.timestamp_ms);
    out << r.segment_id << ',' << r.frame_index << ',' << buf << ',' << r.path << '\n';
  }
}

// Places consecutive segments on one clock. Segment k is shifted by the
// shifted end of segment k-1 plus gap_ms, mirroring a camera that stops
// recording during each save while the timeline keeps running.
inline std::vector<FrameRecord> concatenate_segments(const std::vector<FrameRecord>& records,
                                                     double gap_ms) {
  if (records.empty()) fail(errc::empty_segment, "concatenate_segments: no records");

  // group, preserving order, and check ids are consecutive from 1
  std::vector<std::vector<FrameRecord>> segments;
  for (const auto& r : records) {
    if (segments.empty() || segments.back().back().segment_id != r.segment_id) {
      const int expected = static_cast<int>(segments.size()) + 1;
      if (r.segment_id != expected) {
        fail(errc::non_consecutive_segments,
             "expected segment " + std::to_string(expected) + ", got " +
                 std::to_string(r.segment_id));
      }
      segments.emplace_back();
    }
    segments.back().push_back(r);
  }
  for (const auto& seg : segments) {
    if (seg.empty()) fail(errc::empty_segment, "empty segment");
  }

  std::vector<FrameRecord> unified;
  unified.reserve(records.size());
  double shift = 0.0;
  double prev_end = 0.0;
  bool first_segment = true;
  for (const auto& seg : segments) {
    if (!first_segment) shift = prev_end + gap_ms;
    for (const auto& r : seg) {
      FrameRecord shifted = r;
      shifted.timestamp_ms += shift;
      if (!unified.empty() && shifted.timestamp_ms <= unified.back().timestamp_ms) {
        fail(errc::non_monotonic_timestamps,
             "unified timestamps not strictly increasing at segment " +
                 std::to_string(r.segment_id) + ", frame " + std::to_string(r.frame_index));
      }
      unified.push_back(std::move(shifted));
    }
    prev_end = unified.back().timestamp_ms;
    first_segment = false;
  }
  return unified;
}

}  // namespace canfuse
