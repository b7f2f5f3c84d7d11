#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "canfuse/detail/text.hpp"
#include "canfuse/error.hpp"

namespace canfuse {

// One asynchronous observation from the decoded CAN stream.
struct SignalUpdate {
  double timestamp_ms = 0.0;
  std::string signal;
  double value = 0.0;

  bool operator==(const SignalUpdate&) const = default;
};

// Dense per-tick vector of the five selected signals plus the label.
struct CanFeatureRow {
  double timestamp_ms = 0.0;
  double voltage = 0.0;         // V
  double current = 0.0;         // A
  double power = 0.0;           // kW
  double steering_speed = 0.0;  // deg/s
  double speed = 0.0;           // vehicle speed
  double steering_angle = 0.0;  // deg, supervision label

  bool operator==(const CanFeatureRow&) const = default;
};

using SignalSeries = std::vector<std::pair<double, double>>;  // (timestamp_ms, value)

inline constexpr std::string_view kCanLogHeader = "timestamp_ms,signal,value";
inline constexpr std::string_view kRowsHeader =
    "timestamp_ms,voltage,current,power,steering_speed,speed,steering_angle";

// Source signal names mapped onto CanFeatureRow fields, in field order.
struct SignalNames {
  std::string voltage = "Voltage";
  std::string current = "Current";
  std::string power = "Power";
  std::string steering_speed = "SteeringSpeed";
  std::string speed = "Speed";
  std::string steering_angle = "SteeringAngle";

  std::array<const std::string*, 6> ordered() const {
    return {&voltage, &current, &power, &steering_speed, &speed, &steering_angle};
  }

  std::set<std::string> as_set() const {
    return {voltage, current, power, steering_speed, speed, steering_angle};
  }
};

// --------------------------------------------------------------------------
// parsing
// --------------------------------------------------------------------------

inline std::vector<SignalUpdate> parse_can_log(std::istream& in) {
  std::string line;
  if (!detail::next_line(in, line) || line != kCanLogHeader) {
    fail(errc::missing_header,
         "CAN log must start with header '" + std::string(kCanLogHeader) + "'", 1);
  }
  std::vector<SignalUpdate> updates;
  long line_no = 1;
  while (detail::next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != 3) {
      fail(errc::malformed_line,
           "line " + std::to_string(line_no) + ": expected 3 fields, got " +
               std::to_string(fields.size()),
           line_no);
    }
    const auto ts = detail::parse_real(fields[0]);
    const auto value = detail::parse_real(fields[2]);
    if (!ts || fields[1].empty() || !value) {
      fail(errc::malformed_line,
           "line " + std::to_string(line_no) + ": unparsable field", line_no);
    }
    if (*ts < 0.0) {
      fail(errc::malformed_line,
           "line " + std::to_string(line_no) + ": negative timestamp", line_no);
    }
    if (!std::isfinite(*ts) || !std::isfinite(*value)) {
      fail(errc::non_finite_value,
           "line " + std::to_string(line_no) + ": non-finite value", line_no);
    }
    updates.push_back({*ts, std::string(fields[1]), *value});
  }
  return updates;
}

// Inverse of parse_can_log; %.17g keeps the round trip field-identical.
inline void write_can_log(std::ostream& out, const std::vector<SignalUpdate>& updates) {
  out << kCanLogHeader << '\n';
  char buf[64];
  for (const auto& u : updates) {
    std::snprintf(buf, sizeof(buf), "%.17g", u.timestamp_ms);
    out << buf << ',' << u.signal << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", u.value);
    out << buf << '\n';
  }
}

// --------------------------------------------------------------------------
// selection and densification
// --------------------------------------------------------------------------

// Keeps only the wanted signals, one ordered series per name. Every wanted
// name gets an entry even when no update carries it. Out-of-order or
// duplicate timestamps within a retained signal are capture faults and are
// rejected rather than sorted away.
inline std::map<std::string, SignalSeries> select_signals(
    const std::vector<SignalUpdate>& updates, const std::set<std::string>& wanted) {
  if (wanted.empty()) fail(errc::invalid_argument, "select_signals: empty wanted set");
  std::map<std::string, SignalSeries> series;
  for (const auto& name : wanted) series[name];
  for (const auto& u : updates) {
    const auto it = series.find(u.signal);
    if (it == series.end()) continue;
    it->second.emplace_back(u.timestamp_ms, u.value);
  }
  for (const auto& [name, s] : series) {
    for (std::size_t i = 1; i < s.size(); ++i) {
      if (s[i].first <= s[i - 1].first) {
        fail(errc::non_monotonic_series,
             "signal '" + name + "' not strictly increasing at t=" +
                 std::to_string(s[i].first));
      }
    }
  }
  return series;
}

namespace detail {

// last update at or before t; series non-empty and sorted
inline double hold_value(const SignalSeries& s, double t, std::size_t& cursor) {
  while (cursor + 1 < s.size() && s[cursor + 1].first <= t) ++cursor;
  return s[cursor].second;
}

}  // namespace detail

// Forward-fills the six series onto a fixed tick grid covering
// [t_start, t_end). Row k sits at t_start + k * tick_ms.
inline std::vector<CanFeatureRow> sample_and_hold(
    const std::map<std::string, SignalSeries>& series_map, double tick_ms,
    double t_start, double t_end, const SignalNames& names = {}) {
  if (tick_ms <= 0.0) fail(errc::invalid_argument, "sample_and_hold: tick_ms must be > 0");
  if (!(t_start < t_end)) fail(errc::invalid_argument, "sample_and_hold: t_start must be < t_end");

  const auto ordered = names.ordered();
  std::array<const SignalSeries*, 6> series{};
  for (std::size_t f = 0; f < 6; ++f) {
    const auto it = series_map.find(*ordered[f]);
    if (it == series_map.end() || it->second.empty()) {
      fail(errc::empty_series, "no updates for signal '" + *ordered[f] + "'");
    }
    if (it->second.front().first > t_start) {
      fail(errc::no_initial_value,
           "signal '" + *ordered[f] + "' starts after t_start");
    }
    series[f] = &it->second;
  }

  // ceil with a small guard so an exact multiple of tick_ms is not
  // inflated by floating-point residue
  const double span = (t_end - t_start) / tick_ms;
  const auto count = static_cast<std::size_t>(std::ceil(span - 1e-9));

  std::vector<CanFeatureRow> rows(count);
  std::array<std::size_t, 6> cursor{};
  for (std::size_t k = 0; k < count; ++k) {
    const double t = t_start + static_cast<double>(k) * tick_ms;
    CanFeatureRow& r = rows[k];
    r.timestamp_ms = t;
    r.voltage = detail::hold_value(*series[0], t, cursor[0]);
    r.current = detail::hold_value(*series[1], t, cursor[1]);
    r.power = detail::hold_value(*series[2], t, cursor[2]);
    r.steering_speed = detail::hold_value(*series[3], t, cursor[3]);
    r.speed = detail::hold_value(*series[4], t, cursor[4]);
    r.steering_angle = detail::hold_value(*series[5], t, cursor[5]);
  }
  return rows;
}

// --------------------------------------------------------------------------
// validation
// --------------------------------------------------------------------------

struct ValidationReport {
  bool pass = false;
  double max_residual_kw = 0.0;
  std::vector<double> residuals;        // |power - voltage*current/1000| per row
  std::vector<std::size_t> offenders;   // rows whose residual exceeds tol
};

// Checks the kW identity power = voltage * current / 1000 on every row.
inline ValidationReport validate_rows(const std::vector<CanFeatureRow>& rows,
                                      double tol_kw) {
  if (rows.empty()) fail(errc::empty_input, "validate_rows: no rows");
  if (tol_kw <= 0.0) fail(errc::invalid_argument, "validate_rows: tol_kw must be > 0");
  ValidationReport report;
  report.residuals.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const double residual = std::abs(r.power - r.voltage * r.current / 1000.0);
    report.residuals.push_back(residual);
    if (residual > report.max_residual_kw) report.max_residual_kw = residual;
    if (residual > tol_kw) report.offenders.push_back(i);
  }
  report.pass = report.offenders.empty();
  return report;
}

// --------------------------------------------------------------------------
// dense row CSV (decode output, sync input)
// --------------------------------------------------------------------------

inline void write_rows_csv(std::ostream& out, const std::vector<CanFeatureRow>& rows) {
  out << kRowsHeader << '\n';
  char buf[64];
  for (const auto& r : rows) {
    const double fields[7] = {r.timestamp_ms, r.voltage,  r.current,      r.power,
                              r.steering_speed, r.speed,  r.steering_angle};
    for (int f = 0; f < 7; ++f) {
      std::snprintf(buf, sizeof(buf), "%.17g", fields[f]);
      out << buf << (f == 6 ? '\n' : ',');
    }
  }
}

inline std::vector<CanFeatureRow> read_rows_csv(std::istream& in) {
  std::string line;
  if (!detail::next_line(in, line) || line != kRowsHeader) {
    fail(errc::missing_header,
         "rows CSV must start with header '" + std::string(kRowsHeader) + "'", 1);
  }
  std::vector<CanFeatureRow> rows;
  long line_no = 1;
  while (detail::next_line(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != 7) {
      fail(errc::malformed_line,
           "line " + std::to_string(line_no) + ": expected 7 fields", line_no);
    }
    double v[7];
    for (int f = 0; f < 7; ++f) {
      const auto parsed = detail::parse_real(fields[f]);
      if (!parsed || !std::isfinite(*parsed)) {
        fail(errc::malformed_line,
             "line " + std::to_string(line_no) + ": unparsable field", line_no);
      }
      v[f] = *parsed;
    }
    if (!rows.empty() && v[0] <= rows.back().timestamp_ms) {
      fail(errc::non_monotonic_series,
           "line " + std::to_string(line_no) + ": timestamps must strictly increase",
           line_no);
    }
    rows.push_back({v[0], v[1], v[2], v[3], v[4], v[5], v[6]});
  }
  return rows;
}

}  // namespace canfuse
