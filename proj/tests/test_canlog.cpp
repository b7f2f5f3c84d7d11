#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "canfuse/canlog.hpp"
#include "canfuse/rng.hpp"

using namespace canfuse;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<SignalUpdate> parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_can_log(in);
}

// the five-signal sample block, battery power in kW
const std::vector<CanFeatureRow> kSampleRows = {
    {0, 400.368000, -110.420000, -44.208831, 2.583333, 35.790981, 0.0},
    {1, 400.584000, -112.580000, -45.097740, 0.000000, 35.592142, 0.0},
    {2, 400.810000, -113.600000, -45.532016, 2.750000, 35.492723, 0.0},
    {3, 401.810000, -119.300000, -47.935933, 6.750000, 34.647658, 0.0},
    {4, 401.620000, -118.950000, -47.772712, 8.500000, 34.597948, 0.0},
    {5, 401.847500, -119.125000, -47.870120, 9.250000, 34.548238, 0.0},
};

}  // namespace

TEST_CASE("parse_can_log reads data lines in order") {
  const auto updates = parse_text("timestamp_ms,signal,value\n1000,Speed,35.790981\n");
  REQUIRE(updates.size() == 1);
  CHECK(updates[0].timestamp_ms == 1000.0);
  CHECK(updates[0].signal == "Speed");
  CHECK(updates[0].value == 35.790981);
}

TEST_CASE("parse_can_log accepts an empty data section") {
  CHECK(parse_text("timestamp_ms,signal,value\n").empty());
}

TEST_CASE("parse_can_log rejects wrong field counts with the line number") {
  try {
    parse_text("timestamp_ms,signal,value\n1000,Speed\n");
    FAIL("expected malformed_line");
  } catch (const Error& e) {
    CHECK(e.code() == errc::malformed_line);
    CHECK(e.line() == 2);
  }
}

TEST_CASE("parse_can_log rejects a missing or wrong header") {
  CHECK_THROWS_AS(parse_text("time,signal,value\n1,Speed,2\n"), Error);
  try {
    parse_text("");
    FAIL("expected missing_header");
  } catch (const Error& e) {
    CHECK(e.code() == errc::missing_header);
  }
}

TEST_CASE("parse_can_log rejects non-finite and unparsable values") {
  try {
    parse_text("timestamp_ms,signal,value\n1,Speed,inf\n");
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK((e.code() == errc::non_finite_value || e.code() == errc::malformed_line));
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_text("timestamp_ms,signal,value\n1,Speed,abc\n"), Error);
  CHECK_THROWS_AS(parse_text("timestamp_ms,signal,value\n-5,Speed,1\n"), Error);
  CHECK_THROWS_AS(parse_text("timestamp_ms,signal,value\n1,,1\n"), Error);
}

TEST_CASE("write_can_log then parse_can_log round-trips field-identically") {
  Rng rng(42);
  std::vector<SignalUpdate> updates;
  const char* names[] = {"Speed", "Voltage", "BatteryHeaterPower", "X_1"};
  double t = 0.0;
  for (int i = 0; i < 500; ++i) {
    t += rng.uniform(0.0, 3.0);
    updates.push_back({t, names[rng.below(4)],
                       rng.uniform(-1e6, 1e6) * std::pow(10.0, rng.uniform(-8.0, 8.0))});
  }
  std::ostringstream out;
  write_can_log(out, updates);
  const auto reparsed = parse_text(out.str());
  REQUIRE(reparsed.size() == updates.size());
  for (std::size_t i = 0; i < updates.size(); ++i) {
    CHECK(reparsed[i] == updates[i]);
  }
}

TEST_CASE("select_signals keeps exactly the wanted series") {
  // a 248-parameter stream, six of which matter downstream
  std::vector<SignalUpdate> updates;
  Rng rng(7);
  std::vector<std::string> names;
  for (int i = 0; i < 248; ++i) names.push_back("Param" + std::to_string(i));
  names[0] = "Voltage";
  names[1] = "Current";
  names[2] = "Power";
  names[3] = "SteeringSpeed";
  names[4] = "Speed";
  names[5] = "SteeringAngle";
  for (int t = 0; t < 1000; ++t) {
    updates.push_back({static_cast<double>(t), names[rng.below(248)], rng.uniform()});
  }
  const std::set<std::string> wanted = {"Voltage", "Current",       "Power",
                                        "SteeringSpeed", "Speed",   "SteeringAngle"};
  const auto series = select_signals(updates, wanted);
  CHECK(series.size() == 6);
  for (const auto& name : wanted) CHECK(series.contains(name));

  SECTION("selection never invents values") {
    std::size_t total = 0;
    for (const auto& [name, s] : series) {
      total += s.size();
      for (const auto& [t, v] : s) {
        const bool found = std::any_of(updates.begin(), updates.end(), [&](const auto& u) {
          return u.signal == name && u.timestamp_ms == t && u.value == v;
        });
        CHECK(found);
        if (!found) break;
      }
    }
    std::size_t expected = 0;
    for (const auto& u : updates) expected += wanted.contains(u.signal) ? 1 : 0;
    CHECK(total == expected);
  }
}

TEST_CASE("select_signals with all names is the identity selection") {
  std::vector<SignalUpdate> updates = {
      {0, "A", 1.0}, {1, "B", 2.0}, {2, "A", 3.0}, {3, "C", 4.0}};
  const auto series = select_signals(updates, {"A", "B", "C"});
  CHECK(series.size() == 3);
  CHECK(series.at("A").size() == 2);
  CHECK(series.at("B").size() == 1);
  CHECK(series.at("C").size() == 1);
}

TEST_CASE("select_signals returns an empty series for an absent signal") {
  std::vector<SignalUpdate> updates = {{0, "Voltage", 400.0}};
  const auto series = select_signals(updates, {"Speed"});
  REQUIRE(series.contains("Speed"));
  CHECK(series.at("Speed").empty());
}

TEST_CASE("select_signals rejects out-of-order timestamps within a signal") {
  std::vector<SignalUpdate> updates = {{5, "Speed", 1.0}, {3, "Speed", 2.0}};
  try {
    select_signals(updates, {"Speed"});
    FAIL("expected non_monotonic_series");
  } catch (const Error& e) {
    CHECK(e.code() == errc::non_monotonic_series);
  }
}

TEST_CASE("sample_and_hold forward-fills the most recent value") {
  std::map<std::string, SignalSeries> series;
  series["Voltage"] = {{0, 400.0}, {10, 401.0}};
  for (const char* name : {"Current", "Power", "SteeringSpeed", "Speed", "SteeringAngle"}) {
    series[name] = {{0, 1.0}};
  }
  const auto rows = sample_and_hold(series, 1.0, 0.0, 12.0);
  REQUIRE(rows.size() == 12);
  for (int k = 0; k < 10; ++k) CHECK(rows[k].voltage == 400.0);
  for (int k = 10; k < 12; ++k) CHECK(rows[k].voltage == 401.0);
}

TEST_CASE("sample_and_hold on constant series gives identical value fields") {
  std::map<std::string, SignalSeries> series;
  for (const char* name : {"Voltage", "Current", "Power", "SteeringSpeed", "Speed",
                           "SteeringAngle"}) {
    series[name] = {{0, 3.25}};
  }
  const auto rows = sample_and_hold(series, 2.5, 0.0, 25.0);
  REQUIRE(rows.size() == 10);
  for (const auto& r : rows) {
    CHECK(r.voltage == 3.25);
    CHECK(r.speed == 3.25);
    CHECK(r.steering_angle == 3.25);
  }
}

TEST_CASE("sample_and_hold output timestamps form an exact arithmetic progression") {
  std::map<std::string, SignalSeries> series;
  for (const char* name : {"Voltage", "Current", "Power", "SteeringSpeed", "Speed",
                           "SteeringAngle"}) {
    series[name] = {{0, 1.0}, {7, 2.0}, {13, 3.0}};
  }
  const double tick = 0.7;
  const auto rows = sample_and_hold(series, tick, 0.0, 20.0);
  REQUIRE(rows.size() == static_cast<std::size_t>(std::ceil(20.0 / tick - 1e-9)));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CHECK(rows[k].timestamp_ms == 0.0 + static_cast<double>(k) * tick);
  }
}

TEST_CASE("sample_and_hold rejects a series that starts after t_start") {
  std::map<std::string, SignalSeries> series;
  for (const char* name : {"Voltage", "Current", "Power", "SteeringSpeed",
                           "SteeringAngle"}) {
    series[name] = {{0, 1.0}};
  }
  series["Speed"] = {{5, 30.0}};
  try {
    sample_and_hold(series, 1.0, 0.0, 10.0);
    FAIL("expected no_initial_value");
  } catch (const Error& e) {
    CHECK(e.code() == errc::no_initial_value);
    CHECK(std::string(e.what()).find("Speed") != std::string::npos);
  }
}

TEST_CASE("sample_and_hold rejects an empty series") {
  std::map<std::string, SignalSeries> series;
  for (const char* name : {"Voltage", "Current", "Power", "SteeringSpeed", "Speed",
                           "SteeringAngle"}) {
    series[name] = {{0, 1.0}};
  }
  series["Power"].clear();
  try {
    sample_and_hold(series, 1.0, 0.0, 10.0);
    FAIL("expected empty_series");
  } catch (const Error& e) {
    CHECK(e.code() == errc::empty_series);
  }
}

TEST_CASE("validate_rows accepts the transcribed sample block at 0.01 kW") {
  const auto report = validate_rows(kSampleRows, 0.01);
  CHECK(report.pass);
  CHECK(report.offenders.empty());

  // hand oracle for the first row: 400.368 * (-110.420) / 1000 = -44.20863456
  const double expected = std::abs(-44.208831 - (400.368 * -110.420 / 1000.0));
  CHECK_THAT(report.residuals[0], WithinAbs(expected, 1e-15));
  CHECK_THAT(report.residuals[0], WithinAbs(0.00019644, 1e-9));
  CHECK(report.max_residual_kw <= 0.01);
}

TEST_CASE("validate_rows passes an exact kW identity with zero residual") {
  const std::vector<CanFeatureRow> rows = {{0, 100.0, 10.0, 1.0, 0, 0, 0}};
  const auto report = validate_rows(rows, 0.01);
  CHECK(report.pass);
  CHECK(report.residuals[0] == 0.0);
}

TEST_CASE("validate_rows flags a constructed violation") {
  const std::vector<CanFeatureRow> rows = {{0, 100.0, 10.0, 2.0, 0, 0, 0}};
  const auto report = validate_rows(rows, 0.01);
  CHECK_FALSE(report.pass);
  REQUIRE(report.offenders.size() == 1);
  CHECK(report.offenders[0] == 0);
  CHECK_THAT(report.residuals[0], WithinAbs(1.0, 1e-12));
}

TEST_CASE("validate_rows residuals do not depend on row count") {
  std::vector<CanFeatureRow> rows;
  for (int i = 0; i < 40; ++i) rows.push_back({static_cast<double>(i), 200.0, -50.0, -10.0, 0, 0, 0});
  const auto report = validate_rows(rows, 0.5);
  const double expected = std::abs(-10.0 - (200.0 * -50.0 / 1000.0));
  for (const double r : report.residuals) CHECK(r == expected);
}

TEST_CASE("validate_rows rejects empty input") {
  try {
    validate_rows({}, 0.01);
    FAIL("expected empty_input");
  } catch (const Error& e) {
    CHECK(e.code() == errc::empty_input);
  }
}

TEST_CASE("rows CSV round-trips through write and read") {
  std::ostringstream out;
  write_rows_csv(out, kSampleRows);
  std::istringstream in(out.str());
  const auto reread = read_rows_csv(in);
  REQUIRE(reread.size() == kSampleRows.size());
  for (std::size_t i = 0; i < reread.size(); ++i) CHECK(reread[i] == kSampleRows[i]);
}
