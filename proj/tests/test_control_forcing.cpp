#include <doctest.h>

#include <sstream>

#include "hydrocal/control.hpp"
#include "hydrocal/errors.hpp"
#include "hydrocal/forcing.hpp"
#include "hydrocal/numfmt.hpp"
#include "hydrocal/time.hpp"

using namespace hydrocal;

namespace {

const char* const kMinimal = R"([Basic]
timestep_hours=1

[Grids]
flowdir=flowdir.asc

[CrestParams]
wm=1
b=1
im=1
ke=1
fc=1
under=1
leaki=1
alpha=1
beta=1
alpha0=1
iwu=50
th=10
isu=0

[Gauge]
id=G1
outlet_row=3
outlet_col=4

[Forcing]
precip_csv=precip.csv
pet_csv=pet.csv

[Window]
start=2018-07-01T00
end=2018-07-10T23
)";

SimulationConfig parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_control(in, "ctl");
}

std::string replace_line(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  REQUIRE(at != std::string::npos);
  return text.replace(at, from.size(), to);
}

}  // namespace

TEST_CASE("utc hours") {
  const UtcHour t = parse_utc_hour("2018-07-01T05");
  CHECK(format_utc_hour(t) == "2018-07-01T05");
  CHECK(parse_utc_hour("2018-07-01T05:00") == t);
  CHECK(parse_utc_hour("2018-07-01T05:00:00Z") == t);
  CHECK(hours_between(parse_utc_hour("2018-06-30T23"), t) == 6);
  CHECK(format_utc_hour(parse_utc_hour("2020-02-29T23") + std::chrono::hours(1)) == "2020-03-01T00");
  CHECK_THROWS_AS(parse_utc_hour("2018-07-01T05:30"), std::invalid_argument);
  CHECK_THROWS_AS(parse_utc_hour("2018-13-01T00"), std::invalid_argument);
  CHECK_THROWS_AS(parse_utc_hour("2018-07-01"), std::invalid_argument);
  CHECK_THROWS_AS(parse_utc_hour("2018-07-01T24"), std::invalid_argument);
}

TEST_CASE("number formatting") {
  CHECK(format_shortest(0.1) == "0.1");
  CHECK(format_bound(10.0) == "10.0");
  CHECK(format_bound(1e-6) == "1e-06");
  CHECK(format_g6(100.0012345) == "100.001");
  double v = 0;
  CHECK(parse_double("+2.5", v));
  CHECK(v == 2.5);
  CHECK_FALSE(parse_double("2.5x", v));
  CHECK_FALSE(parse_double("", v));
  long n = 0;
  CHECK(parse_int("42", n));
  CHECK_FALSE(parse_int("4.2", n));
}

TEST_CASE("control file: minimal file parses and rewrites canonically") {
  const SimulationConfig cfg = parse_text(kMinimal);
  CHECK(cfg.grids.flowdir == "flowdir.asc");
  CHECK(cfg.gauge.id == "G1");
  CHECK(cfg.gauge.outlet_row == 3);
  CHECK(cfg.params[Param::iwu] == 50.0);
  CHECK(cfg.warmup_hours() == 0.0);
  CHECK(cfg.target_nse() == doctest::Approx(0.8075));
  CHECK(hours_between(cfg.window.start, cfg.window.end) == 239);

  const std::string canon = format_control(cfg);
  CHECK(canon == kMinimal);
  CHECK(format_control(parse_text(canon)) == canon);
}

TEST_CASE("control file: key order inside a section is free") {
  const std::string shuffled = replace_line(kMinimal, "id=G1\noutlet_row=3\noutlet_col=4\n", "outlet_col=4\nid=G1\noutlet_row=3\n");
  CHECK(format_control(parse_text(shuffled)) == kMinimal);
}

TEST_CASE("control file: optional keys round-trip") {
  std::string text = replace_line(kMinimal, "timestep_hours=1\n", "timestep_hours=1\nwarmup_hours=48\n");
  text = replace_line(text, "outlet_col=4\n", "outlet_col=4\nobs_csv=obs.csv\ntarget_nse=0.7\nbasin_area_km2=2.56\n");
  text = replace_line(text, "\n[CrestParams]", "\n[Baselines]\nwm=120\nksat=3\ndrain=0.2\n\n[CrestParams]");
  const SimulationConfig cfg = parse_text(text);
  CHECK(cfg.warmup_hours() == 48.0);
  CHECK(*cfg.gauge.obs_csv == "obs.csv");
  CHECK(cfg.target_nse() == 0.7);
  CHECK(*cfg.baselines.scalars[static_cast<std::size_t>(BaselineField::ksat)] == 3.0);
  CHECK(*cfg.baselines.drain == 0.2);
  CHECK(format_control(cfg) == text);
}

TEST_CASE("control file: out-of-range multiplier names the key and its bounds") {
  try {
    parse_text(replace_line(kMinimal, "wm=1\n", "wm=11.0\n"));
    FAIL("expected a bounds error");
  } catch (const ControlBoundsError& e) {
    const std::string what = e.what();
    CHECK(what.find("wm") != std::string::npos);
    CHECK(what.find("[0.1,10.0]") != std::string::npos);
    CHECK(e.line() == 8);
  }
  CHECK_NOTHROW(parse_text(replace_line(kMinimal, "wm=1\n", "wm=10.0\n")));
}

TEST_CASE("control file: duplicate key names both lines") {
  try {
    parse_text(replace_line(kMinimal, "b=1\n", "b=1\nb=2\n"));
    FAIL("expected a duplicate-key error");
  } catch (const ParseError& e) {
    const std::string what = e.what();
    CHECK(what.find("'b'") != std::string::npos);
    CHECK(what.find("lines 9 and 10") != std::string::npos);
  }
}

TEST_CASE("control file: structural errors") {
  CHECK_THROWS_AS(parse_text(replace_line(kMinimal, "flowdir=flowdir.asc\n", "")), ParseError);
  CHECK_THROWS_AS(parse_text(replace_line(kMinimal, "[Window]", "[Windows]")), ParseError);
  CHECK_THROWS_AS(parse_text(replace_line(kMinimal, "b=1\n", "bb=1\n")), ParseError);
  CHECK_THROWS_AS(parse_text(replace_line(kMinimal, "b=1\n", "b\n")), ParseError);
  CHECK_THROWS_AS(parse_text(replace_line(kMinimal, "b=1\n", "b=one\n")), ParseError);
  CHECK_THROWS_AS(parse_text(replace_line(kMinimal, "outlet_row=3", "outlet_row=-1")), ParseError);
  CHECK_THROWS_AS(parse_text(replace_line(kMinimal, "end=2018-07-10T23", "end=2018-06-10T23")), ParseError);
  CHECK_THROWS_AS(parse_text(std::string("wm=1\n") + kMinimal), ParseError);
}

TEST_CASE("series csv: read, write, slice") {
  std::istringstream in("timestamp,discharge_cms\n2018-07-01T00,1.5\n2018-07-01T01,2\n2018-07-01T02,0\n");
  const TimeSeries s = read_series_csv(in, kObservationHeader, "obs.csv");
  REQUIRE(s.size() == 3);
  CHECK(s.values[1] == 2.0);
  CHECK(s.dt_hours == 1.0);
  CHECK(s.index_of(parse_utc_hour("2018-07-01T02")) == 2);
  CHECK_THROWS_AS(s.index_of(parse_utc_hour("2018-07-01T03")), std::out_of_range);
  const TimeSeries tail = s.slice(parse_utc_hour("2018-07-01T01"), parse_utc_hour("2018-07-01T02"));
  CHECK(tail.size() == 2);
  CHECK(tail.start == parse_utc_hour("2018-07-01T01"));

  std::ostringstream out;
  write_series_csv(s, kObservationHeader, out);
  std::istringstream back(out.str());
  const TimeSeries r = read_series_csv(back, kObservationHeader, "again");
  CHECK((r.values == s.values).all());
  CHECK(r.start == s.start);
}

TEST_CASE("series csv: errors carry line numbers") {
  auto line_of = [](const std::string& text) {
    std::istringstream in(text);
    try {
      read_series_csv(in, kPetHeader, "pet.csv");
    } catch (const ParseError& e) {
      return e.line();
    }
    return -1;
  };
  CHECK(line_of("timestamp,pet\n") == 1);
  CHECK(line_of("timestamp,pet_mm_h\n2018-07-01T00,0.1\n2018-07-01T01,-0.1\n") == 3);
  CHECK(line_of("timestamp,pet_mm_h\n2018-07-01T00,0.1\n2018-07-01T02,0.1\n2018-07-01T03,0.1\n") == 4);
  CHECK(line_of("timestamp,pet_mm_h\n2018-07-01T00,nan\n") == 2);
  CHECK(line_of("timestamp,pet_mm_h\n2018-07-01T00,0.1\n2018-07-01T00,0.1\n") == 3);
}
