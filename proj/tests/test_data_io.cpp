#include "doctest.h"

#include <sstream>

#include "expoerf/data_io.hpp"

using namespace expoerf;

namespace {

MonitorPanel monitors(const std::string& body) {
  std::istringstream in("date,site_id,district,pm10\n" + body);
  return read_monitor_panel(in, "monitors.csv");
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("monitor panel fills gaps with missing values") {
  const auto p = monitors(
      "1997-01-01,A,north,20\n"
      "1997-01-01,B,south,30\n"
      "1997-01-03,A,north,NA\n"
      "1997-01-03,B,south,40\n");
  REQUIRE(p.days() == 3);
  REQUIRE(p.site_count() == 2);
  CHECK(p.dates[1].iso() == "1997-01-02");
  CHECK(is_missing(p.ambient(1, 0)));
  CHECK(is_missing(p.ambient(2, 0)));
  CHECK(p.ambient(2, 1) == 40);
  CHECK(p.missing_mask().count() == 3);
  CHECK(p.districts() == std::vector<std::string>{"north", "south"});

  const auto avg = spatial_average(p);
  CHECK(avg.values(0) == doctest::Approx(25));
  CHECK(is_missing(avg.values(1)));  // no site observed
  CHECK(avg.values(2) == doctest::Approx(40));
}

TEST_CASE("monitor panel rejects bad rows with the offending line") {
  CHECK(error_of([] { monitors("1997-01-01,A,north,-1\n"); }).find(":2:") != std::string::npos);
  const auto dup = error_of([] { monitors("1997-01-01,A,north,1\n1997-01-01,A,north,2\n"); });
  CHECK(dup.find("1997-01-01") != std::string::npos);
  CHECK(dup.find("duplicated") != std::string::npos);
  CHECK_THROWS_AS(monitors("1997-01-01,A,north,1\n1997-01-02,A,south,2\n"), Error);
  CHECK(error_of([] { monitors(""); }).find("no data rows") != std::string::npos);
  CHECK_THROWS_AS(monitors("1997-13-01,A,north,1\n"), Error);
  CHECK_THROWS_AS(monitors("1997-01-01,A,north\n"), Error);
}

TEST_CASE("monitor panel survives a write/read cycle") {
  const auto p = monitors("1997-01-01,A,north,20.5\n1997-01-02,A,north,NA\n1997-01-01,B,north,3\n");
  std::ostringstream out;
  write_monitor_panel(out, p);
  std::istringstream in(out.str());
  const auto q = read_monitor_panel(in);
  CHECK(q.dates == p.dates);
  CHECK(q.ambient.array().isNaN().count() == 2);  // A on day 2, B never seen there
  CHECK(q.ambient(0, 0) == 20.5);
}

TEST_CASE("health series with optional columns") {
  std::istringstream in(
      "date,count,temp_mean,temp_max\n"
      "1997-01-02,12,4.5,7\n"
      "1997-01-01,10,3.5,NA\n");
  const auto h = read_health_series(in);
  REQUIRE(h.size() == 2);
  CHECK(h.dates[0].iso() == "1997-01-01");  // sorted
  CHECK(h.counts[0] == 10);
  CHECK(is_missing(h.rain(0)));
  const auto t = h.simulator_temperature();
  CHECK(t.values(0) == 3.5);  // max missing -> mean
  CHECK(t.values(1) == 7);

  std::ostringstream out;
  write_health_series(out, h);
  CHECK(out.str().rfind("date,count,temp_mean,temp_max\n", 0) == 0);

  std::istringstream dup("date,count,temp_mean\n1997-01-01,1,2\n1997-01-01,3,4\n");
  CHECK_THROWS_AS(read_health_series(dup), Error);
  std::istringstream neg("date,count,temp_mean\n1997-01-01,-1,2\n");
  CHECK_THROWS_AS(read_health_series(neg), Error);
  std::istringstream hdr("date,deaths,temp_mean\n1997-01-01,1,2\n");
  CHECK_THROWS_AS(read_health_series(hdr), Error);
}

TEST_CASE("lag shifts by date and drops the first days") {
  DailySeries s;
  for (int i = 0; i < 5; ++i) s.dates.push_back(Date(1997, 1, 1) + i);
  s.values = Eigen::VectorXd::LinSpaced(5, 10, 14);
  const auto l = apply_lag(s, 2);
  REQUIRE(l.size() == 3);
  CHECK(l.dates.front().iso() == "1997-01-03");
  CHECK(l.values(0) == 10);  // value from two days earlier
  CHECK(l.lag == 2);
  CHECK(apply_lag(l, 1).lag == 3);
  CHECK(apply_lag(s, 0).values == s.values);
  CHECK_THROWS_AS(apply_lag(s, -1), Error);
  CHECK_THROWS_AS(apply_lag(s, 5), Error);

  HealthSeries h;
  for (int i = 0; i < 6; ++i) {
    h.dates.push_back(Date(1997, 1, 1) + i);
    h.counts.push_back(i);
  }
  h.temp_mean = Eigen::VectorXd::Zero(6);
  const auto a = align_counts(l, h);
  CHECK(a.dates.size() == 3);
  CHECK(a.counts.front() == 2);
  CHECK(a.exposure(0) == 10);
}

TEST_CASE("run configuration parsing") {
  const auto c = parse_run_config(R"({"model":"iii","lag":1,"chains":3,"xi":12.5,"source":"indoor"})");
  CHECK(c.model == ModelVariant::normal_exposure);
  CHECK(c.lag == 1);
  CHECK(c.chains == 3);
  CHECK(c.xi.value() == 12.5);
  CHECK(c.source == SourceToggle::indoor_only);
  CHECK(c.burn_in == 20000);
  CHECK(c.iterations == 250000);
  CHECK(c.thin == 25);
  CHECK(c.epsilon == 0.001);

  CHECK_THROWS_AS(parse_run_config(R"({"modle":"iii"})"), Error);
  CHECK_NOTHROW(parse_run_config(R"({"gamma":0.1})", {"gamma"}));
  CHECK_THROWS_AS(parse_run_config(R"({"model":"v"})"), Error);
  CHECK_THROWS_AS(parse_run_config(R"({"chains":1})"), Error);
  CHECK_THROWS_AS(parse_run_config(R"({"epsilon":0})"), Error);
  CHECK_THROWS_AS(parse_run_config("not json"), Error);

  const auto again = parse_run_config(run_config_json(c));
  CHECK(again.model == c.model);
  CHECK(again.xi == c.xi);
  CHECK(run_config_json(again) == run_config_json(c));
}
