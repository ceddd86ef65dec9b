#include "doctest.h"

#include <sstream>

#include "expoerf/micro_sim.hpp"

using namespace expoerf;

namespace {

const std::filesystem::path kData = EXPOERF_DATA_DIR;

MonitorPanel small_panel(int days) {
  std::ostringstream csv;
  csv << "date,site_id,district,pm10\n";
  for (int i = 0; i < days; ++i) {
    const auto d = (Date(1997, 1, 1) + i).iso();
    csv << d << ",A,north," << 30 + 10 * std::sin(i * 0.3) << '\n';
    csv << d << ",B,south," << (i == 3 ? std::string("NA") : std::to_string(45 + i % 5)) << '\n';
  }
  std::istringstream in(csv.str());
  return read_monitor_panel(in);
}

DailySeries temps_for(const MonitorPanel& p) {
  DailySeries t;
  t.dates = p.dates;
  t.values = Eigen::VectorXd::LinSpaced(p.days(), 0, 25);
  return t;
}

}  // namespace

TEST_CASE("one hour of the mass balance") {
  Microenvironment home{"home", EnvKind::home_indoor, 0.4, 0.5, 36, 0.05, 2, 6};
  CHECK(hourly_indoor_concentration(10, 50, home, false) == doctest::Approx(15));
  CHECK(hourly_indoor_concentration(10, 50, home, true) == doctest::Approx(51));
  home.air_exchange = 3;  // capped at a full exchange per hour
  CHECK(hourly_indoor_concentration(10, 50, home, false) == doctest::Approx(20));

  // without sources the indoor level relaxes to P * ambient
  home.air_exchange = 0.3;
  double c = 0;
  for (int h = 0; h < 200; ++h) c = hourly_indoor_concentration(c, 50, home, false);
  CHECK(c == doctest::Approx(20).epsilon(1e-9));
}

TEST_CASE("temperature map is piecewise linear") {
  const TemperatureMap m;
  CHECK(m.factor(-10) == 0.6);
  CHECK(m.factor(30) == 1.4);
  CHECK(m.factor(13.5) == doctest::Approx(1.0));
  TemperatureMap bad;
  bad.warm_temp = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("shipped profile parses and survives a round trip") {
  const auto s = load_profile(kData / "seniors_profile.txt");
  REQUIRE(s.envs.size() == 4);
  CHECK(s.envs[0].kind == EnvKind::home_indoor);
  CHECK(s.profile.blocks.size() == 3);
  for (int h = 0; h < 24; ++h)
    CHECK((s.profile.kernel_at(h).rowwise().sum().array() - 1).abs().maxCoeff() < 1e-12);

  std::ostringstream out;
  write_profile(out, s);
  std::istringstream in(out.str());
  const auto r = read_profile(in);
  CHECK(r.envs.size() == s.envs.size());
  CHECK(r.envs[1].emission == s.envs[1].emission);
  CHECK(r.profile.kernel_at(12) == s.profile.kernel_at(12));
  CHECK(r.temperature.warm_factor == s.temperature.warm_factor);

  std::istringstream broken("env home home-indoor 0.4 0.5 36 0.05 2 6\nblock 0 24\nrow home 0.5\n");
  CHECK_THROWS_AS(read_profile(broken), Error);
}

TEST_CASE("outdoor-only life tracks the district monitors") {
  const auto p = small_panel(6);
  const std::vector<Microenvironment> envs{{"out", EnvKind::outdoor, 1, 1, 0, 0, 1, 1}};
  ActivityProfile prof;
  prof.blocks.push_back({0, 24, Eigen::MatrixXd::Ones(1, 1)});
  const auto sim = simulate_panel(p, temps_for(p), prof, envs, 3, SourceToggle::all, 5);
  REQUIRE(sim.columns() == 6);
  const auto avg = spatial_average(p);
  for (Eigen::Index t = 0; t < sim.days(); ++t) {
    CHECK(sim.exposure(t, 0) == doctest::Approx(p.ambient(t, 0)));
    // district south has no reading on day 3 and falls back to all sites
    const double south = t == 3 ? avg.values(t) : p.ambient(t, 1);
    CHECK(sim.exposure(t, 5) == doctest::Approx(south));
  }
  CHECK(decompose_sources(sim).indoor == 0);
}

TEST_CASE("source toggles split exposure additively") {
  const auto p = small_panel(20);
  const auto s = load_profile(kData / "seniors_profile.txt");
  const auto t = temps_for(p);
  const auto all = simulate_panel(p, t, s.profile, s.envs, 10, SourceToggle::all, 42, s.temperature);
  const auto out = simulate_panel(p, t, s.profile, s.envs, 10, SourceToggle::outdoor_only, 42, s.temperature);
  const auto in = simulate_panel(p, t, s.profile, s.envs, 10, SourceToggle::indoor_only, 42, s.temperature);
  CHECK((all.exposure - out.exposure - in.exposure).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(out.indoor_component.cwiseAbs().maxCoeff() == 0);
  CHECK(in.ambient_component.cwiseAbs().maxCoeff() == 0);
  CHECK((all.exposure.array() >= 0).all());

  const auto shares = decompose_sources(all);
  CHECK(shares.indoor + shares.outdoor == doctest::Approx(1));
  CHECK(shares.indoor > 0);

  const auto again = simulate_panel(p, t, s.profile, s.envs, 10, SourceToggle::all, 42, s.temperature);
  CHECK(again.exposure == all.exposure);
  const auto other = simulate_panel(p, t, s.profile, s.envs, 10, SourceToggle::all, 43, s.temperature);
  CHECK(other.exposure != all.exposure);
}

TEST_CASE("exposure panel round trip") {
  const auto p = small_panel(4);
  const auto s = load_profile(kData / "seniors_profile.txt");
  const auto sim = simulate_panel(p, temps_for(p), s.profile, s.envs, 2, SourceToggle::all, 1, s.temperature);
  std::ostringstream out;
  write_exposure_panel(out, sim);
  std::istringstream in(out.str());
  const auto r = read_exposure_panel(in);
  CHECK(r.dates == sim.dates);
  CHECK(r.districts == sim.districts);
  CHECK((r.exposure - sim.exposure).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.index_of(Date(1997, 1, 3)).value() == 2);
  CHECK_FALSE(r.index_of(Date(1998, 1, 1)).has_value());
}
