#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "expoerf/risk_report.hpp"

using namespace expoerf;

namespace {

// latent spec with two exposure days and hand-made draws of their moments
struct LatentFixture {
  ModelSpec spec;
  PosteriorDraws draws;
};

LatentFixture latent(ModelVariant model, double l1, double l2) {
  LatentFixture f;
  const std::vector<int> y{3, 4};
  Eigen::VectorXd x(2);
  x << l1, l1;
  f.spec = make_fixed_spec(ModelVariant::personal_fixed, y, Eigen::MatrixXd::Ones(2, 1), x);
  f.spec.model = model;
  const std::vector<double> s{l1 - 1, l1 + 1};
  f.spec.exposure_stats = {ExposureStats::from(s), ExposureStats::from(s)};
  f.draws.model = model;
  for (int c = 0; c < 2; ++c) {
    ChainDraws ch;
    ch.beta = Eigen::MatrixXd::Zero(10, 2);
    ch.lambda1 = Eigen::MatrixXd::Constant(10, 2, l1);
    ch.lambda2 = Eigen::MatrixXd::Constant(10, 2, l2);
    f.draws.chains.push_back(ch);
  }
  return f;
}

}  // namespace

TEST_CASE("relative risk of a known gamma") {
  const auto r = relative_risk(std::vector<double>(100, 0.0), 10);
  for (double q : r.quantiles) CHECK(q == 1.0);
  CHECK(r.prob_above_one == 0.0);

  std::vector<double> g;
  for (int i = 0; i < 1001; ++i) g.push_back(0.001 * i / 100.0);  // 0 .. 0.01
  const auto s = relative_risk(g, 10, {}, "x");
  CHECK(s.median() == doctest::Approx(std::exp(10 * 0.005)));
  CHECK(s.label == "x");
  CHECK(s.grid.size() == 21);
  CHECK(s.grid.front() == doctest::Approx(1.0));
  CHECK(s.grid.back() == doctest::Approx(1.10));
  for (std::size_t i = 1; i < s.exceedance.size(); ++i) CHECK(s.exceedance[i] <= s.exceedance[i - 1]);
  CHECK(s.exceedance.front() == doctest::Approx(1000.0 / 1001));

  const auto grid50 = default_grid(50);
  CHECK(grid50.size() == 21);
  CHECK(grid50.back() == doctest::Approx(1.5));
  CHECK(exceedance({1.0, 2.0, 3.0}, {0.5, 2.0, 3.5}) == std::vector<double>{1.0, 1.0 / 3, 0.0});
}

TEST_CASE("attenuation regression matches scipy") {
  Eigen::VectorXd x(8), y(8);
  x << 10, 14, 9, 22, 30, 18, 25, 12;
  y << 8.1, 12.0, 9.3, 13.9, 17.2, 12.5, 16.0, 10.1;
  const auto f = attenuation_fit(x, y);
  // scipy.stats.linregress
  CHECK(f.phi == doctest::Approx(0.41200495049504954).epsilon(1e-12));
  CHECK(f.theta == doctest::Approx(5.177413366336633).epsilon(1e-12));
  CHECK(f.r2 == doctest::Approx(0.955012084319822).epsilon(1e-12));
  CHECK(f.slope_se == doctest::Approx(0.03650650960363336).epsilon(1e-10));
  CHECK(f.slope_sign() == 1);

  // exact line, rescaling, missing pairs
  const Eigen::VectorXd line = (2.0 + 0.5 * x.array()).matrix();
  CHECK(attenuation_fit(x, line).phi == doctest::Approx(0.5));
  CHECK(attenuation_fit(x, line).r2 == doctest::Approx(1.0));
  CHECK(attenuation_fit((3.0 * x.array()).matrix(), y).phi == doctest::Approx(f.phi / 3));
  Eigen::VectorXd gap = y;
  gap(2) = kMissing;
  CHECK(attenuation_fit(x, gap).n == 7);
  CHECK_THROWS_AS(attenuation_fit(Eigen::VectorXd::Constant(8, 4.0), y), Error);
  CHECK_THROWS_AS(attenuation_fit(x.head(2), y.head(2)), Error);
}

TEST_CASE("gamma attenuation discrepancy") {
  const auto c = gamma_attenuation_check({0.002, 0.004, 0.006}, {0.008, 0.010, 0.012}, 0.4);
  CHECK(c.median_ambient == doctest::Approx(0.004));
  CHECK(c.median_personal == doctest::Approx(0.010));
  CHECK(c.discrepancy == doctest::Approx(0.0).scale(1));
  CHECK(gamma_attenuation_check({0.004}, {0.005}, 0.4).discrepancy == doctest::Approx(0.5));
  CHECK_THROWS_AS(gamma_attenuation_check({}, {0.1}, 0.4), Error);
}

TEST_CASE("normal predictive puts mass below zero, log-normal does not") {
  const auto n = latent(ModelVariant::normal_exposure, 2.0, 4.0);
  const auto pn = exposure_predictive(n.draws, n.spec, 0);
  CHECK(pn.mass_below_zero == doctest::Approx(normal_cdf(-1.0)));
  CHECK(pn.mean == doctest::Approx(2.0));
  CHECK(pn.second_moment == doctest::Approx(8.0));

  const auto l = latent(ModelVariant::lognormal_exposure, 2.0, 4.0);
  const auto pl = exposure_predictive(l.draws, l.spec, 1);
  CHECK(pl.mass_below_zero == 0.0);
  CHECK(pl.variance == doctest::Approx(4.0));
  CHECK_THROWS_AS(exposure_predictive(l.draws, l.spec, 2), Error);

  // densities integrate to about one
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(4001, -20, 40);
  const double dx = grid(1) - grid(0);
  CHECK(predictive_density(n.draws, n.spec, 0, grid).sum() * dx == doctest::Approx(1).epsilon(1e-3));
  const auto dl = predictive_density(l.draws, l.spec, 0, grid);
  CHECK(dl.sum() * dx == doctest::Approx(1).epsilon(1e-3));
  CHECK(dl.head(1333).maxCoeff() == 0.0);
}

TEST_CASE("tables and plot data") {
  std::vector<RiskSummary> rows{relative_risk(std::vector<double>{0.001, 0.002, 0.003}, 10, {}, "iv")};
  std::ostringstream t, e;
  write_rr_table(t, rows);
  write_exceedance_csv(e, rows);
  CHECK(t.str().rfind("label,increment,q025,q25,q50,q75,q975,p_gt_1\niv,10,", 0) == 0);
  CHECK(e.str().rfind("label,increment,c,p_exceed\niv,10,1,1\n", 0) == 0);

  const auto dir = std::filesystem::temp_directory_path() / "expoerf_test_plots";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  PlotInputs in;
  in.risks = rows;
  const auto path = emit_plot_data(in, "fig4_exceedance", dir);
  CHECK(path.filename() == "fig4_exceedance.csv");
  std::ifstream f(path);
  std::string header;
  std::getline(f, header);
  CHECK(header == "label,increment,c,p_exceed");
  CHECK_THROWS_AS(emit_plot_data(in, "fig9", dir), Error);
  CHECK_THROWS_AS(emit_plot_data(in, "fig1_boxplot", dir), Error);  // no panel supplied
  std::filesystem::remove_all(dir);

  ExposurePanel p;
  p.dates = {Date(1997, 1, 1)};
  p.exposure.resize(1, 5);
  p.exposure << 5, 1, 4, 2, 3;
  std::ostringstream b;
  write_boxplot_csv(b, p);
  CHECK(b.str() == "date,min,q1,median,q3,max,mean\n1997-01-01,1,2,3,4,5,3\n");
}
