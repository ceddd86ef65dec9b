#include "doctest.h"

#include "expoerf/mean_models.hpp"

using namespace expoerf;

TEST_CASE("mean functions nest") {
  const DailyMoments<double> m{30.0, 64.0, ratio_lambda3(30.0, 64.0), 800};
  const double g = 0.005, off = 4.2;
  const double fixed = linpred_fixed(m.lambda1, g, off);
  const double normal = linpred_normal_exact(m, g, off);
  const double taylor = linpred_lognormal_taylor(m, g, off);
  CHECK(fixed == doctest::Approx(0.15 + off));
  CHECK(normal - fixed == doctest::Approx(g * g * 64 / 2));
  CHECK(taylor - normal == doctest::Approx(g * g * g * m.lambda3 / 6));

  // no variance -> all three coincide
  const DailyMoments<double> point{30.0, 0.0, 0.0, 1};
  CHECK(linpred_normal_exact(point, g, off) == fixed);
  CHECK(linpred_lognormal_taylor(point, g, off) == fixed);
  // the quadratic term never lowers the mean
  for (double v : {0.0, 1.0, 100.0, 1e4}) {
    const DailyMoments<double> d{30.0, v, 0.0, 2};
    CHECK(linpred_normal_exact(d, -0.01, 0.0) >= linpred_fixed(30.0, -0.01, 0.0));
  }

  Eigen::Vector3d z(1, 0.5, -2), a(0.3, 1.0, 0.25);
  CHECK(linpred_fixed(30.0, g, z, a) == doctest::Approx(0.15 + 0.3));
}

TEST_CASE("general g with identity recovers the expansion") {
  const DailyMoments<double> m{20.0, 25.0, exact_third_central_moment(20.0, 25.0), 10};
  const auto id = ResponseFunction::identity();
  MeanFunction f{MeanStrategy::general_g, id, 0};
  MeanFunction t{MeanStrategy::lognormal_taylor, id, 0};
  CHECK(f.log_mean(m, 0.01, 1.0) == doctest::Approx(t.log_mean(m, 0.01, 1.0)));
  CHECK(linpred_general_g(m, 0.01, 0.0, 0.5, 1.0 / 6) == doctest::Approx(linpred_lognormal_taylor(m, 0.01, 0.0)));

  const auto tanh_g = ResponseFunction::custom([](double u) { return std::tanh(u); }, 0.5, 0.0);
  MeanFunction h{MeanStrategy::general_g, tanh_g, 0};
  CHECK(h.exposure_term(m, 0.01) == doctest::Approx(std::tanh(0.2) + 0.5 * 1e-4 * 25));
  CHECK_FALSE(tanh_g.is_identity());
}

TEST_CASE("custom response functions are checked") {
  CHECK_THROWS_AS(ResponseFunction::custom([](double u) { return u + 1; }, 0.5, 0.1), Error);
  CHECK_THROWS_AS(ResponseFunction::custom([](double u) { return -u; }, 0.5, 0.1), Error);
  CHECK_THROWS_AS(ResponseFunction::custom({}, 0.5, 0.1), Error);
  CHECK_THROWS_AS(ResponseFunction::identity(std::nan(""), 0.1), Error);
}

TEST_CASE("model variants map to strategies") {
  CHECK(strategy_for(ModelVariant::ambient_fixed) == MeanStrategy::ambient_fixed);
  CHECK(strategy_for(ModelVariant::normal_exposure) == MeanStrategy::normal_exact);
  CHECK(strategy_for(ModelVariant::lognormal_exposure) == MeanStrategy::lognormal_taylor);
  CHECK(to_string(MeanStrategy::general_g) == "general-g");
}
