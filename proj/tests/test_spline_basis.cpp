#include "doctest.h"

#include <sstream>

#include "expoerf/spline_basis.hpp"

using namespace expoerf;

namespace {

// least-squares residual of y on [1, B]
double projection_residual(const Eigen::MatrixXd& B, const Eigen::VectorXd& y) {
  Eigen::MatrixXd X(B.rows(), B.cols() + 1);
  X.col(0).setOnes();
  X.rightCols(B.cols()) = B;
  const Eigen::VectorXd coef = X.colPivHouseholderQr().solve(y);
  return (X * coef - y).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("basis spans scipy's natural interpolating spline") {
  Eigen::VectorXd knots(5);
  knots << 0, 1, 3, 4, 7;
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(15, 0, 7);
  Eigen::VectorXd y(15);
  // scipy.interpolate.CubicSpline(knots, [1,-2,.5,3,2], bc_type='natural')(x)
  y << 1.0, -0.761125, -2.0, -2.3226875, -1.8484999999999998, -0.8250625000000003, 0.5, 1.8710000000000002, 3.0,
      3.6552777777777776, 3.862222222222222, 3.7104999999999997, 3.2897777777777772, 2.6897222222222212,
      1.9999999999999991;
  const auto B = natural_cubic_columns(knots, x);
  CHECK(B.cols() == 4);
  CHECK(projection_residual(B, y) < 1e-10);
}

TEST_CASE("columns are linear beyond the boundary knots") {
  Eigen::VectorXd knots(4);
  knots << 2, 3, 5, 8;
  Eigen::VectorXd x(6);
  x << -10, -5, 0, 10, 20, 30;
  const auto B = natural_cubic_columns(knots, x);
  for (Eigen::Index c = 0; c < B.cols(); ++c) {
    // equal spacing -> equal steps on each side
    CHECK(B(1, c) - B(0, c) == doctest::Approx(B(2, c) - B(1, c)));
    CHECK(B(4, c) - B(3, c) == doctest::Approx(B(5, c) - B(4, c)));
  }
  const Eigen::VectorXd lin = 3.0 * x.array() - 1.0;
  CHECK(projection_residual(B, lin) < 1e-9);
}

TEST_CASE("knots sit at quantiles and ties are rejected") {
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(101, 0, 100);
  const auto b = natural_cubic_basis(v, 4, "t");
  CHECK(b.df() == 4);
  CHECK(b.knots(0) == 0);
  CHECK(b.knots(2) == doctest::Approx(50));
  CHECK(b.knots(4) == 100);

  Eigen::VectorXd tied = Eigen::VectorXd::Zero(50);
  tied.tail(5) << 1, 2, 3, 4, 5;
  CHECK_THROWS_AS(natural_cubic_basis(tied, 3, "tied"), Error);
  CHECK_THROWS_AS(natural_cubic_basis(Eigen::VectorXd::LinSpaced(3, 0, 1), 3), Error);
  CHECK_THROWS_AS(natural_cubic_basis(v, 0), Error);
}

TEST_CASE("standardization and its inverse") {
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(60, -3, 9).array().square();
  const auto raw = natural_cubic_basis(v, 3, "s");
  const auto s = standardize(raw);
  REQUIRE(s.standardized());
  for (Eigen::Index c = 0; c < s.df(); ++c) {
    CHECK(s.matrix.col(c).mean() == doctest::Approx(0).epsilon(1e-12));
    CHECK((s.matrix.col(c).array().square().sum() / 59.0) == doctest::Approx(1));
  }
  CHECK((evaluate(s, v) - s.matrix).cwiseAbs().maxCoeff() < 1e-10);

  // re-standardizing is a no-op on the values and composes constants
  const auto twice = standardize(s);
  CHECK((twice.matrix - s.matrix).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((evaluate(twice, v) - s.matrix).cwiseAbs().maxCoeff() < 1e-9);

  Eigen::VectorXd coef(3);
  coef << 0.4, -1.2, 2.5;
  double intercept = 0.7;
  const Eigen::VectorXd fitted = (s.matrix * coef).array() + intercept;
  const Eigen::VectorXd rc = back_transform(s, coef, intercept);
  const Eigen::VectorXd again = (raw.matrix * rc).array() + intercept;
  CHECK((fitted - again).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("covariate design layout") {
  std::vector<Date> dates;
  Eigen::VectorXd temps(120);
  for (int i = 0; i < 120; ++i) {
    dates.push_back(Date(1997, 1, 1) + i);
    temps(i) = 10 + 8 * std::sin(i / 9.0) + 0.01 * i;
  }
  const auto d = build_covariate_design(dates, temps, 5, 2);
  CHECK(d.matrix.cols() == 8);
  CHECK(d.names.front() == "intercept");
  CHECK(d.names[5] == "time_5");
  CHECK(d.names.back() == "temp_2");
  CHECK((d.matrix.col(0).array() == 1).all());
  CHECK_THROWS_AS(build_covariate_design(dates, temps.head(10), 5, 2), Error);

  std::ostringstream out;
  write_basis_csv(out, d.time, dates);
  CHECK(out.str().rfind("date,col_1,col_2,col_3,col_4,col_5\n1997-01-01,", 0) == 0);
}
