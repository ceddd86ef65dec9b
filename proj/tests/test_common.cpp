#include "doctest.h"

#include "expoerf/common.hpp"

using namespace expoerf;

TEST_CASE("dates parse, print and count days") {
  const Date d = Date::parse("1997-03-01");
  CHECK(d.iso() == "1997-03-01");
  CHECK(d - Date(1997, 2, 27) == 2);  // not a leap year
  CHECK((Date(1996, 2, 28) + 1).iso() == "1996-02-29");
  CHECK(Date(1997, 1, 1).day_of_year() == 1);
  CHECK(Date(1997, 12, 31).day_of_year() == 365);
  CHECK(Date(1970, 1, 1).serial() == 0);
  CHECK(Date(1997, 1, 1) < Date(1997, 1, 2));
}

TEST_CASE("malformed dates are rejected") {
  CHECK_THROWS_AS(Date::parse("1997-02-30"), Error);
  CHECK_THROWS_AS(Date::parse("1997/01/01"), Error);
  CHECK_THROWS_AS(Date::parse("97-01-01"), Error);
  CHECK_THROWS_AS(Date::parse(""), Error);
}

TEST_CASE("numbers round-trip through their text form") {
  CHECK(format_number(kMissing) == "NA");
  CHECK(format_number(0.1) == "0.1");
  const double v = 1.0 / 3.0;
  CHECK(std::stod(format_number(v)) == v);
}

TEST_CASE("type-7 quantiles match numpy") {
  const std::vector<double> x{3, 1, 4, 1, 5, 9, 2, 6};
  const auto q = quantiles(x, {0.0, 0.3, 0.5, 0.975, 1.0});
  CHECK(q[0] == doctest::Approx(1.0));
  CHECK(q[1] == doctest::Approx(2.1));
  CHECK(q[2] == doctest::Approx(3.5));
  CHECK(q[3] == doctest::Approx(8.475));
  CHECK(q[4] == doctest::Approx(9.0));
  CHECK_THROWS_AS(quantile({}, 0.5), Error);
  CHECK_THROWS_AS(quantile(x, 1.5), Error);
}

TEST_CASE("moments and normal helpers") {
  Eigen::VectorXd x(8);
  x << 3, 1, 4, 1, 5, 9, 2, 6;
  CHECK(sample_mean(x) == doctest::Approx(3.875));
  CHECK(sample_variance(x) == doctest::Approx(7.553571428571429));
  CHECK(normal_cdf(-1.96) == doctest::Approx(0.0249979).epsilon(1e-6));
  CHECK(normal_cdf(0.5) == doctest::Approx(0.69146246).epsilon(1e-8));
  CHECK(log_normal_pdf(1.3, 0.2, 2.5) == doctest::Approx(-1.6190838991417502).epsilon(1e-12));
}

TEST_CASE("derived streams are reproducible and distinct") {
  Rng a = derive_rng(7, 3), b = derive_rng(7, 3), c = derive_rng(7, 4);
  const auto va = a(), vb = b(), vc = c();
  CHECK(va == vb);
  CHECK(va != vc);
}

TEST_CASE("inverse gamma draws have the analytic mean") {
  Rng rng = derive_rng(11, 0);
  const double shape = 6, scale = 10;  // mean scale/(shape-1) = 2
  double sum = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) sum += draw_inverse_gamma(rng, shape, scale);
  // sd = mean / sqrt(shape - 2) = 1
  CHECK(std::abs(sum / n - 2.0) < 4.0 / std::sqrt(double(n)));
}
