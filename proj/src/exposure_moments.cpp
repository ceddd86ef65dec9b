#include "expoerf/exposure_moments.hpp"

#include <ostream>

#include "csv.hpp"
#include "expoerf/micro_sim.hpp"

namespace expoerf {

DailyMoments<double> sample_moments(std::span<const double> samples, Lambda3Rule rule) {
  if (samples.size() < 2) throw Error("sample_moments: at least two samples are required");
  const auto s = ExposureStats::from(samples);
  if (s.mean < 0) throw Error("sample_moments: exposures must be >= 0");
  DailyMoments<double> d;
  d.k = s.k;
  d.lambda1 = s.mean;
  d.lambda2 = s.variance();
  d.lambda3 = lambda3_from(d.lambda1, d.lambda2, rule);
  return d;
}

double lognormal_loglik(std::span<const double> samples, const LogNormalParams<double>& params) {
  if (!(params.s2 > 0)) throw Error("lognormal_loglik: s2 must be > 0");
  double total = 0;
  for (double x : samples) {
    if (!(x > 0)) throw Error("lognormal_loglik: samples must be > 0");
    total += lognormal_log_density(x, params);
  }
  return total;
}

ExposureStats ExposureStats::from(std::span<const double> samples) {
  ExposureStats s;
  s.k = int(samples.size());
  if (s.k == 0) return s;
  double sum = 0;
  for (double x : samples) {
    if (!std::isfinite(x)) throw Error("exposure samples must be finite");
    sum += x;
    s.positive = s.positive && x > 0;
  }
  s.mean = sum / s.k;
  for (double x : samples) {
    const double d = x - s.mean;
    s.ss += d * d;
    s.third += d * d * d;
    s.fourth += d * d * d * d;
  }
  s.third /= s.k;
  s.fourth /= s.k;
  if (s.positive) {
    for (double x : samples) s.sum_log += std::log(x);
    s.mean_log = s.sum_log / s.k;
    for (double x : samples) {
      const double d = std::log(x) - s.mean_log;
      s.ss_log += d * d;
    }
  } else {
    s.mean_log = s.sum_log = s.ss_log = kMissing;
  }
  return s;
}

double lognormal_loglik(const ExposureStats& s, const LogNormalParams<double>& p) {
  if (!s.positive) throw Error("lognormal_loglik: samples must be > 0");
  const double dm = s.mean_log - p.m;
  const double sq = s.ss_log + s.k * dm * dm;
  return -s.sum_log - 0.5 * s.k * std::log(2.0 * std::numbers::pi * p.s2) - sq / (2.0 * p.s2);
}

double normal_loglik(const ExposureStats& s, double mean, double variance) {
  const double dm = s.mean - mean;
  const double sq = s.ss + s.k * dm * dm;
  return -0.5 * s.k * std::log(2.0 * std::numbers::pi * variance) - sq / (2.0 * variance);
}

MomentsTable daily_moments(const ExposurePanel& panel, Lambda3Rule rule) {
  MomentsTable t;
  t.dates = panel.dates;
  t.moments.reserve(panel.dates.size());
  for (Eigen::Index d = 0; d < panel.exposure.rows(); ++d) {
    const Eigen::VectorXd row = panel.exposure.row(d).transpose();
    t.moments.push_back(sample_moments(std::span<const double>(row.data(), std::size_t(row.size())), rule));
  }
  return t;
}

void write_moments_table(std::ostream& out, const MomentsTable& t) {
  out << "date,lambda1,lambda2,lambda3,k\n";
  for (std::size_t i = 0; i < t.dates.size(); ++i) {
    const auto& m = t.moments[i];
    out << t.dates[i].iso() << ',' << format_number(m.lambda1) << ',' << format_number(m.lambda2) << ','
        << format_number(m.lambda3) << ',' << m.k << '\n';
  }
}

MomentsTable read_moments_table(std::istream& in, const std::string& source) {
  const auto lines = csv::read_lines(in);
  if (lines.size() < 2) throw Error(source + ": no data rows");
  if (lines.front().text != "date,lambda1,lambda2,lambda3,k")
    throw csv::row_error(source, lines.front().number, "expected header date,lambda1,lambda2,lambda3,k");
  MomentsTable t;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = csv::split(lines[i].text);
    if (f.size() != 5) throw csv::row_error(source, lines[i].number, "expected 5 fields");
    DailyMoments<double> m;
    t.dates.push_back(Date::parse(f[0]));
    m.lambda1 = csv::to_double(f[1], source, lines[i].number);
    m.lambda2 = csv::to_double(f[2], source, lines[i].number);
    m.lambda3 = csv::to_double(f[3], source, lines[i].number);
    m.k = int(csv::to_long(f[4], source, lines[i].number));
    if (m.lambda2 < 0 || m.k < 1) throw csv::row_error(source, lines[i].number, "invalid moments");
    t.moments.push_back(m);
  }
  return t;
}

}  // namespace expoerf
