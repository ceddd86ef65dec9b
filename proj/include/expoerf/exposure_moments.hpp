#pragma once

// Daily exposure moments and the log-normal parameterization that links the
// simulated exposure samples to the health model.

#include <cmath>
#include <filesystem>
#include <iosfwd>
#include <numbers>
#include <span>
#include <vector>

#include "expoerf/common.hpp"
#include "expoerf/data_io.hpp"

namespace expoerf {

struct ExposurePanel;

template <typename Scalar = double>
struct DailyMoments {
  Scalar lambda1{};  // mean
  Scalar lambda2{};  // variance
  Scalar lambda3{};  // third-order term, see Lambda3Rule
  int k = 0;
};

/// Log-scale location `m` and squared scale `s2`.
template <typename Scalar = double>
struct LogNormalParams {
  Scalar m{};
  Scalar s2{};
};

/// (lambda2/lambda1)(lambda2/lambda1 + 3). Note the units are concentration squared.
template <typename Scalar>
Scalar ratio_lambda3(Scalar mean, Scalar variance) {
  if (mean == Scalar(0)) throw Error("lambda3: mean exposure is zero");
  const Scalar r = variance / mean;
  return r * (r + Scalar(3));
}

/// Third central moment of the log-normal with the given mean and variance.
template <typename Scalar>
Scalar exact_third_central_moment(Scalar mean, Scalar variance) {
  if (!(mean > Scalar(0))) throw Error("third central moment: mean must be > 0");
  return (variance / (mean * mean) + Scalar(3)) * variance * variance / mean;
}

template <typename Scalar>
Scalar lambda3_from(Scalar mean, Scalar variance, Lambda3Rule rule) {
  return rule == Lambda3Rule::ratio ? ratio_lambda3(mean, variance)
                                    : exact_third_central_moment(mean, variance);
}

template <typename Scalar>
LogNormalParams<Scalar> lognormal_from_moments(Scalar mean, Scalar variance) {
  using std::log;
  using std::log1p;
  if (!(mean > Scalar(0))) throw Error("lognormal_from_moments: mean must be > 0");
  if (variance < Scalar(0)) throw Error("lognormal_from_moments: variance must be >= 0");
  const Scalar s2 = log1p(variance / (mean * mean));
  return {log(mean) - s2 / Scalar(2), s2};
}

/// Returns (mean, variance).
template <typename Scalar>
std::pair<Scalar, Scalar> moments_from_lognormal(const LogNormalParams<Scalar>& p) {
  using std::exp;
  using std::expm1;
  const Scalar mean = exp(p.m + p.s2 / Scalar(2));
  return {mean, mean * mean * expm1(p.s2)};
}

template <typename Scalar>
Scalar lognormal_log_density(Scalar x, const LogNormalParams<Scalar>& p) {
  using std::log;
  const Scalar d = log(x) - p.m;
  return -log(x) - Scalar(0.5) * log(Scalar(2) * std::numbers::pi_v<Scalar> * p.s2) -
         d * d / (Scalar(2) * p.s2);
}

/// Sample mean, unbiased variance and lambda3 of one day's exposures.
DailyMoments<double> sample_moments(std::span<const double> samples,
                                    Lambda3Rule rule = Lambda3Rule::ratio);

/// Sum of log-normal log densities; samples must be > 0 and s2 > 0.
double lognormal_loglik(std::span<const double> samples, const LogNormalParams<double>& params);

/// Centered summaries of one day's samples, enough to evaluate the normal and
/// log-normal exposure likelihoods in O(1).
struct ExposureStats {
  int k = 0;
  double mean = 0;         // mean of x
  double ss = 0;           // sum (x - mean)^2
  double mean_log = 0;     // mean of ln x (NaN if any x <= 0)
  double ss_log = 0;       // sum (ln x - mean_log)^2
  double sum_log = 0;      // sum ln x
  double third = 0;        // sum (x - mean)^3 / k
  double fourth = 0;       // sum (x - mean)^4 / k
  bool positive = true;

  static ExposureStats from(std::span<const double> samples);
  double variance() const { return k > 1 ? ss / (k - 1) : 0.0; }
};

double lognormal_loglik(const ExposureStats& s, const LogNormalParams<double>& params);
double normal_loglik(const ExposureStats& s, double mean, double variance);

struct MomentsTable {
  std::vector<Date> dates;
  std::vector<DailyMoments<double>> moments;
};

MomentsTable daily_moments(const ExposurePanel& panel, Lambda3Rule rule = Lambda3Rule::ratio);

// date,lambda1,lambda2,lambda3,k
void write_moments_table(std::ostream& out, const MomentsTable& table);
MomentsTable read_moments_table(std::istream& in, const std::string& source = "<stream>");

}  // namespace expoerf
