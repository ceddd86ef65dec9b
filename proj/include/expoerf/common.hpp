#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace expoerf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

/// Calendar day. Arithmetic is in whole days.
class Date {
 public:
  Date() = default;
  explicit Date(std::chrono::sys_days d) : days_(d) {}
  Date(int y, unsigned m, unsigned d);

  static Date parse(std::string_view iso);  // YYYY-MM-DD
  std::string iso() const;

  std::chrono::sys_days sys() const { return days_; }
  std::int64_t serial() const { return days_.time_since_epoch().count(); }
  int day_of_year() const;

  Date operator+(int n) const { return Date(days_ + std::chrono::days(n)); }
  Date operator-(int n) const { return Date(days_ - std::chrono::days(n)); }
  std::int64_t operator-(const Date& o) const { return (days_ - o.days_).count(); }
  auto operator<=>(const Date&) const = default;

 private:
  std::chrono::sys_days days_{};
};

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) { return std::isnan(v); }

/// Shortest round-trip decimal form of a double ("NA" for NaN).
std::string format_number(double v);

/// Derives an independent generator for stream `index` of a run seeded by `seed`.
Rng derive_rng(std::uint64_t seed, std::uint64_t index);

// Sample statistics over an Eigen vector. Missing values are not skipped.
double sample_mean(const Eigen::Ref<const Eigen::VectorXd>& x);
double sample_variance(const Eigen::Ref<const Eigen::VectorXd>& x);  // n-1 denominator

/// Linear-interpolation quantile (Hyndman-Fan type 7). `p` in [0,1].
double quantile(std::vector<double> values, double p);
std::vector<double> quantiles(std::vector<double> values, const std::vector<double>& probs);

double normal_cdf(double z);
double log_normal_pdf(double x, double mean, double var);

/// One draw from Inverse-Gamma(shape, scale), density proportional to v^{-shape-1} exp(-scale/v).
double draw_inverse_gamma(Rng& rng, double shape, double scale);

}  // namespace expoerf
