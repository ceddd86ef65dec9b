#pragma once

// Log-mean functions for the Poisson health model. Every strategy returns
// ln(mu_t) given the exposure summary for the (lagged) day, the exposure
// coefficient gamma and the covariate offset z_t' alpha.

#include <cmath>
#include <functional>
#include <string>

#include "expoerf/common.hpp"
#include "expoerf/exposure_moments.hpp"

namespace expoerf {

enum class MeanStrategy { ambient_fixed, personal_fixed, normal_exact, lognormal_taylor, general_g };

std::string to_string(MeanStrategy s);

template <typename Scalar>
Scalar linpred_fixed(Scalar exposure, Scalar gamma, Scalar offset) {
  return exposure * gamma + offset;
}

template <typename Scalar, typename DerivedZ, typename DerivedA>
Scalar linpred_fixed(Scalar exposure, Scalar gamma, const Eigen::MatrixBase<DerivedZ>& covars,
                     const Eigen::MatrixBase<DerivedA>& alpha) {
  return linpred_fixed(exposure, gamma, Scalar(covars.dot(alpha)));
}

/// Exact for normally distributed exposures: the normal moment generating function.
template <typename Scalar>
Scalar linpred_normal_exact(const DailyMoments<Scalar>& m, Scalar gamma, Scalar offset) {
  return gamma * m.lambda1 + gamma * gamma * m.lambda2 / Scalar(2) + offset;
}

/// Three-term expansion used for log-normal exposures.
template <typename Scalar>
Scalar linpred_lognormal_taylor(const DailyMoments<Scalar>& m, Scalar gamma, Scalar offset) {
  const Scalar g2 = gamma * gamma;
  return gamma * m.lambda1 + g2 * m.lambda2 / Scalar(2) + g2 * gamma * m.lambda3 / Scalar(6) + offset;
}

template <typename Scalar, typename G>
Scalar linpred_general_g(const DailyMoments<Scalar>& m, Scalar gamma, Scalar offset, Scalar g2, Scalar g3,
                         G&& g) {
  const Scalar gg = gamma * gamma;
  return g(gamma * m.lambda1) + gg * g2 * m.lambda2 + gg * gamma * g3 * m.lambda3 + offset;
}

template <typename Scalar>
Scalar linpred_general_g(const DailyMoments<Scalar>& m, Scalar gamma, Scalar offset, Scalar g2, Scalar g3) {
  return linpred_general_g(m, gamma, offset, g2, g3, [](Scalar u) { return u; });
}

/// Exposure-response function with fixed second and third derivative constants.
/// A user-supplied g must be bounded, increasing, smooth and satisfy g(0) = 0;
/// the last two are checked numerically on construction.
class ResponseFunction {
 public:
  static ResponseFunction identity(double g2 = 0.5, double g3 = 1.0 / 6.0);
  static ResponseFunction custom(std::function<double(double)> g, double g2, double g3,
                                 double check_radius = 1.0);

  double operator()(double u) const { return g_ ? g_(u) : u; }
  double g2() const { return g2_; }
  double g3() const { return g3_; }
  bool is_identity() const { return !g_; }

 private:
  ResponseFunction(std::function<double(double)> g, double g2, double g3)
      : g_(std::move(g)), g2_(g2), g3_(g3) {}
  std::function<double(double)> g_;
  double g2_ = 0.5;
  double g3_ = 1.0 / 6.0;
};

/// Strategy object selecting one of the mean functions above.
struct MeanFunction {
  MeanStrategy strategy = MeanStrategy::lognormal_taylor;
  ResponseFunction response = ResponseFunction::identity();
  int lag = 0;

  /// Exposure part of ln(mu_t), i.e. everything except the covariate offset.
  double exposure_term(const DailyMoments<double>& m, double gamma) const {
    switch (strategy) {
      case MeanStrategy::ambient_fixed:
      case MeanStrategy::personal_fixed:
        return linpred_fixed(m.lambda1, gamma, 0.0);
      case MeanStrategy::normal_exact:
        return linpred_normal_exact(m, gamma, 0.0);
      case MeanStrategy::lognormal_taylor:
        return linpred_lognormal_taylor(m, gamma, 0.0);
      case MeanStrategy::general_g:
        return linpred_general_g(m, gamma, 0.0, response.g2(), response.g3(),
                                 [this](double u) { return response(u); });
    }
    return 0.0;
  }

  double log_mean(const DailyMoments<double>& m, double gamma, double offset) const {
    return exposure_term(m, gamma) + offset;
  }
};

MeanStrategy strategy_for(ModelVariant model);

}  // namespace expoerf
