#include "expoerf/mean_models.hpp"

namespace expoerf {

std::string to_string(MeanStrategy s) {
  switch (s) {
    case MeanStrategy::ambient_fixed: return "ambient-fixed";
    case MeanStrategy::personal_fixed: return "personal-fixed";
    case MeanStrategy::normal_exact: return "normal-exact";
    case MeanStrategy::lognormal_taylor: return "lognormal-taylor";
    case MeanStrategy::general_g: return "general-g";
  }
  return "?";
}

MeanStrategy strategy_for(ModelVariant model) {
  switch (model) {
    case ModelVariant::ambient_fixed: return MeanStrategy::ambient_fixed;
    case ModelVariant::personal_fixed: return MeanStrategy::personal_fixed;
    case ModelVariant::normal_exposure: return MeanStrategy::normal_exact;
    case ModelVariant::lognormal_exposure: return MeanStrategy::lognormal_taylor;
  }
  return MeanStrategy::lognormal_taylor;
}

ResponseFunction ResponseFunction::identity(double g2, double g3) {
  if (!std::isfinite(g2) || !std::isfinite(g3)) throw Error("g derivative constants must be finite");
  return ResponseFunction({}, g2, g3);
}

ResponseFunction ResponseFunction::custom(std::function<double(double)> g, double g2, double g3,
                                          double check_radius) {
  if (!g) throw Error("response function is empty");
  if (!std::isfinite(g2) || !std::isfinite(g3)) throw Error("g derivative constants must be finite");
  if (std::abs(g(0.0)) > 1e-12) throw Error("response function must satisfy g(0) = 0");
  constexpr int kGrid = 2001;
  double prev = g(-check_radius);
  for (int i = 1; i < kGrid; ++i) {
    const double u = -check_radius + 2.0 * check_radius * i / (kGrid - 1);
    const double v = g(u);
    if (!std::isfinite(v)) throw Error("response function is not finite on the check grid");
    if (v < prev) throw Error("response function must be increasing");
    prev = v;
  }
  return ResponseFunction(std::move(g), g2, g3);
}

}  // namespace expoerf
