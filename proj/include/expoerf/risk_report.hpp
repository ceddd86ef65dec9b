#pragma once

// Relative risks, exceedance curves, the attenuation regression and plot-ready tables.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "expoerf/diagnostics.hpp"
#include "expoerf/mcmc.hpp"
#include "expoerf/micro_sim.hpp"

namespace expoerf {

struct RiskSummary {
  std::string label;
  double increment = 10.0;
  std::vector<double> probs = kSummaryProbs;
  std::vector<double> quantiles;  // of RR
  std::vector<double> grid;
  std::vector<double> exceedance;  // P(RR > c) per grid point
  double prob_above_one = 0;

  double median() const { return quantiles.at(2); }
};

/// 1.00..1.10 by 0.005 for a 10-unit increment, 1.00..1.50 by 0.025 for 50; otherwise
/// twenty steps up to 1 + increment/100.
std::vector<double> default_grid(double increment);

std::vector<double> exceedance(const std::vector<double>& rr, const std::vector<double>& grid);
RiskSummary relative_risk(const std::vector<double>& gamma_draws, double increment,
                          std::vector<double> grid = {}, std::string label = {});
RiskSummary relative_risk(const PosteriorDraws& draws, double increment, std::vector<double> grid = {});

struct AttenuationFit {
  double theta = 0;  // intercept
  double phi = 0;    // slope
  double r2 = 0;
  double residual_sd = 0;
  double slope_se = 0;
  int n = 0;
  int slope_sign() const { return (phi > 0) - (phi < 0); }
};

/// Least squares of personal daily means on ambient daily means; pairs with a NaN are skipped.
AttenuationFit attenuation_fit(const Eigen::VectorXd& ambient, const Eigen::VectorXd& personal);

struct GammaCheck {
  double median_ambient = 0;   // gamma from the ambient fit
  double median_personal = 0;  // gamma* from the personal fit
  double phi = 0;
  double discrepancy = 0;      // |median gamma - phi median gamma*| / |median gamma|
};
GammaCheck gamma_attenuation_check(const std::vector<double>& gamma_ambient, const std::vector<double>& gamma_personal,
                                   double phi);

// Table-1 style rows: label,increment,q025,q25,q50,q75,q975,p_gt_1
void write_rr_table(std::ostream& out, const std::vector<RiskSummary>& rows);
// label,increment,c,p_exceed
void write_exceedance_csv(std::ostream& out, const std::vector<RiskSummary>& rows);

/// Exposure posterior predictive for one day: a mixture over draws of the
/// day's fitted law (single value, normal or log-normal).
struct PredictiveSummary {
  ModelVariant model = ModelVariant::lognormal_exposure;
  double mean = 0;
  double second_moment = 0;
  double variance = 0;
  double mass_below_zero = 0;
};
PredictiveSummary exposure_predictive(const PosteriorDraws& draws, const ModelSpec& spec, Eigen::Index day);
/// Predictive density on `grid` (mixture of the per-draw densities, at most `max_draws` used).
/// Fixed-exposure fits put all their mass on the grid cell holding the daily value.
Eigen::VectorXd predictive_density(const PosteriorDraws& draws, const ModelSpec& spec, Eigen::Index day,
                                   const Eigen::VectorXd& grid,
                                   Eigen::Index max_draws = 2000);

/// Inputs available to the plot-data emitter; null entries are simply absent.
struct PlotInputs {
  const ExposurePanel* panel = nullptr;
  const DailySeries* ambient = nullptr;
  struct Fit {
    std::string label;
    const PosteriorDraws* draws = nullptr;
    const ModelSpec* spec = nullptr;
  };
  std::vector<Fit> fits;
  const DiagnosticsReport* diagnostics = nullptr;
  std::vector<RiskSummary> risks;
  std::optional<Date> density_day;
};

/// Selectors: fig1_boxplot, fig1_scatter, fig2_residuals, fig2_acf, fig3_density, fig4_exceedance.
/// Writes <selector>.csv into `dir` and returns its path.
inline const std::vector<std::string> kPlotSelectors = {"fig1_boxplot", "fig1_scatter", "fig2_residuals",
                                                        "fig2_acf",     "fig3_density", "fig4_exceedance"};
std::filesystem::path emit_plot_data(const PlotInputs& in, const std::string& selector,
                                     const std::filesystem::path& dir);

// date,min,q1,median,q3,max,mean
void write_boxplot_csv(std::ostream& out, const ExposurePanel& panel);

}  // namespace expoerf
