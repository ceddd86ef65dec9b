#pragma once

// Synthetic datasets with known truth, and a brute-force Monte Carlo oracle for E[exp(gamma X)].

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "expoerf/common.hpp"
#include "expoerf/data_io.hpp"
#include "expoerf/micro_sim.hpp"

namespace expoerf {

enum class ExposureLaw { lognormal, normal, fixed };
std::string to_string(ExposureLaw law);
ExposureLaw parse_exposure_law(std::string_view s);

struct SynthScenario {
  RunConfig config;  // lag, spline df, seed and the sampler settings for refits

  double gamma = 0.005;
  std::vector<double> alpha;  // intercept then spline coefficients; empty -> projected seasonal curve
  ExposureLaw law = ExposureLaw::lognormal;
  int days = 363;             // count days; exposures are generated for days + lag
  int replicates = 800;       // personal exposures per day
  int sites = 8;              // one district per site

  // Ambient: yearly cycle plus AR(1) noise, shared by all sites, plus site scatter.
  double ambient_mean = 47.0;
  double ambient_amplitude = 12.0;
  double ambient_noise_sd = 6.0;
  double ambient_ar = 0.6;
  double site_sd = 4.0;

  // Personal daily mean = theta + phi * ambient + N(0, personal_noise_sd^2).
  double theta = 0.83;
  double phi = 0.40;
  double personal_noise_sd = 1.0;
  double cv = 0.25;           // within-day coefficient of variation
  double cv_jitter = 0.0;     // sd of log cv across days

  // Health baseline.
  double base_count = 150.0;
  double season_amplitude = 0.12;
  double winter_bump = 0.08;  // extra short winter peak so the time spline has work to do
  double temp_slope = -0.004; // per degree

  double temp_mean = 11.0;
  double temp_amplitude = 7.0;
  double temp_noise_sd = 2.0;

  Date start = Date(1997, 1, 1);

  void validate() const;
};

/// Scenario JSON: every RunConfig key plus the scenario keys above (flat object).
SynthScenario parse_scenario(const std::string& text);
SynthScenario load_scenario(const std::filesystem::path& path);
std::string scenario_json(const SynthScenario& s);

struct SynthTruth {
  double gamma = 0;
  Eigen::VectorXd alpha;
  std::vector<std::string> alpha_names;
  std::vector<Date> exposure_dates;
  Eigen::VectorXd lambda1, lambda2, lambda3;  // per exposure day, population values
  Eigen::VectorXd ambient;                    // spatial average per exposure day
  std::vector<Date> count_dates;
  Eigen::VectorXd log_mean;                   // per count day
  double rr10() const { return std::exp(10.0 * gamma); }
};

std::string truth_json(const SynthTruth& t, const SynthScenario& s);

struct SynthData {
  MonitorPanel monitors;
  ExposurePanel exposure;
  HealthSeries health;
  SynthTruth truth;
};

/// Draws a full dataset. Counts are Poisson with the exact mean of the
/// scenario's model evaluated at the true daily moments.
SynthData generate(const SynthScenario& scenario);

struct ExposureDistribution {
  ExposureLaw law = ExposureLaw::lognormal;
  double mean = 0;
  double variance = 0;
};

struct McEstimate {
  double estimate = 0;
  double standard_error = 0;
};

/// Monte Carlo mean of exp(gamma X). Requires n_draws >= 1e5.
McEstimate mc_expectation_exp(const ExposureDistribution& law, double gamma, long n_draws, std::uint64_t seed);

}  // namespace expoerf
