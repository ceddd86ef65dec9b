#pragma once

// DIC, Gelman-Rubin, posterior-predictive residuals and their autocorrelation.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "expoerf/mcmc.hpp"

namespace expoerf {

struct DicResult {
  double dic = 0;
  double dbar = 0;      // posterior mean deviance
  double dhat = 0;      // deviance at the posterior means
  double pd = 0;        // dbar - dhat
  double effective_draws = 0;
  std::optional<std::string> warning;
};

DicResult dic(const PosteriorDraws& draws, const ModelSpec& spec);

/// Effective sample size of one chain (initial positive sequence of autocorrelations).
double effective_sample_size(const Eigen::Ref<const Eigen::VectorXd>& x);

/// sqrt(1 + B / (n W)); B = n * variance of chain means, W = mean within-chain variance.
/// Equals 1 exactly when the chains are identical.
double potential_scale_reduction(const std::vector<Eigen::VectorXd>& chains);

struct RhatEntry {
  std::string name;
  double rhat = 0;
};
std::vector<RhatEntry> gelman_rubin(const PosteriorDraws& draws);

/// Sample autocorrelation with the divide-by-n estimator, lags 0..max_lag.
Eigen::VectorXd sample_acf(const Eigen::Ref<const Eigen::VectorXd>& x, int max_lag);

/// r_t = (y_t - mu_t) / sqrt(mu_t) per retained draw: rows = draws (all chains), cols = count days.
Eigen::MatrixXd residual_draws(const PosteriorDraws& draws, const ModelSpec& spec);

inline const std::vector<double> kSummaryProbs = {0.025, 0.25, 0.5, 0.75, 0.975};

struct ResidualSummary {
  std::vector<Date> dates;
  std::vector<double> probs = kSummaryProbs;
  Eigen::MatrixXd quantiles;  // days x probs
  double share_within_2 = 0;  // share of days with |median r_t| <= 2
};
ResidualSummary ppc_residuals(const PosteriorDraws& draws, const ModelSpec& spec);
ResidualSummary summarize_residuals(const Eigen::MatrixXd& residuals, const std::vector<Date>& dates);

struct AcfSummary {
  std::vector<double> probs = {0.025, 0.5, 0.975};
  Eigen::MatrixXd quantiles;  // (max_lag + 1) x probs
  double bartlett = 0;        // 2 / sqrt(n)
  bool medians_within_band = false;  // lags 1..min(10, max_lag)
};
AcfSummary residual_acf(const PosteriorDraws& draws, const ModelSpec& spec, int max_lag);
AcfSummary summarize_acf(const Eigen::MatrixXd& residuals, int max_lag);

struct DiagnosticsReport {
  DicResult dic;
  std::vector<RhatEntry> rhat;
  ResidualSummary residuals;
  AcfSummary acf;
};

DiagnosticsReport diagnose(const PosteriorDraws& draws, const ModelSpec& spec, int max_lag = 20);

// date,q025,q25,q50,q75,q975
void write_residuals_csv(std::ostream& out, const ResidualSummary& s);
// lag,q025,q50,q975,band
void write_acf_csv(std::ostream& out, const AcfSummary& s);
std::string report_json(const DiagnosticsReport& r);

}  // namespace expoerf
