#pragma once

// MCMC for the Poisson exposure-response models: random-walk Metropolis blocks
// for the regression coefficients and for each day's exposure moments, conjugate
// Gibbs draws for the hierarchical variances.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "expoerf/common.hpp"
#include "expoerf/data_io.hpp"
#include "expoerf/exposure_moments.hpp"
#include "expoerf/mean_models.hpp"
#include "expoerf/micro_sim.hpp"
#include "expoerf/spline_basis.hpp"

namespace expoerf {

struct Priors {
  // beta = (gamma, alpha). Independent normals; a zero variance pins the
  // coefficient at its prior mean.
  Eigen::VectorXd beta_mean;
  Eigen::VectorXd beta_variance;
  double xi = 0;      // prior mean of daily exposure means
  double s2 = 0;      // prior mean of daily exposure variances
  // lambda2 > 0 is a support constraint on the normal prior; it is not
  // renormalized by tau2, which keeps the tau2 update conjugate.
  double epsilon = 0.001;
  double holloman_upper = 25.0;
};

struct ModelSpec {
  ModelVariant model = ModelVariant::lognormal_exposure;
  MeanFunction mean;
  Lambda3Rule lambda3 = Lambda3Rule::ratio;
  int lag = 0;

  // Count days inside the likelihood window.
  std::vector<Date> count_dates;
  std::vector<int> counts;
  Eigen::MatrixXd design;  // intercept + standardized covariates
  std::vector<std::string> covariate_names;
  std::vector<Eigen::Index> exposure_row;  // count day -> exposure day

  // Exposure days (including the first `lag` days, which only enter the exposure likelihood).
  std::vector<Date> exposure_dates;
  Eigen::VectorXd fixed_exposure;          // daily value for the fixed-exposure models
  std::vector<ExposureStats> exposure_stats;

  Priors priors;
  CovariateDesign covariates;

  Eigen::Index n_counts() const { return Eigen::Index(counts.size()); }
  Eigen::Index n_exposure_days() const { return Eigen::Index(exposure_dates.size()); }
  Eigen::Index n_beta() const { return 1 + design.cols(); }
  bool latent_moments() const {
    return model == ModelVariant::normal_exposure || model == ModelVariant::lognormal_exposure;
  }
  void validate() const;
};

/// Builds the model from aligned inputs. Model (i) reads `ambient`; the others read `panel`.
ModelSpec build_model_spec(const RunConfig& cfg, const HealthSeries& health, const DailySeries* ambient,
                           const ExposurePanel* panel);

/// Assembles a spec directly from count-level arrays (used by tests and the synthetic generator).
ModelSpec make_fixed_spec(ModelVariant model, const std::vector<int>& counts, const Eigen::MatrixXd& design,
                          const Eigen::VectorXd& exposure, double beta_prior_variance = 1.0e4);

struct SamplerSettings {
  int chains = 2;
  long burn_in = 20000;
  long iterations = 250000;
  long thin = 25;
  bool store_lambda = true;
  bool parallel_chains = true;

  static SamplerSettings from(const RunConfig& cfg);
  long draws_per_chain() const { return iterations / thin; }
};

struct ChainDraws {
  std::vector<long> iteration;
  Eigen::MatrixXd beta;      // draws x n_beta
  Eigen::VectorXd sigma2;    // NaN when the model has no such parameter
  Eigen::VectorXd tau2;
  Eigen::VectorXd deviance;
  Eigen::MatrixXd lambda1;   // draws x exposure days; empty for fixed models
  Eigen::MatrixXd lambda2;
  double beta_acceptance = 0;
  double lambda_acceptance = 0;
  double variance_acceptance = 0;
};

struct PosteriorDraws {
  ModelVariant model = ModelVariant::lognormal_exposure;
  bool holloman = false;
  std::vector<std::string> beta_names;  // gamma, then covariate names
  std::vector<ChainDraws> chains;
  SamplerSettings settings;
  std::uint64_t seed = 0;
  // Posterior means of the latent daily moments, averaged over all chains.
  Eigen::VectorXd lambda1_mean;
  Eigen::VectorXd lambda2_mean;

  Eigen::Index n_chains() const { return Eigen::Index(chains.size()); }
  Eigen::Index draws_per_chain() const { return chains.empty() ? 0 : chains.front().beta.rows(); }
  /// Scalar parameter names: gamma, alpha_1..alpha_p, then sigma2/tau2 when present.
  std::vector<std::string> scalar_names() const;
  /// draws x scalar parameters for one chain, columns as in scalar_names().
  Eigen::MatrixXd scalar_matrix(Eigen::Index chain) const;
  std::vector<double> gamma_draws() const;
};

/// Full state of one chain.
struct ChainState {
  Eigen::VectorXd beta;
  Eigen::VectorXd lambda1;  // per exposure day (Holloman: the latent daily level)
  Eigen::VectorXd lambda2;
  double sigma2 = kMissing;
  double tau2 = kMissing;
};

/// One Markov chain. Exposes the individual update blocks so they can be exercised directly.
class ChainSampler {
 public:
  ChainSampler(const ModelSpec& spec, Rng rng, bool holloman = false);

  /// Draws an overdispersed starting state; retries a bounded number of times
  /// if the log posterior is not finite.
  void initialize();
  void set_state(const ChainState& state);
  /// Position of this chain among `chains`; spreads bounded starting values across the prior.
  void set_chain_slot(int chain, int chains);
  const ChainState& state() const { return state_; }

  /// Joint random-walk proposal beta' = beta + scale * L z with L L' the proposal covariance.
  /// Returns true on acceptance.
  bool update_beta_block(double scale);
  bool update_beta_block() { return update_beta_block(beta_scale_); }
  /// Per-day (lambda1, lambda2) blocks, or the latent daily level for the Holloman model.
  /// Returns the number of accepted day moves.
  int update_lambda_days();
  void update_variances();
  void sweep();

  /// Runs burn-in with proposal adaptation, then the thinned main run.
  ChainDraws run(const SamplerSettings& settings);

  double log_posterior() const;
  double poisson_loglik() const;
  double deviance() const;
  /// Linear predictor ln(mu_t) for every count day at the current state.
  Eigen::VectorXd log_mean() const;

  const Eigen::MatrixXd& beta_proposal_cholesky() const { return beta_chol_; }
  void set_beta_proposal(const Eigen::MatrixXd& covariance);
  double beta_scale() const { return beta_scale_; }

 private:
  double exposure_term(Eigen::Index day, double gamma, double l1, double l2) const;
  double day_log_target(Eigen::Index day, double l1, double l2) const;
  double lambda_prior(double l1, double l2) const;
  void refresh_caches();
  void adapt(long iter, long burn_in);

  const ModelSpec& spec_;
  Rng rng_;
  bool holloman_;
  int chain_ = 0, n_chains_ = 1;
  ChainState state_;
  Eigen::VectorXd offset_;      // Z alpha per count day
  Eigen::VectorXd eta_;         // ln mu per count day
  std::vector<Eigen::Index> count_of_day_;  // exposure day -> count day or -1
  std::vector<Eigen::Index> free_beta_;

  Eigen::MatrixXd beta_chol_;
  double beta_scale_ = 1.0;
  std::vector<Eigen::Matrix2d> day_chol_;
  Eigen::VectorXd day_log_scale_;

  // Burn-in adaptation accumulators.
  long adapt_count_ = 0;
  Eigen::VectorXd beta_sum_;
  Eigen::MatrixXd beta_sum_sq_;
  long beta_accepts_ = 0, beta_tries_ = 0;
  Eigen::VectorXd day_accepts_;
  long day_tries_ = 0;
  long var_accepts_ = 0, var_tries_ = 0;
};

/// Conjugate draw of a variance given Gaussian level values:
/// Inverse-Gamma(epsilon + n/2, epsilon + sum (v - prior_mean)^2 / 2).
double update_variance_gibbs(Rng& rng, const Eigen::Ref<const Eigen::VectorXd>& values, double epsilon,
                             double prior_mean);

/// Gamma(shape, rate) restricted to [lower, inf).
double draw_truncated_gamma(Rng& rng, double shape, double rate, double lower);

/// Posterior mode of beta for a fixed exposure series (Newton iterations),
/// with the inverse negative Hessian.
struct LaplaceFit {
  Eigen::VectorXd mode;
  Eigen::MatrixXd covariance;
};
LaplaceFit poisson_laplace(const ModelSpec& spec, const Eigen::VectorXd& exposure_per_count_day);

PosteriorDraws run_chains(const ModelSpec& spec, const SamplerSettings& settings, std::uint64_t seed);

/// The comparison model with lambda_t ~ N(x_t, sigma2), sigma2 ~ Uniform(0, upper)
/// and ln mu_t = gamma lambda_t + z_t' alpha, fitted to the daily exposure means.
PosteriorDraws holloman_variant(const ModelSpec& spec, const SamplerSettings& settings, std::uint64_t seed);

/// ln(mu_t) per count day at an explicit parameter value. `lambda1`/`lambda2` are per
/// exposure day and ignored by the fixed-exposure models.
Eigen::VectorXd log_mean_at(const ModelSpec& spec, bool holloman, const Eigen::VectorXd& beta,
                            const Eigen::VectorXd& lambda1, const Eigen::VectorXd& lambda2);

/// Recomputes ln(mu_t) per count day for one retained draw.
Eigen::VectorXd draw_log_mean(const ModelSpec& spec, const PosteriorDraws& draws, Eigen::Index chain,
                              Eigen::Index draw);
double poisson_deviance(const std::vector<int>& counts, const Eigen::VectorXd& log_mean);

// Persistence: one CSV per chain (iter,gamma,alpha_1..alpha_p,sigma2,tau2,deviance),
// optional lambda tables, and a JSON sidecar.
void write_draws(const std::filesystem::path& dir, const PosteriorDraws& draws, const ModelSpec& spec,
                 const std::string& prefix = "draws");
PosteriorDraws read_draws(const std::filesystem::path& dir, const std::string& prefix = "draws");

}  // namespace expoerf
