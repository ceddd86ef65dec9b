#include "expoerf/mcmc.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "csv.hpp"
#include "json.hpp"

namespace expoerf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kInitRetries = 50;

double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

}  // namespace

// ---------------------------------------------------------------------------
// Model construction

void ModelSpec::validate() const {
  if (counts.empty()) throw Error("model has no count days");
  if (design.rows() != n_counts()) throw Error("design rows do not match count days");
  if (Eigen::Index(exposure_row.size()) != n_counts()) throw Error("exposure alignment missing");
  if (priors.beta_mean.size() != n_beta() || priors.beta_variance.size() != n_beta())
    throw Error("beta prior dimension mismatch");
  if ((priors.beta_variance.array() < 0).any()) throw Error("beta prior variances must be >= 0");
  if (!(priors.epsilon > 0)) throw Error("epsilon must be > 0");
  for (auto r : exposure_row)
    if (r < 0 || r >= n_exposure_days()) throw Error("exposure alignment out of range");
  if (latent_moments()) {
    if (Eigen::Index(exposure_stats.size()) != n_exposure_days()) throw Error("exposure samples missing");
    for (const auto& s : exposure_stats) {
      if (s.k < 2) throw Error("each exposure day needs at least two samples");
      if (model == ModelVariant::lognormal_exposure && !s.positive)
        throw Error("log-normal exposure model requires strictly positive exposures");
    }
  } else if (fixed_exposure.size() != n_exposure_days()) {
    throw Error("fixed exposure series missing");
  }
}

ModelSpec build_model_spec(const RunConfig& cfg, const HealthSeries& health, const DailySeries* ambient,
                           const ExposurePanel* panel) {
  cfg.validate();
  ModelSpec spec;
  spec.model = cfg.model;
  spec.mean.strategy = strategy_for(cfg.model);
  spec.mean.lag = cfg.lag;
  spec.lambda3 = cfg.lambda3;
  spec.lag = cfg.lag;

  if (cfg.model == ModelVariant::ambient_fixed) {
    if (!ambient) throw Error("model (i) needs the ambient series");
    std::vector<double> x;
    for (Eigen::Index i = 0; i < ambient->size(); ++i)
      if (!is_missing(ambient->values(i))) {
        spec.exposure_dates.push_back(ambient->dates[std::size_t(i)]);
        x.push_back(ambient->values(i));
      }
    spec.fixed_exposure = Eigen::Map<Eigen::VectorXd>(x.data(), Eigen::Index(x.size()));
  } else {
    if (!panel) throw Error("models (ii)-(iv) need an exposure panel");
    spec.exposure_dates = panel->dates;
    spec.fixed_exposure = panel->daily_mean();
    for (Eigen::Index t = 0; t < panel->days(); ++t) {
      const Eigen::VectorXd row = panel->exposure.row(t).transpose();
      spec.exposure_stats.push_back(ExposureStats::from(std::span<const double>(row.data(), std::size_t(row.size()))));
    }
  }
  if (spec.exposure_dates.empty()) throw Error("no exposure days");

  std::vector<double> temps;
  for (Eigen::Index i = 0; i < health.size(); ++i) {
    const Date d = health.dates[std::size_t(i)];
    const auto it = std::lower_bound(spec.exposure_dates.begin(), spec.exposure_dates.end(), d - cfg.lag);
    if (it == spec.exposure_dates.end() || *it != d - cfg.lag) continue;
    spec.count_dates.push_back(d);
    spec.counts.push_back(health.counts[std::size_t(i)]);
    spec.exposure_row.push_back(Eigen::Index(it - spec.exposure_dates.begin()));
    temps.push_back(health.temp_mean(i));
  }
  if (spec.counts.empty()) throw Error("no count day has a lagged exposure");

  const Eigen::VectorXd tv = Eigen::Map<Eigen::VectorXd>(temps.data(), Eigen::Index(temps.size()));
  spec.covariates = build_covariate_design(spec.count_dates, tv, cfg.time_df, cfg.temp_df);
  spec.design = spec.covariates.matrix;
  spec.covariate_names = spec.covariates.names;

  spec.priors.beta_mean = Eigen::VectorXd::Zero(spec.n_beta());
  spec.priors.beta_variance = Eigen::VectorXd::Constant(spec.n_beta(), cfg.beta_prior_variance);
  spec.priors.epsilon = cfg.epsilon;
  spec.priors.holloman_upper = cfg.holloman_upper;
  if (!spec.exposure_stats.empty()) {
    double m = 0, v = 0;
    for (const auto& s : spec.exposure_stats) {
      m += s.mean;
      v += s.variance();
    }
    spec.priors.xi = cfg.xi.value_or(m / double(spec.exposure_stats.size()));
    spec.priors.s2 = cfg.s2.value_or(v / double(spec.exposure_stats.size()));
  } else {
    spec.priors.xi = cfg.xi.value_or(spec.fixed_exposure.mean());
    spec.priors.s2 = cfg.s2.value_or(0.0);
  }
  spec.validate();
  return spec;
}

ModelSpec make_fixed_spec(ModelVariant model, const std::vector<int>& counts, const Eigen::MatrixXd& design,
                          const Eigen::VectorXd& exposure, double beta_prior_variance) {
  if (model != ModelVariant::ambient_fixed && model != ModelVariant::personal_fixed)
    throw Error("make_fixed_spec: fixed-exposure models only");
  if (Eigen::Index(counts.size()) != design.rows() || exposure.size() != design.rows())
    throw Error("make_fixed_spec: dimension mismatch");
  ModelSpec spec;
  spec.model = model;
  spec.mean.strategy = strategy_for(model);
  spec.counts = counts;
  spec.design = design;
  spec.fixed_exposure = exposure;
  const Date start(2000, 1, 1);
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    spec.count_dates.push_back(start + int(i));
    spec.exposure_dates.push_back(start + int(i));
    spec.exposure_row.push_back(i);
  }
  spec.covariate_names.push_back("intercept");
  for (Eigen::Index c = 1; c < design.cols(); ++c) spec.covariate_names.push_back("z_" + std::to_string(c));
  spec.priors.beta_mean = Eigen::VectorXd::Zero(spec.n_beta());
  spec.priors.beta_variance = Eigen::VectorXd::Constant(spec.n_beta(), beta_prior_variance);
  spec.priors.xi = exposure.mean();
  spec.validate();
  return spec;
}

SamplerSettings SamplerSettings::from(const RunConfig& cfg) {
  SamplerSettings s;
  s.chains = cfg.chains;
  s.burn_in = cfg.burn_in;
  s.iterations = cfg.iterations;
  s.thin = cfg.thin;
  s.store_lambda = cfg.save_lambda;
  return s;
}

// ---------------------------------------------------------------------------
// Draw containers

std::vector<std::string> PosteriorDraws::scalar_names() const {
  std::vector<std::string> names{"gamma"};
  for (std::size_t i = 1; i < beta_names.size(); ++i) names.push_back("alpha_" + std::to_string(i));
  if (!chains.empty() && chains.front().sigma2.size() > 0 && !is_missing(chains.front().sigma2(0)))
    names.push_back("sigma2");
  if (!chains.empty() && chains.front().tau2.size() > 0 && !is_missing(chains.front().tau2(0)))
    names.push_back("tau2");
  return names;
}

Eigen::MatrixXd PosteriorDraws::scalar_matrix(Eigen::Index chain) const {
  const auto& c = chains.at(std::size_t(chain));
  const auto names = scalar_names();
  Eigen::MatrixXd m(c.beta.rows(), Eigen::Index(names.size()));
  m.leftCols(c.beta.cols()) = c.beta;
  Eigen::Index col = c.beta.cols();
  for (std::size_t i = std::size_t(c.beta.cols()); i < names.size(); ++i)
    m.col(col++) = names[i] == "sigma2" ? c.sigma2 : c.tau2;
  return m;
}

std::vector<double> PosteriorDraws::gamma_draws() const {
  std::vector<double> g;
  for (const auto& c : chains)
    for (Eigen::Index i = 0; i < c.beta.rows(); ++i) g.push_back(c.beta(i, 0));
  return g;
}

// ---------------------------------------------------------------------------
// Standalone updates

double update_variance_gibbs(Rng& rng, const Eigen::Ref<const Eigen::VectorXd>& values, double epsilon,
                             double prior_mean) {
  if (values.size() < 1) throw Error("variance update needs at least one value");
  const double ss = (values.array() - prior_mean).square().sum();
  return draw_inverse_gamma(rng, epsilon + 0.5 * double(values.size()), epsilon + 0.5 * ss);
}

double draw_truncated_gamma(Rng& rng, double shape, double rate, double lower) {
  if (!(shape > 0) || !(rate > 0)) throw Error("truncated gamma: invalid parameters");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double t = rate * lower;  // truncation point on the standard (rate 1) scale
  if (t <= std::max(shape - 1.0, 0.0) + 1.0 || shape < 1.0) {
    std::gamma_distribution<double> g(shape, 1.0);
    for (int i = 0; i < 100000; ++i) {
      const double x = g(rng);
      if (x >= t) return x / rate;
    }
    if (shape < 1.0) throw Error("truncated gamma: rejection sampler failed");
  }
  // Shifted exponential proposal t + Exp(r), r = 1 - (shape - 1)/t; exact for shape >= 1.
  const double r = 1.0 - (shape - 1.0) / t;
  std::exponential_distribution<double> ex(r);
  for (;;) {
    const double x = t + ex(rng);
    const double log_accept = (shape - 1.0) * std::log(x / t) - (1.0 - r) * (x - t);
    if (std::log(unif(rng)) <= log_accept) return x / rate;
  }
}

LaplaceFit poisson_laplace(const ModelSpec& spec, const Eigen::VectorXd& x) {
  const Eigen::Index n = spec.n_counts(), p = spec.n_beta();
  if (x.size() != n) throw Error("poisson_laplace: exposure length mismatch");
  Eigen::MatrixXd X(n, p);
  X.col(0) = x;
  X.rightCols(p - 1) = spec.design;
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = spec.counts[std::size_t(i)];

  std::vector<Eigen::Index> free;
  for (Eigen::Index j = 0; j < p; ++j)
    if (spec.priors.beta_variance(j) > 0) free.push_back(j);
  const auto q = Eigen::Index(free.size());

  Eigen::VectorXd beta = spec.priors.beta_mean;
  if (spec.priors.beta_variance(1) > 0) beta(1) = std::log(std::max(y.mean(), 0.5));
  auto objective = [&](const Eigen::VectorXd& b) {
    const Eigen::VectorXd eta = X * b;
    double f = y.dot(eta) - eta.array().exp().sum();
    for (auto j : free) f -= 0.5 * std::pow(b(j) - spec.priors.beta_mean(j), 2) / spec.priors.beta_variance(j);
    return f;
  };
  Eigen::MatrixXd H(q, q);
  double f = objective(beta);
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd mu = (X * beta).array().exp();
    const Eigen::VectorXd r = X.transpose() * (y - mu);
    Eigen::VectorXd g(q);
    Eigen::MatrixXd Xf(n, q);
    for (Eigen::Index a = 0; a < q; ++a) {
      const auto j = free[std::size_t(a)];
      g(a) = r(j) - (beta(j) - spec.priors.beta_mean(j)) / spec.priors.beta_variance(j);
      Xf.col(a) = X.col(j);
    }
    H = Xf.transpose() * mu.asDiagonal() * Xf;
    for (Eigen::Index a = 0; a < q; ++a) H(a, a) += 1.0 / spec.priors.beta_variance(free[std::size_t(a)]);
    const Eigen::VectorXd step = H.ldlt().solve(g);
    double t = 1.0;
    Eigen::VectorXd next = beta;
    for (int half = 0; half < 40; ++half) {
      next = beta;
      for (Eigen::Index a = 0; a < q; ++a) next(free[std::size_t(a)]) += t * step(a);
      const double fn = objective(next);
      if (std::isfinite(fn) && fn >= f - 1e-12) {
        f = fn;
        break;
      }
      t *= 0.5;
    }
    beta = next;
    if (t * step.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }
  LaplaceFit fit;
  fit.mode = beta;
  fit.covariance = Eigen::MatrixXd::Zero(p, p);
  const Eigen::MatrixXd Hinv = H.ldlt().solve(Eigen::MatrixXd::Identity(q, q));
  for (Eigen::Index a = 0; a < q; ++a)
    for (Eigen::Index b = 0; b < q; ++b) fit.covariance(free[std::size_t(a)], free[std::size_t(b)]) = Hinv(a, b);
  return fit;
}

double poisson_deviance(const std::vector<int>& counts, const Eigen::VectorXd& log_mean) {
  double ll = 0;
  for (Eigen::Index i = 0; i < log_mean.size(); ++i) {
    const double y = counts[std::size_t(i)];
    ll += y * log_mean(i) - std::exp(log_mean(i)) - std::lgamma(y + 1.0);
  }
  return -2.0 * ll;
}

namespace {

bool latent_model(const ModelSpec& s, bool holloman) { return holloman || s.latent_moments(); }

double exposure_term_at(const ModelSpec& spec, bool holloman, Eigen::Index day, double gamma, double l1, double l2) {
  if (holloman) return gamma * l1;
  switch (spec.model) {
    case ModelVariant::ambient_fixed:
    case ModelVariant::personal_fixed:
      return gamma * spec.fixed_exposure(day);
    case ModelVariant::normal_exposure:
      return linpred_normal_exact(DailyMoments<double>{l1, l2, 0.0, 0}, gamma, 0.0);
    case ModelVariant::lognormal_exposure: {
      const DailyMoments<double> m{l1, l2, lambda3_from(l1, l2, spec.lambda3), 0};
      return spec.mean.exposure_term(m, gamma);
    }
  }
  return 0.0;
}

}  // namespace

Eigen::VectorXd log_mean_at(const ModelSpec& spec, bool holloman, const Eigen::VectorXd& beta,
                            const Eigen::VectorXd& lambda1, const Eigen::VectorXd& lambda2) {
  const bool latent = holloman || spec.latent_moments();
  if (latent && lambda1.size() != spec.n_exposure_days()) throw Error("log_mean_at: lambda dimension mismatch");
  Eigen::VectorXd eta = spec.design * beta.tail(spec.design.cols());
  for (Eigen::Index t = 0; t < spec.n_counts(); ++t) {
    const auto d = spec.exposure_row[std::size_t(t)];
    eta(t) += exposure_term_at(spec, holloman, d, beta(0), latent ? lambda1(d) : 0.0,
                               latent && lambda2.size() > 0 ? lambda2(d) : 0.0);
  }
  return eta;
}

// ---------------------------------------------------------------------------
// ChainSampler

ChainSampler::ChainSampler(const ModelSpec& spec, Rng rng, bool holloman)
    : spec_(spec), rng_(std::move(rng)), holloman_(holloman) {
  spec_.validate();
  if (holloman_ && spec_.n_exposure_days() < 3) throw Error("Holloman variant needs at least three exposure days");
  count_of_day_.assign(std::size_t(spec_.n_exposure_days()), -1);
  for (Eigen::Index t = 0; t < spec_.n_counts(); ++t) {
    auto& slot = count_of_day_[std::size_t(spec_.exposure_row[std::size_t(t)])];
    if (slot >= 0) throw Error("two count days map to one exposure day");
    slot = t;
  }
  for (Eigen::Index j = 0; j < spec_.n_beta(); ++j)
    if (spec_.priors.beta_variance(j) > 0) free_beta_.push_back(j);
  state_.beta = spec_.priors.beta_mean;
  state_.lambda1 = spec_.fixed_exposure;
  state_.lambda2 = Eigen::VectorXd::Zero(spec_.n_exposure_days());
  beta_chol_ = Eigen::MatrixXd::Zero(spec_.n_beta(), spec_.n_beta());
  day_chol_.assign(std::size_t(spec_.n_exposure_days()), Eigen::Matrix2d::Zero());
  day_log_scale_ = Eigen::VectorXd::Constant(spec_.n_exposure_days(), std::log(2.38 / std::sqrt(holloman_ ? 1.0 : 2.0)));
  day_accepts_ = Eigen::VectorXd::Zero(spec_.n_exposure_days());
  refresh_caches();
}

double ChainSampler::exposure_term(Eigen::Index day, double gamma, double l1, double l2) const {
  return exposure_term_at(spec_, holloman_, day, gamma, l1, l2);
}

void ChainSampler::refresh_caches() {
  offset_ = spec_.design * state_.beta.tail(spec_.design.cols());
  eta_.resize(spec_.n_counts());
  for (Eigen::Index t = 0; t < spec_.n_counts(); ++t) {
    const auto d = spec_.exposure_row[std::size_t(t)];
    eta_(t) = offset_(t) + exposure_term(d, state_.beta(0), state_.lambda1(d), state_.lambda2(d));
  }
}

void ChainSampler::set_state(const ChainState& s) {
  if (s.beta.size() != spec_.n_beta()) throw Error("set_state: beta dimension mismatch");
  state_ = s;
  if (state_.lambda1.size() != spec_.n_exposure_days()) state_.lambda1 = spec_.fixed_exposure;
  if (state_.lambda2.size() != spec_.n_exposure_days()) state_.lambda2 = Eigen::VectorXd::Zero(spec_.n_exposure_days());
  refresh_caches();
}

void ChainSampler::set_chain_slot(int chain, int chains) {
  if (chains < 1 || chain < 0 || chain >= chains) throw Error("invalid chain slot");
  chain_ = chain;
  n_chains_ = chains;
}

void ChainSampler::set_beta_proposal(const Eigen::MatrixXd& covariance) {
  const auto p = spec_.n_beta();
  if (covariance.rows() != p || covariance.cols() != p) throw Error("beta proposal dimension mismatch");
  const auto q = Eigen::Index(free_beta_.size());
  beta_chol_.setZero(p, p);
  if (q == 0) return;
  Eigen::MatrixXd sub(q, q);
  for (Eigen::Index a = 0; a < q; ++a)
    for (Eigen::Index b = 0; b < q; ++b) sub(a, b) = covariance(free_beta_[std::size_t(a)], free_beta_[std::size_t(b)]);
  const double jitter = 1e-12 * std::max(sub.diagonal().maxCoeff(), 1e-300);
  Eigen::LLT<Eigen::MatrixXd> llt(sub + jitter * Eigen::MatrixXd::Identity(q, q));
  if (llt.info() != Eigen::Success) {
    // Fall back to the diagonal.
    Eigen::MatrixXd d = sub.diagonal().cwiseMax(1e-300).asDiagonal();
    llt.compute(d);
  }
  const Eigen::MatrixXd L = llt.matrixL();
  for (Eigen::Index a = 0; a < q; ++a)
    for (Eigen::Index b = 0; b < q; ++b) beta_chol_(free_beta_[std::size_t(a)], free_beta_[std::size_t(b)]) = L(a, b);
}

double ChainSampler::poisson_loglik() const {
  double ll = 0;
  for (Eigen::Index t = 0; t < spec_.n_counts(); ++t) ll += spec_.counts[std::size_t(t)] * eta_(t) - std::exp(eta_(t));
  return ll;
}

double ChainSampler::deviance() const { return poisson_deviance(spec_.counts, eta_); }

Eigen::VectorXd ChainSampler::log_mean() const { return eta_; }

double ChainSampler::lambda_prior(double l1, double l2) const {
  const auto& p = spec_.priors;
  double lp = -0.5 * std::pow(l1 - p.xi, 2) / state_.sigma2;
  if (!holloman_) lp -= 0.5 * std::pow(l2 - p.s2, 2) / state_.tau2;
  return lp;
}

double ChainSampler::day_log_target(Eigen::Index day, double l1, double l2) const {
  double lt = 0;
  if (holloman_) {
    lt = -0.5 * std::pow(l1 - spec_.fixed_exposure(day), 2) / state_.sigma2;
  } else {
    if (!(l2 > 0)) return kNegInf;
    const auto& s = spec_.exposure_stats[std::size_t(day)];
    if (spec_.model == ModelVariant::lognormal_exposure) {
      if (!(l1 > 0)) return kNegInf;
      lt = lognormal_loglik(s, lognormal_from_moments(l1, l2));
    } else {
      lt = normal_loglik(s, l1, l2);
    }
    lt += lambda_prior(l1, l2);
  }
  const auto t = count_of_day_[std::size_t(day)];
  if (t >= 0) {
    const double eta = offset_(t) + exposure_term(day, state_.beta(0), l1, l2);
    lt += spec_.counts[std::size_t(t)] * eta - std::exp(eta);
  }
  return lt;
}

double ChainSampler::log_posterior() const {
  const auto& p = spec_.priors;
  double lp = poisson_loglik();
  for (auto j : free_beta_) lp -= 0.5 * std::pow(state_.beta(j) - p.beta_mean(j), 2) / p.beta_variance(j);
  if (holloman_) {
    if (!(state_.sigma2 > 0 && state_.sigma2 < p.holloman_upper)) return kNegInf;
    const double n = double(spec_.n_exposure_days());
    lp -= 0.5 * n * std::log(state_.sigma2);
    lp -= 0.5 * (state_.lambda1 - spec_.fixed_exposure).squaredNorm() / state_.sigma2;
    return lp;
  }
  if (!spec_.latent_moments()) return lp;
  if (!(state_.sigma2 > 0) || !(state_.tau2 > 0)) return kNegInf;
  const double n = double(spec_.n_exposure_days());
  for (Eigen::Index d = 0; d < spec_.n_exposure_days(); ++d) {
    const double l1 = state_.lambda1(d), l2 = state_.lambda2(d);
    if (!(l2 > 0)) return kNegInf;
    const auto& s = spec_.exposure_stats[std::size_t(d)];
    if (spec_.model == ModelVariant::lognormal_exposure) {
      if (!(l1 > 0)) return kNegInf;
      lp += lognormal_loglik(s, lognormal_from_moments(l1, l2));
    } else {
      lp += normal_loglik(s, l1, l2);
    }
    lp += lambda_prior(l1, l2);
  }
  lp -= 0.5 * n * (std::log(state_.sigma2) + std::log(state_.tau2));
  lp += -(p.epsilon + 1.0) * std::log(state_.sigma2) - p.epsilon / state_.sigma2;
  lp += -(p.epsilon + 1.0) * std::log(state_.tau2) - p.epsilon / state_.tau2;
  return lp;
}

bool ChainSampler::update_beta_block(double scale) {
  const auto p = spec_.n_beta();
  Eigen::VectorXd z(p);
  for (Eigen::Index j = 0; j < p; ++j) z(j) = standard_normal(rng_);
  const Eigen::VectorXd delta = scale * (beta_chol_ * z);
  ++beta_tries_;
  if (delta.isZero(0.0)) {
    ++beta_accepts_;
    return true;
  }
  const auto& pr = spec_.priors;
  const Eigen::VectorXd prop = state_.beta + delta;
  const Eigen::VectorXd prop_offset = spec_.design * prop.tail(spec_.design.cols());
  double ll_new = 0, ll_old = 0;
  Eigen::VectorXd prop_eta(spec_.n_counts());
  for (Eigen::Index t = 0; t < spec_.n_counts(); ++t) {
    const auto d = spec_.exposure_row[std::size_t(t)];
    prop_eta(t) = prop_offset(t) + exposure_term(d, prop(0), state_.lambda1(d), state_.lambda2(d));
    const double y = spec_.counts[std::size_t(t)];
    ll_new += y * prop_eta(t) - std::exp(prop_eta(t));
    ll_old += y * eta_(t) - std::exp(eta_(t));
  }
  for (auto j : free_beta_) {
    ll_new -= 0.5 * std::pow(prop(j) - pr.beta_mean(j), 2) / pr.beta_variance(j);
    ll_old -= 0.5 * std::pow(state_.beta(j) - pr.beta_mean(j), 2) / pr.beta_variance(j);
  }
  const double log_ratio = ll_new - ll_old;
  if (std::isfinite(log_ratio) &&
      std::log(std::uniform_real_distribution<double>(0.0, 1.0)(rng_)) < log_ratio) {
    state_.beta = prop;
    offset_ = prop_offset;
    eta_ = prop_eta;
    ++beta_accepts_;
    return true;
  }
  return false;
}

int ChainSampler::update_lambda_days() {
  if (!latent_model(spec_, holloman_)) return 0;
  int accepted = 0;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (Eigen::Index d = 0; d < spec_.n_exposure_days(); ++d) {
    const double s = std::exp(day_log_scale_(d));
    const Eigen::Vector2d z(standard_normal(rng_), holloman_ ? 0.0 : standard_normal(rng_));
    const Eigen::Vector2d step = s * (day_chol_[std::size_t(d)] * z);
    const double l1 = state_.lambda1(d) + step(0);
    const double l2 = holloman_ ? 0.0 : state_.lambda2(d) + step(1);
    const double now = day_log_target(d, state_.lambda1(d), state_.lambda2(d));
    const double next = day_log_target(d, l1, l2);
    const double log_ratio = next - now;
    if (std::isfinite(next) && std::log(unif(rng_)) < log_ratio) {
      state_.lambda1(d) = l1;
      state_.lambda2(d) = l2;
      const auto t = count_of_day_[std::size_t(d)];
      if (t >= 0) eta_(t) = offset_(t) + exposure_term(d, state_.beta(0), l1, l2);
      day_accepts_(d) += 1;
      ++accepted;
    }
  }
  ++day_tries_;
  return accepted;
}

void ChainSampler::update_variances() {
  const auto& p = spec_.priors;
  if (holloman_) {
    const double n = double(spec_.n_exposure_days());
    const double ss = (state_.lambda1 - spec_.fixed_exposure).squaredNorm();
    // sigma2 | lambda ~ IG(n/2 - 1, ss/2) restricted to (0, upper): draw the precision.
    const double precision = draw_truncated_gamma(rng_, 0.5 * n - 1.0, 0.5 * ss, 1.0 / p.holloman_upper);
    state_.sigma2 = 1.0 / precision;
    ++var_tries_;
    ++var_accepts_;
    return;
  }
  if (!spec_.latent_moments()) return;
  state_.sigma2 = update_variance_gibbs(rng_, state_.lambda1, p.epsilon, p.xi);
  state_.tau2 = update_variance_gibbs(rng_, state_.lambda2, p.epsilon, p.s2);
  var_tries_ += 2;
  var_accepts_ += 2;
}

void ChainSampler::sweep() {
  update_beta_block();
  update_lambda_days();
  update_variances();
}

void ChainSampler::initialize() {
  const auto& p = spec_.priors;
  const Eigen::Index nd = spec_.n_exposure_days();
  // Starting exposure per count day for the regression mode.
  Eigen::VectorXd x(spec_.n_counts());
  for (Eigen::Index t = 0; t < spec_.n_counts(); ++t) {
    const auto d = spec_.exposure_row[std::size_t(t)];
    x(t) = spec_.latent_moments() ? spec_.exposure_stats[std::size_t(d)].mean : spec_.fixed_exposure(d);
  }
  const LaplaceFit laplace = poisson_laplace(spec_, x);
  set_beta_proposal(laplace.covariance);
  const double d_free = std::max<double>(1.0, double(free_beta_.size()));
  beta_scale_ = 2.38 / std::sqrt(d_free);

  // Day-level proposal shapes from the large-sample covariance of the day's moments.
  for (Eigen::Index d = 0; d < nd; ++d) {
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    if (spec_.latent_moments() && !holloman_) {
      const auto& s = spec_.exposure_stats[std::size_t(d)];
      const double k = s.k;
      if (spec_.model == ModelVariant::lognormal_exposure && s.ss_log > 0) {
        const double m = s.mean_log, s2 = s.ss_log / k;
        const auto [l1, l2] = moments_from_lognormal(LogNormalParams<double>{m, s2});
        Eigen::Matrix2d J;
        J << l1, 0.5 * l1, 2.0 * l2, l1 * l1 * (2.0 * std::exp(s2) - 1.0);
        const Eigen::Matrix2d info_inv = Eigen::Vector2d(s2 / k, 2.0 * s2 * s2 / k).asDiagonal();
        cov = J * info_inv * J.transpose();
      } else {
        const double v = std::max(s.variance(), 1e-12);
        cov << v / k, 0.0, 0.0, 2.0 * v * v / k;
      }
      cov += 1e-14 * Eigen::Matrix2d::Identity();
      day_chol_[std::size_t(d)] = cov.llt().matrixL();
    }
  }

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int attempt = 0; attempt < kInitRetries; ++attempt) {
    ChainState s;
    s.beta = laplace.mode;
    {
      Eigen::VectorXd z(spec_.n_beta());
      for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = standard_normal(rng_);
      s.beta += 2.0 * (beta_chol_ * z);
    }
    s.lambda1 = spec_.fixed_exposure;
    s.lambda2 = Eigen::VectorXd::Zero(nd);
    if (holloman_) {
      // The prior is bounded, so starts are stratified over it instead of overdispersed.
      s.sigma2 = p.holloman_upper * (double(chain_) + unif(rng_)) / double(n_chains_);
      for (Eigen::Index d = 0; d < nd; ++d) s.lambda1(d) = spec_.fixed_exposure(d) + std::sqrt(s.sigma2) * standard_normal(rng_);
      for (Eigen::Index d = 0; d < nd; ++d) day_chol_[std::size_t(d)](0, 0) = std::sqrt(s.sigma2);
    } else if (spec_.latent_moments()) {
      for (Eigen::Index d = 0; d < nd; ++d) {
        const auto& st = spec_.exposure_stats[std::size_t(d)];
        s.lambda1(d) = st.mean + 2.0 * day_chol_[std::size_t(d)](0, 0) * standard_normal(rng_);
        s.lambda2(d) = std::max(st.variance(), 1e-8) * std::exp(2.0 * std::sqrt(2.0 / st.k) * standard_normal(rng_));
      }
      s.sigma2 = update_variance_gibbs(rng_, s.lambda1, p.epsilon, p.xi) * std::exp(standard_normal(rng_));
      s.tau2 = update_variance_gibbs(rng_, s.lambda2, p.epsilon, p.s2) * std::exp(standard_normal(rng_));
    }
    set_state(s);
    if (std::isfinite(log_posterior())) return;
  }
  throw Error("could not find a starting state with finite posterior density");
}

void ChainSampler::adapt(long iter, long burn_in) {
  constexpr long kBatch = 50;
  const long half = burn_in / 2;
  if (iter >= burn_in / 4 && iter < half) {
    if (adapt_count_ == 0) {
      beta_sum_ = Eigen::VectorXd::Zero(spec_.n_beta());
      beta_sum_sq_ = Eigen::MatrixXd::Zero(spec_.n_beta(), spec_.n_beta());
    }
    beta_sum_ += state_.beta;
    beta_sum_sq_ += state_.beta * state_.beta.transpose();
    ++adapt_count_;
  }
  if (iter + 1 == half && adapt_count_ > 20 * long(free_beta_.size() + 1)) {
    const Eigen::VectorXd mean = beta_sum_ / double(adapt_count_);
    const Eigen::MatrixXd cov =
        (beta_sum_sq_ - double(adapt_count_) * mean * mean.transpose()) / double(adapt_count_ - 1);
    set_beta_proposal(cov);
    beta_scale_ = 2.38 / std::sqrt(std::max<double>(1.0, double(free_beta_.size())));
  }
  if ((iter + 1) % kBatch == 0) {
    const double gain = std::min(1.0, 5.0 / std::sqrt(double((iter + 1) / kBatch)));
    const double rate = double(beta_accepts_) / double(std::max(1L, beta_tries_));
    beta_scale_ *= std::exp(gain * (rate - 0.234));
    beta_accepts_ = beta_tries_ = 0;
    const double target = holloman_ ? 0.44 : 0.35;
    for (Eigen::Index d = 0; d < day_log_scale_.size(); ++d)
      day_log_scale_(d) += gain * (day_accepts_(d) / double(std::max(1L, day_tries_)) - target);
    day_accepts_.setZero();
    day_tries_ = 0;
  }
}

ChainDraws ChainSampler::run(const SamplerSettings& settings) {
  if (settings.thin < 1 || settings.iterations < settings.thin) throw Error("invalid sampler settings");
  initialize();
  for (long it = 0; it < settings.burn_in; ++it) {
    sweep();
    adapt(it, settings.burn_in);
  }
  beta_accepts_ = beta_tries_ = 0;
  day_accepts_.setZero();
  day_tries_ = 0;
  var_accepts_ = var_tries_ = 0;

  const bool latent = latent_model(spec_, holloman_);
  const long n_draws = settings.draws_per_chain();
  ChainDraws out;
  out.beta.resize(n_draws, spec_.n_beta());
  out.sigma2.resize(n_draws);
  out.tau2.resize(n_draws);
  out.deviance.resize(n_draws);
  if (latent && settings.store_lambda) {
    out.lambda1.resize(n_draws, spec_.n_exposure_days());
    if (!holloman_) out.lambda2.resize(n_draws, spec_.n_exposure_days());
  }
  long stored = 0;
  long day_accepts_total = 0;
  for (long it = 0; it < settings.iterations && stored < n_draws; ++it) {
    update_beta_block();
    day_accepts_total += update_lambda_days();
    update_variances();
    if ((it + 1) % settings.thin != 0) continue;
    out.iteration.push_back(settings.burn_in + it + 1);
    out.beta.row(stored) = state_.beta.transpose();
    out.sigma2(stored) = state_.sigma2;
    out.tau2(stored) = state_.tau2;
    out.deviance(stored) = deviance();
    if (out.lambda1.size() > 0) out.lambda1.row(stored) = state_.lambda1.transpose();
    if (out.lambda2.size() > 0) out.lambda2.row(stored) = state_.lambda2.transpose();
    ++stored;
  }
  out.beta_acceptance = double(beta_accepts_) / double(std::max(1L, beta_tries_));
  out.lambda_acceptance =
      latent ? double(day_accepts_total) / double(std::max<long>(1, settings.iterations * spec_.n_exposure_days())) : 0.0;
  out.variance_acceptance = var_tries_ > 0 ? double(var_accepts_) / double(var_tries_) : 0.0;
  return out;
}

// ---------------------------------------------------------------------------
// Multi-chain drivers

namespace {

PosteriorDraws run_all(const ModelSpec& spec, const SamplerSettings& settings, std::uint64_t seed, bool holloman) {
  if (settings.chains < 2) throw Error("at least two chains are required");
  PosteriorDraws out;
  out.model = spec.model;
  out.holloman = holloman;
  out.settings = settings;
  out.seed = seed;
  out.beta_names.push_back("gamma");
  for (const auto& n : spec.covariate_names) out.beta_names.push_back(n);

  auto one = [&](int c) {
    ChainSampler sampler(spec, derive_rng(seed, std::uint64_t(c)), holloman);
    sampler.set_chain_slot(c, settings.chains);
    return sampler.run(settings);
  };
  out.chains.resize(std::size_t(settings.chains));
  if (settings.parallel_chains && std::thread::hardware_concurrency() > 1) {
    std::vector<std::future<ChainDraws>> jobs;
    for (int c = 0; c < settings.chains; ++c) jobs.push_back(std::async(std::launch::async, one, c));
    for (int c = 0; c < settings.chains; ++c) out.chains[std::size_t(c)] = jobs[std::size_t(c)].get();
  } else {
    for (int c = 0; c < settings.chains; ++c) out.chains[std::size_t(c)] = one(c);
  }

  if (latent_model(spec, holloman) && settings.store_lambda) {
    out.lambda1_mean = Eigen::VectorXd::Zero(spec.n_exposure_days());
    out.lambda2_mean = Eigen::VectorXd::Zero(spec.n_exposure_days());
    double n = 0;
    for (const auto& c : out.chains) {
      out.lambda1_mean += c.lambda1.colwise().sum().transpose();
      if (c.lambda2.size() > 0) out.lambda2_mean += c.lambda2.colwise().sum().transpose();
      n += double(c.lambda1.rows());
    }
    out.lambda1_mean /= n;
    out.lambda2_mean /= n;
  }
  return out;
}

}  // namespace

PosteriorDraws run_chains(const ModelSpec& spec, const SamplerSettings& settings, std::uint64_t seed) {
  return run_all(spec, settings, seed, false);
}

PosteriorDraws holloman_variant(const ModelSpec& spec, const SamplerSettings& settings, std::uint64_t seed) {
  if (spec.fixed_exposure.size() != spec.n_exposure_days()) throw Error("Holloman variant needs daily exposure means");
  return run_all(spec, settings, seed, true);
}

Eigen::VectorXd draw_log_mean(const ModelSpec& spec, const PosteriorDraws& draws, Eigen::Index chain,
                              Eigen::Index draw) {
  const auto& c = draws.chains.at(std::size_t(chain));
  const Eigen::VectorXd beta = c.beta.row(draw).transpose();
  const bool latent = latent_model(spec, draws.holloman);
  Eigen::VectorXd l1, l2;
  if (latent) {
    l1 = c.lambda1.size() > 0 ? Eigen::VectorXd(c.lambda1.row(draw).transpose()) : draws.lambda1_mean;
    l2 = c.lambda2.size() > 0 ? Eigen::VectorXd(c.lambda2.row(draw).transpose()) : draws.lambda2_mean;
    if (l1.size() == 0) throw Error("latent exposure draws are not available");
  }
  return log_mean_at(spec, draws.holloman, beta, l1, l2);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

std::filesystem::path chain_file(const std::filesystem::path& dir, const std::string& prefix, std::size_t c) {
  return dir / (prefix + "_chain" + std::to_string(c + 1) + ".csv");
}
std::filesystem::path lambda_file(const std::filesystem::path& dir, const std::string& prefix, std::size_t c) {
  return dir / (prefix + "_lambda_chain" + std::to_string(c + 1) + ".csv");
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

}  // namespace

void write_draws(const std::filesystem::path& dir, const PosteriorDraws& draws, const ModelSpec& spec,
                 const std::string& prefix) {
  std::filesystem::create_directories(dir);
  const std::size_t p = draws.beta_names.size() - 1;
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const auto& ch = draws.chains[c];
    std::ostringstream o;
    o << "iter,gamma";
    for (std::size_t j = 1; j <= p; ++j) o << ",alpha_" << j;
    o << ",sigma2,tau2,deviance\n";
    for (Eigen::Index i = 0; i < ch.beta.rows(); ++i) {
      o << ch.iteration[std::size_t(i)];
      for (Eigen::Index j = 0; j < ch.beta.cols(); ++j) o << ',' << format_number(ch.beta(i, j));
      o << ',' << format_number(ch.sigma2(i)) << ',' << format_number(ch.tau2(i)) << ','
        << format_number(ch.deviance(i)) << '\n';
    }
    write_file(chain_file(dir, prefix, c), o.str());
    if (ch.lambda1.size() > 0) {
      std::ostringstream l;
      l << "iter";
      for (const auto& d : spec.exposure_dates) l << ",lambda1_" << d.iso();
      if (ch.lambda2.size() > 0)
        for (const auto& d : spec.exposure_dates) l << ",lambda2_" << d.iso();
      l << '\n';
      for (Eigen::Index i = 0; i < ch.lambda1.rows(); ++i) {
        l << ch.iteration[std::size_t(i)];
        for (Eigen::Index j = 0; j < ch.lambda1.cols(); ++j) l << ',' << format_number(ch.lambda1(i, j));
        if (ch.lambda2.size() > 0)
          for (Eigen::Index j = 0; j < ch.lambda2.cols(); ++j) l << ',' << format_number(ch.lambda2(i, j));
        l << '\n';
      }
      write_file(lambda_file(dir, prefix, c), l.str());
    }
  }
  nlohmann::ordered_json meta;
  meta["model"] = to_string(draws.model);
  meta["holloman"] = draws.holloman;
  meta["seed"] = draws.seed;
  meta["chains"] = draws.chains.size();
  meta["burn_in"] = draws.settings.burn_in;
  meta["iterations"] = draws.settings.iterations;
  meta["thin"] = draws.settings.thin;
  meta["draws_per_chain"] = draws.draws_per_chain();
  meta["lag"] = spec.lag;
  meta["beta_names"] = draws.beta_names;
  std::vector<double> acc_beta, acc_lambda, acc_var;
  for (const auto& c : draws.chains) {
    acc_beta.push_back(c.beta_acceptance);
    acc_lambda.push_back(c.lambda_acceptance);
    acc_var.push_back(c.variance_acceptance);
  }
  meta["acceptance"] = {{"beta", acc_beta}, {"lambda", acc_lambda}, {"variance", acc_var}};
  std::vector<std::string> dates;
  for (const auto& d : spec.exposure_dates) dates.push_back(d.iso());
  meta["exposure_dates"] = dates;
  if (draws.lambda1_mean.size() > 0) {
    meta["lambda1_mean"] = std::vector<double>(draws.lambda1_mean.data(), draws.lambda1_mean.data() + draws.lambda1_mean.size());
    meta["lambda2_mean"] = std::vector<double>(draws.lambda2_mean.data(), draws.lambda2_mean.data() + draws.lambda2_mean.size());
  }
  write_file(dir / (prefix + "_meta.json"), meta.dump(2) + "\n");
}

PosteriorDraws read_draws(const std::filesystem::path& dir, const std::string& prefix) {
  auto in = csv::open_input((dir / (prefix + "_meta.json")).string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("draws metadata unreadable: ") + e.what());
  }
  PosteriorDraws d;
  d.model = parse_model_variant(meta.at("model").get<std::string>());
  d.holloman = meta.at("holloman").get<bool>();
  d.seed = meta.at("seed").get<std::uint64_t>();
  d.settings.chains = meta.at("chains").get<int>();
  d.settings.burn_in = meta.at("burn_in").get<long>();
  d.settings.iterations = meta.at("iterations").get<long>();
  d.settings.thin = meta.at("thin").get<long>();
  d.beta_names = meta.at("beta_names").get<std::vector<std::string>>();
  if (meta.contains("lambda1_mean")) {
    const auto a = meta["lambda1_mean"].get<std::vector<double>>();
    const auto b = meta["lambda2_mean"].get<std::vector<double>>();
    d.lambda1_mean = Eigen::Map<const Eigen::VectorXd>(a.data(), Eigen::Index(a.size()));
    d.lambda2_mean = Eigen::Map<const Eigen::VectorXd>(b.data(), Eigen::Index(b.size()));
  }
  const auto p = Eigen::Index(d.beta_names.size());
  for (std::size_t c = 0; c < std::size_t(d.settings.chains); ++c) {
    ChainDraws ch;
    const auto path = chain_file(dir, prefix, c).string();
    auto cin = csv::open_input(path);
    const auto lines = csv::read_lines(cin);
    if (lines.size() < 2) throw Error(path + ": no draws");
    const auto n = Eigen::Index(lines.size() - 1);
    ch.beta.resize(n, p);
    ch.sigma2.resize(n);
    ch.tau2.resize(n);
    ch.deviance.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& ln = lines[std::size_t(i + 1)];
      const auto f = csv::split(ln.text);
      if (Eigen::Index(f.size()) != p + 4) throw csv::row_error(path, ln.number, "wrong number of fields");
      ch.iteration.push_back(csv::to_long(f[0], path, ln.number));
      for (Eigen::Index j = 0; j < p; ++j) ch.beta(i, j) = csv::to_double(f[std::size_t(j + 1)], path, ln.number);
      ch.sigma2(i) = csv::to_double(f[std::size_t(p + 1)], path, ln.number);
      ch.tau2(i) = csv::to_double(f[std::size_t(p + 2)], path, ln.number);
      ch.deviance(i) = csv::to_double(f[std::size_t(p + 3)], path, ln.number);
    }
    const auto lpath = lambda_file(dir, prefix, c);
    if (std::filesystem::exists(lpath)) {
      auto lin = csv::open_input(lpath.string());
      const auto ll = csv::read_lines(lin);
      const auto header = csv::split(ll.front().text);
      Eigen::Index n1 = 0, n2 = 0;
      for (std::size_t k = 1; k < header.size(); ++k) (header[k].starts_with("lambda1_") ? n1 : n2) += 1;
      ch.lambda1.resize(n, n1);
      if (n2 > 0) ch.lambda2.resize(n, n2);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto& ln = ll.at(std::size_t(i + 1));
        const auto f = csv::split(ln.text);
        if (Eigen::Index(f.size()) != 1 + n1 + n2) throw csv::row_error(lpath.string(), ln.number, "wrong number of fields");
        for (Eigen::Index j = 0; j < n1; ++j) ch.lambda1(i, j) = csv::to_double(f[std::size_t(1 + j)], lpath.string(), ln.number);
        for (Eigen::Index j = 0; j < n2; ++j)
          ch.lambda2(i, j) = csv::to_double(f[std::size_t(1 + n1 + j)], lpath.string(), ln.number);
      }
    }
    const auto& acc = meta.at("acceptance");
    ch.beta_acceptance = acc.at("beta").at(c).get<double>();
    ch.lambda_acceptance = acc.at("lambda").at(c).get<double>();
    ch.variance_acceptance = acc.at("variance").at(c).get<double>();
    d.chains.push_back(std::move(ch));
  }
  d.settings.store_lambda = !d.chains.empty() && d.chains.front().lambda1.size() > 0;
  return d;
}

}  // namespace expoerf
