#include "expoerf/diagnostics.hpp"

#include <ostream>

#include "json.hpp"

namespace expoerf {

namespace {

std::string prob_label(double p) {
  std::string s = format_number(p * 100.0);
  std::erase(s, '.');
  return "q" + (p < 0.1 ? "0" + s : s);
}

}  // namespace

double effective_sample_size(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const Eigen::Index n = x.size();
  if (n < 4) return double(n);
  const Eigen::VectorXd c = x.array() - x.mean();
  const double c0 = c.squaredNorm() / double(n);
  if (!(c0 > 0)) return double(n);
  double sum = 0;
  // Geyer: sum adjacent pairs while they stay positive.
  for (Eigen::Index k = 1; k + 1 < n; k += 2) {
    const double r1 = c.head(n - k).dot(c.tail(n - k)) / double(n) / c0;
    const double r2 = c.head(n - k - 1).dot(c.tail(n - k - 1)) / double(n) / c0;
    if (r1 + r2 <= 0) break;
    sum += r1 + r2;
  }
  return double(n) / (1.0 + 2.0 * sum);
}

DicResult dic(const PosteriorDraws& draws, const ModelSpec& spec) {
  if (draws.chains.empty() || draws.draws_per_chain() == 0) throw Error("dic: no draws");
  DicResult r;
  double n = 0;
  Eigen::VectorXd beta_mean = Eigen::VectorXd::Zero(spec.n_beta());
  for (const auto& c : draws.chains) {
    if (c.deviance.size() != c.beta.rows()) throw Error("dic: deviance not recorded for every draw");
    r.dbar += c.deviance.sum();
    beta_mean += c.beta.colwise().sum().transpose();
    n += double(c.deviance.size());
    r.effective_draws += effective_sample_size(c.deviance);
  }
  r.dbar /= n;
  beta_mean /= n;
  const bool latent = draws.holloman || spec.latent_moments();
  Eigen::VectorXd l1, l2;
  if (latent) {
    if (draws.lambda1_mean.size() != spec.n_exposure_days()) throw Error("dic: posterior means of the daily moments are missing");
    l1 = draws.lambda1_mean;
    l2 = draws.lambda2_mean;
  }
  r.dhat = poisson_deviance(spec.counts, log_mean_at(spec, draws.holloman, beta_mean, l1, l2));
  r.pd = r.dbar - r.dhat;
  r.dic = r.dbar + r.pd;
  if (r.effective_draws < 100)
    r.warning = "fewer than 100 effective draws of the deviance (" + format_number(std::round(r.effective_draws)) + ")";
  return r;
}

double potential_scale_reduction(const std::vector<Eigen::VectorXd>& chains) {
  if (chains.size() < 2) throw Error("Gelman-Rubin needs at least two chains");
  const Eigen::Index n = chains.front().size();
  if (n < 2) throw Error("Gelman-Rubin needs at least two draws per chain");
  for (const auto& c : chains)
    if (c.size() != n) throw Error("Gelman-Rubin: chains differ in length");
  const double m = double(chains.size());
  Eigen::VectorXd means(chains.size());
  double w = 0;
  for (std::size_t j = 0; j < chains.size(); ++j) {
    means(Eigen::Index(j)) = chains[j].mean();
    w += (chains[j].array() - means(Eigen::Index(j))).square().sum() / double(n - 1);
  }
  w /= m;
  const double b = double(n) * (means.array() - means.mean()).square().sum() / (m - 1.0);
  if (b == 0.0) return 1.0;
  if (!(w > 0)) return std::numeric_limits<double>::infinity();
  return std::sqrt(1.0 + b / (double(n) * w));
}

std::vector<RhatEntry> gelman_rubin(const PosteriorDraws& draws) {
  if (draws.n_chains() < 2) throw Error("Gelman-Rubin needs at least two chains");
  const auto names = draws.scalar_names();
  std::vector<Eigen::MatrixXd> mats;
  for (Eigen::Index c = 0; c < draws.n_chains(); ++c) mats.push_back(draws.scalar_matrix(c));
  std::vector<RhatEntry> out;
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::vector<Eigen::VectorXd> cols;
    for (const auto& m : mats) cols.emplace_back(m.col(Eigen::Index(k)));
    out.push_back({names[k], potential_scale_reduction(cols)});
  }
  return out;
}

Eigen::VectorXd sample_acf(const Eigen::Ref<const Eigen::VectorXd>& x, int max_lag) {
  const Eigen::Index n = x.size();
  if (max_lag < 0 || max_lag >= n) throw Error("acf: max_lag must be in [0, n)");
  const Eigen::VectorXd c = x.array() - x.mean();
  const double c0 = c.squaredNorm();
  Eigen::VectorXd r(max_lag + 1);
  r(0) = 1.0;
  for (int k = 1; k <= max_lag; ++k) r(k) = c0 > 0 ? c.head(n - k).dot(c.tail(n - k)) / c0 : 0.0;
  return r;
}

Eigen::MatrixXd residual_draws(const PosteriorDraws& draws, const ModelSpec& spec) {
  Eigen::Index total = 0;
  for (const auto& c : draws.chains) total += c.beta.rows();
  Eigen::MatrixXd r(total, spec.n_counts());
  Eigen::VectorXd y(spec.n_counts());
  for (Eigen::Index t = 0; t < y.size(); ++t) y(t) = spec.counts[std::size_t(t)];
  Eigen::Index row = 0;
  for (Eigen::Index c = 0; c < draws.n_chains(); ++c)
    for (Eigen::Index i = 0; i < draws.chains[std::size_t(c)].beta.rows(); ++i) {
      const Eigen::ArrayXd mu = draw_log_mean(spec, draws, c, i).array().exp();
      r.row(row++) = ((y.array() - mu) / mu.sqrt()).matrix().transpose();
    }
  return r;
}

ResidualSummary summarize_residuals(const Eigen::MatrixXd& residuals, const std::vector<Date>& dates) {
  if (Eigen::Index(dates.size()) != residuals.cols()) throw Error("residual summary: date count mismatch");
  ResidualSummary s;
  s.dates = dates;
  s.quantiles.resize(residuals.cols(), Eigen::Index(s.probs.size()));
  int within = 0;
  for (Eigen::Index t = 0; t < residuals.cols(); ++t) {
    const Eigen::VectorXd col = residuals.col(t);
    const auto q = quantiles(std::vector<double>(col.data(), col.data() + col.size()), s.probs);
    for (std::size_t k = 0; k < q.size(); ++k) s.quantiles(t, Eigen::Index(k)) = q[k];
    if (std::abs(q[2]) <= 2.0) ++within;
  }
  s.share_within_2 = residuals.cols() > 0 ? double(within) / double(residuals.cols()) : 0.0;
  return s;
}

ResidualSummary ppc_residuals(const PosteriorDraws& draws, const ModelSpec& spec) {
  return summarize_residuals(residual_draws(draws, spec), spec.count_dates);
}

AcfSummary summarize_acf(const Eigen::MatrixXd& residuals, int max_lag) {
  const Eigen::Index n = residuals.cols();
  if (max_lag < 0 || max_lag >= n) throw Error("residual_acf: max_lag must be below the window length");
  Eigen::MatrixXd acfs(residuals.rows(), max_lag + 1);
  for (Eigen::Index i = 0; i < residuals.rows(); ++i) acfs.row(i) = sample_acf(residuals.row(i).transpose(), max_lag).transpose();
  AcfSummary s;
  s.bartlett = 2.0 / std::sqrt(double(n));
  s.quantiles.resize(max_lag + 1, Eigen::Index(s.probs.size()));
  s.medians_within_band = true;
  for (int k = 0; k <= max_lag; ++k) {
    const Eigen::VectorXd col = acfs.col(k);
    const auto q = quantiles(std::vector<double>(col.data(), col.data() + col.size()), s.probs);
    for (std::size_t j = 0; j < q.size(); ++j) s.quantiles(k, Eigen::Index(j)) = q[j];
    if (k >= 1 && k <= 10 && std::abs(q[1]) >= s.bartlett) s.medians_within_band = false;
  }
  return s;
}

AcfSummary residual_acf(const PosteriorDraws& draws, const ModelSpec& spec, int max_lag) {
  return summarize_acf(residual_draws(draws, spec), max_lag);
}

DiagnosticsReport diagnose(const PosteriorDraws& draws, const ModelSpec& spec, int max_lag) {
  DiagnosticsReport r;
  r.dic = dic(draws, spec);
  r.rhat = gelman_rubin(draws);
  const Eigen::MatrixXd res = residual_draws(draws, spec);
  r.residuals = summarize_residuals(res, spec.count_dates);
  r.acf = summarize_acf(res, std::min<int>(max_lag, int(spec.n_counts()) - 1));
  return r;
}

void write_residuals_csv(std::ostream& out, const ResidualSummary& s) {
  out << "date";
  for (double p : s.probs) out << ',' << prob_label(p);
  out << '\n';
  for (std::size_t t = 0; t < s.dates.size(); ++t) {
    out << s.dates[t].iso();
    for (Eigen::Index k = 0; k < s.quantiles.cols(); ++k) out << ',' << format_number(s.quantiles(Eigen::Index(t), k));
    out << '\n';
  }
}

void write_acf_csv(std::ostream& out, const AcfSummary& s) {
  out << "lag";
  for (double p : s.probs) out << ',' << prob_label(p);
  out << ",band\n";
  for (Eigen::Index k = 0; k < s.quantiles.rows(); ++k) {
    out << k;
    for (Eigen::Index j = 0; j < s.quantiles.cols(); ++j) out << ',' << format_number(s.quantiles(k, j));
    out << ',' << format_number(s.bartlett) << '\n';
  }
}

std::string report_json(const DiagnosticsReport& r) {
  nlohmann::ordered_json j;
  j["dic"] = {{"dic", r.dic.dic}, {"dbar", r.dic.dbar}, {"dhat", r.dic.dhat}, {"pd", r.dic.pd},
              {"effective_draws", r.dic.effective_draws}};
  if (r.dic.warning) j["dic"]["warning"] = *r.dic.warning;
  nlohmann::ordered_json rh;
  bool converged = true;
  for (const auto& e : r.rhat) {
    rh[e.name] = std::isfinite(e.rhat) ? nlohmann::ordered_json(e.rhat) : nlohmann::ordered_json("inf");
    converged = converged && e.rhat < 1.1;
  }
  j["rhat"] = rh;
  j["converged"] = converged;
  j["residuals_within_2"] = r.residuals.share_within_2;
  j["acf_bartlett_band"] = r.acf.bartlett;
  j["acf_medians_within_band"] = r.acf.medians_within_band;
  return j.dump(2);
}

}  // namespace expoerf
