#include "expoerf/risk_report.hpp"

#include <algorithm>
#include <fstream>
#include <numbers>
#include <ostream>

namespace expoerf {

std::vector<double> default_grid(double increment) {
  double upper = 1.0 + increment / 100.0, step = (upper - 1.0) / 20.0;
  if (increment == 10.0) step = 0.005;
  if (increment == 50.0) step = 0.025;
  std::vector<double> g;
  const int n = int(std::lround((upper - 1.0) / step));
  for (int i = 0; i <= n; ++i) g.push_back(1.0 + i * step);
  return g;
}

std::vector<double> exceedance(const std::vector<double>& rr, const std::vector<double>& grid) {
  if (grid.empty()) throw Error("exceedance: empty grid");
  if (rr.empty()) throw Error("exceedance: no draws");
  std::vector<double> sorted = rr;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> p;
  for (double c : grid) {
    const auto above = sorted.end() - std::upper_bound(sorted.begin(), sorted.end(), c);
    p.push_back(double(above) / double(sorted.size()));
  }
  return p;
}

RiskSummary relative_risk(const std::vector<double>& gamma_draws, double increment, std::vector<double> grid,
                          std::string label) {
  if (gamma_draws.empty()) throw Error("relative_risk: no gamma draws");
  RiskSummary s;
  s.label = std::move(label);
  s.increment = increment;
  std::vector<double> rr;
  rr.reserve(gamma_draws.size());
  for (double g : gamma_draws) rr.push_back(std::exp(g * increment));
  s.quantiles = quantiles(rr, s.probs);
  s.grid = grid.empty() ? default_grid(increment) : std::move(grid);
  s.exceedance = exceedance(rr, s.grid);
  s.prob_above_one = exceedance(rr, {1.0}).front();
  return s;
}

RiskSummary relative_risk(const PosteriorDraws& draws, double increment, std::vector<double> grid) {
  return relative_risk(draws.gamma_draws(), increment, std::move(grid),
                       draws.holloman ? "holloman" : "model_" + to_string(draws.model));
}

AttenuationFit attenuation_fit(const Eigen::VectorXd& ambient, const Eigen::VectorXd& personal) {
  if (ambient.size() != personal.size()) throw Error("attenuation_fit: series differ in length");
  std::vector<double> xs, ys;
  for (Eigen::Index i = 0; i < ambient.size(); ++i)
    if (!is_missing(ambient(i)) && !is_missing(personal(i))) {
      xs.push_back(ambient(i));
      ys.push_back(personal(i));
    }
  if (xs.size() < 3) throw Error("attenuation_fit: need at least three aligned days");
  const Eigen::Map<Eigen::VectorXd> x(xs.data(), Eigen::Index(xs.size())), y(ys.data(), Eigen::Index(ys.size()));
  const double n = double(x.size());
  const Eigen::ArrayXd dx = x.array() - x.mean(), dy = y.array() - y.mean();
  const double sxx = dx.square().sum();
  if (!(sxx > 1e-12 * std::max(1.0, x.squaredNorm()))) throw Error("attenuation_fit: ambient series has zero variance");
  AttenuationFit f;
  f.n = int(n);
  f.phi = (dx * dy).sum() / sxx;
  f.theta = y.mean() - f.phi * x.mean();
  const double rss = (dy - f.phi * dx).square().sum();
  const double tss = dy.square().sum();
  f.r2 = tss > 0 ? 1.0 - rss / tss : 1.0;
  f.residual_sd = n > 2 ? std::sqrt(rss / (n - 2)) : 0.0;
  f.slope_se = f.residual_sd / std::sqrt(sxx);
  return f;
}

GammaCheck gamma_attenuation_check(const std::vector<double>& gamma_ambient, const std::vector<double>& gamma_personal,
                                   double phi) {
  if (gamma_ambient.empty() || gamma_personal.empty()) throw Error("gamma check: both fits are required");
  GammaCheck c;
  c.phi = phi;
  c.median_ambient = quantile(gamma_ambient, 0.5);
  c.median_personal = quantile(gamma_personal, 0.5);
  const double diff = std::abs(c.median_ambient - phi * c.median_personal);
  c.discrepancy = c.median_ambient != 0.0 ? diff / std::abs(c.median_ambient)
                                          : (diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  return c;
}

void write_rr_table(std::ostream& out, const std::vector<RiskSummary>& rows) {
  out << "label,increment,q025,q25,q50,q75,q975,p_gt_1\n";
  for (const auto& r : rows) {
    out << r.label << ',' << format_number(r.increment);
    for (double q : r.quantiles) out << ',' << format_number(q);
    out << ',' << format_number(r.prob_above_one) << '\n';
  }
}

void write_exceedance_csv(std::ostream& out, const std::vector<RiskSummary>& rows) {
  out << "label,increment,c,p_exceed\n";
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.grid.size(); ++i)
      out << r.label << ',' << format_number(r.increment) << ',' << format_number(r.grid[i]) << ','
          << format_number(r.exceedance[i]) << '\n';
}

namespace {

enum class PredictiveKind { point, normal, lognormal };

PredictiveKind kind_of(const PosteriorDraws& d) {
  if (d.holloman) return PredictiveKind::point;
  switch (d.model) {
    case ModelVariant::normal_exposure: return PredictiveKind::normal;
    case ModelVariant::lognormal_exposure: return PredictiveKind::lognormal;
    default: return PredictiveKind::point;
  }
}

// (lambda1, lambda2) pairs for one exposure day, or the fixed value.
std::vector<std::pair<double, double>> day_draws(const PosteriorDraws& d, const ModelSpec& spec, Eigen::Index day,
                                                 Eigen::Index max_draws) {
  if (day < 0 || day >= spec.n_exposure_days()) throw Error("predictive: day outside the exposure window");
  std::vector<std::pair<double, double>> out;
  if (!d.holloman && !spec.latent_moments()) {
    out.emplace_back(spec.fixed_exposure(day), 0.0);
    return out;
  }
  Eigen::Index total = 0;
  for (const auto& c : d.chains) {
    if (c.lambda1.cols() != spec.n_exposure_days()) throw Error("predictive: latent exposure draws were not stored");
    total += c.lambda1.rows();
  }
  const Eigen::Index stride = std::max<Eigen::Index>(1, total / std::max<Eigen::Index>(1, max_draws));
  Eigen::Index k = 0;
  for (const auto& c : d.chains)
    for (Eigen::Index i = 0; i < c.lambda1.rows(); ++i, ++k)
      if (k % stride == 0) out.emplace_back(c.lambda1(i, day), c.lambda2.size() > 0 ? c.lambda2(i, day) : 0.0);
  return out;
}

}  // namespace

PredictiveSummary exposure_predictive(const PosteriorDraws& draws, const ModelSpec& spec, Eigen::Index day) {
  const auto kind = kind_of(draws);
  const auto pairs = day_draws(draws, spec, day, std::numeric_limits<Eigen::Index>::max());
  PredictiveSummary s;
  s.model = draws.model;
  for (const auto& [l1, l2] : pairs) {
    const double v = kind == PredictiveKind::point ? 0.0 : l2;
    s.mean += l1;
    s.second_moment += v + l1 * l1;
    switch (kind) {
      case PredictiveKind::point: s.mass_below_zero += l1 < 0 ? 1.0 : 0.0; break;
      case PredictiveKind::normal: s.mass_below_zero += normal_cdf(-l1 / std::sqrt(v)); break;
      case PredictiveKind::lognormal: break;  // support is (0, inf)
    }
  }
  const double n = double(pairs.size());
  s.mean /= n;
  s.second_moment /= n;
  s.mass_below_zero /= n;
  s.variance = s.second_moment - s.mean * s.mean;
  return s;
}

Eigen::VectorXd predictive_density(const PosteriorDraws& draws, const ModelSpec& spec, Eigen::Index day,
                                   const Eigen::VectorXd& grid, Eigen::Index max_draws) {
  if (grid.size() < 2) throw Error("predictive_density: grid needs at least two points");
  const auto kind = kind_of(draws);
  const auto pairs = day_draws(draws, spec, day, max_draws);
  Eigen::VectorXd dens = Eigen::VectorXd::Zero(grid.size());
  const double dx = (grid(grid.size() - 1) - grid(0)) / double(grid.size() - 1);
  for (const auto& [l1, l2] : pairs) {
    if (kind == PredictiveKind::point || l2 <= 0) {
      const auto i = Eigen::Index(std::lround((l1 - grid(0)) / dx));
      if (i >= 0 && i < grid.size()) dens(i) += 1.0 / dx;
      continue;
    }
    if (kind == PredictiveKind::normal) {
      for (Eigen::Index i = 0; i < grid.size(); ++i) dens(i) += std::exp(log_normal_pdf(grid(i), l1, l2));
    } else {
      const auto p = lognormal_from_moments(l1, l2);
      for (Eigen::Index i = 0; i < grid.size(); ++i)
        if (grid(i) > 0) dens(i) += std::exp(lognormal_log_density(grid(i), p));
    }
  }
  return dens / double(pairs.size());
}

void write_boxplot_csv(std::ostream& out, const ExposurePanel& panel) {
  out << "date,min,q1,median,q3,max,mean\n";
  for (Eigen::Index t = 0; t < panel.days(); ++t) {
    const Eigen::VectorXd row = panel.exposure.row(t).transpose();
    const auto q = quantiles(std::vector<double>(row.data(), row.data() + row.size()), {0.0, 0.25, 0.5, 0.75, 1.0});
    out << panel.dates[std::size_t(t)].iso();
    for (double v : q) out << ',' << format_number(v);
    out << ',' << format_number(row.mean()) << '\n';
  }
}

namespace {

void need(bool ok, const std::string& selector, const char* what) {
  if (!ok) throw Error("plot data '" + selector + "' needs " + what);
}

void emit_density(std::ostream& out, const PlotInputs& in, const std::string& selector) {
  need(in.panel != nullptr, selector, "an exposure panel");
  const Date day = in.density_day.value_or(in.panel->dates.at(in.panel->dates.size() / 2));
  const auto row_idx = in.panel->index_of(day);
  if (!row_idx) throw Error("plot data '" + selector + "': " + day.iso() + " is not in the exposure panel");
  const Eigen::VectorXd x = in.panel->exposure.row(*row_idx).transpose();
  const double lo = x.minCoeff(), hi = x.maxCoeff(), sd = std::sqrt(sample_variance(x));
  const double span = std::max(hi - lo, 1e-9);
  const double bw = sd > 0 ? 1.06 * sd * std::pow(double(x.size()), -0.2) : span / 50.0;
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(256, std::min(lo - 0.5 * span, -0.1 * span), hi + 0.25 * span);

  std::vector<std::pair<std::string, Eigen::VectorXd>> cols;
  Eigen::VectorXd emp = Eigen::VectorXd::Zero(grid.size());
  const double norm = 1.0 / (double(x.size()) * bw * std::sqrt(2.0 * std::numbers::pi));
  for (Eigen::Index i = 0; i < grid.size(); ++i)
    emp(i) = norm * ((x.array() - grid(i)) / bw).square().unaryExpr([](double u) { return std::exp(-0.5 * u); }).sum();
  cols.emplace_back("empirical", emp);
  for (const auto& f : in.fits) {
    if (!f.draws || !f.spec) continue;
    const auto it = std::lower_bound(f.spec->exposure_dates.begin(), f.spec->exposure_dates.end(), day);
    if (it == f.spec->exposure_dates.end() || *it != day) continue;
    cols.emplace_back(f.label, predictive_density(*f.draws, *f.spec, Eigen::Index(it - f.spec->exposure_dates.begin()), grid));
  }
  out << "# day " << day.iso() << '\n' << "x";
  for (const auto& c : cols) out << ',' << c.first;
  out << '\n';
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    out << format_number(grid(i));
    for (const auto& c : cols) out << ',' << format_number(c.second(i));
    out << '\n';
  }
}

}  // namespace

std::filesystem::path emit_plot_data(const PlotInputs& in, const std::string& selector, const std::filesystem::path& dir) {
  if (std::find(kPlotSelectors.begin(), kPlotSelectors.end(), selector) == kPlotSelectors.end())
    throw Error("unknown plot selector '" + selector + "'");
  std::filesystem::create_directories(dir);
  const auto path = dir / (selector + ".csv");
  const auto tmp = dir / (selector + ".csv.tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw Error("cannot write '" + tmp.string() + "'");
    try {
      if (selector == "fig1_boxplot") {
        need(in.panel != nullptr, selector, "an exposure panel");
        write_boxplot_csv(out, *in.panel);
      } else if (selector == "fig1_scatter") {
        need(in.panel && in.ambient, selector, "an exposure panel and the ambient series");
        out << "date,ambient,personal_mean\n";
        const Eigen::VectorXd pm = in.panel->daily_mean();
        for (std::size_t t = 0; t < in.panel->dates.size(); ++t) {
          const auto a = in.ambient->index_of(in.panel->dates[t]);
          if (!a || is_missing(in.ambient->values(*a))) continue;
          out << in.panel->dates[t].iso() << ',' << format_number(in.ambient->values(*a)) << ','
              << format_number(pm(Eigen::Index(t))) << '\n';
        }
      } else if (selector == "fig2_residuals") {
        need(in.diagnostics != nullptr, selector, "a diagnostics report");
        write_residuals_csv(out, in.diagnostics->residuals);
      } else if (selector == "fig2_acf") {
        need(in.diagnostics != nullptr, selector, "a diagnostics report");
        write_acf_csv(out, in.diagnostics->acf);
      } else if (selector == "fig3_density") {
        emit_density(out, in, selector);
      } else {
        need(!in.risks.empty(), selector, "relative-risk summaries");
        write_exceedance_csv(out, in.risks);
      }
    } catch (...) {
      out.close();
      std::filesystem::remove(tmp);
      throw;
    }
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
  return path;
}

}  // namespace expoerf
