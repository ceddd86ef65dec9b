#include "expoerf/synth.hpp"

#include <numbers>
#include <random>
#include <sstream>

#include "csv.hpp"
#include "expoerf/exposure_moments.hpp"
#include "expoerf/mean_models.hpp"
#include "expoerf/spline_basis.hpp"
#include "json.hpp"

namespace expoerf {

std::string to_string(ExposureLaw law) {
  switch (law) {
    case ExposureLaw::lognormal: return "lognormal";
    case ExposureLaw::normal: return "normal";
    case ExposureLaw::fixed: return "fixed";
  }
  return "?";
}

ExposureLaw parse_exposure_law(std::string_view s) {
  if (s == "lognormal") return ExposureLaw::lognormal;
  if (s == "normal") return ExposureLaw::normal;
  if (s == "fixed") return ExposureLaw::fixed;
  throw Error("unknown exposure law '" + std::string(s) + "' (expected lognormal, normal or fixed)");
}

void SynthScenario::validate() const {
  config.validate();
  if (days < config.time_df + 2) throw Error("scenario: too few days for the time spline");
  if (replicates < 2) throw Error("scenario: need at least two replicates per day");
  if (sites < 1) throw Error("scenario: need at least one site");
  if (!(cv >= 0) || !(cv_jitter >= 0)) throw Error("scenario: cv must be >= 0");
  if (!(base_count > 0)) throw Error("scenario: base_count must be > 0");
  if (!alpha.empty() && alpha.size() != std::size_t(1 + config.time_df + config.temp_df))
    throw Error("scenario: alpha must have 1 + time_df + temp_df entries");
  if (!std::isfinite(gamma)) throw Error("scenario: gamma must be finite");
}

namespace {

const std::vector<std::string> kScenarioKeys = {
    "gamma", "alpha", "law", "days", "replicates", "sites", "ambient_mean", "ambient_amplitude",
    "ambient_noise_sd", "ambient_ar", "site_sd", "theta", "phi", "personal_noise_sd", "cv", "cv_jitter",
    "base_count", "season_amplitude", "winter_bump", "temp_slope", "temp_mean", "temp_amplitude",
    "temp_noise_sd", "start"};

double yearly(const Date& d, double peak_doy) {
  return std::cos(2.0 * std::numbers::pi * (d.day_of_year() - peak_doy) / 365.25);
}

}  // namespace

SynthScenario parse_scenario(const std::string& text) {
  SynthScenario s;
  s.config = parse_run_config(text, kScenarioKeys);
  const auto j = nlohmann::json::parse(text);
  try {
    auto num = [&](const char* key, double& out) {
      if (j.contains(key)) out = j.at(key).get<double>();
    };
    auto integer = [&](const char* key, int& out) {
      if (j.contains(key)) out = j.at(key).get<int>();
    };
    num("gamma", s.gamma);
    if (j.contains("alpha")) s.alpha = j.at("alpha").get<std::vector<double>>();
    if (j.contains("law")) s.law = parse_exposure_law(j.at("law").get<std::string>());
    integer("days", s.days);
    integer("replicates", s.replicates);
    integer("sites", s.sites);
    num("ambient_mean", s.ambient_mean);
    num("ambient_amplitude", s.ambient_amplitude);
    num("ambient_noise_sd", s.ambient_noise_sd);
    num("ambient_ar", s.ambient_ar);
    num("site_sd", s.site_sd);
    num("theta", s.theta);
    num("phi", s.phi);
    num("personal_noise_sd", s.personal_noise_sd);
    num("cv", s.cv);
    num("cv_jitter", s.cv_jitter);
    num("base_count", s.base_count);
    num("season_amplitude", s.season_amplitude);
    num("winter_bump", s.winter_bump);
    num("temp_slope", s.temp_slope);
    num("temp_mean", s.temp_mean);
    num("temp_amplitude", s.temp_amplitude);
    num("temp_noise_sd", s.temp_noise_sd);
    if (j.contains("start")) s.start = Date::parse(j.at("start").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("scenario value has the wrong type: ") + e.what());
  }
  s.validate();
  return s;
}

SynthScenario load_scenario(const std::filesystem::path& path) {
  auto in = csv::open_input(path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string scenario_json(const SynthScenario& s) {
  auto j = nlohmann::ordered_json::parse(run_config_json(s.config));
  j["gamma"] = s.gamma;
  if (!s.alpha.empty()) j["alpha"] = s.alpha;
  j["law"] = to_string(s.law);
  j["days"] = s.days;
  j["replicates"] = s.replicates;
  j["sites"] = s.sites;
  j["ambient_mean"] = s.ambient_mean;
  j["ambient_amplitude"] = s.ambient_amplitude;
  j["ambient_noise_sd"] = s.ambient_noise_sd;
  j["ambient_ar"] = s.ambient_ar;
  j["site_sd"] = s.site_sd;
  j["theta"] = s.theta;
  j["phi"] = s.phi;
  j["personal_noise_sd"] = s.personal_noise_sd;
  j["cv"] = s.cv;
  j["cv_jitter"] = s.cv_jitter;
  j["base_count"] = s.base_count;
  j["season_amplitude"] = s.season_amplitude;
  j["winter_bump"] = s.winter_bump;
  j["temp_slope"] = s.temp_slope;
  j["temp_mean"] = s.temp_mean;
  j["temp_amplitude"] = s.temp_amplitude;
  j["temp_noise_sd"] = s.temp_noise_sd;
  j["start"] = s.start.iso();
  return j.dump(2);
}

std::string truth_json(const SynthTruth& t, const SynthScenario& s) {
  nlohmann::ordered_json j;
  j["gamma"] = t.gamma;
  j["rr10"] = t.rr10();
  j["law"] = to_string(s.law);
  j["seed"] = s.config.seed;
  nlohmann::ordered_json a;
  for (Eigen::Index i = 0; i < t.alpha.size(); ++i) a[t.alpha_names[std::size_t(i)]] = t.alpha(i);
  j["alpha"] = a;
  j["theta"] = s.theta;
  j["phi"] = s.phi;
  std::vector<std::string> dates;
  for (const auto& d : t.exposure_dates) dates.push_back(d.iso());
  j["exposure_dates"] = dates;
  auto vec = [](const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  j["lambda1"] = vec(t.lambda1);
  j["lambda2"] = vec(t.lambda2);
  j["lambda3"] = vec(t.lambda3);
  j["ambient"] = vec(t.ambient);
  j["log_mean"] = vec(t.log_mean);
  return j.dump(2);
}

SynthData generate(const SynthScenario& sc) {
  sc.validate();
  const int lag = sc.config.lag;
  const int n_exp = sc.days + lag;
  Rng weather_rng = derive_rng(sc.config.seed, 101);
  Rng ambient_rng = derive_rng(sc.config.seed, 102);
  Rng personal_rng = derive_rng(sc.config.seed, 103);
  Rng sample_rng = derive_rng(sc.config.seed, 104);
  Rng count_rng = derive_rng(sc.config.seed, 105);
  std::normal_distribution<double> z(0.0, 1.0);

  SynthData out;
  auto& truth = out.truth;
  truth.gamma = sc.gamma;
  for (int t = 0; t < n_exp; ++t) truth.exposure_dates.push_back(sc.start + t);

  // Weather: coldest mid January.
  Eigen::VectorXd temp(n_exp);
  for (int t = 0; t < n_exp; ++t)
    temp(t) = sc.temp_mean - sc.temp_amplitude * yearly(truth.exposure_dates[std::size_t(t)], 15.0) +
              sc.temp_noise_sd * z(weather_rng);

  // Monitors: one site per district.
  auto& mon = out.monitors;
  mon.dates = truth.exposure_dates;
  for (int j = 0; j < sc.sites; ++j) mon.sites.push_back({"S" + std::to_string(j + 1), "D" + std::to_string(j + 1)});
  mon.ambient.resize(n_exp, sc.sites);
  Eigen::VectorXd site_offset(sc.sites);
  for (int j = 0; j < sc.sites; ++j) site_offset(j) = sc.site_sd * z(ambient_rng);
  if (sc.sites > 0) site_offset.array() -= site_offset.mean();
  double ar = 0;
  const double innov = sc.ambient_noise_sd * std::sqrt(1.0 - sc.ambient_ar * sc.ambient_ar);
  for (int t = 0; t < n_exp; ++t) {
    ar = t == 0 ? sc.ambient_noise_sd * z(ambient_rng) : sc.ambient_ar * ar + innov * z(ambient_rng);
    const double regional = sc.ambient_mean + sc.ambient_amplitude * yearly(truth.exposure_dates[std::size_t(t)], 15.0) + ar;
    for (int j = 0; j < sc.sites; ++j)
      mon.ambient(t, j) = std::max(1.0, regional + site_offset(j) + 0.5 * sc.site_sd * z(ambient_rng));
  }
  mon.parsed_rows = std::size_t(n_exp) * std::size_t(sc.sites);
  truth.ambient = spatial_average(mon).values;

  // True daily personal moments.
  truth.lambda1.resize(n_exp);
  truth.lambda2.resize(n_exp);
  truth.lambda3.resize(n_exp);
  for (int t = 0; t < n_exp; ++t) {
    const double m = std::max(0.5, sc.theta + sc.phi * truth.ambient(t) + sc.personal_noise_sd * z(personal_rng));
    const double cv = sc.cv * std::exp(sc.cv_jitter * z(personal_rng));
    truth.lambda1(t) = m;
    truth.lambda2(t) = sc.law == ExposureLaw::fixed ? 0.0 : (cv * m) * (cv * m);
    truth.lambda3(t) = sc.law == ExposureLaw::lognormal ? lambda3_from(m, truth.lambda2(t), sc.config.lambda3) : 0.0;
  }

  // Personal exposure panel, columns split across districts.
  auto& ep = out.exposure;
  ep.dates = truth.exposure_dates;
  ep.districts = mon.districts();
  ep.seed = sc.config.seed;
  const int n_d = int(ep.districts.size());
  for (int c = 0; c < sc.replicates; ++c) {
    const int d = int((long(c) * n_d) / sc.replicates);
    ep.column_district.push_back(d);
    const int first = int((long(d) * sc.replicates + n_d - 1) / n_d);
    ep.column_replicate.push_back(c - first + 1);
  }
  ep.exposure.resize(n_exp, sc.replicates);
  for (int t = 0; t < n_exp; ++t) {
    const double m = truth.lambda1(t), v = truth.lambda2(t);
    switch (sc.law) {
      case ExposureLaw::lognormal: {
        const auto p = lognormal_from_moments(m, v);
        std::lognormal_distribution<double> ln(p.m, std::sqrt(p.s2));
        for (int c = 0; c < sc.replicates; ++c) ep.exposure(t, c) = ln(sample_rng);
        break;
      }
      case ExposureLaw::normal: {
        std::normal_distribution<double> nd(m, std::sqrt(v));
        for (int c = 0; c < sc.replicates; ++c) ep.exposure(t, c) = nd(sample_rng);
        break;
      }
      case ExposureLaw::fixed:
        ep.exposure.row(t).setConstant(m);
        break;
    }
  }
  ep.ambient_component = ep.exposure;
  ep.indoor_component = Eigen::MatrixXd::Zero(n_exp, sc.replicates);

  // Health: count day t uses exposure day t - lag.
  truth.count_dates.assign(truth.exposure_dates.begin() + lag, truth.exposure_dates.end());
  const Eigen::VectorXd count_temp = temp.tail(sc.days);
  const CovariateDesign design = build_covariate_design(truth.count_dates, count_temp, sc.config.time_df, sc.config.temp_df);
  truth.alpha_names = design.names;
  if (!sc.alpha.empty()) {
    truth.alpha = Eigen::Map<const Eigen::VectorXd>(sc.alpha.data(), Eigen::Index(sc.alpha.size()));
  } else {
    // Project a smooth seasonal log-rate onto the design so the truth lies in the model class.
    Eigen::VectorXd f(sc.days);
    for (int i = 0; i < sc.days; ++i) {
      const Date& d = truth.count_dates[std::size_t(i)];
      const double bump = std::exp(-0.5 * std::pow((d.day_of_year() - 40.0) / 12.0, 2));
      f(i) = std::log(sc.base_count) + sc.season_amplitude * yearly(d, 20.0) + sc.winter_bump * bump +
             sc.temp_slope * (count_temp(i) - sc.temp_mean);
    }
    truth.alpha = design.matrix.colPivHouseholderQr().solve(f);
  }

  const MeanFunction mean{sc.law == ExposureLaw::lognormal ? MeanStrategy::lognormal_taylor
                          : sc.law == ExposureLaw::normal  ? MeanStrategy::normal_exact
                                                           : MeanStrategy::personal_fixed,
                          ResponseFunction::identity(), lag};
  truth.log_mean = design.matrix * truth.alpha;
  auto& h = out.health;
  h.dates = truth.count_dates;
  h.temp_mean = count_temp;
  const Eigen::VectorXd none = Eigen::VectorXd::Constant(sc.days, kMissing);
  h.temp_max = h.rain = h.wind = h.sun = none;
  for (int i = 0; i < sc.days; ++i) {
    const int t = i;  // exposure index of count day i is (i + lag) - lag
    const DailyMoments<double> dm{truth.lambda1(t), truth.lambda2(t), truth.lambda3(t), sc.replicates};
    truth.log_mean(i) += mean.exposure_term(dm, sc.gamma);
    std::poisson_distribution<int> pois(std::exp(truth.log_mean(i)));
    h.counts.push_back(pois(count_rng));
  }
  return out;
}

McEstimate mc_expectation_exp(const ExposureDistribution& law, double gamma, long n_draws, std::uint64_t seed) {
  if (n_draws < 100000) throw Error("mc_expectation_exp: n_draws must be >= 1e5");
  if (law.variance < 0) throw Error("mc_expectation_exp: variance must be >= 0");
  if (gamma == 0.0) return {1.0, 0.0};
  if (law.law == ExposureLaw::fixed || law.variance == 0.0) return {std::exp(gamma * law.mean), 0.0};
  Rng rng = derive_rng(seed, 0);
  std::normal_distribution<double> z(0.0, 1.0);
  double loc = law.mean, scale = std::sqrt(law.variance);
  if (law.law == ExposureLaw::lognormal) {
    const auto p = lognormal_from_moments(law.mean, law.variance);
    loc = p.m;
    scale = std::sqrt(p.s2);
  }
  // Welford accumulation of exp(gamma X).
  double mean = 0, m2 = 0;
  for (long i = 0; i < n_draws; ++i) {
    double x = loc + scale * z(rng);
    if (law.law == ExposureLaw::lognormal) x = std::exp(x);
    const double v = std::exp(gamma * x);
    const double d = v - mean;
    mean += d / double(i + 1);
    m2 += d * (v - mean);
  }
  return {mean, std::sqrt(m2 / double(n_draws - 1) / double(n_draws))};
}

}  // namespace expoerf
