// Command-line pipeline: simulate -> moments -> fit -> diagnose -> report, plus synth.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "expoerf/data_io.hpp"
#include "expoerf/diagnostics.hpp"
#include "expoerf/exposure_moments.hpp"
#include "expoerf/mcmc.hpp"
#include "expoerf/micro_sim.hpp"
#include "expoerf/risk_report.hpp"
#include "expoerf/synth.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace expoerf;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.3.0";

struct Options {
  std::string verb;
  std::string config;
  std::string model, source, lambda3;
  std::optional<int> lag, chains;
  std::optional<std::uint64_t> seed;
  std::optional<double> epsilon;
  std::optional<long> burn_in, iterations, thin;
  std::string out = "out";
  std::string in;  // defaults to `out`
  std::string monitors, health, panel, profile;
  bool holloman = false;
  double increment = 10.0;
  std::string density_day;
  std::vector<std::string> plots;
};

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Files and directories created by this run. Everything is written to a
// temporary name first and renamed into place; on failure all of it is removed.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  const fs::path& dir() const { return dir_; }

  fs::path write(const std::string& name, const std::string& text) {
    fs::create_directories(dir_);
    const auto path = dir_ / name;
    const auto tmp = dir_ / (name + ".tmp");
    {
      std::ofstream o(tmp, std::ios::binary);
      if (!o) throw Error("cannot write '" + tmp.string() + "'");
      o << text;
      if (!o) throw Error("write failed for '" + tmp.string() + "'");
    }
    fs::rename(tmp, path);
    created_.push_back(path);
    return path;
  }

  template <typename F>
  fs::path write_stream(const std::string& name, F&& emit) {
    std::ostringstream s;
    emit(s);
    return write(name, s.str());
  }

  // Draws go to a scratch directory that replaces `name` once complete.
  fs::path write_draws_dir(const std::string& name, const PosteriorDraws& d, const ModelSpec& spec) {
    const auto final_dir = dir_ / name;
    const auto tmp = dir_ / (name + ".tmp");
    fs::remove_all(tmp);
    write_draws(tmp, d, spec);
    fs::remove_all(final_dir);
    fs::rename(tmp, final_dir);
    created_.push_back(final_dir);
    return final_dir;
  }

  void track(const fs::path& p) { created_.push_back(p); }

  void rollback() {
    std::error_code ec;
    for (const auto& p : created_) fs::remove_all(p, ec);
    if (fs::exists(dir_, ec))
      for (const auto& e : fs::directory_iterator(dir_, ec))
        if (e.path().extension() == ".tmp") fs::remove_all(e.path(), ec);
    created_.clear();
  }

  std::vector<std::string> names() const {
    std::vector<std::string> n;
    for (const auto& p : created_) n.push_back(fs::relative(p, dir_).string());
    return n;
  }

 private:
  fs::path dir_;
  std::vector<fs::path> created_;
};

struct Context {
  Options opt;
  RunConfig cfg;
  std::string config_text;  // canonical JSON of the effective config
  fs::path in_dir;
  Outputs out;
  json notes = json::array();

  explicit Context(Options o) : opt(std::move(o)), out(opt.out) {}

  fs::path input(const std::string& explicit_path, const std::string& default_name) const {
    if (!explicit_path.empty()) return explicit_path;
    return in_dir / default_name;
  }
};

RunConfig effective_config(const Options& o, const std::vector<std::string>& extra_keys) {
  RunConfig c;
  if (!o.config.empty()) c = load_run_config(o.config, extra_keys);
  if (!o.model.empty()) c.model = parse_model_variant(o.model);
  if (!o.source.empty()) c.source = parse_source_toggle(o.source);
  if (!o.lambda3.empty()) {
    if (o.lambda3 == "ratio") c.lambda3 = Lambda3Rule::ratio;
    else if (o.lambda3 == "exact") c.lambda3 = Lambda3Rule::exact;
    else throw Error("--lambda3 must be ratio or exact");
  }
  if (o.lag) c.lag = *o.lag;
  if (o.chains) c.chains = *o.chains;
  if (o.seed) c.seed = *o.seed;
  if (o.epsilon) c.epsilon = *o.epsilon;
  if (o.burn_in) c.burn_in = *o.burn_in;
  if (o.iterations) c.iterations = *o.iterations;
  if (o.thin) c.thin = *o.thin;
  c.validate();
  return c;
}

std::string fit_dir_name(ModelVariant m, bool holloman) {
  return holloman ? "fit_holloman" : "fit_" + to_string(m);
}

// ---------------------------------------------------------------------------
// Stages

void stage_synth(Context& ctx) {
  if (ctx.opt.config.empty()) throw Error("synth needs --config <scenario.json>");
  SynthScenario sc = load_scenario(ctx.opt.config);
  sc.config = ctx.cfg;  // command-line overrides
  const SynthData data = generate(sc);
  ctx.out.write_stream("monitors.csv", [&](std::ostream& o) { write_monitor_panel(o, data.monitors); });
  ctx.out.write_stream("health.csv", [&](std::ostream& o) { write_health_series(o, data.health); });
  ctx.out.write_stream("exposure_panel.csv", [&](std::ostream& o) { write_exposure_panel(o, data.exposure); });
  ctx.out.write("truth.json", truth_json(data.truth, sc) + "\n");
  ctx.out.write("scenario.json", scenario_json(sc) + "\n");
  ctx.out.write("config.json", run_config_json(sc.config) + "\n");
  std::cout << "synth: " << data.health.size() << " count days, " << data.exposure.columns()
            << " exposures per day, RR10 truth " << format_number(data.truth.rr10()) << "\n";
}

ExposurePanel stage_simulate(Context& ctx) {
  const auto monitors = load_monitor_panel(ctx.input(ctx.opt.monitors, "monitors.csv"));
  const auto health = load_health_series(ctx.input(ctx.opt.health, "health.csv"));
  const fs::path profile_path = ctx.opt.profile.empty() ? fs::path(EXPOERF_DEFAULT_PROFILE) : fs::path(ctx.opt.profile);
  const SimulatorSetup setup = load_profile(profile_path);
  const ExposurePanel panel = simulate_panel(monitors, health.simulator_temperature(), setup.profile, setup.envs,
                                             ctx.cfg.replicates_per_district, ctx.cfg.source, ctx.cfg.seed,
                                             setup.temperature);
  ctx.out.write_stream("exposure_panel.csv", [&](std::ostream& o) { write_exposure_panel(o, panel); });

  const SourceShares shares = decompose_sources(panel);
  const DailySeries amb = spatial_average(monitors);
  Eigen::VectorXd a(panel.days());
  for (Eigen::Index t = 0; t < panel.days(); ++t) a(t) = amb.values(*amb.index_of(panel.dates[std::size_t(t)]));
  const AttenuationFit fit = attenuation_fit(a, panel.daily_mean());
  json j;
  j["source"] = to_string(ctx.cfg.source);
  j["indoor_share"] = shares.indoor;
  j["outdoor_share"] = shares.outdoor;
  j["attenuation"] = {{"theta", fit.theta}, {"phi", fit.phi}, {"r2", fit.r2}, {"n", fit.n}};
  j["profile"] = profile_path.string();
  ctx.out.write("simulation.json", j.dump(2) + "\n");
  std::cout << "simulate: " << panel.days() << " days x " << panel.columns() << " individuals, phi "
            << format_number(fit.phi) << ", indoor share " << format_number(shares.indoor) << "\n";
  return panel;
}

void stage_moments(Context& ctx) {
  const auto panel = load_exposure_panel(ctx.input(ctx.opt.panel, "exposure_panel.csv"));
  const auto table = daily_moments(panel, ctx.cfg.lambda3);
  ctx.out.write_stream("moments.csv", [&](std::ostream& o) { write_moments_table(o, table); });
  std::cout << "moments: " << table.dates.size() << " days\n";
}

struct LoadedInputs {
  HealthSeries health;
  std::optional<DailySeries> ambient;
  std::optional<ExposurePanel> panel;
};

LoadedInputs load_inputs(const Context& ctx, bool need_ambient, bool need_panel) {
  LoadedInputs in;
  in.health = load_health_series(ctx.input(ctx.opt.health, "health.csv"));
  const auto mon_path = ctx.input(ctx.opt.monitors, "monitors.csv");
  if (need_ambient || fs::exists(mon_path)) in.ambient = spatial_average(load_monitor_panel(mon_path));
  const auto panel_path = ctx.input(ctx.opt.panel, "exposure_panel.csv");
  if (need_panel || fs::exists(panel_path)) in.panel = load_exposure_panel(panel_path);
  return in;
}

ModelSpec spec_for(const Context& ctx, const LoadedInputs& in, ModelVariant model) {
  RunConfig c = ctx.cfg;
  c.model = model;
  return build_model_spec(c, in.health, in.ambient ? &*in.ambient : nullptr, in.panel ? &*in.panel : nullptr);
}

ModelVariant fit_model(const Context& ctx) {
  // Indoor-only panels are analysed with the fixed personal-exposure model.
  if (ctx.cfg.source == SourceToggle::indoor_only && !ctx.opt.holloman) return ModelVariant::personal_fixed;
  return ctx.cfg.model;
}

void stage_fit(Context& ctx) {
  const ModelVariant model = fit_model(ctx);
  if (model != ctx.cfg.model)
    ctx.notes.push_back("indoor-only source: fitted with model ii instead of " + to_string(ctx.cfg.model));
  const bool holloman = ctx.opt.holloman;
  const ModelVariant base = holloman ? ModelVariant::personal_fixed : model;
  const auto in = load_inputs(ctx, base == ModelVariant::ambient_fixed, base != ModelVariant::ambient_fixed);
  const ModelSpec spec = spec_for(ctx, in, base);
  const auto settings = SamplerSettings::from(ctx.cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const PosteriorDraws draws = holloman ? holloman_variant(spec, settings, ctx.cfg.seed) : run_chains(spec, settings, ctx.cfg.seed);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto name = fit_dir_name(model, holloman);
  ctx.out.write_draws_dir(name, draws, spec);
  const RiskSummary rr = relative_risk(draws, ctx.opt.increment);
  ctx.out.write_stream(name + "_rr.csv", [&](std::ostream& o) { write_rr_table(o, {rr}); });
  std::cout << "fit " << (holloman ? "holloman" : to_string(model)) << ": " << spec.n_counts() << " days, "
            << draws.n_chains() << " chains x " << draws.draws_per_chain() << " draws in " << format_number(std::round(secs * 10) / 10)
            << " s; RR" << format_number(ctx.opt.increment) << " median " << format_number(rr.median()) << " ("
            << format_number(rr.quantiles.front()) << ", " << format_number(rr.quantiles.back()) << ")\n";
}

void stage_diagnose(Context& ctx) {
  const ModelVariant model = fit_model(ctx);
  const bool holloman = ctx.opt.holloman;
  const ModelVariant base = holloman ? ModelVariant::personal_fixed : model;
  const auto in = load_inputs(ctx, base == ModelVariant::ambient_fixed, base != ModelVariant::ambient_fixed);
  const ModelSpec spec = spec_for(ctx, in, base);
  const auto name = fit_dir_name(model, holloman);
  const PosteriorDraws draws = read_draws(ctx.in_dir / name);
  const DiagnosticsReport rep = diagnose(draws, spec);
  ctx.out.write(name + "_diagnostics.json", report_json(rep) + "\n");
  ctx.out.write_stream(name + "_residuals.csv", [&](std::ostream& o) { write_residuals_csv(o, rep.residuals); });
  ctx.out.write_stream(name + "_acf.csv", [&](std::ostream& o) { write_acf_csv(o, rep.acf); });
  double worst = 1;
  for (const auto& r : rep.rhat) worst = std::max(worst, r.rhat);
  std::cout << "diagnose " << name << ": DIC " << format_number(std::round(rep.dic.dic * 10) / 10) << " (pD "
            << format_number(std::round(rep.dic.pd * 10) / 10) << "), max Rhat " << format_number(std::round(worst * 1000) / 1000)
            << ", ACF medians within band: " << (rep.acf.medians_within_band ? "yes" : "no") << "\n";
  if (rep.dic.warning) std::cout << "  warning: " << *rep.dic.warning << "\n";
}

void stage_report(Context& ctx) {
  // Every fit found in the input directory contributes a Table-1 row.
  std::vector<std::pair<std::string, PosteriorDraws>> fits;
  for (const char* m : {"i", "ii", "iii", "iv"}) {
    const auto dir = ctx.in_dir / ("fit_" + std::string(m));
    if (fs::exists(dir / "draws_meta.json")) fits.emplace_back(std::string("model_") + m, read_draws(dir));
  }
  if (fs::exists(ctx.in_dir / "fit_holloman" / "draws_meta.json"))
    fits.emplace_back("holloman", read_draws(ctx.in_dir / "fit_holloman"));
  if (fits.empty()) throw Error("report: no fitted models found in '" + ctx.in_dir.string() + "'");

  std::vector<RiskSummary> rows, curves;
  for (const auto& [label, d] : fits) {
    auto r = relative_risk(d.gamma_draws(), ctx.opt.increment, {}, label);
    rows.push_back(r);
    curves.push_back(r);
    curves.push_back(relative_risk(d.gamma_draws(), 50.0, {}, label));
  }
  ctx.out.write_stream("table1.csv", [&](std::ostream& o) { write_rr_table(o, rows); });

  json summary;
  summary["increment"] = ctx.opt.increment;
  for (const auto& r : rows) {
    summary["relative_risk"][r.label] = {{"q025", r.quantiles[0]}, {"q50", r.quantiles[2]}, {"q975", r.quantiles[4]},
                                         {"p_gt_1", r.prob_above_one}};
  }

  const auto in = load_inputs(ctx, false, false);
  std::optional<AttenuationFit> att;
  if (in.ambient && in.panel) {
    Eigen::VectorXd a(in.panel->days());
    for (Eigen::Index t = 0; t < a.size(); ++t) {
      const auto k = in.ambient->index_of(in.panel->dates[std::size_t(t)]);
      a(t) = k ? in.ambient->values(*k) : kMissing;
    }
    att = attenuation_fit(a, in.panel->daily_mean());
    summary["attenuation"] = {{"theta", att->theta}, {"phi", att->phi}, {"r2", att->r2}};
    const SourceShares sh = decompose_sources(*in.panel);
    summary["indoor_share"] = sh.indoor;
  }
  const PosteriorDraws* amb = nullptr;
  const PosteriorDraws* pers = nullptr;
  for (const auto& [label, d] : fits) {
    if (label == "model_i") amb = &d;
    if (!pers && (label == "model_iv" || label == "model_iii" || label == "model_ii")) pers = &d;
  }
  if (att && amb && pers) {
    const GammaCheck g = gamma_attenuation_check(amb->gamma_draws(), pers->gamma_draws(), att->phi);
    summary["gamma_check"] = {{"median_gamma_ambient", g.median_ambient}, {"median_gamma_personal", g.median_personal},
                              {"phi", g.phi}, {"discrepancy", g.discrepancy}};
  }
  ctx.out.write("summary.json", summary.dump(2) + "\n");

  // Plot tables.
  std::vector<ModelSpec> specs;
  specs.reserve(fits.size());
  PlotInputs pin;
  pin.panel = in.panel ? &*in.panel : nullptr;
  pin.ambient = in.ambient ? &*in.ambient : nullptr;
  pin.risks = curves;
  if (!ctx.opt.density_day.empty()) pin.density_day = Date::parse(ctx.opt.density_day);
  std::optional<DiagnosticsReport> diag;
  for (const auto& [label, d] : fits) {
    const bool needs_panel = d.holloman || d.model != ModelVariant::ambient_fixed;
    if ((needs_panel && !in.panel) || (!needs_panel && !in.ambient)) continue;
    specs.push_back(spec_for(ctx, in, d.holloman ? ModelVariant::personal_fixed : d.model));
    pin.fits.push_back({label, &d, &specs.back()});
  }
  if (!pin.fits.empty()) {
    // Residual plots describe the last personal-exposure fit when there is one.
    const auto& f = pin.fits.back();
    diag = diagnose(*f.draws, *f.spec);
    pin.diagnostics = &*diag;
  }
  std::vector<std::string> selectors = ctx.opt.plots;
  if (selectors.empty())
    for (const auto& s : kPlotSelectors) {
      if ((s == "fig1_boxplot" || s == "fig3_density") && !pin.panel) continue;
      if (s == "fig1_scatter" && !(pin.panel && pin.ambient)) continue;
      if ((s == "fig2_residuals" || s == "fig2_acf") && !pin.diagnostics) continue;
      selectors.push_back(s);
    }
  for (const auto& s : selectors) ctx.out.track(emit_plot_data(pin, s, ctx.out.dir() / "plots"));

  std::cout << "report:\n";
  for (const auto& r : rows)
    std::cout << "  " << r.label << "  RR" << format_number(r.increment) << " " << format_number(r.quantiles[2]) << " ("
              << format_number(r.quantiles[0]) << ", " << format_number(r.quantiles[4]) << ")  P(RR>1)="
              << format_number(r.prob_above_one) << "\n";
  if (att) std::cout << "  attenuation: personal = " << format_number(att->theta) << " + " << format_number(att->phi) << " ambient\n";
}

void write_manifest(Context& ctx, const std::string& status, const std::string& message = {}) {
  json m;
  m["tool"] = "expoerf";
  m["version"] = kVersion;
  m["verb"] = ctx.opt.verb;
  m["status"] = status;
  if (!message.empty()) m["error"] = message;
  m["seed"] = ctx.cfg.seed;
  m["config"] = json::parse(ctx.config_text);
  m["config_hash"] = hex(fnv1a(ctx.config_text));
  json inputs = json::object();
  for (const auto& [key, path] : {std::pair<std::string, std::string>{"monitors", ctx.opt.monitors},
                                  {"health", ctx.opt.health},
                                  {"panel", ctx.opt.panel},
                                  {"profile", ctx.opt.profile},
                                  {"config", ctx.opt.config}}) {
    if (path.empty()) continue;
    std::error_code ec;
    if (fs::is_regular_file(path, ec)) inputs[key] = {{"path", path}, {"fnv1a", hex(fnv1a(slurp(path)))}};
  }
  m["inputs"] = inputs;
  m["outputs"] = ctx.out.names();
  m["notes"] = ctx.notes;
  m["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  const auto path = ctx.out.dir() / ("manifest_" + ctx.opt.verb + ".json");
  std::ofstream(path) << m.dump(2) << "\n";
}

int run(Options opt) {
  const std::vector<std::string> scenario_keys = {
      "gamma", "alpha", "law", "days", "replicates", "sites", "ambient_mean", "ambient_amplitude",
      "ambient_noise_sd", "ambient_ar", "site_sd", "theta", "phi", "personal_noise_sd", "cv", "cv_jitter",
      "base_count", "season_amplitude", "winter_bump", "temp_slope", "temp_mean", "temp_amplitude",
      "temp_noise_sd", "start"};
  Context ctx(opt);
  try {
    ctx.cfg = effective_config(ctx.opt, scenario_keys);
    ctx.config_text = run_config_json(ctx.cfg);
    ctx.in_dir = ctx.opt.in.empty() ? fs::path(ctx.opt.out) : fs::path(ctx.opt.in);
    fs::create_directories(ctx.opt.out);
    const auto& v = ctx.opt.verb;
    if (v == "synth") stage_synth(ctx);
    else if (v == "simulate") stage_simulate(ctx);
    else if (v == "moments") stage_moments(ctx);
    else if (v == "fit") stage_fit(ctx);
    else if (v == "diagnose") stage_diagnose(ctx);
    else if (v == "report") stage_report(ctx);
    else if (v == "all") {
      // Later stages read what earlier stages wrote.
      const bool have_panel = fs::exists(ctx.input(ctx.opt.panel, "exposure_panel.csv"));
      if (!have_panel) {
        stage_simulate(ctx);
        ctx.opt.panel = (fs::path(ctx.opt.out) / "exposure_panel.csv").string();
      }
      if (ctx.cfg.model != ModelVariant::ambient_fixed || ctx.opt.holloman) stage_moments(ctx);
      stage_fit(ctx);
      stage_diagnose(ctx);
      if (!ctx.opt.in.empty() && fs::path(ctx.opt.in) != fs::path(ctx.opt.out)) ctx.in_dir = ctx.opt.out;
      stage_report(ctx);
    }
    write_manifest(ctx, "ok");
    return 0;
  } catch (const std::exception& e) {
    ctx.out.rollback();
    std::cerr << "error: " << ctx.opt.verb << ": " << e.what() << "\n";
    if (!ctx.config_text.empty() && fs::exists(ctx.opt.out)) write_manifest(ctx, "failed", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exposure-response modelling with simulated personal exposures"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", kVersion);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "JSON run configuration (scenario file for synth)");
    sub->add_option("--model", opt.model, "Model variant")->check(CLI::IsMember({"i", "ii", "iii", "iv"}));
    sub->add_option("--lag", opt.lag, "Exposure lag in days");
    sub->add_option("--chains", opt.chains, "Number of MCMC chains");
    sub->add_option("--seed", opt.seed, "Random seed");
    sub->add_option("--source", opt.source, "Indoor/outdoor source toggle")->check(CLI::IsMember({"all", "outdoor", "indoor"}));
    sub->add_option("--epsilon", opt.epsilon, "Inverse-gamma hyperparameter");
    sub->add_option("--lambda3", opt.lambda3, "Third-moment rule")->check(CLI::IsMember({"ratio", "exact"}));
    sub->add_option("--burn-in", opt.burn_in, "Burn-in iterations per chain");
    sub->add_option("--iterations", opt.iterations, "Main-run iterations per chain");
    sub->add_option("--thin", opt.thin, "Thinning interval");
    sub->add_option("--out", opt.out, "Output directory");
    sub->add_option("--in", opt.in, "Directory holding stage inputs (default: --out)");
    sub->add_option("--monitors", opt.monitors, "Monitor CSV (date,site_id,district,pm10)");
    sub->add_option("--health", opt.health, "Health CSV (date,count,temp_mean,...)");
    sub->add_option("--panel", opt.panel, "Exposure panel CSV");
    sub->add_option("--profile", opt.profile, "Activity profile for the simulator");
    sub->add_flag("--holloman", opt.holloman, "Fit the latent-level comparison model");
    sub->add_option("--increment", opt.increment, "Exposure increment for relative risks");
    sub->add_option("--density-day", opt.density_day, "Day (YYYY-MM-DD) for the exposure density table");
    sub->add_option("--plots", opt.plots, "Plot tables to emit")->delimiter(',');
  };
  for (const auto& [verb, help] :
       {std::pair<const char*, const char*>{"simulate", "Simulate personal exposures from monitor data"},
        {"moments", "Daily exposure moments"},
        {"fit", "Fit a model by MCMC"},
        {"diagnose", "DIC, Gelman-Rubin and residual checks"},
        {"report", "Relative risks, exceedance curves and plot tables"},
        {"synth", "Generate a synthetic dataset from a scenario"},
        {"all", "simulate, moments, fit, diagnose and report in order"}}) {
    auto* sub = app.add_subcommand(verb, help);
    add_common(sub);
    sub->callback([&opt, v = std::string(verb)] { opt.verb = v; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  return run(opt);
}
