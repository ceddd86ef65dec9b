#include "expoerf/micro_sim.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <sstream>

#include "csv.hpp"

namespace expoerf {

std::string to_string(EnvKind k) {
  switch (k) {
    case EnvKind::home_indoor: return "home-indoor";
    case EnvKind::other_indoor: return "other-indoor";
    case EnvKind::outdoor: return "outdoor";
    case EnvKind::transit: return "transit";
  }
  return "?";
}

EnvKind parse_env_kind(std::string_view s) {
  if (s == "home-indoor") return EnvKind::home_indoor;
  if (s == "other-indoor") return EnvKind::other_indoor;
  if (s == "outdoor") return EnvKind::outdoor;
  if (s == "transit") return EnvKind::transit;
  throw Error("unknown microenvironment kind '" + std::string(s) + "'");
}

void Microenvironment::validate() const {
  if (!(penetration >= 0 && penetration <= 1)) throw Error("microenvironment '" + name + "': penetration outside [0,1]");
  if (!(air_exchange > 0)) throw Error("microenvironment '" + name + "': air exchange must be > 0");
  if (!(emission >= 0)) throw Error("microenvironment '" + name + "': emission must be >= 0");
  if (!(event_probability >= 0 && event_probability <= 1))
    throw Error("microenvironment '" + name + "': event probability outside [0,1]");
  if (dwell_min < 1 || dwell_max < dwell_min) throw Error("microenvironment '" + name + "': invalid dwell range");
}

double TemperatureMap::factor(double temp) const {
  if (is_missing(temp)) return 1.0;
  if (temp <= cold_temp) return cold_factor;
  if (temp >= warm_temp) return warm_factor;
  return cold_factor + (warm_factor - cold_factor) * (temp - cold_temp) / (warm_temp - cold_temp);
}

void TemperatureMap::validate() const {
  if (!(warm_temp > cold_temp)) throw Error("temperature map: warm_temp must exceed cold_temp");
  if (!(cold_factor > 0) || warm_factor < cold_factor)
    throw Error("temperature map: factors must be positive and nondecreasing");
}

const Eigen::MatrixXd& ActivityProfile::kernel_at(int hour) const {
  for (const auto& b : blocks)
    if (hour >= b.start_hour && hour < b.end_hour) return b.kernel;
  throw Error("activity profile has no transition block for hour " + std::to_string(hour));
}

void ActivityProfile::validate(std::size_t env_count) const {
  if (env_count == 0) throw Error("microenvironment set is empty");
  if (start_env >= env_count) throw Error("activity profile start microenvironment out of range");
  if (blocks.empty()) throw Error("activity profile has no transition blocks");
  for (int h = 0; h < 24; ++h) {
    int hits = 0;
    for (const auto& b : blocks) hits += (h >= b.start_hour && h < b.end_hour);
    if (hits != 1) throw Error("activity profile blocks must cover each hour exactly once");
  }
  const auto n = Eigen::Index(env_count);
  for (const auto& b : blocks) {
    if (b.kernel.rows() != n || b.kernel.cols() != n)
      throw Error("transition kernel dimension does not match the microenvironment set");
    if ((b.kernel.array() < 0).any()) throw Error("transition kernel has negative entries");
    for (Eigen::Index r = 0; r < n; ++r)
      if (std::abs(b.kernel.row(r).sum() - 1.0) > 1e-9)
        throw Error("transition kernel row " + std::to_string(r + 1) + " of block starting at hour " +
                    std::to_string(b.start_hour) + " does not sum to 1");
  }
}

namespace {

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string t; ss >> t;) out.push_back(t);
  return out;
}

double num(const std::string& s, const std::string& source, std::size_t line) {
  return csv::to_double(s, source, line);
}

}  // namespace

SimulatorSetup read_profile(std::istream& in, const std::string& source) {
  SimulatorSetup setup;
  std::map<std::string, std::size_t> env_index;
  std::string start_name;
  struct PendingRow {
    std::size_t block;
    std::string from;
    std::vector<double> probs;
    std::size_t line;
  };
  std::vector<PendingRow> rows;
  for (const auto& ln : csv::read_lines(in)) {
    const auto t = tokens(ln.text);
    const auto& kw = t[0];
    auto need = [&](std::size_t n) {
      if (t.size() != n) throw csv::row_error(source, ln.number, "'" + kw + "' expects " + std::to_string(n - 1) + " values");
    };
    if (kw == "population") {
      need(2);
      setup.profile.population = t[1];
    } else if (kw == "start") {
      need(2);
      start_name = t[1];
    } else if (kw == "temperature") {
      need(5);
      setup.temperature = {num(t[1], source, ln.number), num(t[2], source, ln.number), num(t[3], source, ln.number),
                           num(t[4], source, ln.number)};
    } else if (kw == "env") {
      need(9);
      Microenvironment e;
      e.name = t[1];
      e.kind = parse_env_kind(t[2]);
      e.penetration = num(t[3], source, ln.number);
      e.air_exchange = num(t[4], source, ln.number);
      e.emission = num(t[5], source, ln.number);
      e.event_probability = num(t[6], source, ln.number);
      e.dwell_min = int(csv::to_long(t[7], source, ln.number));
      e.dwell_max = int(csv::to_long(t[8], source, ln.number));
      if (env_index.count(e.name)) throw csv::row_error(source, ln.number, "duplicate microenvironment " + e.name);
      e.validate();
      env_index[e.name] = setup.envs.size();
      setup.envs.push_back(e);
    } else if (kw == "block") {
      need(3);
      TransitionBlock b;
      b.start_hour = int(csv::to_long(t[1], source, ln.number));
      b.end_hour = int(csv::to_long(t[2], source, ln.number));
      setup.profile.blocks.push_back(b);
    } else if (kw == "row") {
      if (setup.profile.blocks.empty()) throw csv::row_error(source, ln.number, "'row' before any 'block'");
      if (t.size() < 3) throw csv::row_error(source, ln.number, "'row' needs a name and probabilities");
      PendingRow r{setup.profile.blocks.size() - 1, t[1], {}, ln.number};
      for (std::size_t i = 2; i < t.size(); ++i) r.probs.push_back(num(t[i], source, ln.number));
      rows.push_back(std::move(r));
    } else {
      throw csv::row_error(source, ln.number, "unknown keyword '" + kw + "'");
    }
  }
  const auto n = Eigen::Index(setup.envs.size());
  if (n == 0) throw Error(source + ": microenvironment set is empty");
  for (auto& b : setup.profile.blocks) b.kernel = Eigen::MatrixXd::Constant(n, n, kMissing);
  for (const auto& r : rows) {
    const auto it = env_index.find(r.from);
    if (it == env_index.end()) throw csv::row_error(source, r.line, "unknown microenvironment " + r.from);
    if (Eigen::Index(r.probs.size()) != n) throw csv::row_error(source, r.line, "row length does not match env count");
    setup.profile.blocks[r.block].kernel.row(Eigen::Index(it->second)) =
        Eigen::Map<const Eigen::RowVectorXd>(r.probs.data(), n);
  }
  for (const auto& b : setup.profile.blocks)
    if (b.kernel.array().isNaN().any())
      throw Error(source + ": block starting at hour " + std::to_string(b.start_hour) + " is missing rows");
  if (!start_name.empty()) {
    const auto it = env_index.find(start_name);
    if (it == env_index.end()) throw Error(source + ": unknown start microenvironment " + start_name);
    setup.profile.start_env = it->second;
  }
  setup.temperature.validate();
  setup.profile.validate(setup.envs.size());
  return setup;
}

SimulatorSetup load_profile(const std::filesystem::path& path) {
  auto in = csv::open_input(path.string());
  return read_profile(in, path.string());
}

void write_profile(std::ostream& out, const SimulatorSetup& s) {
  out << "population " << s.profile.population << '\n';
  out << "start " << s.envs.at(s.profile.start_env).name << '\n';
  out << "temperature " << format_number(s.temperature.cold_temp) << ' ' << format_number(s.temperature.cold_factor)
      << ' ' << format_number(s.temperature.warm_temp) << ' ' << format_number(s.temperature.warm_factor) << '\n';
  out << "# env name kind penetration air_exchange emission event_probability dwell_min dwell_max\n";
  for (const auto& e : s.envs)
    out << "env " << e.name << ' ' << to_string(e.kind) << ' ' << format_number(e.penetration) << ' '
        << format_number(e.air_exchange) << ' ' << format_number(e.emission) << ' '
        << format_number(e.event_probability) << ' ' << e.dwell_min << ' ' << e.dwell_max << '\n';
  for (const auto& b : s.profile.blocks) {
    out << "block " << b.start_hour << ' ' << b.end_hour << '\n';
    for (Eigen::Index r = 0; r < b.kernel.rows(); ++r) {
      out << "row " << s.envs[std::size_t(r)].name;
      for (Eigen::Index c = 0; c < b.kernel.cols(); ++c) out << ' ' << format_number(b.kernel(r, c));
      out << '\n';
    }
  }
}

std::optional<Eigen::Index> ExposurePanel::index_of(const Date& d) const {
  const auto it = std::lower_bound(dates.begin(), dates.end(), d);
  if (it == dates.end() || *it != d) return std::nullopt;
  return Eigen::Index(it - dates.begin());
}

double hourly_indoor_concentration(double prev, double ambient, const Microenvironment& env, bool source_active) {
  const double a = std::min(env.air_exchange * 1.0, 1.0);
  const double next = prev + a * (env.penetration * ambient - prev) + (source_active ? env.emission : 0.0);
  return std::max(next, 0.0);
}

namespace {

int draw_dwell(Rng& rng, const Microenvironment& e) {
  if (e.dwell_max == e.dwell_min) return e.dwell_min;
  return std::uniform_int_distribution<int>(e.dwell_min, e.dwell_max)(rng);
}

std::size_t draw_next(Rng& rng, const Eigen::MatrixXd& kernel, std::size_t from) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0;
  const auto n = kernel.cols();
  for (Eigen::Index j = 0; j < n; ++j) {
    acc += kernel(Eigen::Index(from), j);
    if (u < acc) return std::size_t(j);
  }
  return std::size_t(n - 1);
}

}  // namespace

ExposurePanel simulate_panel(const MonitorPanel& panel, const DailySeries& temps, const ActivityProfile& profile,
                             const std::vector<Microenvironment>& envs, int replicates, SourceToggle toggle,
                             std::uint64_t seed, const TemperatureMap& temperature) {
  if (envs.empty()) throw Error("microenvironment set is empty");
  if (replicates < 1) throw Error("replicates must be >= 1");
  for (const auto& e : envs) e.validate();
  profile.validate(envs.size());
  temperature.validate();

  // District ambient level per simulated day: mean over the district's observed
  // sites, falling back to the all-site mean when the district has no reading.
  const auto districts = panel.districts();
  const DailySeries all_sites = spatial_average(panel);
  std::vector<Eigen::Index> days;
  for (Eigen::Index t = 0; t < panel.days(); ++t)
    if (!is_missing(all_sites.values(t))) days.push_back(t);
  if (days.empty()) throw Error("monitor panel has no day with an observed site");

  const auto n_days = Eigen::Index(days.size());
  const auto n_districts = Eigen::Index(districts.size());
  Eigen::MatrixXd district_level(n_days, n_districts);
  Eigen::VectorXd temp_factor(n_days);
  for (Eigen::Index i = 0; i < n_days; ++i) {
    const auto t = days[std::size_t(i)];
    for (Eigen::Index d = 0; d < n_districts; ++d) {
      double sum = 0;
      int k = 0;
      for (Eigen::Index j = 0; j < panel.site_count(); ++j)
        if (panel.sites[std::size_t(j)].district == districts[std::size_t(d)] && !is_missing(panel.ambient(t, j))) {
          sum += panel.ambient(t, j);
          ++k;
        }
      district_level(i, d) = k > 0 ? sum / k : all_sites.values(t);
    }
    const auto ti = temps.index_of(panel.dates[std::size_t(t)]);
    temp_factor(i) = ti ? temperature.factor(temps.values(*ti)) : 1.0;
  }
  if (toggle == SourceToggle::indoor_only) district_level.setZero();

  ExposurePanel out;
  out.seed = seed;
  out.districts = districts;
  for (auto t : days) out.dates.push_back(panel.dates[std::size_t(t)]);
  const Eigen::Index cols = n_districts * replicates;
  out.exposure.resize(n_days, cols);
  out.ambient_component.resize(n_days, cols);
  out.indoor_component.resize(n_days, cols);

  const std::size_t n_env = envs.size();
  for (Eigen::Index c = 0; c < cols; ++c) {
    const auto d = c / replicates;
    out.column_district.push_back(int(d));
    out.column_replicate.push_back(int(c % replicates) + 1);
    Rng rng = derive_rng(seed, std::uint64_t(c));
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    std::vector<double> amb(n_env), ind(n_env, 0.0);
    for (std::size_t e = 0; e < n_env; ++e)
      amb[e] = envs[e].kind == EnvKind::outdoor ? district_level(0, d) : envs[e].penetration * district_level(0, d);
    std::size_t here = profile.start_env;
    int remaining = draw_dwell(rng, envs[here]);
    Microenvironment step_env;

    for (Eigen::Index i = 0; i < n_days; ++i) {
      const double c_amb = district_level(i, d);
      double amb_sum = 0, ind_sum = 0;
      for (int h = 0; h < 24; ++h) {
        if (remaining == 0) {
          here = draw_next(rng, profile.kernel_at(h), here);
          remaining = draw_dwell(rng, envs[here]);
        }
        // Drawn whatever the toggle so the activity sequence matches across source runs.
        const bool event = unif(rng) < envs[here].event_probability;
        const bool active = event && toggle != SourceToggle::outdoor_only;
        for (std::size_t e = 0; e < n_env; ++e) {
          if (envs[e].kind == EnvKind::outdoor) {
            amb[e] = c_amb;
            ind[e] = 0.0;
            continue;
          }
          step_env = envs[e];
          if (step_env.temperature_sensitive()) step_env.air_exchange *= temp_factor(i);
          amb[e] = hourly_indoor_concentration(amb[e], c_amb, step_env, false);
          step_env.penetration = 0.0;
          ind[e] = hourly_indoor_concentration(ind[e], 0.0, step_env, active && e == here);
        }
        amb_sum += amb[here];
        ind_sum += ind[here];
        --remaining;
      }
      out.ambient_component(i, c) = amb_sum / 24.0;
      out.indoor_component(i, c) = ind_sum / 24.0;
      out.exposure(i, c) = out.ambient_component(i, c) + out.indoor_component(i, c);
    }
  }
  return out;
}

SourceShares decompose_sources(const ExposurePanel& panel) {
  if (panel.indoor_component.rows() != panel.days() || panel.ambient_component.rows() != panel.days())
    throw Error("exposure panel carries no source decomposition");
  double share = 0;
  int used = 0;
  for (Eigen::Index t = 0; t < panel.days(); ++t) {
    const double indoor = panel.indoor_component.row(t).sum();
    const double total = indoor + panel.ambient_component.row(t).sum();
    if (total > 0) {
      share += indoor / total;
      ++used;
    }
  }
  if (used == 0) throw Error("total exposure is zero on every day");
  const double indoor = share / used;
  return {indoor, 1.0 - indoor};
}

void write_exposure_panel(std::ostream& out, const ExposurePanel& p) {
  out << "date,replicate,district,exposure,ambient_component,indoor_component\n";
  for (Eigen::Index t = 0; t < p.days(); ++t)
    for (Eigen::Index c = 0; c < p.columns(); ++c)
      out << p.dates[std::size_t(t)].iso() << ',' << p.column_replicate[std::size_t(c)] << ','
          << p.districts[std::size_t(p.column_district[std::size_t(c)])] << ',' << format_number(p.exposure(t, c))
          << ',' << format_number(p.ambient_component(t, c)) << ',' << format_number(p.indoor_component(t, c))
          << '\n';
}

ExposurePanel read_exposure_panel(std::istream& in, const std::string& source) {
  const auto lines = csv::read_lines(in);
  if (lines.empty()) throw Error(source + ": no data rows");
  if (lines.front().text != "date,replicate,district,exposure,ambient_component,indoor_component")
    throw csv::row_error(source, lines.front().number,
                         "expected header date,replicate,district,exposure,ambient_component,indoor_component");
  if (lines.size() == 1) throw Error(source + ": no data rows");

  ExposurePanel p;
  std::map<std::pair<std::string, long>, Eigen::Index> column_of;
  std::map<std::string, int> district_of;
  struct Cell {
    Date date;
    Eigen::Index column;
    double v[3];
    std::size_t line;
  };
  std::vector<Cell> cells;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto& ln = lines[i];
    const auto f = csv::split(ln.text);
    if (f.size() != 6) throw csv::row_error(source, ln.number, "expected 6 fields");
    Cell c{};
    c.date = Date::parse(f[0]);
    const long rep = csv::to_long(f[1], source, ln.number);
    const std::string district(f[2]);
    if (!district_of.count(district)) {
      district_of[district] = int(p.districts.size());
      p.districts.push_back(district);
    }
    const auto key = std::make_pair(district, rep);
    auto it = column_of.find(key);
    if (it == column_of.end()) {
      it = column_of.emplace(key, Eigen::Index(p.column_district.size())).first;
      p.column_district.push_back(district_of[district]);
      p.column_replicate.push_back(int(rep));
    }
    c.column = it->second;
    for (int q = 0; q < 3; ++q) {
      c.v[q] = csv::to_double(f[std::size_t(3 + q)], source, ln.number);
      if (!(c.v[q] >= 0)) throw csv::row_error(source, ln.number, "exposure values must be >= 0");
    }
    c.line = ln.number;
    p.dates.push_back(c.date);
    cells.push_back(c);
  }
  std::sort(p.dates.begin(), p.dates.end());
  p.dates.erase(std::unique(p.dates.begin(), p.dates.end()), p.dates.end());
  const auto n = Eigen::Index(p.dates.size()), m = Eigen::Index(p.column_district.size());
  p.exposure = Eigen::MatrixXd::Constant(n, m, kMissing);
  p.ambient_component = p.exposure;
  p.indoor_component = p.exposure;
  for (const auto& c : cells) {
    const auto t = *p.index_of(c.date);
    if (!is_missing(p.exposure(t, c.column)))
      throw csv::row_error(source, c.line, "duplicated cell for date " + c.date.iso());
    p.exposure(t, c.column) = c.v[0];
    p.ambient_component(t, c.column) = c.v[1];
    p.indoor_component(t, c.column) = c.v[2];
  }
  if (p.exposure.array().isNaN().any()) throw Error(source + ": exposure panel is not rectangular");
  return p;
}

ExposurePanel load_exposure_panel(const std::filesystem::path& path) {
  auto in = csv::open_input(path.string());
  return read_exposure_panel(in, path.string());
}

}  // namespace expoerf
