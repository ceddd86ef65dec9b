#include "expoerf/data_io.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "csv.hpp"
#include "json.hpp"

namespace expoerf {

namespace {

std::optional<Eigen::Index> find_date(const std::vector<Date>& dates, const Date& d) {
  const auto it = std::lower_bound(dates.begin(), dates.end(), d);
  if (it == dates.end() || *it != d) return std::nullopt;
  return Eigen::Index(it - dates.begin());
}

}  // namespace

Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> MonitorPanel::missing_mask() const {
  return ambient.array().isNaN();
}

std::vector<std::string> MonitorPanel::districts() const {
  std::vector<std::string> out;
  for (const auto& s : sites)
    if (std::find(out.begin(), out.end(), s.district) == out.end()) out.push_back(s.district);
  return out;
}

std::optional<Eigen::Index> MonitorPanel::index_of(const Date& d) const { return find_date(dates, d); }
std::optional<Eigen::Index> DailySeries::index_of(const Date& d) const { return find_date(dates, d); }
std::optional<Eigen::Index> HealthSeries::index_of(const Date& d) const { return find_date(dates, d); }

DailySeries HealthSeries::simulator_temperature() const {
  DailySeries s;
  s.dates = dates;
  s.values = temp_mean;
  for (Eigen::Index i = 0; i < temp_max.size(); ++i)
    if (!is_missing(temp_max(i))) s.values(i) = temp_max(i);
  return s;
}

std::string to_string(ModelVariant m) {
  switch (m) {
    case ModelVariant::ambient_fixed: return "i";
    case ModelVariant::personal_fixed: return "ii";
    case ModelVariant::normal_exposure: return "iii";
    case ModelVariant::lognormal_exposure: return "iv";
  }
  return "?";
}

ModelVariant parse_model_variant(std::string_view s) {
  if (s == "i") return ModelVariant::ambient_fixed;
  if (s == "ii") return ModelVariant::personal_fixed;
  if (s == "iii") return ModelVariant::normal_exposure;
  if (s == "iv") return ModelVariant::lognormal_exposure;
  throw Error("unknown model '" + std::string(s) + "' (expected i, ii, iii or iv)");
}

std::string to_string(SourceToggle s) {
  switch (s) {
    case SourceToggle::all: return "all";
    case SourceToggle::outdoor_only: return "outdoor";
    case SourceToggle::indoor_only: return "indoor";
  }
  return "?";
}

SourceToggle parse_source_toggle(std::string_view s) {
  if (s == "all") return SourceToggle::all;
  if (s == "outdoor" || s == "outdoor-only") return SourceToggle::outdoor_only;
  if (s == "indoor" || s == "indoor-only") return SourceToggle::indoor_only;
  throw Error("unknown source toggle '" + std::string(s) + "'");
}

void RunConfig::validate() const {
  if (lag < 0) throw Error("lag must be >= 0");
  if (chains < 2) throw Error("at least two chains are required");
  if (thin < 1) throw Error("thinning must be >= 1");
  if (time_df < 1 || temp_df < 1) throw Error("spline degrees of freedom must be >= 1");
  if (burn_in < 0 || iterations < thin) throw Error("iterations must cover at least one thinned draw");
  if (!(epsilon > 0)) throw Error("epsilon must be > 0");
  if (!(beta_prior_variance > 0)) throw Error("beta prior variance must be > 0");
  if (!(holloman_upper > 0)) throw Error("holloman upper bound must be > 0");
  if (replicates_per_district < 1) throw Error("replicates per district must be >= 1");
}

RunConfig parse_run_config(const std::string& text, const std::vector<std::string>& extra_keys) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error("config must be a flat key/value object");
  RunConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "model") c.model = parse_model_variant(v.get<std::string>());
      else if (key == "lag") c.lag = v.get<int>();
      else if (key == "time_df") c.time_df = v.get<int>();
      else if (key == "temp_df") c.temp_df = v.get<int>();
      else if (key == "chains") c.chains = v.get<int>();
      else if (key == "burn_in") c.burn_in = v.get<long>();
      else if (key == "iterations") c.iterations = v.get<long>();
      else if (key == "thin") c.thin = v.get<long>();
      else if (key == "epsilon") c.epsilon = v.get<double>();
      else if (key == "xi") c.xi = v.get<double>();
      else if (key == "s2") c.s2 = v.get<double>();
      else if (key == "beta_prior_variance") c.beta_prior_variance = v.get<double>();
      else if (key == "holloman_upper") c.holloman_upper = v.get<double>();
      else if (key == "source") c.source = parse_source_toggle(v.get<std::string>());
      else if (key == "lambda3") {
        const auto s = v.get<std::string>();
        if (s == "ratio") c.lambda3 = Lambda3Rule::ratio;
        else if (s == "exact") c.lambda3 = Lambda3Rule::exact;
        else throw Error("lambda3 must be 'ratio' or 'exact'");
      } else if (key == "replicates_per_district") c.replicates_per_district = v.get<int>();
      else if (key == "save_lambda") c.save_lambda = v.get<bool>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else if (std::find(extra_keys.begin(), extra_keys.end(), key) == extra_keys.end())
        throw Error("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::type_error& e) {
    throw Error(std::string("config value has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& extra_keys) {
  auto in = csv::open_input(path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), extra_keys);
}

std::string run_config_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["model"] = to_string(c.model);
  j["lag"] = c.lag;
  j["time_df"] = c.time_df;
  j["temp_df"] = c.temp_df;
  j["chains"] = c.chains;
  j["burn_in"] = c.burn_in;
  j["iterations"] = c.iterations;
  j["thin"] = c.thin;
  j["epsilon"] = c.epsilon;
  if (c.xi) j["xi"] = *c.xi;
  if (c.s2) j["s2"] = *c.s2;
  j["beta_prior_variance"] = c.beta_prior_variance;
  j["holloman_upper"] = c.holloman_upper;
  j["source"] = to_string(c.source);
  j["lambda3"] = c.lambda3 == Lambda3Rule::ratio ? "ratio" : "exact";
  j["replicates_per_district"] = c.replicates_per_district;
  j["save_lambda"] = c.save_lambda;
  j["seed"] = c.seed;
  return j.dump(2);
}

MonitorPanel read_monitor_panel(std::istream& in, const std::string& source) {
  const auto lines = csv::read_lines(in);
  if (lines.empty()) throw Error(source + ": no data rows");
  {
    const auto h = csv::split(lines.front().text);
    if (h.size() != 4 || h[0] != "date" || h[1] != "site_id" || h[2] != "district" || h[3] != "pm10")
      throw csv::row_error(source, lines.front().number, "expected header date,site_id,district,pm10");
  }
  if (lines.size() == 1) throw Error(source + ": no data rows");

  struct Row {
    Date date;
    std::size_t site;
    double value;
    std::size_t line;
  };
  std::vector<Site> sites;
  std::map<std::string, std::size_t> site_index;
  std::vector<Row> rows;
  rows.reserve(lines.size() - 1);
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto& ln = lines[k];
    const auto f = csv::split(ln.text);
    if (f.size() != 4) throw csv::row_error(source, ln.number, "expected 4 fields");
    Date d;
    try {
      d = Date::parse(f[0]);
    } catch (const Error& e) {
      throw csv::row_error(source, ln.number, e.what());
    }
    if (f[1].empty()) throw csv::row_error(source, ln.number, "empty site_id");
    const std::string id(f[1]), district(f[2]);
    auto it = site_index.find(id);
    if (it == site_index.end()) {
      it = site_index.emplace(id, sites.size()).first;
      sites.push_back({id, district});
    } else if (sites[it->second].district != district) {
      throw csv::row_error(source, ln.number,
                           "site '" + id + "' assigned to more than one district");
    }
    const double v = csv::to_double(f[3], source, ln.number);
    if (!is_missing(v) && (v < 0 || !std::isfinite(v)))
      throw csv::row_error(source, ln.number, "negative or non-finite concentration");
    rows.push_back({d, it->second, v, ln.number});
  }

  const auto [lo, hi] = std::minmax_element(rows.begin(), rows.end(),
                                            [](const Row& a, const Row& b) { return a.date < b.date; });
  const Date first = lo->date;
  const auto n_days = Eigen::Index(hi->date - first) + 1;

  MonitorPanel p;
  p.sites = std::move(sites);
  p.parsed_rows = rows.size();
  p.dates.reserve(std::size_t(n_days));
  for (Eigen::Index t = 0; t < n_days; ++t) p.dates.push_back(first + int(t));
  p.ambient = Eigen::MatrixXd::Constant(n_days, Eigen::Index(p.sites.size()), kMissing);
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> seen =
      Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(p.ambient.rows(), p.ambient.cols(), false);
  for (const auto& r : rows) {
    const auto t = Eigen::Index(r.date - first);
    const auto j = Eigen::Index(r.site);
    if (seen(t, j))
      throw csv::row_error(source, r.line,
                           "duplicated date " + r.date.iso() + " for site '" + p.sites[r.site].id + "'");
    seen(t, j) = true;
    p.ambient(t, j) = r.value;
  }
  return p;
}

MonitorPanel load_monitor_panel(const std::filesystem::path& path) {
  auto in = csv::open_input(path.string());
  return read_monitor_panel(in, path.string());
}

void write_monitor_panel(std::ostream& out, const MonitorPanel& p) {
  out << "date,site_id,district,pm10\n";
  for (Eigen::Index t = 0; t < p.days(); ++t)
    for (Eigen::Index j = 0; j < p.site_count(); ++j)
      out << p.dates[std::size_t(t)].iso() << ',' << p.sites[std::size_t(j)].id << ','
          << p.sites[std::size_t(j)].district << ',' << format_number(p.ambient(t, j)) << '\n';
}

HealthSeries read_health_series(std::istream& in, const std::string& source) {
  static const std::vector<std::string_view> kColumns = {"date", "count", "temp_mean", "temp_max",
                                                          "rain", "wind", "sun"};
  const auto lines = csv::read_lines(in);
  if (lines.empty()) throw Error(source + ": no data rows");
  const auto header = csv::split(lines.front().text);
  if (header.size() < 3 || header.size() > kColumns.size())
    throw csv::row_error(source, lines.front().number, "expected header date,count,temp_mean[,...]");
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] != kColumns[c])
      throw csv::row_error(source, lines.front().number,
                           "unexpected column '" + std::string(header[c]) + "'");
  if (lines.size() == 1) throw Error(source + ": no data rows");

  struct Row {
    Date date;
    int count;
    double v[5];
    std::size_t line;
  };
  std::vector<Row> rows;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto& ln = lines[k];
    const auto f = csv::split(ln.text);
    if (f.size() != header.size()) throw csv::row_error(source, ln.number, "wrong number of fields");
    Row r{};
    try {
      r.date = Date::parse(f[0]);
    } catch (const Error& e) {
      throw csv::row_error(source, ln.number, e.what());
    }
    const long c = csv::to_long(f[1], source, ln.number);
    if (c < 0) throw csv::row_error(source, ln.number, "negative count");
    r.count = int(c);
    for (std::size_t q = 0; q < 5; ++q)
      r.v[q] = q + 2 < f.size() ? csv::to_double(f[q + 2], source, ln.number) : kMissing;
    if (is_missing(r.v[0])) throw csv::row_error(source, ln.number, "missing temp_mean");
    r.line = ln.number;
    rows.push_back(r);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.date < b.date; });
  for (std::size_t k = 1; k < rows.size(); ++k)
    if (rows[k].date == rows[k - 1].date)
      throw csv::row_error(source, rows[k].line, "duplicated date " + rows[k].date.iso());

  HealthSeries h;
  const auto n = Eigen::Index(rows.size());
  h.temp_mean.resize(n);
  h.temp_max.resize(n);
  h.rain.resize(n);
  h.wind.resize(n);
  h.sun.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[std::size_t(i)];
    h.dates.push_back(r.date);
    h.counts.push_back(r.count);
    h.temp_mean(i) = r.v[0];
    h.temp_max(i) = r.v[1];
    h.rain(i) = r.v[2];
    h.wind(i) = r.v[3];
    h.sun(i) = r.v[4];
  }
  return h;
}

HealthSeries load_health_series(const std::filesystem::path& path) {
  auto in = csv::open_input(path.string());
  return read_health_series(in, path.string());
}

void write_health_series(std::ostream& out, const HealthSeries& h) {
  const Eigen::VectorXd* cols[] = {&h.temp_max, &h.rain, &h.wind, &h.sun};
  static const char* names[] = {"temp_max", "rain", "wind", "sun"};
  int last = -1;
  for (int q = 0; q < 4; ++q)
    if (cols[q]->size() == h.size() && !cols[q]->array().isNaN().all()) last = q;
  out << "date,count,temp_mean";
  for (int q = 0; q <= last; ++q) out << ',' << names[q];
  out << '\n';
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    out << h.dates[std::size_t(i)].iso() << ',' << h.counts[std::size_t(i)] << ','
        << format_number(h.temp_mean(i));
    for (int q = 0; q <= last; ++q) out << ',' << format_number((*cols[q])(i));
    out << '\n';
  }
}

DailySeries spatial_average(const MonitorPanel& panel) {
  if (panel.days() == 0 || panel.site_count() == 0) throw Error("spatial_average: empty panel");
  DailySeries s;
  s.dates = panel.dates;
  s.values.resize(panel.days());
  for (Eigen::Index t = 0; t < panel.days(); ++t) {
    double sum = 0;
    int k = 0;
    for (Eigen::Index j = 0; j < panel.site_count(); ++j) {
      const double v = panel.ambient(t, j);
      if (!is_missing(v)) {
        sum += v;
        ++k;
      }
    }
    s.values(t) = k > 0 ? sum / k : kMissing;
  }
  return s;
}

DailySeries apply_lag(const DailySeries& series, int lag) {
  if (lag < 0) throw Error("lag must be >= 0");
  if (lag >= series.size()) throw Error("lag must be shorter than the series");
  DailySeries out;
  out.lag = series.lag + lag;
  const Date start = series.dates.front() + lag;
  for (Eigen::Index i = 0; i < series.size(); ++i)
    if (series.dates[std::size_t(i)] >= start) out.dates.push_back(series.dates[std::size_t(i)]);
  out.values.resize(Eigen::Index(out.dates.size()));
  for (std::size_t i = 0; i < out.dates.size(); ++i) {
    const auto src = series.index_of(out.dates[i] - lag);
    out.values(Eigen::Index(i)) = src ? series.values(*src) : kMissing;
  }
  return out;
}

AlignedSeries align_counts(const DailySeries& lagged, const HealthSeries& health) {
  AlignedSeries a;
  a.lag = lagged.lag;
  std::vector<double> x;
  for (Eigen::Index i = 0; i < health.size(); ++i) {
    const auto e = lagged.index_of(health.dates[std::size_t(i)]);
    if (!e || is_missing(lagged.values(*e))) continue;
    a.dates.push_back(health.dates[std::size_t(i)]);
    a.counts.push_back(health.counts[std::size_t(i)]);
    a.health_rows.push_back(i);
    x.push_back(lagged.values(*e));
  }
  if (a.dates.empty()) throw Error("no overlapping days between exposure and health series");
  a.exposure = Eigen::Map<Eigen::VectorXd>(x.data(), Eigen::Index(x.size()));
  return a;
}

}  // namespace expoerf
