#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "expoerf/common.hpp"

namespace expoerf {

struct Site {
  std::string id;
  std::string district;
};

/// Daily ambient concentrations (ug/m3), one column per monitoring site.
/// The calendar is gap-free; absent readings are NaN.
struct MonitorPanel {
  std::vector<Site> sites;
  std::vector<Date> dates;
  Eigen::MatrixXd ambient;  // days x sites
  std::size_t parsed_rows = 0;

  Eigen::Index days() const { return ambient.rows(); }
  Eigen::Index site_count() const { return ambient.cols(); }
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing_mask() const;
  /// Distinct district labels in order of first appearance.
  std::vector<std::string> districts() const;
  std::optional<Eigen::Index> index_of(const Date& d) const;
};

/// A date-indexed scalar series. `lag` records the total shift applied by apply_lag.
struct DailySeries {
  std::vector<Date> dates;
  Eigen::VectorXd values;  // NaN = missing
  int lag = 0;

  Eigen::Index size() const { return values.size(); }
  std::optional<Eigen::Index> index_of(const Date& d) const;
};

struct HealthSeries {
  std::vector<Date> dates;
  std::vector<int> counts;
  Eigen::VectorXd temp_mean;
  Eigen::VectorXd temp_max;  // NaN when the column is absent
  Eigen::VectorXd rain;
  Eigen::VectorXd wind;
  Eigen::VectorXd sun;

  Eigen::Index size() const { return Eigen::Index(counts.size()); }
  std::optional<Eigen::Index> index_of(const Date& d) const;
  /// Daily maximum temperature when recorded, otherwise the daily mean.
  DailySeries simulator_temperature() const;
};

enum class ModelVariant { ambient_fixed, personal_fixed, normal_exposure, lognormal_exposure };
enum class SourceToggle { all, outdoor_only, indoor_only };
enum class Lambda3Rule { ratio, exact };

std::string to_string(ModelVariant m);  // "i".."iv"
ModelVariant parse_model_variant(std::string_view s);
std::string to_string(SourceToggle s);
SourceToggle parse_source_toggle(std::string_view s);

struct RunConfig {
  ModelVariant model = ModelVariant::lognormal_exposure;
  int lag = 2;
  int time_df = 11;
  int temp_df = 2;
  int chains = 2;
  long burn_in = 20000;
  long iterations = 250000;
  long thin = 25;
  double epsilon = 0.001;
  std::optional<double> xi;  // prior mean of daily exposure means
  std::optional<double> s2;  // prior mean of daily exposure variances
  double beta_prior_variance = 1.0e4;
  double holloman_upper = 25.0;
  SourceToggle source = SourceToggle::all;
  Lambda3Rule lambda3 = Lambda3Rule::ratio;
  int replicates_per_district = 100;
  bool save_lambda = true;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Parses a flat JSON object. Keys listed in `extra_keys` are tolerated and ignored;
/// any other unknown key is an error.
RunConfig parse_run_config(const std::string& text, const std::vector<std::string>& extra_keys = {});
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& extra_keys = {});
std::string run_config_json(const RunConfig& cfg);

// Monitor CSV: date,site_id,district,pm10
MonitorPanel read_monitor_panel(std::istream& in, const std::string& source = "<stream>");
MonitorPanel load_monitor_panel(const std::filesystem::path& path);
void write_monitor_panel(std::ostream& out, const MonitorPanel& panel);

// Health CSV: date,count,temp_mean[,temp_max,rain,wind,sun]
HealthSeries read_health_series(std::istream& in, const std::string& source = "<stream>");
HealthSeries load_health_series(const std::filesystem::path& path);
void write_health_series(std::ostream& out, const HealthSeries& health);

/// Per-day mean over the non-missing sites; all-missing days stay missing.
DailySeries spatial_average(const MonitorPanel& panel);

/// Shifts values forward by `lag` days: the result on date d holds the input on d - lag.
/// The first `lag` days of the calendar are dropped.
DailySeries apply_lag(const DailySeries& series, int lag);

/// Count days paired with a (lagged) exposure value. Days with a missing exposure
/// or no matching count are excluded.
struct AlignedSeries {
  std::vector<Date> dates;
  Eigen::VectorXd exposure;
  std::vector<int> counts;
  std::vector<Eigen::Index> health_rows;
  int lag = 0;
};
AlignedSeries align_counts(const DailySeries& lagged, const HealthSeries& health);

}  // namespace expoerf
