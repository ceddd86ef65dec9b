#pragma once

// Stage-one personal exposure simulator. Individuals move between
// microenvironments on an hourly grid; each microenvironment follows a
// single-compartment mass balance driven by the district's ambient level and
// by occupant-triggered indoor source events.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "expoerf/common.hpp"
#include "expoerf/data_io.hpp"

namespace expoerf {

enum class EnvKind { home_indoor, other_indoor, outdoor, transit };

std::string to_string(EnvKind k);
EnvKind parse_env_kind(std::string_view s);

struct Microenvironment {
  std::string name;
  EnvKind kind = EnvKind::home_indoor;
  double penetration = 1.0;        // dimensionless, [0,1]
  double air_exchange = 1.0;       // per hour
  double emission = 0.0;           // ug/m3 added per active source hour
  double event_probability = 0.0;  // per occupied hour
  int dwell_min = 1;               // hours
  int dwell_max = 1;

  void validate() const;
  bool temperature_sensitive() const { return kind == EnvKind::home_indoor || kind == EnvKind::other_indoor; }
};

/// Monotone piecewise-linear multiplier on indoor air-exchange rates:
/// `cold_factor` at or below `cold_temp`, `warm_factor` at or above `warm_temp`.
struct TemperatureMap {
  double cold_temp = 5.0;
  double cold_factor = 0.6;
  double warm_temp = 22.0;
  double warm_factor = 1.4;

  double factor(double temp) const;
  void validate() const;
};

/// Row-stochastic transition kernel used when a dwell expires during
/// hours [start_hour, end_hour).
struct TransitionBlock {
  int start_hour = 0;
  int end_hour = 24;
  Eigen::MatrixXd kernel;
};

struct ActivityProfile {
  std::string population = "seniors_65plus";
  std::size_t start_env = 0;
  std::vector<TransitionBlock> blocks;

  const Eigen::MatrixXd& kernel_at(int hour) const;
  void validate(std::size_t env_count) const;
};

/// Microenvironment set, activity profile and temperature mechanism as read from a profile file.
struct SimulatorSetup {
  std::vector<Microenvironment> envs;
  ActivityProfile profile;
  TemperatureMap temperature;
};

SimulatorSetup read_profile(std::istream& in, const std::string& source = "<stream>");
SimulatorSetup load_profile(const std::filesystem::path& path);
void write_profile(std::ostream& out, const SimulatorSetup& setup);

/// Simulated daily personal exposures: rows are days, columns replicates.
/// Column c belongs to district `column_district[c]`.
struct ExposurePanel {
  std::vector<Date> dates;
  std::vector<std::string> districts;
  std::vector<int> column_district;
  std::vector<int> column_replicate;  // replicate number within its district, 1-based
  Eigen::MatrixXd exposure;
  Eigen::MatrixXd ambient_component;
  Eigen::MatrixXd indoor_component;
  std::uint64_t seed = 0;

  Eigen::Index days() const { return exposure.rows(); }
  Eigen::Index columns() const { return exposure.cols(); }
  Eigen::VectorXd daily_mean() const { return exposure.rowwise().mean(); }
  std::optional<Eigen::Index> index_of(const Date& d) const;
};

/// One hour of the mass balance C' = C + a (P C_amb - C) + S [source active], clamped at 0,
/// with a = min(air exchange x 1 h, 1).
double hourly_indoor_concentration(double prev, double ambient, const Microenvironment& env, bool source_active);

/// Runs `replicates` individuals per district over every panel day with at least one
/// observed site. `temps` supplies the daily temperature, matched by date; days
/// without a temperature leave air-exchange rates unmodified.
ExposurePanel simulate_panel(const MonitorPanel& panel, const DailySeries& temps, const ActivityProfile& profile,
                             const std::vector<Microenvironment>& envs, int replicates, SourceToggle toggle,
                             std::uint64_t seed, const TemperatureMap& temperature = {});

/// Mean daily share of exposure attributable to indoor and to ambient sources.
struct SourceShares {
  double indoor = 0;
  double outdoor = 0;
};
SourceShares decompose_sources(const ExposurePanel& panel);

// date,replicate,district,exposure,ambient_component,indoor_component
void write_exposure_panel(std::ostream& out, const ExposurePanel& panel);
ExposurePanel read_exposure_panel(std::istream& in, const std::string& source = "<stream>");
ExposurePanel load_exposure_panel(const std::filesystem::path& path);

}  // namespace expoerf
