#include "expoerf/spline_basis.hpp"

#include <algorithm>
#include <ostream>

namespace expoerf {

namespace {

inline double cube_plus(double v) { return v > 0 ? v * v * v : 0.0; }

}  // namespace

Eigen::MatrixXd natural_cubic_columns(const Eigen::VectorXd& knots, const Eigen::VectorXd& x) {
  const Eigen::Index K = knots.size();
  if (K < 2) throw Error("natural spline needs at least two knots");
  const double lo = knots(0), width = knots(K - 1) - knots(0);
  if (!(width > 0)) throw Error("natural spline boundary knots coincide");
  // Work on the unit interval; an affine change of variable spans the same space.
  const Eigen::VectorXd u = (knots.array() - lo) / width;
  const double uK = u(K - 1);
  Eigen::MatrixXd B(x.size(), K - 1);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = (x(i) - lo) / width;
    B(i, 0) = v;
    const double dlast = (cube_plus(v - u(K - 2)) - cube_plus(v - uK)) / (uK - u(K - 2));
    for (Eigen::Index k = 0; k + 2 < K; ++k) {
      const double dk = (cube_plus(v - u(k)) - cube_plus(v - uK)) / (uK - u(k));
      B(i, k + 1) = dk - dlast;
    }
  }
  return B;
}

SplineBasis natural_cubic_basis(const Eigen::VectorXd& values, int df, std::string label) {
  if (df < 1) throw Error("spline df must be >= 1");
  std::vector<double> sorted(values.data(), values.data() + values.size());
  for (double v : sorted)
    if (!std::isfinite(v)) throw Error("spline covariate '" + label + "' has non-finite values");
  std::sort(sorted.begin(), sorted.end());
  const auto distinct = std::unique(sorted.begin(), sorted.end()) - sorted.begin();
  if (distinct < df + 2)
    throw Error("spline covariate '" + label + "' has too few distinct values for df=" + std::to_string(df));

  std::vector<double> all(values.data(), values.data() + values.size());
  SplineBasis b;
  b.label = std::move(label);
  b.knots.resize(df + 1);
  b.knots(0) = sorted.front();
  b.knots(df) = sorted[std::size_t(distinct - 1)];
  for (int k = 1; k < df; ++k) b.knots(k) = quantile(all, double(k) / df);
  for (int k = 1; k <= df; ++k)
    if (!(b.knots(k) > b.knots(k - 1)))
      throw Error("spline covariate '" + b.label + "' has tied quantile knots");
  b.matrix = natural_cubic_columns(b.knots, values);
  return b;
}

Eigen::MatrixXd evaluate(const SplineBasis& basis, const Eigen::VectorXd& x) {
  Eigen::MatrixXd B = natural_cubic_columns(basis.knots, x);
  if (basis.standardized()) {
    B.rowwise() -= basis.column_mean.transpose();
    B.array().rowwise() /= basis.column_sd.transpose().array();
  }
  return B;
}

SplineBasis standardize(const SplineBasis& basis) {
  const Eigen::Index n = basis.matrix.rows();
  if (n < 2) throw Error("standardize: need at least two rows");
  SplineBasis out = basis;
  const Eigen::VectorXd mean = basis.matrix.colwise().mean().transpose();
  Eigen::VectorXd sd(basis.df());
  for (Eigen::Index c = 0; c < basis.df(); ++c) {
    sd(c) = std::sqrt((basis.matrix.col(c).array() - mean(c)).square().sum() / double(n - 1));
    if (!(sd(c) > 1e-12 * std::max(1.0, std::abs(mean(c)))))
      throw Error("standardize: column " + std::to_string(c + 1) + " of '" + basis.label + "' is constant");
  }
  for (Eigen::Index c = 0; c < basis.df(); ++c)
    out.matrix.col(c) = (basis.matrix.col(c).array() - mean(c)) / sd(c);
  if (basis.standardized()) {
    out.column_mean = basis.column_mean.array() + basis.column_sd.array() * mean.array();
    out.column_sd = basis.column_sd.array() * sd.array();
  } else {
    out.column_mean = mean;
    out.column_sd = sd;
  }
  return out;
}

Eigen::VectorXd back_transform(const SplineBasis& basis, const Eigen::VectorXd& coef, double& intercept) {
  if (coef.size() != basis.df()) throw Error("back_transform: coefficient count mismatch");
  if (!basis.standardized()) return coef;
  const Eigen::VectorXd raw = coef.array() / basis.column_sd.array();
  intercept -= raw.dot(basis.column_mean);
  return raw;
}

CovariateDesign build_covariate_design(const std::vector<Date>& dates, const Eigen::VectorXd& temps, int time_df,
                                       int temp_df) {
  if (Eigen::Index(dates.size()) != temps.size()) throw Error("covariate design: dates and temperatures differ in length");
  Eigen::VectorXd t(temps.size());
  for (Eigen::Index i = 0; i < t.size(); ++i) t(i) = double(dates[std::size_t(i)].serial());
  CovariateDesign d;
  d.time = standardize(natural_cubic_basis(t, time_df, "time"));
  d.temperature = standardize(natural_cubic_basis(temps, temp_df, "temperature"));
  const Eigen::Index n = t.size();
  d.matrix.resize(n, 1 + time_df + temp_df);
  d.matrix.col(0).setOnes();
  d.matrix.middleCols(1, time_df) = d.time.matrix;
  d.matrix.middleCols(1 + time_df, temp_df) = d.temperature.matrix;
  d.names.push_back("intercept");
  for (int c = 1; c <= time_df; ++c) d.names.push_back("time_" + std::to_string(c));
  for (int c = 1; c <= temp_df; ++c) d.names.push_back("temp_" + std::to_string(c));
  return d;
}

void write_basis_csv(std::ostream& out, const SplineBasis& basis, const std::vector<Date>& dates) {
  if (Eigen::Index(dates.size()) != basis.matrix.rows()) throw Error("write_basis_csv: date count mismatch");
  out << "date";
  for (Eigen::Index c = 0; c < basis.df(); ++c) out << ",col_" << c + 1;
  out << '\n';
  for (Eigen::Index i = 0; i < basis.matrix.rows(); ++i) {
    out << dates[std::size_t(i)].iso();
    for (Eigen::Index c = 0; c < basis.df(); ++c) out << ',' << format_number(basis.matrix(i, c));
    out << '\n';
  }
}

}  // namespace expoerf
