#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "expoerf/common.hpp"

namespace expoerf {

/// Natural cubic spline design matrix, one column per degree of freedom (no intercept).
/// Knots are stored in the covariate's units: knots.front()/back() are the boundary knots.
struct SplineBasis {
  std::string label;
  Eigen::VectorXd knots;
  Eigen::MatrixXd matrix;         // rows = observations, cols = df
  Eigen::VectorXd column_mean;    // empty until standardized
  Eigen::VectorXd column_sd;

  Eigen::Index df() const { return matrix.cols(); }
  bool standardized() const { return column_mean.size() == matrix.cols(); }
};

/// Builds the basis with df-1 interior knots at equally spaced quantiles of `values`
/// and boundary knots at the extremes.
SplineBasis natural_cubic_basis(const Eigen::VectorXd& values, int df, std::string label = {});

/// Evaluates the raw (unstandardized) basis functions defined by `knots` at `x`.
Eigen::MatrixXd natural_cubic_columns(const Eigen::VectorXd& knots, const Eigen::VectorXd& x);

/// Re-evaluates a basis at new covariate values, applying stored standardization.
Eigen::MatrixXd evaluate(const SplineBasis& basis, const Eigen::VectorXd& x);

/// Centres and scales each column to mean 0, sd 1 (n-1 denominator). Constants
/// compose when applied to an already standardized basis.
SplineBasis standardize(const SplineBasis& basis);

/// Converts coefficients fitted on standardized columns to the raw basis scale.
/// Returns the raw coefficients; `intercept` is adjusted in place.
Eigen::VectorXd back_transform(const SplineBasis& basis, const Eigen::VectorXd& coef, double& intercept);

/// Intercept column followed by the standardized time and temperature spline bases.
struct CovariateDesign {
  Eigen::MatrixXd matrix;
  SplineBasis time;
  SplineBasis temperature;
  std::vector<std::string> names;  // intercept, time_1.., temp_1..
};

/// `dates` and `temps` describe the fitting window (one entry per count day).
CovariateDesign build_covariate_design(const std::vector<Date>& dates, const Eigen::VectorXd& temps, int time_df,
                                       int temp_df);

// date,col_1..col_df
void write_basis_csv(std::ostream& out, const SplineBasis& basis, const std::vector<Date>& dates);

}  // namespace expoerf
