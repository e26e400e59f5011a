#pragma once

// Reference estimators for the many-normal-means problem.

#include <string>

#include "plausmeans/core.hpp"

namespace plausmeans {

struct EstimateVector {
  Vector values;
  std::string method;
};

EstimateVector mle(const Vector& x);

// (1 - (n-2)/|x|^2) x; the factor may go negative.
EstimateVector james_stein(const Vector& x);

// As james_stein with the factor clamped at zero.
EstimateVector james_stein_positive_part(const Vector& x);

// xbar + (1 - (n-3)/S)(x - xbar), S = sum (x_i - xbar)^2.
EstimateVector efron_morris(const Vector& x);

// Shrinkage factors used above, exposed for diagnostics.
double james_stein_factor(const Vector& x);
double efron_morris_factor(const Vector& x);

// X'(I - J/n)X = sum (x_i - xbar)^2.
double mean_removed_statistic(const Vector& x);

// Central chi-square CDF.
double chi_square_cdf(double x, double dof);

}  // namespace plausmeans
