#include "plausmeans/baselines.hpp"

#include <boost/math/special_functions/gamma.hpp>

namespace plausmeans {

EstimateVector mle(const Vector& x) {
  if (x.size() == 0) throw InvalidParameter("mle: empty input");
  return {x, "mle"};
}

double james_stein_factor(const Vector& x) {
  if (x.size() < 3) throw InvalidParameter("james_stein: need n >= 3");
  const double ss = x.squaredNorm();
  if (ss == 0.0) return 0.0;
  return 1.0 - static_cast<double>(x.size() - 2) / ss;
}

EstimateVector james_stein(const Vector& x) {
  return {james_stein_factor(x) * x, "james_stein"};
}

EstimateVector james_stein_positive_part(const Vector& x) {
  return {std::max(0.0, james_stein_factor(x)) * x, "james_stein_positive_part"};
}

double efron_morris_factor(const Vector& x) {
  if (x.size() < 4) throw InvalidParameter("efron_morris: need n >= 4");
  const double S = mean_removed_statistic(x);
  if (S == 0.0) return 0.0;
  return 1.0 - static_cast<double>(x.size() - 3) / S;
}

EstimateVector efron_morris(const Vector& x) {
  const double factor = efron_morris_factor(x);
  const double xbar = x.mean();
  return {(xbar + factor * (x.array() - xbar)).matrix(), "efron_morris"};
}

double mean_removed_statistic(const Vector& x) {
  if (x.size() < 2) throw InvalidParameter("mean_removed_statistic: need n >= 2");
  return (x.array() - x.mean()).square().sum();
}

double chi_square_cdf(double x, double dof) {
  if (!(dof > 0.0)) throw InvalidParameter("chi_square_cdf: dof must be positive");
  if (x <= 0.0) return 0.0;
  return boost::math::gamma_p(dof / 2.0, x / 2.0);
}

}  // namespace plausmeans
