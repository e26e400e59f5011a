#pragma once

// Classic kind: fixed unknown means, with the noise written as a latent random
// permutation of sorted normals. The data enter through the marginal CDF of a
// random draw from the observed collection,
//
//     F_theta(x) = (1/n) sum_k Phi(x - theta_k),
//
// evaluated at the sorted observations and scored with the boundary B.

#include <vector>

#include "plausmeans/core.hpp"
#include "plausmeans/eb_deconv.hpp"
#include "plausmeans/nlp_opt.hpp"
#include "plausmeans/prs.hpp"

namespace plausmeans {

inline constexpr Index kFullConditionalMaxN = 10;

// Unordered collection of means, stored sorted.
class ThetaCollection {
 public:
  explicit ThetaCollection(Vector values);

  const Vector& sorted() const { return theta_; }
  Index size() const { return theta_.size(); }
  double operator[](Index k) const { return theta_[k]; }

 private:
  Vector theta_;
};

double marginal_cdf(const ThetaCollection& theta, double x);

double classic_association_value(const ThetaCollection& theta, const SortedSample& sample,
                                 const BoundarySpec& spec);

// Value and gradient with respect to the (unsorted) theta vector.
double classic_association(const Vector& theta, const SortedSample& sample,
                           const BoundarySpec& spec, Vector* grad = nullptr);

struct ClassicFit {
  ThetaCollection theta_hat;
  double b_at_fit = 0.0;
  double b_at_start = 0.0;
  double bound = 0.0;  // the realized random bound the fit is judged against
  bool converged = false;
};

// Minimizes the classic association over nondecreasing theta, parameterized
// as theta_1 + cumulative sums of exp(xi), starting from theta = sorted X.
ClassicFit classic_mpe_fit(const SortedSample& sample, const BoundarySpec& spec,
                           const OptimizerConfig& config);

// Posterior mean of theta_i when theta_i is one of the collection points,
// weighted by phi(x_i - theta_k). Output aligned with x.
Vector partial_conditional_estimate(const ThetaCollection& theta, const Vector& x);

// E(theta_i | X) under the permutation posterior proportional to
// prod_j phi(x_j - theta_{tau_j}), by exact enumeration (n <= 10).
Vector full_conditional_estimate(const ThetaCollection& theta, const Vector& x);

// Monte Carlo plausibility of an asserted collection: the fraction of data
// sets simulated from the assertion whose statistic is at least the observed
// one.
double assertion_specific_plausibility(const ThetaCollection& theta_assert,
                                       const SortedSample& sample, const BoundarySpec& spec,
                                       int reps, RandomStream& rng);

// Point estimate reported for the classic kind: the partial conditional
// estimate at the fitted collection. Output in input order.
Vector classic_point_estimate(const Vector& x, const BoundarySpec& spec,
                              const OptimizerConfig& config);

}  // namespace plausmeans
