#pragma once

// Empirical-Bayes kind: the mixing distribution G is discretized to weights
// gamma on a grid, the data enter through the mixture CDF evaluated at the
// sorted observations, and inference about each theta_i goes through the
// posterior pmf of theta_i given gamma and X_i.

#include <optional>
#include <vector>

#include "plausmeans/core.hpp"
#include "plausmeans/nlp_opt.hpp"
#include "plausmeans/prs.hpp"

namespace plausmeans {

inline constexpr double kGammaMinSlack = 1e-6;
inline constexpr double kGridLowerProb = 1e-4;
inline constexpr double kGridUpperProb = 0.9999;

class Grid {
 public:
  explicit Grid(Vector points);

  static Grid linspace(double lo, double hi, Index K);

  Index size() const { return points_.size(); }
  const Vector& points() const { return points_; }
  double operator[](Index k) const { return points_[k]; }
  std::optional<double> spacing() const { return spacing_; }

  // Index of the grid point nearest to x (lowest index on ties).
  Index nearest(double x) const;

 private:
  Vector points_;
  std::optional<double> spacing_;
};

// Observations sorted ascending; rank_of_input[j] is the sorted position of
// input observation j. Ties keep input order.
struct SortedSample {
  Vector x_sorted;
  std::vector<Index> rank_of_input;

  static SortedSample from(const Vector& x);

  Index size() const { return x_sorted.size(); }
  Vector input_order() const;
  // Maps per-sorted-position values back to input order.
  Vector to_input_order(const Vector& by_sorted) const;
};

// Throws unless gamma is a probability vector on a grid of the same size.
void check_simplex_weights(const Grid& grid, const Vector& gamma, double tol = 1e-10);

Grid make_grid(const SortedSample& sample, Index K);

double mixture_cdf(const Grid& grid, const Vector& gamma, double x);
Vector posterior_pmf(const Grid& grid, const Vector& gamma, double x_i);
double posterior_mean(const Grid& grid, const Vector& gamma, double x_i);

double association_value(const Grid& grid, const Vector& gamma, const SortedSample& sample,
                         const BoundarySpec& spec);
Vector association_gradient(const Grid& grid, const Vector& gamma, const SortedSample& sample,
                            const BoundarySpec& spec);

// Precomputed pieces of one (grid, sample, spec) instance: the n x K matrix
// of Phi(X_(i) - theta_k) and, per sorted observation, the normal density
// weights phi(X_(i) - theta_k) rescaled so each row peaks at one.
class DeconvolutionModel {
 public:
  DeconvolutionModel(Grid grid, SortedSample sample, BoundarySpec spec);

  const Grid& grid() const { return grid_; }
  const SortedSample& sample() const { return sample_; }
  const BoundarySpec& spec() const { return spec_; }
  Index n() const { return sample_.size(); }
  Index K() const { return grid_.size(); }

  // Mixture CDF at every sorted observation.
  Vector cdf_values(const Vector& gamma) const { return cdf_ * gamma; }

  // B(F(X_(1)), ..., F(X_(n))) and optionally its gradient in gamma.
  double association(const Vector& gamma, Vector* grad = nullptr) const;

  // Posterior mean of the sorted observation at position i.
  double posterior_mean(const Vector& gamma, Index i, Vector* grad = nullptr) const;

  // Posterior mass on grid indices [0, l] (lower == true) or [l, K-1].
  double posterior_tail(const Vector& gamma, Index i, Index l, bool lower,
                        Vector* grad = nullptr) const;

  Vector posterior(const Vector& gamma, Index i) const;

  // Likelihood weights phi(X_(i) - grid_k), rescaled so the row peaks at 1.
  auto likelihood_row(Index i) const { return density_.row(i).transpose(); }

  // The association as phi(A gamma) with A the CDF matrix; valid while the
  // model lives.
  CompositeProblem composite() const;

  // Data-anchored start: uniform 1/K plus 1/n at the grid
  // point nearest each observation, renormalized.
  Vector anchored_start() const;

 private:
  Grid grid_;
  SortedSample sample_;
  BoundarySpec spec_;
  Matrix cdf_;
  Matrix density_;
};

struct MpeFit {
  Vector gamma_star;
  double b_min = 0.0;
  double b_start = 0.0;  // association value at the anchored start
  bool converged = false;
};

MpeFit mpe_fit(const DeconvolutionModel& model, const OptimizerConfig& config);
MpeFit mpe_fit(const Grid& grid, const SortedSample& sample, const BoundarySpec& spec,
               const OptimizerConfig& config);

// Threshold on B with the context defining the induced set of gamma.
struct PlausibilityRegion {
  double threshold = 0.0;
  double b_min = 0.0;
  Vector gamma_star;  // a member of the region, used as the feasible start
};

PlausibilityRegion make_region(const MpeFit& fit, double threshold);

struct Extremes {
  double lower = 0.0;
  double upper = 0.0;
  bool converged = true;
};

// Min and max of the posterior mean of sorted observation i over the region.
Extremes mpe_theta_extremes(const DeconvolutionModel& model, const PlausibilityRegion& region,
                            Index i, const OptimizerConfig& config);

struct MpeEstimate {
  MpeFit fit;
  Vector lower;  // input order
  Vector upper;
  Vector mid;
  int failures = 0;
};

MpeEstimate mpe_estimate(const DeconvolutionModel& model, const OptimizerConfig& config);

Vector mpe_point_estimate(const Grid& grid, const SortedSample& sample, const BoundarySpec& spec,
                          const OptimizerConfig& config);

struct EndpointIndices {
  Index left = 0;
  Index right = 0;
};

// Grid indices of the per-gamma interval: left is the largest l whose lower
// cumulative posterior mass is <= alpha/2 (fallback 0); right is the smallest
// r whose upper tail mass is <= alpha/2 (fallback K-1).
EndpointIndices endpoint_indices(const Vector& pmf, double alpha);

std::pair<double, double> interval_endpoints_given_gamma(const Grid& grid, const Vector& gamma,
                                                         double x_i, double alpha);

struct IntervalSet {
  Vector lower;  // input order
  Vector upper;
  double alpha = 0.0;
  double pi = 0.0;
  double threshold = 0.0;
  bool empty_region = false;    // quantile threshold fell below B_min
  std::vector<bool> fallback;   // optimizer trouble on that coordinate

  Index size() const { return lower.size(); }
};

// Interval endpoints for a ladder of thresholds (any order) sharing one fit.
// Region nesting is enforced: wider thresholds never give narrower intervals.
std::vector<IntervalSet> interval_ladder(const DeconvolutionModel& model, const MpeFit& fit,
                                         const std::vector<double>& thresholds, double alpha,
                                         const OptimizerConfig& config);

IntervalSet plausibility_intervals(const DeconvolutionModel& model, const MpeFit& fit, double pi,
                                   double alpha, const OptimizerConfig& config, RandomStream& rng,
                                   int mc_samples = kDefaultQuantileSamples);

IntervalSet plausibility_intervals(const Grid& grid, const SortedSample& sample,
                                   const BoundarySpec& spec, double pi, double alpha,
                                   const OptimizerConfig& config, RandomStream& rng);

struct LadderRow {
  int s = 0;
  double level = 0.0;      // (s/m) sqrt(target)
  double threshold = 0.0;  // B quantile at that level
  double coverage = 0.0;   // simulated average coverage fraction
  double mean_length = 0.0;
};

struct AdaptiveResult {
  int s_star = 0;
  bool calibration_failed = false;
  double alpha = 0.0;
  std::vector<LadderRow> ladder;
  IntervalSet intervals;
  MpeEstimate estimate;
  int failed_replicates = 0;
};

AdaptiveResult adaptive_adjust(const DeconvolutionModel& model, double target_coverage, int m,
                               int reps, RandomStream& rng, const OptimizerConfig& config,
                               int mc_samples = kDefaultQuantileSamples);

struct Diagnostic {
  int count_outside = 0;
  double expected = 0.0;
};

// X values given in input order, aligned with the interval set.
Diagnostic within_experiment_diagnostic(const IntervalSet& intervals, const Vector& x,
                                        double alpha);

}  // namespace plausmeans
