#include "plausmeans/eb_deconv.hpp"

#include <algorithm>
#include <numeric>

#include "plausmeans/parallel.hpp"

namespace plausmeans {

// ---------------------------------------------------------------------------
// Grid and sample

Grid::Grid(Vector points) : points_(std::move(points)) {
  if (points_.size() < 2) throw InvalidParameter("grid: need at least 2 points");
  if (!points_.allFinite()) throw InvalidParameter("grid: non-finite point");
  for (Index k = 1; k < points_.size(); ++k)
    if (!(points_[k] > points_[k - 1])) throw InvalidParameter("grid: points must strictly increase");
}

Grid Grid::linspace(double lo, double hi, Index K) {
  if (K < 2) throw InvalidParameter("grid: K must be at least 2");
  if (!(hi > lo)) throw InvalidParameter("grid: empty range");
  Vector pts(K);
  const double step = (hi - lo) / static_cast<double>(K - 1);
  for (Index k = 0; k < K; ++k) pts[k] = lo + step * static_cast<double>(k);
  pts[K - 1] = hi;
  Grid g(std::move(pts));
  g.spacing_ = step;
  return g;
}

Index Grid::nearest(double x) const {
  const auto it = std::lower_bound(points_.begin(), points_.end(), x);
  if (it == points_.begin()) return 0;
  if (it == points_.end()) return size() - 1;
  const Index hi = it - points_.begin();
  return (x - points_[hi - 1] <= points_[hi] - x) ? hi - 1 : hi;
}

SortedSample SortedSample::from(const Vector& x) {
  if (x.size() < 1) throw InvalidParameter("sample: need at least one observation");
  if (!x.allFinite()) throw InvalidParameter("sample: non-finite observation");
  std::vector<Index> order(static_cast<std::size_t>(x.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return x[a] < x[b]; });
  SortedSample s;
  s.x_sorted.resize(x.size());
  s.rank_of_input.resize(order.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    s.x_sorted[static_cast<Index>(pos)] = x[order[pos]];
    s.rank_of_input[static_cast<std::size_t>(order[pos])] = static_cast<Index>(pos);
  }
  return s;
}

Vector SortedSample::to_input_order(const Vector& by_sorted) const {
  if (by_sorted.size() != size()) throw DimensionMismatch("sample: length mismatch");
  Vector out(size());
  for (std::size_t j = 0; j < rank_of_input.size(); ++j)
    out[static_cast<Index>(j)] = by_sorted[rank_of_input[j]];
  return out;
}

Vector SortedSample::input_order() const { return to_input_order(x_sorted); }

void check_simplex_weights(const Grid& grid, const Vector& gamma, double tol) {
  if (gamma.size() != grid.size())
    throw DimensionMismatch("gamma has " + std::to_string(gamma.size()) + " weights for a grid of " +
                            std::to_string(grid.size()));
  if (gamma.minCoeff() < -tol || std::abs(gamma.sum() - 1.0) > tol)
    throw InvalidParameter("gamma is not a probability vector");
}

Grid make_grid(const SortedSample& sample, Index K) {
  if (K < 2) throw InvalidParameter("make_grid: K must be at least 2");
  const double lo = sample.x_sorted[0] + normal_quantile(kGridLowerProb);
  const double hi = sample.x_sorted[sample.size() - 1] + normal_quantile(kGridUpperProb);
  return Grid::linspace(lo, hi, K);
}

// ---------------------------------------------------------------------------
// Pointwise quantities

double mixture_cdf(const Grid& grid, const Vector& gamma, double x) {
  if (gamma.size() != grid.size()) throw DimensionMismatch("mixture_cdf: gamma/grid size mismatch");
  double F = 0.0;
  for (Index k = 0; k < grid.size(); ++k) F += gamma[k] * normal_cdf(x - grid[k]);
  return F;
}

Vector posterior_pmf(const Grid& grid, const Vector& gamma, double x_i) {
  if (gamma.size() != grid.size()) throw DimensionMismatch("posterior_pmf: gamma/grid size mismatch");
  Vector logw(grid.size());
  for (Index k = 0; k < grid.size(); ++k)
    logw[k] = gamma[k] > 0.0 ? std::log(gamma[k]) + normal_log_pdf(x_i - grid[k])
                             : -std::numeric_limits<double>::infinity();
  const double norm = log_sum_exp(logw);
  if (!std::isfinite(norm)) throw NumericalError("posterior_pmf: gamma has no mass");
  return (logw.array() - norm).exp().matrix();
}

double posterior_mean(const Grid& grid, const Vector& gamma, double x_i) {
  return posterior_pmf(grid, gamma, x_i).dot(grid.points());
}

double association_value(const Grid& grid, const Vector& gamma, const SortedSample& sample,
                         const BoundarySpec& spec) {
  return DeconvolutionModel(grid, sample, spec).association(gamma);
}

Vector association_gradient(const Grid& grid, const Vector& gamma, const SortedSample& sample,
                            const BoundarySpec& spec) {
  Vector g;
  DeconvolutionModel(grid, sample, spec).association(gamma, &g);
  return g;
}

// ---------------------------------------------------------------------------
// DeconvolutionModel

DeconvolutionModel::DeconvolutionModel(Grid grid, SortedSample sample, BoundarySpec spec)
    : grid_(std::move(grid)), sample_(std::move(sample)), spec_(std::move(spec)) {
  if (spec_.n() != sample_.size())
    throw DimensionMismatch("boundary spec built for n=" + std::to_string(spec_.n()) +
                            " but sample has " + std::to_string(sample_.size()));
  const Index n = sample_.size(), K = grid_.size();
  cdf_.resize(n, K);
  density_.resize(n, K);
  for (Index i = 0; i < n; ++i) {
    const double x = sample_.x_sorted[i];
    for (Index k = 0; k < K; ++k) {
      cdf_(i, k) = normal_cdf(x - grid_[k]);
      density_(i, k) = normal_log_pdf(x - grid_[k]);
    }
    const double peak = density_.row(i).maxCoeff();
    density_.row(i) = (density_.row(i).array() - peak).exp();
  }
}

double DeconvolutionModel::association(const Vector& gamma, Vector* grad) const {
  if (gamma.size() != K()) throw DimensionMismatch("association: gamma/grid size mismatch");
  const Vector u = cdf_ * gamma;
  if (grad) grad->noalias() = cdf_.transpose() * boundary_gradient(spec_, u);
  return boundary(spec_, u);
}

double DeconvolutionModel::posterior_mean(const Vector& gamma, Index i, Vector* grad) const {
  const auto w = density_.row(i).transpose();
  const double D = w.dot(gamma);
  const double mean = w.cwiseProduct(grid_.points()).dot(gamma) / D;
  if (grad) *grad = w.cwiseProduct((grid_.points().array() - mean).matrix()) / D;
  return mean;
}

double DeconvolutionModel::posterior_tail(const Vector& gamma, Index i, Index l, bool lower,
                                          Vector* grad) const {
  const auto w = density_.row(i).transpose();
  const double D = w.dot(gamma);
  const Index start = lower ? 0 : l;
  const Index len = lower ? l + 1 : K() - l;
  const double C = w.segment(start, len).dot(gamma.segment(start, len)) / D;
  if (grad) {
    *grad = -C * w / D;
    grad->segment(start, len) += w.segment(start, len) / D;
  }
  return C;
}

CompositeProblem DeconvolutionModel::composite() const {
  const BoundarySpec* spec = &spec_;
  return CompositeProblem{&cdf_, [spec](const Vector& u, Vector* grad, Vector* hess) {
                            if (grad) {
                              const Index n = spec->n();
                              grad->resize(n);
                              if (hess) hess->resize(n);
                              for (Index i = 0; i < n; ++i) {
                                const double ui = std::clamp(u[i], kUniformClamp, 1.0 - kUniformClamp);
                                const double a = spec->a()[i], b = spec->b()[i];
                                (*grad)[i] = -a / ui + b / (1.0 - ui);
                                if (hess) (*hess)[i] = a / (ui * ui) + b / ((1.0 - ui) * (1.0 - ui));
                              }
                            }
                            return boundary(*spec, u);
                          }};
}

Vector DeconvolutionModel::posterior(const Vector& gamma, Index i) const {
  return posterior_pmf(grid_, gamma, sample_.x_sorted[i]);
}

Vector DeconvolutionModel::anchored_start() const {
  Vector g = Vector::Constant(K(), 1.0 / static_cast<double>(K()));
  for (Index i = 0; i < n(); ++i) g[grid_.nearest(sample_.x_sorted[i])] += 1.0 / static_cast<double>(n());
  return g / g.sum();
}

// ---------------------------------------------------------------------------
// Maximum plausibility

MpeFit mpe_fit(const DeconvolutionModel& model, const OptimizerConfig& config) {
  config.validate();
  const Index K = model.K();

  std::vector<Vector> starts;
  starts.push_back(model.anchored_start());
  if (config.starts > 1) starts.push_back(Vector::Constant(K, 1.0 / static_cast<double>(K)));
  RandomStream rng(config.seed);
  for (int s = 2; s < config.starts; ++s) {
    Vector d(K);
    for (Index k = 0; k < K; ++k) d[k] = rng.exponential();
    starts.push_back(d / d.sum());
  }
  for (int s = 0; s < config.resampled_starts; ++s) {
    Vector g = Vector::Constant(K, 1.0 / static_cast<double>(K));
    for (Index i = 0; i < model.n(); ++i) {
      const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(model.n())));
      g[model.grid().nearest(model.sample().x_sorted[j])] += 1.0 / static_cast<double>(model.n());
    }
    starts.push_back(g / g.sum());
  }

  const CompositeProblem problem = model.composite();
  MpeFit fit;
  fit.b_start = model.association(starts.front());
  fit.b_min = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    const CompositeResult r = minimize_composite_on_simplex(problem, Vector(), s, config);
    if (r.phi < fit.b_min) {
      fit.b_min = r.phi;
      fit.gamma_star = r.x;
      fit.converged = r.converged;
    } else if (r.phi - fit.b_min <= 1e-9) {
      fit.converged = fit.converged || r.converged;
    }
  }
  if (!std::isfinite(fit.b_min)) throw OptimizerFailure("mpe_fit: no finite optimum");
  fit.gamma_star = project_to_simplex(fit.gamma_star);
  fit.b_min = model.association(fit.gamma_star);
  return fit;
}

MpeFit mpe_fit(const Grid& grid, const SortedSample& sample, const BoundarySpec& spec,
               const OptimizerConfig& config) {
  return mpe_fit(DeconvolutionModel(grid, sample, spec), config);
}

PlausibilityRegion make_region(const MpeFit& fit, double threshold) {
  if (threshold < fit.b_min)
    throw InvalidParameter("plausibility region: threshold below the attainable minimum");
  return PlausibilityRegion{threshold, fit.b_min, fit.gamma_star};
}

Extremes mpe_theta_extremes(const DeconvolutionModel& model, const PlausibilityRegion& region,
                            Index i, const OptimizerConfig& config) {
  if (i < 0 || i >= model.n()) throw InvalidParameter("mpe_theta_extremes: index out of range");
  const Vector den = model.likelihood_row(i);
  const Vector num = den.cwiseProduct(model.grid().points());
  const CompositeProblem problem = model.composite();
  const SublevelResult lo = optimize_ratio_on_sublevel(problem, num, den, region.threshold,
                                                       region.gamma_star, Sense::minimize, config);
  const SublevelResult hi = optimize_ratio_on_sublevel(problem, num, den, region.threshold,
                                                       region.gamma_star, Sense::maximize, config);
  Extremes e{lo.value, hi.value, lo.converged && hi.converged};
  const double at_start = model.posterior_mean(region.gamma_star, i);
  e.lower = std::min(e.lower, at_start);
  e.upper = std::max(e.upper, at_start);
  return e;
}

MpeEstimate mpe_estimate(const DeconvolutionModel& model, const OptimizerConfig& config) {
  MpeEstimate est;
  est.fit = mpe_fit(model, config);
  const PlausibilityRegion region = make_region(est.fit, est.fit.b_min + kGammaMinSlack);
  const Index n = model.n();
  Vector lower(n), upper(n);
  for (Index i = 0; i < n; ++i) {
    try {
      const Extremes e = mpe_theta_extremes(model, region, i, config);
      lower[i] = e.lower;
      upper[i] = e.upper;
    } catch (const NumericalError&) {
      lower[i] = upper[i] = model.posterior_mean(est.fit.gamma_star, i);
      ++est.failures;
    }
  }
  const auto& sample = model.sample();
  est.lower = sample.to_input_order(lower);
  est.upper = sample.to_input_order(upper);
  est.mid = (est.lower + est.upper) / 2.0;
  return est;
}

Vector mpe_point_estimate(const Grid& grid, const SortedSample& sample, const BoundarySpec& spec,
                          const OptimizerConfig& config) {
  return mpe_estimate(DeconvolutionModel(grid, sample, spec), config).mid;
}

// ---------------------------------------------------------------------------
// Intervals

EndpointIndices endpoint_indices(const Vector& pmf, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidParameter("interval: alpha must lie in (0, 1)");
  const Index K = pmf.size();
  const double half = alpha / 2.0;
  EndpointIndices e{0, K - 1};
  double cum = 0.0;
  for (Index l = 0; l < K; ++l) {
    cum += pmf[l];
    if (cum <= half) e.left = l;
    else break;
  }
  double tail = 0.0;
  for (Index r = K - 1; r >= 0; --r) {
    tail += pmf[r];
    if (tail <= half) e.right = r;
    else break;
  }
  return e;
}

std::pair<double, double> interval_endpoints_given_gamma(const Grid& grid, const Vector& gamma,
                                                         double x_i, double alpha) {
  const EndpointIndices e = endpoint_indices(posterior_pmf(grid, gamma, x_i), alpha);
  return {grid[e.left], grid[e.right]};
}

namespace {

// Largest posterior tail mass over the region exceeds alpha/2? The tail
// mass is N/D with N, D linear in gamma, so this asks whether
// max (N - alpha/2 D) > 0.
bool tail_can_exceed(const DeconvolutionModel& model, const Vector& start, double threshold,
                     Index i, Index l, bool lower, double half_alpha,
                     const OptimizerConfig& config, bool& trouble) {
  const Vector w = model.likelihood_row(i);
  Vector c = -half_alpha * w;
  if (lower) c.head(l + 1) += w.head(l + 1);
  else c.tail(model.K() - l) += w.tail(model.K() - l);
  try {
    const SublevelResult r =
        maximize_linear_on_sublevel(model.composite(), c, threshold, start, config, 0.0);
    if (!r.converged) {
      // Unknown: answer the conservative way (wider interval).
      trouble = true;
      return true;
    }
    return r.value > 0.0;
  } catch (const NumericalError&) {
    trouble = true;
    return true;
  }
}

}  // namespace

std::vector<IntervalSet> interval_ladder(const DeconvolutionModel& model, const MpeFit& fit,
                                         const std::vector<double>& thresholds, double alpha,
                                         const OptimizerConfig& config) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidParameter("intervals: alpha must lie in (0, 1)");
  const Index n = model.n(), K = model.K();
  const double half = alpha / 2.0;
  const double floor_threshold = fit.b_min + kGammaMinSlack;

  std::vector<std::size_t> order(thresholds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return thresholds[a] < thresholds[b]; });

  std::vector<IntervalSet> out(thresholds.size());
  std::vector<Vector> lower_sorted(thresholds.size(), Vector(n));
  std::vector<Vector> upper_sorted(thresholds.size(), Vector(n));
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    out[t].alpha = alpha;
    out[t].empty_region = thresholds[t] < fit.b_min;
    out[t].threshold = std::max(thresholds[t], floor_threshold);
    out[t].fallback.assign(static_cast<std::size_t>(n), false);
  }

  for (Index i = 0; i < n; ++i) {
    const EndpointIndices at_fit = endpoint_indices(model.posterior(fit.gamma_star, i), alpha);
    Index left = at_fit.left, right = at_fit.right;
    const std::size_t out_pos = static_cast<std::size_t>(i);
    for (const std::size_t t : order) {
      const double threshold = out[t].threshold;
      bool trouble = false;
      // Smallest l in [1, left + 1] whose lower mass can exceed alpha/2.
      if (left > 0) {
        Index lo = 1, hi = left + 1;
        while (lo < hi) {
          const Index mid = lo + (hi - lo) / 2;
          if (tail_can_exceed(model, fit.gamma_star, threshold, i, mid, true, half, config, trouble))
            hi = mid;
          else
            lo = mid + 1;
        }
        left = lo - 1;
      }
      // Largest r in [right - 1, K - 2] whose upper mass can exceed alpha/2.
      if (right < K - 1) {
        Index lo = right - 1, hi = K - 2;
        while (lo < hi) {
          const Index mid = lo + (hi - lo + 1) / 2;
          if (tail_can_exceed(model, fit.gamma_star, threshold, i, mid, false, half, config, trouble))
            lo = mid;
          else
            hi = mid - 1;
        }
        right = lo + 1;
      }
      lower_sorted[t][i] = model.grid()[left];
      upper_sorted[t][i] = model.grid()[right];
      out[t].fallback[out_pos] = trouble;
    }
  }

  const auto& sample = model.sample();
  for (std::size_t t = 0; t < thresholds.size(); ++t) {
    out[t].lower = sample.to_input_order(lower_sorted[t]);
    out[t].upper = sample.to_input_order(upper_sorted[t]);
    std::vector<bool> flags(static_cast<std::size_t>(n));
    for (std::size_t j = 0; j < flags.size(); ++j)
      flags[j] = out[t].fallback[static_cast<std::size_t>(sample.rank_of_input[j])];
    out[t].fallback = std::move(flags);
  }
  return out;
}

IntervalSet plausibility_intervals(const DeconvolutionModel& model, const MpeFit& fit, double pi,
                                   double alpha, const OptimizerConfig& config, RandomStream& rng,
                                   int mc_samples) {
  if (!(pi > 0.0 && pi < 1.0)) throw InvalidParameter("intervals: pi must lie in (0, 1)");
  const double threshold = boundary_quantile(model.spec(), 1.0 - pi, mc_samples, rng);
  IntervalSet set = interval_ladder(model, fit, {threshold}, alpha, config).front();
  set.pi = pi;
  return set;
}

IntervalSet plausibility_intervals(const Grid& grid, const SortedSample& sample,
                                   const BoundarySpec& spec, double pi, double alpha,
                                   const OptimizerConfig& config, RandomStream& rng) {
  const DeconvolutionModel model(grid, sample, spec);
  return plausibility_intervals(model, mpe_fit(model, config), pi, alpha, config, rng);
}

// ---------------------------------------------------------------------------
// Adaptive adjustment

namespace {

Index draw_index(const Vector& cumulative, RandomStream& rng) {
  const double u = rng.uniform() * cumulative[cumulative.size() - 1];
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min<Index>(it - cumulative.begin(), cumulative.size() - 1);
}

}  // namespace

AdaptiveResult adaptive_adjust(const DeconvolutionModel& model, double target_coverage, int m,
                               int reps, RandomStream& rng, const OptimizerConfig& config,
                               int mc_samples) {
  if (!(target_coverage > 0.0 && target_coverage < 1.0))
    throw InvalidParameter("adaptive: target coverage must lie in (0, 1)");
  if (m < 2) throw InvalidParameter("adaptive: ladder size m must be at least 2");
  if (reps < 20) throw InvalidParameter("adaptive: reps must be at least 20");

  AdaptiveResult res;
  const double root = std::sqrt(target_coverage);
  res.alpha = 1.0 - root;

  auto draws = boundary_distribution(model.spec(), mc_samples, rng);
  std::vector<double> thresholds(static_cast<std::size_t>(m));
  res.ladder.resize(static_cast<std::size_t>(m));
  for (int s = 1; s <= m; ++s) {
    auto& row = res.ladder[static_cast<std::size_t>(s - 1)];
    row.s = s;
    row.level = static_cast<double>(s) / m * root;
    row.threshold = empirical_quantile(draws, row.level);
    thresholds[static_cast<std::size_t>(s - 1)] = row.threshold;
  }

  res.estimate = mpe_estimate(model, config);
  const MpeFit& fit = res.estimate.fit;
  Vector cumulative(model.K());
  std::partial_sum(fit.gamma_star.begin(), fit.gamma_star.end(), cumulative.begin());

  const std::uint64_t master = rng.bits();
  const Index n = model.n(), K = model.K();
  std::vector<std::vector<double>> coverage(static_cast<std::size_t>(m),
                                            std::vector<double>(static_cast<std::size_t>(reps), 0.0));
  auto lengths = coverage;
  std::vector<char> failed(static_cast<std::size_t>(reps), 0);

  parallel_for(static_cast<std::size_t>(reps), [&](std::size_t r) {
    RandomStream stream = RandomStream::substream(master, r);
    Vector theta(n), x(n);
    for (Index i = 0; i < n; ++i) {
      theta[i] = model.grid()[draw_index(cumulative, stream)];
      x[i] = theta[i] + stream.normal();
    }
    try {
      SortedSample sim = SortedSample::from(x);
      Grid grid = make_grid(sim, K);
      const DeconvolutionModel sim_model(std::move(grid), std::move(sim), model.spec());
      const MpeFit sim_fit = mpe_fit(sim_model, config);
      const auto sets = interval_ladder(sim_model, sim_fit, thresholds, res.alpha, config);
      for (std::size_t s = 0; s < sets.size(); ++s) {
        int covered = 0;
        for (Index i = 0; i < n; ++i)
          covered += (sets[s].lower[i] <= theta[i] && theta[i] <= sets[s].upper[i]) ? 1 : 0;
        coverage[s][r] = static_cast<double>(covered) / static_cast<double>(n);
        lengths[s][r] = (sets[s].upper - sets[s].lower).mean();
      }
    } catch (const NumericalError&) {
      failed[r] = 1;
    }
  });

  for (char f : failed) res.failed_replicates += f;
  const int ok = reps - res.failed_replicates;
  if (ok < 1) throw OptimizerFailure("adaptive: every simulated replicate failed");
  for (std::size_t s = 0; s < res.ladder.size(); ++s) {
    std::vector<double> cov, len;
    for (std::size_t r = 0; r < static_cast<std::size_t>(reps); ++r) {
      if (failed[r]) continue;
      cov.push_back(coverage[s][r]);
      len.push_back(lengths[s][r]);
    }
    res.ladder[s].coverage = pairwise_sum(cov.data(), cov.size()) / ok;
    res.ladder[s].mean_length = pairwise_sum(len.data(), len.size()) / ok;
  }

  res.s_star = m;
  res.calibration_failed = true;
  for (const auto& row : res.ladder) {
    if (row.coverage >= target_coverage) {
      res.s_star = row.s;
      res.calibration_failed = false;
      break;
    }
  }
  const double chosen = thresholds[static_cast<std::size_t>(res.s_star - 1)];
  res.intervals = interval_ladder(model, fit, {chosen}, res.alpha, config).front();
  res.intervals.pi = 1.0 - res.ladder[static_cast<std::size_t>(res.s_star - 1)].level;
  return res;
}

Diagnostic within_experiment_diagnostic(const IntervalSet& intervals, const Vector& x,
                                        double alpha) {
  if (x.size() != intervals.size()) throw DimensionMismatch("diagnostic: interval/data size mismatch");
  Diagnostic d;
  for (Index i = 0; i < x.size(); ++i)
    if (x[i] < intervals.lower[i] || x[i] > intervals.upper[i]) ++d.count_outside;
  d.expected = static_cast<double>(x.size()) * alpha / 2.0;
  return d;
}

}  // namespace plausmeans
