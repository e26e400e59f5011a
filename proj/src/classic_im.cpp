#include "plausmeans/classic_im.hpp"

#include <algorithm>
#include <numeric>

namespace plausmeans {

ThetaCollection::ThetaCollection(Vector values) : theta_(std::move(values)) {
  if (theta_.size() < 1) throw InvalidParameter("theta collection: empty");
  if (!theta_.allFinite()) throw InvalidParameter("theta collection: non-finite value");
  std::sort(theta_.begin(), theta_.end());
}

double marginal_cdf(const ThetaCollection& theta, double x) {
  double F = 0.0;
  for (Index k = 0; k < theta.size(); ++k) F += normal_cdf(x - theta[k]);
  return F / static_cast<double>(theta.size());
}

double classic_association(const Vector& theta, const SortedSample& sample,
                           const BoundarySpec& spec, Vector* grad) {
  const Index n = sample.size();
  if (theta.size() != n || spec.n() != n)
    throw DimensionMismatch("classic association: theta, sample and spec sizes differ");
  const double inv_n = 1.0 / static_cast<double>(n);
  Vector u(n);
  for (Index i = 0; i < n; ++i) {
    double F = 0.0;
    for (Index k = 0; k < n; ++k) F += normal_cdf(sample.x_sorted[i] - theta[k]);
    u[i] = F * inv_n;
  }
  if (grad) {
    const Vector gu = boundary_gradient(spec, u);
    grad->setZero(n);
    for (Index k = 0; k < n; ++k) {
      double acc = 0.0;
      for (Index i = 0; i < n; ++i) acc += gu[i] * normal_pdf(sample.x_sorted[i] - theta[k]);
      (*grad)[k] = -acc * inv_n;
    }
  }
  return boundary(spec, u);
}

double classic_association_value(const ThetaCollection& theta, const SortedSample& sample,
                                 const BoundarySpec& spec) {
  return classic_association(theta.sorted(), sample, spec);
}

namespace {

constexpr double kMinGap = 1e-10;

Vector to_theta(const Vector& p) {
  Vector theta(p.size());
  theta[0] = p[0];
  for (Index k = 1; k < p.size(); ++k) theta[k] = theta[k - 1] + std::exp(p[k]);
  return theta;
}

Vector to_params(const Vector& theta_sorted) {
  Vector p(theta_sorted.size());
  p[0] = theta_sorted[0];
  for (Index k = 1; k < p.size(); ++k)
    p[k] = std::log(std::max(theta_sorted[k] - theta_sorted[k - 1], kMinGap));
  return p;
}

}  // namespace

ClassicFit classic_mpe_fit(const SortedSample& sample, const BoundarySpec& spec,
                           const OptimizerConfig& config) {
  config.validate();
  const Index n = sample.size();
  if (spec.n() != n) throw DimensionMismatch("classic fit: spec and sample sizes differ");

  const SmoothFunction objective = [&](const Vector& p, Vector* grad) {
    const Vector theta = to_theta(p);
    if (!grad) return classic_association(theta, sample, spec);
    Vector g_theta;
    const double value = classic_association(theta, sample, spec, &g_theta);
    grad->resize(n);
    double tail = 0.0;
    for (Index k = n - 1; k >= 1; --k) {
      tail += g_theta[k];
      (*grad)[k] = std::exp(p[k]) * tail;
    }
    (*grad)[0] = tail + g_theta[0];
    return value;
  };

  const Vector start = to_params(sample.x_sorted);
  const double b_start = objective(start, nullptr);
  const OptResult r = minimize_on_domain(objective, BoxDomain::unbounded(n), start, config);

  Vector theta = to_theta(r.x_star);
  double value = r.f_star;
  if (!(value <= b_start)) {
    theta = to_theta(start);
    value = b_start;
  }
  ClassicFit fit{ThetaCollection(theta), value, b_start, value, r.converged};
  return fit;
}

Vector partial_conditional_estimate(const ThetaCollection& theta, const Vector& x) {
  const Index m = theta.size();
  Vector est(x.size());
  Vector logw(m);
  for (Index i = 0; i < x.size(); ++i) {
    for (Index k = 0; k < m; ++k) logw[k] = normal_log_pdf(x[i] - theta[k]);
    const double peak = logw.maxCoeff();
    const Vector w = (logw.array() - peak).exp().matrix();
    est[i] = w.dot(theta.sorted()) / w.sum();
  }
  return est;
}

namespace {

struct PermutationAccumulator {
  const Matrix& logphi;  // logphi(j, k) = log phi(x_j - theta_k)
  const Vector& theta;
  Index n;
  std::vector<Index> assignment;
  std::vector<bool> used;
  double log_scale = -std::numeric_limits<double>::infinity();
  double total = 0.0;
  Vector weighted;  // sum over permutations of w * theta_{tau_j}

  void visit(Index j, double logw) {
    if (j == n) {
      if (logw > log_scale) {
        const double shrink = std::exp(log_scale - logw);
        total *= shrink;
        weighted *= shrink;
        log_scale = logw;
      }
      const double w = std::exp(logw - log_scale);
      total += w;
      for (Index q = 0; q < n; ++q) weighted[q] += w * theta[assignment[static_cast<std::size_t>(q)]];
      return;
    }
    for (Index k = 0; k < n; ++k) {
      if (used[static_cast<std::size_t>(k)]) continue;
      used[static_cast<std::size_t>(k)] = true;
      assignment[static_cast<std::size_t>(j)] = k;
      visit(j + 1, logw + logphi(j, k));
      used[static_cast<std::size_t>(k)] = false;
    }
  }
};

}  // namespace

Vector full_conditional_estimate(const ThetaCollection& theta, const Vector& x) {
  const Index n = x.size();
  if (theta.size() != n) throw DimensionMismatch("full conditional: theta and x sizes differ");
  if (n > kFullConditionalMaxN)
    throw InvalidParameter("full conditional: exact enumeration limited to n <= " +
                           std::to_string(kFullConditionalMaxN));
  Matrix logphi(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index k = 0; k < n; ++k) logphi(j, k) = normal_log_pdf(x[j] - theta[k]);

  PermutationAccumulator acc{logphi, theta.sorted(), n, std::vector<Index>(static_cast<std::size_t>(n)),
                             std::vector<bool>(static_cast<std::size_t>(n), false),
                             -std::numeric_limits<double>::infinity(), 0.0, Vector::Zero(n)};
  acc.visit(0, 0.0);
  return acc.weighted / acc.total;
}

double assertion_specific_plausibility(const ThetaCollection& theta_assert,
                                       const SortedSample& sample, const BoundarySpec& spec,
                                       int reps, RandomStream& rng) {
  if (reps < 100) throw InvalidParameter("assertion plausibility: reps must be at least 100");
  const Index n = sample.size();
  if (theta_assert.size() != n) throw DimensionMismatch("assertion plausibility: size mismatch");
  const double observed = classic_association_value(theta_assert, sample, spec);
  int at_least = 0;
  Vector x(n);
  for (int r = 0; r < reps; ++r) {
    for (Index i = 0; i < n; ++i) x[i] = theta_assert[i] + rng.normal();
    const double simulated = classic_association_value(theta_assert, SortedSample::from(x), spec);
    if (simulated >= observed) ++at_least;
  }
  return static_cast<double>(at_least) / static_cast<double>(reps);
}

Vector classic_point_estimate(const Vector& x, const BoundarySpec& spec,
                              const OptimizerConfig& config) {
  const SortedSample sample = SortedSample::from(x);
  const ClassicFit fit = classic_mpe_fit(sample, spec, config);
  return partial_conditional_estimate(fit.theta_hat, x);
}

}  // namespace plausmeans
