#include "plausmeans/nlp_opt.hpp"

#include <algorithm>
#include <deque>
#include <cstdio>
#include <numeric>

namespace plausmeans {

void OptimizerConfig::validate() const {
  if (max_outer_iters < 1 || max_inner_iters < 1)
    throw InvalidParameter("optimizer: iteration budgets must be positive");
  if (!(feasibility_tol > 0 && objective_tol > 0 && step_tol > 0 && gradient_tol > 0 &&
        initial_penalty > 0))
    throw InvalidParameter("optimizer: tolerances and initial penalty must be positive");
  if (!(penalty_growth > 1)) throw InvalidParameter("optimizer: penalty_growth must exceed 1");
}

BoxDomain BoxDomain::unbounded(Index dim) {
  const double inf = std::numeric_limits<double>::infinity();
  return BoxDomain{Vector::Constant(dim, -inf), Vector::Constant(dim, inf)};
}

Vector project_to_simplex(const Vector& v) {
  const Index n = v.size();
  Vector sorted = v;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumsum = 0.0;
  double tau = 0.0;
  for (Index j = 0; j < n; ++j) {
    cumsum += sorted[j];
    const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (sorted[j] - t > 0.0) tau = t;
  }
  return (v.array() - tau).max(0.0).matrix();
}

Vector project_to_domain(const Domain& domain, const Vector& x) {
  if (std::holds_alternative<SimplexDomain>(domain)) return project_to_simplex(x);
  const auto& box = std::get<BoxDomain>(domain);
  return x.cwiseMax(box.lower).cwiseMin(box.upper);
}

double projected_gradient_norm(const Domain& domain, const Vector& x, const Vector& g) {
  return (project_to_domain(domain, x - g) - x).norm();
}

double domain_violation(const Domain& domain, const Vector& x) {
  if (std::holds_alternative<SimplexDomain>(domain))
    return std::max(std::abs(x.sum() - 1.0), std::max(0.0, -x.minCoeff()));
  const auto& box = std::get<BoxDomain>(domain);
  return std::max({0.0, (box.lower - x).maxCoeff(), (x - box.upper).maxCoeff()});
}

namespace {

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

Index domain_dim(const Domain& domain) {
  if (const auto* s = std::get_if<SimplexDomain>(&domain)) return s->dim;
  return std::get<BoxDomain>(domain).lower.size();
}

struct InnerOptions {
  double gradient_tol = 1e-6;
  double objective_tol = 1e-9;
  double step_tol = 1e-12;
  int max_iters = 1000;
  // Early exit once f drops to this value (used by the feasibility phase).
  std::optional<double> stop_at_or_below;
};

struct InnerResult {
  Vector x;
  Vector g;
  double f = 0.0;
  double f_start = 0.0;
  int iterations = 0;
  bool converged = false;
};

constexpr double kArmijo = 1e-4;
constexpr int kStallWindow = 20;

bool stationary(double pg, double f, const InnerOptions& opt) {
  return pg <= opt.gradient_tol * (1.0 + std::abs(f));
}

// Safeguarded quadratic backtracking.
double backtrack(double lambda, double f0, double slope, double f_trial) {
  const double denom = 2.0 * (f_trial - f0 - lambda * slope);
  double next = denom > 0.0 ? -slope * lambda * lambda / denom : 0.5 * lambda;
  return std::clamp(next, 0.1 * lambda, 0.5 * lambda);
}

// Spectral projected gradient with monotone line search.
InnerResult spg(const SmoothFunction& f, const Domain& domain, const Vector& x0,
                const InnerOptions& opt) {
  constexpr double alpha_min = 1e-12, alpha_max = 1e12;
  InnerResult r;
  r.x = project_to_domain(domain, x0);
  r.g.resize(r.x.size());
  r.f = f(r.x, &r.g);
  r.f_start = r.f;
  if (!std::isfinite(r.f)) throw NumericalError("optimizer: non-finite objective at start");

  double pg = projected_gradient_norm(domain, r.x, r.g);
  double alpha = 1.0;
  {
    const double inf_norm = (project_to_domain(domain, r.x - r.g) - r.x).lpNorm<Eigen::Infinity>();
    if (inf_norm > 0) alpha = std::clamp(1.0 / inf_norm, alpha_min, alpha_max);
  }
  std::deque<double> history{r.f};
  Vector trial, g_new(r.x.size());

  for (r.iterations = 0; r.iterations < opt.max_iters; ++r.iterations) {
    if (stationary(pg, r.f, opt)) {
      r.converged = true;
      break;
    }
    if (opt.stop_at_or_below && r.f <= *opt.stop_at_or_below) break;

    Vector d = project_to_domain(domain, r.x - alpha * r.g) - r.x;
    double slope = r.g.dot(d);
    if (slope >= 0.0) {
      // The spectral step lost descent; fall back to a unit steepest step.
      alpha = 1.0;
      d = project_to_domain(domain, r.x - r.g) - r.x;
      slope = r.g.dot(d);
      if (slope >= 0.0) {
        r.converged = true;
        break;
      }
    }

    double lambda = 1.0;
    double f_trial = 0.0;
    bool accepted = false;
    while (lambda * d.lpNorm<Eigen::Infinity>() > opt.step_tol * (1.0 + r.x.lpNorm<Eigen::Infinity>())) {
      trial = r.x + lambda * d;
      f_trial = f(trial, nullptr);
      if (std::isfinite(f_trial) && f_trial <= r.f + kArmijo * lambda * slope) {
        accepted = true;
        break;
      }
      lambda = std::isfinite(f_trial) ? backtrack(lambda, r.f, slope, f_trial) : 0.25 * lambda;
    }
    if (!accepted) break;

    f_trial = f(trial, &g_new);
    const Vector s = trial - r.x;
    const Vector y = g_new - r.g;
    const double sy = s.dot(y);
    alpha = sy > 0.0 ? std::clamp(s.squaredNorm() / sy, alpha_min, alpha_max) : alpha_max;

    r.x = std::move(trial);
    r.g = g_new;
    r.f = f_trial;
    pg = projected_gradient_norm(domain, r.x, r.g);

    history.push_back(r.f);
    if (static_cast<int>(history.size()) > kStallWindow) {
      const double old = history.front();
      history.pop_front();
      if (old - r.f <= opt.objective_tol * (1.0 + std::abs(r.f))) {
        r.converged = true;
        ++r.iterations;
        break;
      }
    }
  }
  if (!r.converged) r.converged = stationary(pg, r.f, opt);
  return r;
}

// Projected L-BFGS on a box.
InnerResult projected_lbfgs(const SmoothFunction& f, const BoxDomain& box, const Vector& x0,
                            const InnerOptions& opt) {
  constexpr int memory = 10;
  const Domain domain = box;
  InnerResult r;
  r.x = x0.cwiseMax(box.lower).cwiseMin(box.upper);
  r.g.resize(r.x.size());
  r.f = f(r.x, &r.g);
  r.f_start = r.f;
  if (!std::isfinite(r.f)) throw NumericalError("optimizer: non-finite objective at start");

  std::deque<Vector> s_hist, y_hist;
  std::deque<double> f_hist{r.f};
  double pg = projected_gradient_norm(domain, r.x, r.g);
  Vector g_new(r.x.size()), trial;

  auto free_mask = [&](const Vector& x, const Vector& g) {
    Eigen::Array<bool, Eigen::Dynamic, 1> m(x.size());
    for (Index k = 0; k < x.size(); ++k)
      m[k] = !((x[k] <= box.lower[k] && g[k] > 0) || (x[k] >= box.upper[k] && g[k] < 0));
    return m;
  };

  for (r.iterations = 0; r.iterations < opt.max_iters; ++r.iterations) {
    if (stationary(pg, r.f, opt)) {
      r.converged = true;
      break;
    }
    if (opt.stop_at_or_below && r.f <= *opt.stop_at_or_below) break;

    const auto mask = free_mask(r.x, r.g);
    Vector q = mask.select(r.g, 0.0);
    // Two-loop recursion.
    const std::size_t m = s_hist.size();
    std::vector<double> rho(m), coef(m);
    for (std::size_t j = m; j-- > 0;) {
      rho[j] = 1.0 / y_hist[j].dot(s_hist[j]);
      coef[j] = rho[j] * s_hist[j].dot(q);
      q -= coef[j] * y_hist[j];
    }
    if (m > 0) {
      q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    } else {
      const double gn = r.g.lpNorm<Eigen::Infinity>();
      if (gn > 0) q /= std::max(1.0, gn);
    }
    for (std::size_t j = 0; j < m; ++j) {
      const double beta = rho[j] * y_hist[j].dot(q);
      q += (coef[j] - beta) * s_hist[j];
    }
    Vector d = -mask.select(q, 0.0).matrix();
    if (r.g.dot(d) >= -1e-14 * r.g.norm() * d.norm()) {
      s_hist.clear();
      y_hist.clear();
      d = -mask.select(r.g, 0.0).matrix();
    }

    double lambda = 1.0;
    bool accepted = false;
    double f_trial = 0.0;
    while (lambda * d.lpNorm<Eigen::Infinity>() > opt.step_tol * (1.0 + r.x.lpNorm<Eigen::Infinity>())) {
      trial = (r.x + lambda * d).cwiseMax(box.lower).cwiseMin(box.upper);
      const double slope = r.g.dot(trial - r.x);
      f_trial = f(trial, nullptr);
      if (std::isfinite(f_trial) && slope < 0 && f_trial <= r.f + kArmijo * slope) {
        accepted = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!accepted) {
      if (!s_hist.empty()) {
        s_hist.clear();
        y_hist.clear();
        continue;
      }
      break;
    }

    f_trial = f(trial, &g_new);
    Vector s = trial - r.x;
    Vector y = g_new - r.g;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      if (static_cast<int>(s_hist.size()) > memory) {
        s_hist.pop_front();
        y_hist.pop_front();
      }
    }
    r.x = std::move(trial);
    r.g = g_new;
    r.f = f_trial;
    pg = projected_gradient_norm(domain, r.x, r.g);

    f_hist.push_back(r.f);
    if (static_cast<int>(f_hist.size()) > kStallWindow) {
      const double old = f_hist.front();
      f_hist.pop_front();
      if (old - r.f <= opt.objective_tol * (1.0 + std::abs(r.f))) {
        r.converged = true;
        ++r.iterations;
        break;
      }
    }
  }
  if (!r.converged) r.converged = stationary(pg, r.f, opt);
  return r;
}

InnerResult inner_solve(const SmoothFunction& f, const Domain& domain, const Vector& x0,
                        const InnerOptions& opt) {
  if (std::holds_alternative<SimplexDomain>(domain)) return spg(f, domain, x0, opt);
  return projected_lbfgs(f, std::get<BoxDomain>(domain), x0, opt);
}

InnerOptions inner_options(const OptimizerConfig& config) {
  InnerOptions opt;
  opt.gradient_tol = config.gradient_tol;
  opt.objective_tol = config.objective_tol;
  opt.step_tol = config.step_tol;
  opt.max_iters = config.max_inner_iters;
  return opt;
}

void check_domain(const Domain& domain, const Vector& start) {
  if (domain_dim(domain) != start.size())
    throw DimensionMismatch("optimizer: start dimension does not match domain");
  if (const auto* box = std::get_if<BoxDomain>(&domain)) {
    if (box->lower.size() != box->upper.size() || (box->lower.array() > box->upper.array()).any())
      throw InvalidParameter("optimizer: inconsistent box bounds");
  }
}

}  // namespace

OptResult minimize_on_domain(const SmoothFunction& objective, const Domain& domain,
                             const Vector& start, const OptimizerConfig& config) {
  config.validate();
  check_domain(domain, start);
  const InnerResult inner = inner_solve(objective, domain, start, inner_options(config));
  OptResult result;
  result.x_star = inner.x;
  result.f_star = inner.f;
  result.constraint_violation = domain_violation(domain, inner.x);
  result.iterations = inner.iterations;
  result.converged = inner.converged && result.constraint_violation <= config.feasibility_tol;
  result.merit_trace.emplace_back(inner.f_start, inner.f);
  return result;
}

OptResult minimize_on_simplex(const SmoothFunction& objective, Index K,
                              const OptimizerConfig& config, const std::optional<Vector>& start) {
  if (K < 1) throw InvalidParameter("minimize_on_simplex: K must be positive");
  const Vector x0 = start ? *start : Vector::Constant(K, 1.0 / static_cast<double>(K));
  return minimize_on_domain(objective, SimplexDomain{K}, x0, config);
}

OptResult optimize_with_inequality(const SmoothFunction& objective,
                                   const SmoothFunction& constraint, double threshold,
                                   const Domain& domain, const Vector& start, Sense sense,
                                   const OptimizerConfig& config,
                                   std::optional<double> good_enough) {
  config.validate();
  check_domain(domain, start);
  const double sign = sense == Sense::minimize ? 1.0 : -1.0;
  const InnerOptions base = inner_options(config);
  const Index dim = start.size();

  auto h = [&](const Vector& x) { return constraint(x, nullptr) - threshold; };

  // Feasibility phase.
  Vector feasible = project_to_domain(domain, start);
  double h_feasible = h(feasible);
  int iterations = 0;
  if (!(h_feasible <= config.feasibility_tol)) {
    InnerOptions phase = base;
    phase.stop_at_or_below = threshold;
    phase.max_iters = config.max_inner_iters * config.max_outer_iters;
    const InnerResult r = inner_solve(constraint, domain, feasible, phase);
    iterations += r.iterations;
    feasible = r.x;
    h_feasible = r.f - threshold;
    if (!(h_feasible <= config.feasibility_tol))
      throw InfeasibleStart("optimizer: no feasible point found from start (min constraint excess " +
                            format_real(h_feasible) + ")");
  }

  OptResult result;
  double lambda = 0.0;
  double rho = config.initial_penalty;
  double prev_excess = std::numeric_limits<double>::infinity();
  Vector x = feasible;
  Vector best_x = feasible;
  double best_f = sign * objective(feasible, nullptr);
  const double satisfice = good_enough ? sign * *good_enough : -std::numeric_limits<double>::infinity();
  auto finish_early = [&](const Vector& z, double fz, double hz) {
    result.x_star = z;
    result.f_star = sign * fz;
    result.constraint_violation = std::max({0.0, hz, domain_violation(domain, z)});
    result.iterations = iterations;
    result.converged = true;
    return result;
  };
  if (best_f < satisfice && h_feasible <= 0.0) return finish_early(feasible, best_f, h_feasible);

  Vector g_f(dim), g_h(dim);
  for (int outer = 0; outer < config.max_outer_iters; ++outer) {
    const double lam = lambda, pen = rho;
    SmoothFunction merit = [&, lam, pen](const Vector& z, Vector* grad) {
      const double fz = sign * objective(z, grad ? &g_f : nullptr);
      const double hz = constraint(z, grad ? &g_h : nullptr) - threshold;
      const double shifted = std::max(0.0, lam + pen * hz);
      if (grad) *grad = sign * g_f + shifted * g_h;
      return fz + (shifted * shifted - lam * lam) / (2.0 * pen);
    };
    InnerOptions opt = base;
    // Loose early, tight once the multiplier has settled.
    opt.gradient_tol = std::max(base.gradient_tol, 1e-2 * std::pow(0.1, outer));
    const InnerResult r = inner_solve(merit, domain, x, opt);
    iterations += r.iterations;
    result.merit_trace.emplace_back(r.f_start, r.f);
    x = r.x;

    const double fx = sign * objective(x, nullptr);
    const double hx = h(x);
    if (hx <= config.feasibility_tol && fx < best_f) {
      best_f = fx;
      best_x = x;
    }
    if (fx < satisfice && hx <= 0.0) return finish_early(x, fx, hx);

    const double new_lambda = std::max(0.0, lambda + rho * hx);
    const double excess = std::max(0.0, hx);
    const bool feasible_now = excess <= config.feasibility_tol;
    const bool complementary =
        std::abs(new_lambda * hx) <= config.feasibility_tol * (1.0 + std::abs(fx)) ||
        std::abs(new_lambda - lambda) <= 1e-8 * (1.0 + lambda);
    lambda = new_lambda;
    if (feasible_now && complementary && r.converged &&
        opt.gradient_tol <= base.gradient_tol) {
      result.converged = true;
      break;
    }
    if (excess > config.feasibility_tol && excess > 0.25 * prev_excess) rho *= config.penalty_growth;
    prev_excess = excess;
  }

  // Pull a slightly infeasible end point back along the segment to the known
  // feasible point; exact for convex constraints.
  double hx = h(x);
  if (hx > 0.0) {
    const Vector dir = x - feasible;
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (h(feasible + mid * dir) <= 0.0) lo = mid;
      else hi = mid;
    }
    x = project_to_domain(domain, feasible + lo * dir);
    hx = h(x);
  }
  double fx = sign * objective(x, nullptr);
  if (hx > config.feasibility_tol || (best_f < fx)) {
    x = best_x;
    fx = best_f;
    hx = h(x);
  }

  result.x_star = x;
  result.f_star = sign * fx;
  result.constraint_violation = std::max({0.0, hx, domain_violation(domain, x)});
  result.iterations = iterations;
  if (result.constraint_violation > config.feasibility_tol) result.converged = false;
  return result;
}

// ---------------------------------------------------------------------------
// Structured composite problems

namespace {

constexpr double kCompositeGapTol = 1e-12;
constexpr int kCorrectiveSteps = 50;

struct CompositeState {
  Vector u, gphi, h;
  double phi = 0.0;
};

void evaluate(const CompositeProblem& p, const Vector& x, CompositeState& st) {
  st.u.noalias() = *p.A * x;
  st.gphi.resize(st.u.size());
  st.h.resize(st.u.size());
  st.phi = p.phi(st.u, &st.gphi, &st.h);
  if (!std::isfinite(st.phi)) throw NumericalError("composite: non-finite objective");
}

void check_problem(const CompositeProblem& p, const Vector& start) {
  if (!p.A || !p.phi) throw InvalidParameter("composite: problem is incomplete");
  if (start.size() != p.A->cols())
    throw DimensionMismatch("composite: start dimension does not match the matrix");
}

// Newton target on the support: minimizes the quadratic model over the
// affine hull of the support, dropping coordinates that would go negative.
Vector corrective_target(const Vector& xs, const Vector& gs, const Matrix& H) {
  const Index m = xs.size();
  std::vector<bool> dropped(static_cast<std::size_t>(m), false);
  Vector y = xs;
  for (;;) {
    std::vector<Index> free;
    for (Index j = 0; j < m; ++j)
      if (!dropped[static_cast<std::size_t>(j)]) free.push_back(j);
    const Index mf = static_cast<Index>(free.size());
    Vector delta(m);
    double s0 = 0.0;
    for (Index j = 0; j < m; ++j)
      if (dropped[static_cast<std::size_t>(j)]) {
        delta[j] = -xs[j];
        s0 += xs[j];
      }
    if (mf == 1) {
      delta[free[0]] = s0;
    } else {
      Matrix Hf(mf, mf);
      Vector r(mf);
      for (Index a = 0; a < mf; ++a) {
        r[a] = gs[free[a]];
        for (Index j = 0; j < m; ++j)
          if (dropped[static_cast<std::size_t>(j)]) r[a] += H(free[a], j) * delta[j];
        for (Index b = 0; b < mf; ++b) Hf(a, b) = H(free[a], free[b]);
      }
      const double ridge = 1e-12 * std::max(Hf.diagonal().cwiseAbs().maxCoeff(), 1e-300);
      Hf.diagonal().array() += ridge;
      const Eigen::LDLT<Matrix> ldlt(Hf);
      const Vector hr = ldlt.solve(r);
      const Vector h1 = ldlt.solve(Vector::Ones(mf));
      const double nu = -(s0 + hr.sum()) / h1.sum();
      const Vector df = -hr - nu * h1;
      for (Index a = 0; a < mf; ++a) delta[free[a]] = df[a];
    }
    const Vector z = xs + delta;
    bool ok = true;
    for (Index a = 0; a < mf; ++a) ok = ok && z[free[a]] >= 0.0;
    if (ok) {
      Vector out = z;
      for (Index j = 0; j < m; ++j)
        if (dropped[static_cast<std::size_t>(j)]) out[j] = 0.0;
      return out;
    }
    // Walk from y toward z until the first free coordinate hits zero.
    double t = 1.0;
    Index hit = -1;
    for (Index a = 0; a < mf; ++a) {
      const Index j = free[a];
      if (z[j] < 0.0) {
        const double tj = y[j] / (y[j] - z[j]);
        if (tj < t) {
          t = tj;
          hit = j;
        }
      }
    }
    y += t * (z - y);
    for (Index a = 0; a < mf; ++a)
      if (z[free[a]] < 0.0 && y[free[a]] <= 0.0) dropped[static_cast<std::size_t>(free[a])] = true;
    if (hit >= 0) dropped[static_cast<std::size_t>(hit)] = true;
    for (Index j = 0; j < m; ++j)
      if (dropped[static_cast<std::size_t>(j)]) y[j] = 0.0;
  }
}

// Carathéodory reduction: moves x along directions with A d = 0 and
// sum d = 0 until the support has at most rows(A) + 1 points. A x is
// unchanged and linear . x does not increase.
void reduce_support(const Matrix& A, const Vector& linear, Vector& x) {
  const Index n = A.rows();
  const bool has_lin = linear.size() > 0;
  for (;;) {
    std::vector<Index> support;
    for (Index k = 0; k < x.size() && static_cast<Index>(support.size()) < n + 2; ++k)
      if (x[k] > 0.0) support.push_back(k);
    if (static_cast<Index>(support.size()) <= n + 1) return;
    Matrix M(n + 1, n + 2);
    for (Index j = 0; j < n + 2; ++j) {
      M.col(j).head(n) = A.col(support[j]);
      M(n, j) = 1.0;
    }
    const Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
    Vector d = svd.matrixV().col(n + 1);
    if (has_lin) {
      double slope = 0.0;
      for (Index j = 0; j < n + 2; ++j) slope += linear[support[j]] * d[j];
      if (slope > 0.0) d = -d;
    }
    double step = std::numeric_limits<double>::infinity();
    Index hit = -1;
    for (Index j = 0; j < n + 2; ++j)
      if (d[j] < 0.0 && x[support[j]] / -d[j] < step) {
        step = x[support[j]] / -d[j];
        hit = j;
      }
    if (hit < 0) return;
    for (Index j = 0; j < n + 2; ++j) x[support[j]] = std::max(0.0, x[support[j]] + step * d[j]);
    x[support[hit]] = 0.0;
  }
}

}  // namespace

CompositeResult minimize_composite_on_simplex(const CompositeProblem& problem, const Vector& linear,
                                              const Vector& start, const OptimizerConfig& config) {
  config.validate();
  check_problem(problem, start);
  const Matrix& A = *problem.A;
  const Index K = A.cols();
  const bool has_lin = linear.size() > 0;
  if (has_lin && linear.size() != K) throw DimensionMismatch("composite: linear term size mismatch");
  auto lin_dot = [&](const Vector& v) { return has_lin ? linear.dot(v) : 0.0; };

  CompositeResult r;
  r.x = project_to_simplex(start);
  reduce_support(A, linear, r.x);
  CompositeState st;
  evaluate(problem, r.x, st);
  Vector g(K);
  int stalls = 0;

  for (r.iterations = 0; r.iterations < config.max_inner_iters; ++r.iterations) {
    g.noalias() = A.transpose() * st.gphi;
    if (has_lin) g += linear;
    const double f = st.phi + lin_dot(r.x);
    Index kmin = 0;
    g.minCoeff(&kmin);
    r.gap = std::max(0.0, g.dot(r.x) - g[kmin]);
    r.f = f;
    r.phi = st.phi;
    if (r.gap <= kCompositeGapTol * (1.0 + std::abs(f))) {
      r.converged = true;
      break;
    }

    // Frank-Wolfe step toward the best vertex.
    {
      const Vector du = A.col(kmin) - st.u;
      const double curvature = (st.h.array() * du.array().square()).sum();
      const double lin_x = lin_dot(r.x);
      const double lin_step = has_lin ? linear[kmin] - lin_x : 0.0;
      double lambda = curvature > 0.0 ? std::min(1.0, r.gap / curvature) : 1.0;
      while (lambda > 1e-16) {
        const Vector ut = st.u + lambda * du;
        const double ft = problem.phi(ut, nullptr, nullptr) + lin_x + lambda * lin_step;
        if (std::isfinite(ft) && ft <= f - kArmijo * lambda * r.gap) break;
        lambda *= 0.5;
      }
      if (lambda > 1e-16) {
        r.x *= 1.0 - lambda;
        r.x[kmin] += lambda;
        reduce_support(A, linear, r.x);
        r.x /= r.x.sum();
        evaluate(problem, r.x, st);
      }
    }

    // Projected Newton on the support.
    for (int c = 0; c < kCorrectiveSteps; ++c) {
      std::vector<Index> support;
      for (Index k = 0; k < K; ++k)
        if (r.x[k] > 0.0) support.push_back(k);
      const Index m = static_cast<Index>(support.size());
      if (m < 2) break;
      Matrix As(A.rows(), m);
      Vector xs(m), gs(m);
      for (Index j = 0; j < m; ++j) {
        As.col(j) = A.col(support[j]);
        xs[j] = r.x[support[j]];
        gs[j] = A.col(support[j]).dot(st.gphi) + (has_lin ? linear[support[j]] : 0.0);
      }
      const Matrix H = As.transpose() * st.h.asDiagonal() * As;
      const Vector target = corrective_target(xs, gs, H);
      const Vector d = target - xs;
      const double slope = gs.dot(d);
      const double fc = st.phi + lin_dot(r.x);
      if (!(slope < -1e-15 * (1.0 + std::abs(fc)))) break;
      const Vector ad = As * d;
      const double lin_d = has_lin ? [&] {
        double acc = 0.0;
        for (Index j = 0; j < m; ++j) acc += linear[support[j]] * d[j];
        return acc;
      }() : 0.0;
      const double lin_x = lin_dot(r.x);
      double t = 1.0;
      bool accepted = false;
      while (t > 1e-12) {
        const double ft = problem.phi(st.u + t * ad, nullptr, nullptr) + lin_x + t * lin_d;
        if (std::isfinite(ft) && ft <= fc + kArmijo * t * slope) {
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (!accepted) break;
      for (Index j = 0; j < m; ++j)
        r.x[support[j]] = t == 1.0 ? target[j] : std::max(0.0, xs[j] + t * d[j]);
      r.x /= r.x.sum();
      evaluate(problem, r.x, st);
    }

    const double f_new = st.phi + lin_dot(r.x);
    stalls = f_new >= f - 1e-16 * std::abs(f) ? stalls + 1 : 0;
    if (stalls >= 3) {
      // No representable decrease left; a small remaining gap then sits in
      // directions of very high curvature.
      r.converged = r.gap <= 1e-6 * (1.0 + std::abs(f));
      break;
    }
  }
  g.noalias() = A.transpose() * st.gphi;
  if (has_lin) g += linear;
  r.phi = st.phi;
  r.f = st.phi + lin_dot(r.x);
  r.gap = std::max(0.0, g.dot(r.x) - g.minCoeff());
  if (!r.converged) r.converged = r.gap <= 1e-9 * (1.0 + std::abs(r.f));
  return r;
}

namespace {

SublevelResult sublevel_search(const CompositeProblem& problem, const Vector& c, double threshold,
                               const Vector& feasible_start, const OptimizerConfig& config,
                               std::optional<double> decide_at, std::optional<double> t_hint,
                               double* t_hint_out) {
  config.validate();
  check_problem(problem, feasible_start);
  const Matrix& A = *problem.A;
  const Index K = A.cols();
  if (c.size() != K) throw DimensionMismatch("sublevel: objective size mismatch");
  auto phi_at = [&](const Vector& u) { return problem.phi(u, nullptr, nullptr); };

  SublevelResult r;
  Vector x_lo = domain_violation(SimplexDomain{K}, feasible_start) <= 1e-12
                     ? feasible_start
                     : project_to_simplex(feasible_start);
  Vector u_lo = A * x_lo;
  const double phi0 = phi_at(u_lo);
  if (!(phi0 <= threshold + config.feasibility_tol))
    throw InfeasibleStart("sublevel: start lies outside the set (excess " +
                          format_real(phi0 - threshold) + ")");
  r.x = x_lo;
  r.value = c.dot(x_lo);
  Index kmax = 0;
  r.upper_bound = c.maxCoeff(&kmax);
  Vector x_hi = Vector::Zero(K);
  x_hi[kmax] = 1.0;
  Vector u_hi = A.col(kmax);
  if (phi_at(u_hi) <= threshold) {
    r.x = x_hi;
    r.value = r.upper_bound;
    r.converged = true;
    return r;
  }

  // Largest feasible point on the segment between a feasible and an
  // infeasible solution; phi is convex along it.
  auto segment = [&]() {
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (phi_at((1.0 - mid) * u_lo + mid * u_hi) <= threshold) lo = mid;
      else hi = mid;
    }
    const Vector xs = (1.0 - lo) * x_lo + lo * x_hi;
    const double v = c.dot(xs);
    if (v > r.value) {
      r.value = v;
      r.x = xs;
    }
  };
  const double tol = 1e-10 * (1.0 + c.cwiseAbs().maxCoeff());
  auto settled = [&]() {
    if (decide_at) return r.value > *decide_at || r.upper_bound <= *decide_at;
    return r.upper_bound - r.value <= tol;
  };
  segment();
  if (settled()) {
    r.converged = true;
    return r;
  }

  // Root search for phi(x(t)) = threshold in s = log t, x(t) minimizing
  // phi(A x) - t c . x. Illinois false position once bracketed.
  double s_lo = -std::numeric_limits<double>::infinity(), s_hi = std::numeric_limits<double>::infinity();
  double h_lo = 0.0, h_hi = 0.0;
  int side = 0;
  double s_cur = t_hint ? std::log(*t_hint) : 0.0;
  Vector warm = r.x;
  constexpr int kMaxSolves = 200;
  for (; r.solves < kMaxSolves; ++r.solves) {
    const double t = std::exp(s_cur);
    const CompositeResult sol = minimize_composite_on_simplex(problem, -t * c, warm, config);
    const double v = c.dot(sol.x);
    r.upper_bound = std::min(r.upper_bound, v + (threshold - sol.phi + sol.gap) / t);
    const double h = sol.phi - threshold;
    if (h <= 0.0) {
      s_lo = s_cur;
      h_lo = h;
      x_lo = sol.x;
      u_lo = A * x_lo;
      if (v > r.value) {
        r.value = v;
        r.x = sol.x;
      }
      if (side == -1) h_hi *= 0.5;
      side = -1;
    } else {
      s_hi = s_cur;
      h_hi = h;
      x_hi = sol.x;
      u_hi = A * x_hi;
      if (side == 1) h_lo *= 0.5;
      side = 1;
    }
    segment();
    warm = sol.x;
    if (settled()) {
      r.converged = true;
      ++r.solves;
      break;
    }
    if (std::isinf(s_hi)) {
      s_cur += std::log(100.0);
    } else if (std::isinf(s_lo)) {
      s_cur -= std::log(100.0);
    } else {
      const double width = s_hi - s_lo;
      double next = h_hi - h_lo > 0.0 ? s_hi - h_hi * width / (h_hi - h_lo) : 0.5 * (s_lo + s_hi);
      // Keep clear of the bracket ends.
      next = std::clamp(next, s_lo + 1e-3 * width, s_hi - 1e-3 * width);
      s_cur = next;
    }
    if (std::abs(s_cur) > 70.0 || s_hi - s_lo < 1e-13) {
      ++r.solves;
      break;
    }
  }
  if (!std::isinf(s_lo) && t_hint_out) *t_hint_out = std::exp(s_lo);
  if (!r.converged) r.converged = settled() || r.upper_bound - r.value <= 1e-7 * (1.0 + std::abs(r.value));
  return r;
}

}  // namespace

SublevelResult maximize_linear_on_sublevel(const CompositeProblem& problem, const Vector& c,
                                           double threshold, const Vector& feasible_start,
                                           const OptimizerConfig& config,
                                           std::optional<double> decide_at) {
  return sublevel_search(problem, c, threshold, feasible_start, config, decide_at, std::nullopt,
                         nullptr);
}

SublevelResult optimize_ratio_on_sublevel(const CompositeProblem& problem, const Vector& num,
                                          const Vector& den, double threshold,
                                          const Vector& feasible_start, Sense sense,
                                          const OptimizerConfig& config) {
  if (num.size() != den.size()) throw DimensionMismatch("ratio: numerator/denominator size mismatch");
  const double sign = sense == Sense::maximize ? 1.0 : -1.0;
  const Vector signed_num = sign * num;
  SublevelResult out;
  out.x = project_to_simplex(feasible_start);
  double q = signed_num.dot(out.x) / den.dot(out.x);
  if (!std::isfinite(q)) throw NumericalError("ratio: non-finite value at start");
  const double num_scale = num.cwiseAbs().maxCoeff();
  std::optional<double> hint;
  for (int it = 0; it < 50; ++it) {
    const Vector c = signed_num - q * den;
    double next_hint = 0.0;
    const SublevelResult r =
        sublevel_search(problem, c, threshold, out.x, config, std::nullopt, hint, &next_hint);
    if (next_hint > 0.0) hint = next_hint;
    out.solves += r.solves;
    const double q_new = signed_num.dot(r.x) / den.dot(r.x);
    const bool improved = q_new > q;
    if (improved) {
      q = q_new;
      out.x = r.x;
    }
    // Matches the scale of the inner search tolerance, which depends on c.
    const double tol = 2e-10 * (1.0 + std::max(num_scale, c.cwiseAbs().maxCoeff()));
    if (r.upper_bound <= tol) {
      out.converged = r.converged;
      break;
    }
    if (!improved) break;
  }
  out.value = sign * q;
  out.upper_bound = out.value;
  return out;
}

}  // namespace plausmeans
